"""Three-view text graph tensors and tensor GCN training."""

from .corpus import (
    Corpus,
    DepAnnotations,
    Document,
    EmbeddingAnnotations,
    NodeIndex,
    Vocabulary,
    build_vocab,
    load_corpus,
    load_dep_annotations,
    load_embedding_annotations,
    make_masks,
    make_node_index,
    save_corpus,
    tokenize,
)
from .errors import InputError, TrainingError
from .graphs import (
    GRAPH_NAMES,
    EdgeList,
    NormalizedTensor,
    TextGraphTensor,
    assemble_tensor,
    normalize,
    pmi_edges,
    semantic_edges,
    semantic_relation,
    syntactic_edges,
    tfidf_edges,
)
from .model import (
    ModelParams,
    forward,
    gradcheck_model,
    init_params,
    initial_features,
    inter_propagate,
    intra_propagate,
    load_checkpoint,
    merge_edges,
    save_checkpoint,
)
from .training import Adam, EarlyStopper, TrainConfig, TrainReport, evaluate, train

__version__ = "0.1.0"
