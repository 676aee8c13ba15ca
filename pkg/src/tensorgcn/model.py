"""Two-stage graph tensor convolution model.

Each layer first propagates within every graph (per-graph weights), then
mixes the per-node feature copies across graphs through a constant
complete virtual-graph adjacency with zero diagonal (shared weights),
before a final mean pooling over graphs. Comparison modes: single-graph
convolution, intra-only, and a merged-graph baseline with trainable
per-edge attention.

Initial node features are one-hot (identity), so the first layer never
materializes them: dropout acts on rows of the first weight matrix and the
product reduces to propagation applied to the weights directly.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .autodiff import Node, Tape
from .errors import InputError
from .graphs import TextGraphTensor, normalize
from .linalg import csr_from_coo

MODES = ("tensor", "intra_only", "merge", "single")


@dataclass
class ModelParams:
    """Trainable matrices: per-layer-per-graph intra weights, per-layer
    shared inter weights, and (merge mode) per-edge attention vectors."""

    mode: str
    dims: tuple[int, ...]
    graph_names: tuple[str, ...]
    intra: list[list[np.ndarray]]
    inter: list[np.ndarray]
    attention: dict[str, np.ndarray]

    def named(self) -> dict[str, np.ndarray]:
        out = {}
        for layer, per_graph in enumerate(self.intra):
            for name, w in zip(self._intra_names(), per_graph):
                out[f"intra.{layer}.{name}"] = w
        for layer, w in enumerate(self.inter):
            out[f"inter.{layer}"] = w
        for name, vec in self.attention.items():
            out[f"attention.{name}"] = vec
        return out

    def _intra_names(self):
        return ("merged",) if self.mode == "merge" else self.graph_names

    def copy(self) -> "ModelParams":
        return ModelParams(
            mode=self.mode,
            dims=self.dims,
            graph_names=self.graph_names,
            intra=[[w.copy() for w in layer] for layer in self.intra],
            inter=[w.copy() for w in self.inter],
            attention={k: v.copy() for k, v in self.attention.items()},
        )

    @property
    def n_classes(self) -> int:
        return self.dims[-1]


def glorot(rng: np.random.Generator, d_in: int, d_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (d_in + d_out))
    return rng.uniform(-limit, limit, size=(d_in, d_out))


def init_params(
    mode: str,
    n_nodes: int,
    hidden_dim: int,
    n_classes: int,
    graph_names,
    rng: np.random.Generator,
    tensor: TextGraphTensor | None = None,
) -> ModelParams:
    """Seeded Glorot-uniform weights; merge attention starts at 1/r per edge."""
    if mode not in MODES:
        raise InputError(f"unknown mode {mode!r} (expected one of {MODES})")
    names = tuple(graph_names)
    dims = (n_nodes, hidden_dim, n_classes)
    r = 1 if mode == "merge" else len(names)
    if mode == "single" and len(names) != 1:
        raise InputError("single mode takes exactly one graph")
    intra = [
        [glorot(rng, dims[layer], dims[layer + 1]) for _ in range(r)]
        for layer in range(len(dims) - 1)
    ]
    inter = []
    if mode == "tensor" and len(names) >= 2:
        inter = [glorot(rng, dims[layer + 1], dims[layer + 1]) for layer in range(len(dims) - 1)]
    attention = {}
    if mode == "merge":
        if tensor is None:
            raise InputError("merge mode needs the raw graph tensor to size attention")
        for name, A in zip(tensor.names, tensor.graphs):
            n_canonical = int((A.tocoo().row < A.tocoo().col).sum())
            attention[name] = np.full(n_canonical, 1.0 / tensor.r)
    return ModelParams(
        mode=mode, dims=dims, graph_names=names, intra=intra, inter=inter, attention=attention
    )


def initial_features(node_index, r: int) -> np.ndarray:
    """Layer-0 feature tensor: r identical one-hot identity slices."""
    n = node_index.n
    return np.broadcast_to(np.eye(n), (r, n, n)).copy()


# -- merge-edges structures ---------------------------------------------------


@dataclass
class MergeStructure:
    """Fixed sparsity data for the attention-merged graph.

    ``per_graph`` maps graph name -> (canonical edge weights, positions of
    those edges in the union). ``nnz_slot`` maps every stored nonzero of the
    self-loop-augmented matrix to a union edge id, with the last slot
    reserved for the constant 1.0 self-loop value.
    """

    n: int
    names: tuple[str, ...]
    union_edges: np.ndarray  # (M, 2) canonical (u, v), u < v
    per_graph: dict[str, tuple[np.ndarray, np.ndarray]]
    indptr: np.ndarray
    indices: np.ndarray
    nnz_rows: np.ndarray
    nnz_slot: np.ndarray

    @property
    def n_union(self) -> int:
        return len(self.union_edges)


def build_merge_structure(tensor: TextGraphTensor) -> MergeStructure:
    n = tensor.node_index.n
    canon: dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
    union_keys: dict[tuple[int, int], int] = {}
    for name, A in zip(tensor.names, tensor.graphs):
        coo = A.tocoo()
        keep = coo.row < coo.col
        rows, cols, vals = coo.row[keep], coo.col[keep], coo.data[keep]
        order = np.lexsort((cols, rows))
        canon[name] = (rows[order], cols[order], vals[order])
        for u, v in zip(rows[order], cols[order]):
            union_keys.setdefault((int(u), int(v)), len(union_keys))
    union_edges = np.array(sorted(union_keys), dtype=np.int64)
    union_pos = {tuple(edge): k for k, edge in enumerate(union_edges)}
    per_graph = {}
    for name, (rows, cols, vals) in canon.items():
        positions = np.array([union_pos[(int(u), int(v))] for u, v in zip(rows, cols)], dtype=np.int64)
        per_graph[name] = (vals.astype(np.float64), positions)
    M = len(union_edges)
    dir_rows = np.concatenate([union_edges[:, 0], union_edges[:, 1], np.arange(n)])
    dir_cols = np.concatenate([union_edges[:, 1], union_edges[:, 0], np.arange(n)])
    dir_slot = np.concatenate([np.arange(M), np.arange(M), np.full(n, M)])
    order = np.lexsort((dir_cols, dir_rows))
    rows_sorted = dir_rows[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, rows_sorted + 1, 1)
    indptr = np.cumsum(indptr)
    return MergeStructure(
        n=n,
        names=tensor.names,
        union_edges=union_edges,
        per_graph=per_graph,
        indptr=indptr,
        indices=dir_cols[order],
        nnz_rows=rows_sorted,
        nnz_slot=dir_slot[order],
    )


def merge_edges(tensor: TextGraphTensor, attention: dict[str, np.ndarray]) -> sp.csr_matrix:
    """Collapse the tensor into one adjacency: per-edge attention times each
    graph's weight, summed over the graphs that hold the edge.

    Attention is tied across the two directions of an edge, so the result
    is symmetric by construction. Normalization is a separate step.
    """
    structure = build_merge_structure(tensor)
    vals = np.zeros(structure.n_union, dtype=np.float64)
    for name in tensor.names:
        base, positions = structure.per_graph[name]
        att = attention[name]
        if att.shape != base.shape:
            raise InputError(f"attention for {name!r} has wrong length")
        np.add.at(vals, positions, att * base)
    rows = np.concatenate([structure.union_edges[:, 0], structure.union_edges[:, 1]])
    cols = np.concatenate([structure.union_edges[:, 1], structure.union_edges[:, 0]])
    data = np.concatenate([vals, vals])
    return csr_from_coo(rows, cols, data, (structure.n, structure.n))


def _merged_normalized_values(tape: Tape, structure: MergeStructure, att_nodes: dict[str, Node]) -> Node:
    """Differentiable values of D^{-1/2}(A_merge + I)D^{-1/2} on the fixed pattern."""
    union_vals = None
    for name in structure.names:
        base, positions = structure.per_graph[name]
        contrib = tape.mul_const(att_nodes[name], base)
        scattered = tape.scatter_add(contrib, positions, structure.n_union)
        union_vals = scattered if union_vals is None else tape.add(union_vals, scattered)
    padded = tape.append_one(union_vals)
    tilde_vals = tape.gather(padded, structure.nnz_slot)
    degrees = tape.scatter_add(tilde_vals, structure.nnz_rows, structure.n)
    # free attention weights can push a merged degree non-positive mid-training;
    # the floor keeps the inverse square root finite (zero gradient when bound)
    degrees = tape.clamp_min(degrees, 1e-8)
    inv_sqrt = tape.power(degrees, -0.5)
    return tape.mul(
        tape.mul(tape.gather(inv_sqrt, structure.nnz_rows), tilde_vals),
        tape.gather(inv_sqrt, structure.indices),
    )


# -- forward ------------------------------------------------------------------


def intra_propagate(tape, propagators, slices, weights, *, dropout=0.0, rng=None, final=False):
    """One within-graph propagation step per slice: dropout, propagate the
    features times the graph-specific weight, relu unless final.

    A ``None`` slice stands for one-hot identity features: dropout then
    acts row-wise on the weight matrix and the product collapses to the
    propagated weights themselves.
    """
    out = []
    for propagate, h, weight in zip(propagators, slices, weights):
        if h is None:
            z = tape.dropout(weight, dropout, rng, rowwise=True) if dropout > 0 else weight
            y = propagate(z)
        else:
            hd = tape.dropout(h, dropout, rng) if dropout > 0 else h
            y = propagate(tape.matmul(hd, weight))
        out.append(y if final else tape.relu(y))
    return out


def inter_propagate(tape, intra_out, w_inter, *, final=False):
    """Mix each node's per-graph copies: every slice receives the sum of all
    other slices (complete mixing pattern, zero diagonal, unnormalized),
    transformed by the shared weight; relu unless final.

    With one slice there is nothing to mix and the input passes through.
    """
    if len(intra_out) < 2:
        return list(intra_out)
    total = tape.sum_stack(intra_out)
    mixed = []
    for h in intra_out:
        y = tape.matmul(tape.sub(total, h), w_inter)
        mixed.append(y if final else tape.relu(y))
    return mixed


def forward(
    tape: Tape,
    params: ModelParams,
    *,
    hat_graphs: list[sp.csr_matrix] | None = None,
    merge_structure: MergeStructure | None = None,
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
    trace: list | None = None,
) -> Node:
    """Record the full forward pass and return the logits node (n x classes).

    ``trace``, when given, receives the per-layer list of slice nodes for
    inspection in tests.
    """
    if dropout > 0.0 and rng is None:
        raise InputError("dropout requires a generator")
    pnodes = {name: tape.param(w, name) for name, w in params.named().items()}
    n_layers = len(params.dims) - 1
    if params.mode == "merge":
        if merge_structure is None:
            raise InputError("merge mode requires a merge structure")
        att = {name: pnodes[f"attention.{name}"] for name in params.graph_names}
        hat_vals = _merged_normalized_values(tape, merge_structure, att)

        def spmm_hat(x):
            return tape.spmm_pattern(
                merge_structure.indptr,
                merge_structure.indices,
                merge_structure.nnz_rows,
                (merge_structure.n, merge_structure.n),
                hat_vals,
                x,
            )

        propagators = [spmm_hat]
    else:
        if hat_graphs is None:
            raise InputError("this mode requires normalized graphs")
        propagators = [
            (lambda A: (lambda x: tape.spmm(A, x)))(A) for A in hat_graphs
        ]
    r = len(propagators)
    if params.mode == "single" and r != 1:
        raise InputError("single mode runs on exactly one graph")
    if params.mode != "merge" and len(params.intra[0]) != r:
        raise InputError(
            f"parameters cover {len(params.intra[0])} graphs, forward got {r}"
        )
    weight_names = ("merged",) if params.mode == "merge" else params.graph_names

    slices: list[Node | None] = [None] * r  # None marks identity features
    for layer in range(n_layers):
        final = layer == n_layers - 1
        weights = [pnodes[f"intra.{layer}.{name}"] for name in weight_names]
        slices = intra_propagate(
            tape, propagators, slices, weights, dropout=dropout, rng=rng, final=final
        )
        if params.mode == "tensor" and r >= 2:
            slices = inter_propagate(tape, slices, pnodes[f"inter.{layer}"], final=final)
        if trace is not None:
            trace.append(list(slices))
    return tape.mean_stack(slices) if r > 1 else slices[0]


def prepare_propagation(params: ModelParams, tensor: TextGraphTensor):
    """Mode-appropriate propagation inputs for ``forward``."""
    if params.mode == "merge":
        return {"merge_structure": build_merge_structure(tensor)}
    wanted = tensor.subset(params.graph_names)
    return {"hat_graphs": normalize(wanted).graphs}


# -- gradcheck fixture ---------------------------------------------------------


def gradcheck_fixture(seed: int = 7, n_docs: int = 3, n_words: int = 3, n_classes: int = 3):
    """Small random tensor with positive symmetric weights plus labels."""
    from .corpus import NodeIndex

    rng = np.random.default_rng(seed)
    n = n_docs + n_words
    graphs = []
    for _ in range(3):
        dense_part = rng.uniform(0.2, 1.0, size=(n, n))
        mask = rng.random((n, n)) < 0.6
        A = dense_part * mask
        A = np.triu(A, k=1)
        A = A + A.T
        coo = sp.coo_matrix(A)
        graphs.append(csr_from_coo(coo.row, coo.col, coo.data, (n, n)))
    node_index = NodeIndex(n_docs=n_docs, n_words=n_words)
    tensor = TextGraphTensor(node_index=node_index, graphs=graphs, names=("semantic", "syntactic", "sequential"))
    labels = np.arange(n_docs) % n_classes
    return tensor, labels


def gradcheck_model(
    mode: str = "tensor",
    tolerance: float = 1e-4,
    step: float = 1e-5,
    seed: int = 7,
    hidden_dim: int = 4,
    l2_weight: float = 5e-6,
):
    """Verify every trainable parameter of a small model against central
    differences on a fixed fixture with dropout disabled."""
    from .autodiff import backward, finite_difference_check, grads_by_name
    from .training import attach_loss

    tensor, labels = gradcheck_fixture(seed=seed)
    n_classes = int(labels.max()) + 1
    names = tensor.names if mode != "single" else ("sequential",)
    work = tensor if mode != "single" else tensor.subset(names)
    rng = np.random.default_rng(seed)
    params = init_params(
        mode, work.node_index.n, hidden_dim, n_classes, names, rng,
        tensor=work if mode == "merge" else None,
    )
    propagation = prepare_propagation(params, work)
    rows = np.arange(work.node_index.n_docs)

    def loss_fn() -> float:
        tape = Tape()
        logits = forward(tape, params, **propagation)
        loss = attach_loss(tape, logits, rows, labels, l2_weight)
        return float(loss.value)

    tape = Tape()
    logits = forward(tape, params, **propagation)
    loss = attach_loss(tape, logits, rows, labels, l2_weight)
    backward(tape, loss)
    analytic = grads_by_name(tape)
    return finite_difference_check(
        loss_fn, params.named(), analytic, step=step, tolerance=tolerance
    )


# -- checkpoints ---------------------------------------------------------------


def save_checkpoint(path, params: ModelParams) -> None:
    """Self-describing container; arrays round-trip bitwise."""
    meta = {
        "mode": params.mode,
        "dims": list(params.dims),
        "graph_names": list(params.graph_names),
        "intra_layers": len(params.intra),
        "inter_layers": len(params.inter),
        "attention_names": list(params.attention),
    }
    arrays = {}
    for layer, per_graph in enumerate(params.intra):
        for g, w in enumerate(per_graph):
            arrays[f"intra_{layer}_{g}"] = w
    for layer, w in enumerate(params.inter):
        arrays[f"inter_{layer}"] = w
    for name, vec in params.attention.items():
        arrays[f"attention_{name}"] = vec
    buffer = io.BytesIO()
    np.savez(buffer, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)
    with open(path, "wb") as fh:
        fh.write(buffer.getvalue())


def load_checkpoint(path) -> ModelParams:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        n_graph_slots = 1 if meta["mode"] == "merge" else len(meta["graph_names"])
        intra = [
            [data[f"intra_{layer}_{g}"] for g in range(n_graph_slots)]
            for layer in range(meta["intra_layers"])
        ]
        inter = [data[f"inter_{layer}"] for layer in range(meta["inter_layers"])]
        attention = {name: data[f"attention_{name}"] for name in meta["attention_names"]}
    return ModelParams(
        mode=meta["mode"],
        dims=tuple(meta["dims"]),
        graph_names=tuple(meta["graph_names"]),
        intra=intra,
        inter=inter,
        attention=attention,
    )
