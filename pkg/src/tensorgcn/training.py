"""Full-batch transductive training: masked cross-entropy with an L2
penalty over all trainable weights, Adam, and early stopping on
validation loss with best-epoch restoration."""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .autodiff import Node, Tape, backward, grads_by_name
from .corpus import Corpus, make_masks
from .errors import InputError, TrainingError
from .graphs import TextGraphTensor
from .model import ModelParams, forward, init_params, prepare_propagation


@dataclass
class TrainConfig:
    lr: float = 0.002
    l2_weight: float = 5e-6
    dropout: float = 0.5
    max_epochs: int = 1000
    patience: int = 10
    hidden_dim: int = 200
    seed: int = 0
    mode: str = "tensor"
    rho_sem: float = 0.9
    window_size: int = 20
    val_fraction: float = 0.1
    min_df: int = 1
    embedding_mode: str = "static"

    def __post_init__(self):
        if self.patience < 1:
            raise InputError(f"patience must be >= 1, got {self.patience}")
        if not 0.0 <= self.dropout < 1.0:
            raise InputError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.lr <= 0:
            raise InputError(f"lr must be positive, got {self.lr}")
        if self.max_epochs < 1:
            raise InputError(f"max_epochs must be >= 1, got {self.max_epochs}")

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_accuracy: float
    val_loss: float
    val_accuracy: float


@dataclass
class TrainReport:
    epochs: list[EpochRecord] = field(default_factory=list)
    stopping_epoch: int = 0
    best_epoch: int = 0
    test_accuracy: float = 0.0
    wall_time_s: float = 0.0

    def to_jsonl(self) -> str:
        """Line-delimited serialization; excludes wall time so identical
        runs produce identical bytes."""
        lines = [json.dumps({"kind": "epoch", **asdict(e)}) for e in self.epochs]
        lines.append(
            json.dumps(
                {
                    "kind": "final",
                    "stopping_epoch": self.stopping_epoch,
                    "best_epoch": self.best_epoch,
                    "test_accuracy": self.test_accuracy,
                }
            )
        )
        return "\n".join(lines) + "\n"

    def summary(self) -> str:
        head = f"{'epoch':>6} {'train_loss':>11} {'train_acc':>10} {'val_loss':>11} {'val_acc':>8}"
        rows = [head, "-" * len(head)]
        for e in self.epochs:
            rows.append(
                f"{e.epoch:>6} {e.train_loss:>11.5f} {e.train_accuracy:>10.4f} "
                f"{e.val_loss:>11.5f} {e.val_accuracy:>8.4f}"
            )
        rows.append(
            f"stopped at epoch {self.stopping_epoch}, best epoch {self.best_epoch}, "
            f"test accuracy {self.test_accuracy:.4f}, wall time {self.wall_time_s:.1f}s"
        )
        return "\n".join(rows)


class EarlyStopper:
    """Stop once validation loss has failed to improve for `patience`
    consecutive epochs; tracks the best epoch seen."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = np.inf
        self.best_epoch = 0
        self.fails = 0

    def update(self, epoch: int, val_loss: float) -> bool:
        if val_loss < self.best:
            self.best = val_loss
            self.best_epoch = epoch
            self.fails = 0
            return False
        self.fails += 1
        return self.fails >= self.patience


class Adam:
    """Standard Adam (beta1 0.9, beta2 0.999, eps 1e-8) with bias correction."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        for name, theta in params.items():
            g = grads[name]
            if name not in self.m:
                self.m[name] = np.zeros_like(theta)
                self.v[name] = np.zeros_like(theta)
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            m_hat = m / (1.0 - self.beta1 ** self.t)
            v_hat = v / (1.0 - self.beta2 ** self.t)
            theta -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def adam_step(params: dict[str, np.ndarray], grads, state: Adam) -> None:
    """One optimizer step; ``state`` carries moments and the step counter."""
    state.step(params, grads)


def attach_loss(
    tape: Tape,
    logits: Node,
    rows: np.ndarray,
    labels: np.ndarray,
    l2_weight: float,
) -> Node:
    """Masked mean cross-entropy plus l2_weight * sum of squared weights
    over every trainable leaf on the tape."""
    if len(rows) == 0:
        raise InputError("loss mask selects no documents")
    ce = tape.softmax_cross_entropy(logits, rows, labels[rows])
    if l2_weight == 0.0:
        return ce
    penalty = None
    for node in list(tape.nodes):
        if node.trainable:
            sq = tape.sum_squares(node)
            penalty = sq if penalty is None else tape.add(penalty, sq)
    return tape.add(ce, tape.scale(penalty, l2_weight))


def _masked_metrics(logits: np.ndarray, labels: np.ndarray, mask: np.ndarray):
    rows = np.where(mask)[0]
    sel = logits[rows]
    shifted = sel - sel.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - logz
    loss = float(-logp[np.arange(len(rows)), labels[rows]].mean())
    accuracy = float((sel.argmax(axis=1) == labels[rows]).mean())
    return loss, accuracy


def train(
    corpus: Corpus,
    tensor: TextGraphTensor,
    config: TrainConfig,
    masks=None,
    graph_names=None,
) -> tuple[ModelParams, TrainReport]:
    """Train the configured mode transductively and return the parameters
    from the best-validation-loss epoch plus the per-epoch report."""
    if tensor.node_index.n_docs != len(corpus):
        raise InputError(
            f"tensor indexes {tensor.node_index.n_docs} documents, corpus has {len(corpus)}"
        )
    started = time.perf_counter()
    if masks is None:
        masks = make_masks(corpus, config.val_fraction, config.seed)
    train_mask, val_mask, test_mask = masks
    labels = np.zeros(tensor.node_index.n, dtype=np.int64)
    labels[: len(corpus)] = corpus.labels()

    names = tuple(graph_names) if graph_names else tensor.names
    work = tensor.subset(names) if names != tensor.names else tensor
    init_seed, dropout_seed = np.random.SeedSequence(config.seed).spawn(2)
    params = init_params(
        config.mode,
        work.node_index.n,
        config.hidden_dim,
        corpus.n_classes,
        names,
        np.random.default_rng(init_seed),
        tensor=work if config.mode == "merge" else None,
    )
    propagation = prepare_propagation(params, work)
    dropout_rng = np.random.default_rng(dropout_seed)
    optimizer = Adam(lr=config.lr)
    stopper = EarlyStopper(config.patience)
    report = TrainReport()
    best_params = params.copy()
    train_rows = np.where(train_mask)[0]

    for epoch in range(1, config.max_epochs + 1):
        tape = Tape()
        logits = forward(
            tape, params, dropout=config.dropout, rng=dropout_rng, **propagation
        )
        loss = attach_loss(tape, logits, train_rows, labels, config.l2_weight)
        if not np.isfinite(loss.value):
            raise TrainingError(
                f"non-finite training loss {loss.value!r} at epoch {epoch} "
                f"(mode={config.mode}, lr={config.lr})"
            )
        backward(tape, loss)
        optimizer.step(params.named(), grads_by_name(tape))

        eval_tape = Tape()
        eval_logits = forward(eval_tape, params, dropout=0.0, **propagation).value
        train_loss, train_acc = _masked_metrics(eval_logits, labels, train_mask)
        val_loss, val_acc = _masked_metrics(eval_logits, labels, val_mask)
        if not np.isfinite(val_loss):
            raise TrainingError(f"non-finite validation loss at epoch {epoch}")
        report.epochs.append(
            EpochRecord(
                epoch=epoch,
                train_loss=train_loss,
                train_accuracy=train_acc,
                val_loss=val_loss,
                val_accuracy=val_acc,
            )
        )
        improved = val_loss < stopper.best
        stop = stopper.update(epoch, val_loss)
        if improved:
            best_params = params.copy()
        report.stopping_epoch = epoch
        if stop:
            break

    report.best_epoch = stopper.best_epoch
    report.test_accuracy = evaluate(best_params, work, labels, test_mask)
    report.wall_time_s = time.perf_counter() - started
    return best_params, report


def evaluate(params: ModelParams, tensor: TextGraphTensor, labels: np.ndarray, mask: np.ndarray) -> float:
    """Accuracy of argmax predictions over masked document nodes.

    Ties break toward the lowest class index (argmax takes the first
    maximum).
    """
    propagation = prepare_propagation(params, tensor)
    tape = Tape()
    logits = forward(tape, params, dropout=0.0, **propagation).value
    rows = np.where(mask)[0]
    if len(rows) == 0:
        return 0.0
    predictions = logits[rows].argmax(axis=1)
    return float((predictions == labels[rows]).mean())
