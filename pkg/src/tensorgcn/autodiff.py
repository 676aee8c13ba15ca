"""Reverse-mode differentiation over a recorded tape of matrix operations.

The tape is append-only, so node references always point backward and a
single reverse sweep visits operations in valid topological order. Values
are float64 numpy arrays (scalars are 0-d arrays). Sparse propagation
matrices enter either as constants (``spmm``) or as a fixed sparsity
pattern with differentiable values (``spmm_pattern``), which is what lets
gradients reach edge-attention weights through symmetric normalization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


class Node:
    """One recorded value; gradients accumulate into ``grad`` during backward."""

    __slots__ = ("value", "grad", "backward_fn", "trainable", "name", "index")

    def __init__(self, value, trainable, name, index):
        self.value = value
        self.grad = None
        self.backward_fn = None
        self.trainable = trainable
        self.name = name
        self.index = index

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Node({self.name or 'op'}#{self.index}, shape={self.value.shape})"


class Tape:
    """Append-only operation record supporting a single backward sweep.

    A tape is single-threaded; build a fresh tape per forward pass.
    Parameter arrays are held by reference and must not be mutated between
    the forward pass and ``backward``.
    """

    def __init__(self):
        self.nodes: list[Node] = []

    # -- leaves ----------------------------------------------------------

    def param(self, value: np.ndarray, name: str) -> Node:
        return self._record(value, trainable=True, name=name)

    # -- recording -------------------------------------------------------

    def _record(self, value, trainable=False, name="") -> Node:
        arr = np.asarray(value, dtype=np.float64)
        node = Node(arr, trainable, name, len(self.nodes))
        self.nodes.append(node)
        return node

    @staticmethod
    def _acc(node: Node, g: np.ndarray, owned: bool):
        """Accumulate a gradient contribution.

        ``owned`` marks contributions in freshly allocated storage; unowned
        ones (views or shared buffers) are copied before being kept.
        """
        if node.grad is None:
            node.grad = g if owned else np.array(g, dtype=np.float64)
        else:
            node.grad += g

    # -- elementwise and linear ops ---------------------------------------

    def add(self, a: Node, b: Node) -> Node:
        if a.value.shape != b.value.shape:
            raise ValueError(f"add shape mismatch: {a.shape} vs {b.shape}")
        out = self._record(a.value + b.value)

        def bw(g):
            self._acc(a, g, owned=False)
            self._acc(b, g, owned=False)

        out.backward_fn = bw
        return out

    def sub(self, a: Node, b: Node) -> Node:
        if a.value.shape != b.value.shape:
            raise ValueError(f"sub shape mismatch: {a.shape} vs {b.shape}")
        out = self._record(a.value - b.value)

        def bw(g):
            self._acc(a, g, owned=False)
            self._acc(b, -g, owned=True)

        out.backward_fn = bw
        return out

    def mul(self, a: Node, b: Node) -> Node:
        """Elementwise product of equally shaped nodes."""
        if a.value.shape != b.value.shape:
            raise ValueError(f"mul shape mismatch: {a.shape} vs {b.shape}")
        out = self._record(a.value * b.value)

        def bw(g):
            self._acc(a, g * b.value, owned=True)
            self._acc(b, g * a.value, owned=True)

        out.backward_fn = bw
        return out

    def scale(self, a: Node, c: float) -> Node:
        out = self._record(a.value * c)

        def bw(g):
            self._acc(a, g * c, owned=True)

        out.backward_fn = bw
        return out

    def mul_const(self, a: Node, c: np.ndarray) -> Node:
        """Elementwise product with a constant (broadcastable against ``a``)."""
        out = self._record(a.value * c)

        def bw(g):
            self._acc(a, g * c, owned=True)

        out.backward_fn = bw
        return out

    def matmul(self, a: Node, b: Node) -> Node:
        if a.value.shape[1] != b.value.shape[0]:
            raise ValueError(f"matmul dimension mismatch: {a.shape} @ {b.shape}")
        out = self._record(a.value @ b.value)

        def bw(g):
            self._acc(a, g @ b.value.T, owned=True)
            self._acc(b, a.value.T @ g, owned=True)

        out.backward_fn = bw
        return out

    def spmm(self, S: sp.spmatrix, a: Node) -> Node:
        """Constant sparse matrix times node; only the dense factor is differentiable."""
        if S.shape[1] != a.value.shape[0]:
            raise ValueError(f"spmm dimension mismatch: {S.shape} @ {a.shape}")
        out = self._record(np.asarray(S @ a.value))
        St = S.T

        def bw(g):
            self._acc(a, np.asarray(St @ g), owned=True)

        out.backward_fn = bw
        return out

    def spmm_pattern(self, indptr, indices, nnz_rows, shape, vals: Node, d: Node) -> Node:
        """Sparse @ dense where the sparse values are differentiable.

        The sparsity pattern (CSR ``indptr``/``indices`` plus the
        per-nonzero row array ``nnz_rows``) is fixed; ``vals`` supplies one
        value per stored nonzero.
        """
        if vals.value.shape != (len(indices),):
            raise ValueError("values length does not match pattern nonzeros")
        S = sp.csr_matrix((vals.value, indices, indptr), shape=shape)
        out = self._record(np.asarray(S @ d.value))

        def bw(g):
            self._acc(d, np.asarray(S.T @ g), owned=True)
            gv = np.empty(len(indices), dtype=np.float64)
            # chunked so nnz-by-dim temporaries stay bounded
            step = max(1, (1 << 22) // max(1, d.value.shape[1]))
            for lo in range(0, len(indices), step):
                hi = min(lo + step, len(indices))
                gv[lo:hi] = np.einsum(
                    "ij,ij->i", g[nnz_rows[lo:hi]], d.value[indices[lo:hi]]
                )
            self._acc(vals, gv, owned=True)

        out.backward_fn = bw
        return out

    # -- nonlinearities and structure ops ---------------------------------

    def relu(self, a: Node) -> Node:
        out = self._record(np.maximum(a.value, 0.0))
        mask = a.value > 0  # subgradient at 0 is 0

        def bw(g):
            self._acc(a, g * mask, owned=True)

        out.backward_fn = bw
        return out

    def dropout(self, a: Node, rate: float, rng: np.random.Generator, rowwise=False) -> Node:
        """Inverted dropout; the sampled mask is saved for the backward pass.

        ``rowwise`` drops whole rows, matching dropout applied to one-hot
        identity features folded into the following weight matrix.
        """
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate out of range: {rate}")
        if rate == 0.0:
            return a
        shape = (a.value.shape[0], 1) if rowwise else a.value.shape
        keep = 1.0 - rate
        mask = (rng.random(shape) >= rate) / keep
        out = self._record(a.value * mask)

        def bw(g):
            self._acc(a, g * mask, owned=True)

        out.backward_fn = bw
        return out

    def clamp_min(self, a: Node, floor: float) -> Node:
        """Elementwise lower bound; gradient is zero where the clamp binds."""
        out = self._record(np.maximum(a.value, floor))
        mask = a.value > floor

        def bw(g):
            self._acc(a, g * mask, owned=True)

        out.backward_fn = bw
        return out

    def gather(self, a: Node, idx: np.ndarray) -> Node:
        """Index a 1-D node; repeated indices scatter-add in backward."""
        out = self._record(a.value[idx])

        def bw(g):
            grad = np.zeros_like(a.value)
            np.add.at(grad, idx, g)
            self._acc(a, grad, owned=True)

        out.backward_fn = bw
        return out

    def scatter_add(self, a: Node, idx: np.ndarray, size: int) -> Node:
        """Sum 1-D entries of ``a`` into ``size`` bins given by ``idx``."""
        out_val = np.zeros(size, dtype=np.float64)
        np.add.at(out_val, idx, a.value)
        out = self._record(out_val)

        def bw(g):
            self._acc(a, g[idx], owned=True)  # fancy indexing copies

        out.backward_fn = bw
        return out

    def power(self, a: Node, p: float) -> Node:
        out = self._record(a.value ** p)

        def bw(g):
            self._acc(a, g * p * a.value ** (p - 1.0), owned=True)

        out.backward_fn = bw
        return out

    def append_one(self, a: Node) -> Node:
        """Concatenate a constant 1.0 after a 1-D node (self-loop slot)."""
        out = self._record(np.concatenate([a.value, [1.0]]))

        def bw(g):
            self._acc(a, g[:-1], owned=False)

        out.backward_fn = bw
        return out

    def sum_stack(self, nodes: list[Node]) -> Node:
        first = nodes[0]
        for n in nodes[1:]:
            if n.value.shape != first.value.shape:
                raise ValueError("sum_stack shape mismatch")
        total = first.value.copy()
        for n in nodes[1:]:
            total += n.value
        out = self._record(total)

        def bw(g):
            for n in nodes:
                self._acc(n, g, owned=False)

        out.backward_fn = bw
        return out

    def mean_stack(self, nodes: list[Node]) -> Node:
        summed = self.sum_stack(nodes)
        return self.scale(summed, 1.0 / len(nodes))

    # -- reductions --------------------------------------------------------

    def sum_all(self, a: Node) -> Node:
        out = self._record(a.value.sum())

        def bw(g):
            self._acc(a, np.full(a.value.shape, float(g)), owned=True)

        out.backward_fn = bw
        return out

    def sum_squares(self, a: Node) -> Node:
        out = self._record(np.sum(a.value * a.value))

        def bw(g):
            self._acc(a, (2.0 * float(g)) * a.value, owned=True)

        out.backward_fn = bw
        return out

    def softmax_cross_entropy(self, logits: Node, rows: np.ndarray, labels: np.ndarray) -> Node:
        """Mean cross-entropy over the selected rows, fused with softmax.

        ``rows`` are the labeled row indices and ``labels`` their class
        indices. Gradient on unselected rows is zero.
        """
        if len(rows) == 0:
            raise ValueError("empty label mask")
        sel = logits.value[rows]
        shifted = sel - sel.max(axis=1, keepdims=True)
        logz = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        logp = shifted - logz
        loss = -logp[np.arange(len(rows)), labels].mean()
        out = self._record(loss)
        probs = np.exp(logp)

        def bw(g):
            gsel = probs.copy()
            gsel[np.arange(len(rows)), labels] -= 1.0
            gsel *= float(g) / len(rows)
            full = np.zeros_like(logits.value)
            full[rows] = gsel
            self._acc(logits, full, owned=True)

        out.backward_fn = bw
        return out


def backward(tape: Tape, loss: Node) -> None:
    """Populate ``grad`` on every trainable node reachable from ``loss``.

    Forward values are left untouched; non-trainable gradients are freed
    as soon as they have been propagated.
    """
    if loss.value.size != 1:
        raise ValueError("loss must be scalar-valued")
    if loss.index >= len(tape.nodes) or tape.nodes[loss.index] is not loss:
        raise ValueError("loss node was not recorded on this tape")
    loss.grad = np.asarray(1.0)
    for node in reversed(tape.nodes[: loss.index + 1]):
        if node.grad is None:
            continue
        if node.backward_fn is not None:
            node.backward_fn(node.grad)
        if not node.trainable:
            node.grad = None


def grads_by_name(tape: Tape) -> dict[str, np.ndarray]:
    """Collect gradients of trainable leaves keyed by parameter name."""
    out = {}
    for node in tape.nodes:
        if node.trainable:
            out[node.name] = node.grad if node.grad is not None else np.zeros_like(node.value)
    return out


@dataclass
class GradcheckReport:
    """Central-difference verification outcome for a set of parameters."""

    max_rel_error: float
    worst_parameter: str
    tolerance: float
    step: float
    passed: bool
    per_parameter: dict[str, float]

    def lines(self) -> list[str]:
        out = [f"gradcheck {'PASS' if self.passed else 'FAIL'}"]
        out.append(f"  max_rel_error {self.max_rel_error:.3e} (tolerance {self.tolerance:.1e})")
        out.append(f"  worst_parameter {self.worst_parameter}")
        for name in sorted(self.per_parameter):
            out.append(f"  {name} {self.per_parameter[name]:.3e}")
        return out


def relative_error(a: float, b: float) -> float:
    """|a - b| / max(|a|, |b|, 1e-8): guards against near-zero denominators."""
    return abs(a - b) / max(abs(a), abs(b), 1e-8)


def finite_difference_check(
    loss_fn,
    params: dict[str, np.ndarray],
    analytic: dict[str, np.ndarray],
    *,
    step: float = 1e-5,
    tolerance: float = 1e-4,
) -> GradcheckReport:
    """Compare analytic gradients against central differences entry by entry.

    ``loss_fn`` must recompute the scalar loss from the current contents of
    the arrays in ``params`` (which are perturbed in place and restored).
    Any randomness inside ``loss_fn`` must be frozen.
    """
    base = loss_fn()
    if not np.isfinite(base):
        raise ValueError(f"non-finite loss at the expansion point: {base}")
    worst_name = ""
    worst_err = 0.0
    per_parameter = {}
    for name, theta in params.items():
        grad = analytic[name].reshape(-1)
        flat = theta.reshape(-1)
        err = 0.0
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + step
            up = loss_fn()
            flat[k] = orig - step
            down = loss_fn()
            flat[k] = orig
            numeric = (up - down) / (2.0 * step)
            err = max(err, relative_error(float(grad[k]), numeric))
        per_parameter[name] = err
        if err >= worst_err:
            worst_err = err
            worst_name = name
    return GradcheckReport(
        max_rel_error=worst_err,
        worst_parameter=worst_name,
        tolerance=tolerance,
        step=step,
        passed=worst_err < tolerance,
        per_parameter=per_parameter,
    )
