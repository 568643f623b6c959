"""Small reverse-mode automatic differentiation engine over numpy arrays.

A :class:`Graph` is built for one sentence, differentiated once with
:func:`backward`, and thrown away. Trainable weights live in a
:class:`ParameterCollection` and outlive the graphs that read them.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ContractError, DimensionError, NonFiniteError

DTYPE = np.float64

_debug = False


def set_debug(enabled: bool) -> None:
    """Toggle finite-value validation of every node value (slow)."""
    global _debug
    _debug = bool(enabled)


def check_finite(values: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(values)):
        raise NonFiniteError(f"non-finite values in {what}")


class Parameter:
    """A named trainable tensor with its gradient buffer."""

    __slots__ = ("name", "value", "grad", "_dense", "_rows")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = np.ascontiguousarray(value, dtype=DTYPE)
        self.grad = np.zeros_like(self.value)
        self._dense = False
        self._rows: set[int] = set()

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def touched(self) -> bool:
        return self._dense or bool(self._rows)

    def zero_grad(self) -> None:
        if self._dense:
            self.grad.fill(0.0)
        else:
            for r in self._rows:
                self.grad[r] = 0.0
        self._dense = False
        self._rows.clear()

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


class ParameterCollection:
    """Ordered, uniquely named set of parameters."""

    def __init__(self):
        self._params: OrderedDict[str, Parameter] = OrderedDict()

    def add(self, name: str, value: np.ndarray) -> Parameter:
        if name in self._params:
            raise ContractError(f"duplicate parameter name {name!r}")
        p = Parameter(name, value)
        self._params[name] = p
        return p

    def add_glorot(self, name: str, shape: Sequence[int], rng: np.random.Generator) -> Parameter:
        """Uniform init with bound sqrt(6 / (fan_in + fan_out))."""
        shape = tuple(shape)
        fan = shape[0] + (shape[1] if len(shape) > 1 else 1)
        bound = np.sqrt(6.0 / fan)
        return self.add(name, rng.uniform(-bound, bound, size=shape))

    def add_zeros(self, name: str, shape: Sequence[int]) -> Parameter:
        return self.add(name, np.zeros(tuple(shape), dtype=DTYPE))

    def __getitem__(self, name: str) -> Parameter:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self):
        return iter(self._params.values())

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.zero_grad()

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: p.value.copy() for name, p in self._params.items()}

    def restore(self, values: dict[str, np.ndarray]) -> None:
        for name, p in self._params.items():
            p.value[...] = values[name]


class Node:
    __slots__ = ("value", "grad", "backward_fn", "kind", "_owned")

    def __init__(self, value: np.ndarray, backward_fn: Callable | None, kind: str):
        self.value = value
        self.grad: np.ndarray | None = None
        self.backward_fn = backward_fn
        self.kind = kind
        self._owned = False

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def accumulate(self, g: np.ndarray) -> None:
        # the first incoming array may be shared, so copy before adding in place
        if self.grad is None:
            self.grad = g
        elif self._owned:
            self.grad += g
        else:
            self.grad = self.grad + g
            self._owned = True

    def __repr__(self) -> str:
        return f"Node({self.kind}, shape={self.shape})"


NodeLike = Node | Parameter


class Graph:
    """Tape of nodes in construction order."""

    def __init__(self):
        self.nodes: list[Node] = []
        self._param_nodes: dict[int, Node] = {}
        # weight matrix -> (dy, x) pairs, folded into one matmul after backward
        self._weight_uses: dict[int, tuple[Parameter, list, list]] = {}
        self._backward_done = False

    def _use_weight(self, p: Parameter, gy: np.ndarray, x: np.ndarray) -> None:
        entry = self._weight_uses.get(id(p))
        if entry is None:
            entry = self._weight_uses[id(p)] = (p, [], [])
        entry[1].append(gy)
        entry[2].append(x)

    def _flush_weights(self) -> None:
        for p, gys, xs in self._weight_uses.values():
            p.grad += np.stack(gys, axis=1) @ np.stack(xs)
            p._dense = True
        self._weight_uses.clear()

    def _record(self, value: np.ndarray, backward_fn: Callable | None, kind: str) -> Node:
        if _debug:
            check_finite(value, f"{kind} node #{len(self.nodes)}")
        node = Node(value, backward_fn, kind)
        self.nodes.append(node)
        return node

    def constant(self, value) -> Node:
        return self._record(np.asarray(value, dtype=DTYPE), None, "constant")

    def parameter(self, p: Parameter) -> Node:
        """Node reading a whole parameter; one node per parameter per graph."""
        node = self._param_nodes.get(id(p))
        if node is None:

            def back(g, p=p):
                p.grad += g
                p._dense = True

            node = self._record(p.value, back, "parameter")
            self._param_nodes[id(p)] = node
        return node

    def lookup(self, table: Parameter, index: int) -> Node:
        """Row ``index`` of an embedding table, with a sparse gradient."""
        if not 0 <= index < table.value.shape[0]:
            raise DimensionError(f"row {index} outside {table.name} with {table.value.shape[0]} rows")

        def back(g, table=table, index=index):
            table.grad[index] += g
            table._rows.add(index)

        return self._record(table.value[index], back, "lookup")

    def as_node(self, x: NodeLike) -> Node:
        return self.parameter(x) if isinstance(x, Parameter) else x


def _name(x) -> str:
    return x.name if isinstance(x, Parameter) else x.kind


def affine(g: Graph, W: NodeLike, x: NodeLike, b: NodeLike) -> Node:
    """``W @ x + b``."""
    return affine_sum(g, b, [(W, x)])


def affine_sum(g: Graph, b: NodeLike, terms: Sequence[tuple[NodeLike, NodeLike]]) -> Node:
    """``b + sum(W_k @ x_k)`` as a single node."""
    bias_param = b if isinstance(b, Parameter) else None
    bn = None if bias_param is not None else b
    pairs = [(W, g.as_node(x)) for W, x in terms]
    out = b.value.copy()
    for W, xn in pairs:
        wv, xv = W.value, xn.value
        if wv.ndim != 2 or xv.ndim != 1 or wv.shape[1] != xv.shape[0] or wv.shape[0] != out.shape[0]:
            raise DimensionError(f"affine: {_name(W)} {wv.shape} x {_name(xn)} {xv.shape} + {_name(b)} {b.value.shape}")
        out += wv @ xv

    def back(gy):
        if bias_param is not None:
            bias_param.grad += gy
            bias_param._dense = True
        else:
            bn.accumulate(gy)
        for W, xn in pairs:
            if isinstance(W, Parameter):
                g._use_weight(W, gy, xn.value)
            else:
                W.accumulate(np.outer(gy, xn.value))
            xn.accumulate(W.value.T @ gy)

    return g._record(out, back, "affine")


def concat(g: Graph, xs: Sequence[NodeLike]) -> Node:
    if not xs:
        raise ContractError("concat of an empty list")
    nodes = [g.as_node(x) for x in xs]
    for n in nodes:
        if n.value.ndim != 1:
            raise DimensionError(f"concat expects vectors, got shape {n.value.shape}")
    if len(nodes) == 1:
        return nodes[0]
    out = np.concatenate([n.value for n in nodes])
    bounds = np.cumsum([0] + [n.value.shape[0] for n in nodes])

    def back(gy):
        for n, lo, hi in zip(nodes, bounds[:-1], bounds[1:]):
            n.accumulate(gy[lo:hi])

    return g._record(out, back, "concat")


def slice_(g: Graph, x: NodeLike, lo: int, hi: int) -> Node:
    """``x[lo:hi]`` of a vector."""
    xn = g.as_node(x)
    n = xn.value.shape[0]
    if not 0 <= lo < hi <= n:
        raise DimensionError(f"slice [{lo}:{hi}] of a vector of length {n}")

    def back(gy):
        full = np.zeros(n, dtype=DTYPE)
        full[lo:hi] = gy
        xn.accumulate(full)

    return g._record(xn.value[lo:hi], back, "slice")


def logistic_values(v: np.ndarray) -> np.ndarray:
    # tanh form avoids overflow in exp for large |v|
    return 0.5 * (1.0 + np.tanh(0.5 * v))


def nonlinearity(g: Graph, kind: str, x: NodeLike) -> Node:
    xn = g.as_node(x)
    v = xn.value
    if kind == "tanh":
        y = np.tanh(v)
        local = lambda: 1.0 - y * y
    elif kind == "logistic":
        y = logistic_values(v)
        local = lambda: y * (1.0 - y)
    elif kind == "relu":
        y = np.maximum(v, 0.0)
        local = lambda: (v > 0).astype(DTYPE)
    else:
        raise ContractError(f"unknown nonlinearity {kind!r}")

    def back(gy):
        xn.accumulate(gy * local())

    return g._record(y, back, kind)


def tanh(g: Graph, x: NodeLike) -> Node:
    return nonlinearity(g, "tanh", x)


def logistic(g: Graph, x: NodeLike) -> Node:
    return nonlinearity(g, "logistic", x)


def relu(g: Graph, x: NodeLike) -> Node:
    return nonlinearity(g, "relu", x)


def hadamard(g: Graph, a: NodeLike, b: NodeLike) -> Node:
    an, bn = g.as_node(a), g.as_node(b)
    if an.value.shape != bn.value.shape:
        raise DimensionError(f"hadamard: {_name(a)} {an.value.shape} vs {_name(b)} {bn.value.shape}")

    def back(gy):
        an.accumulate(gy * bn.value)
        bn.accumulate(gy * an.value)

    return g._record(an.value * bn.value, back, "hadamard")


def add(g: Graph, *xs: NodeLike) -> Node:
    nodes = [g.as_node(x) for x in xs]
    shape = nodes[0].value.shape
    for n in nodes[1:]:
        if n.value.shape != shape:
            raise DimensionError(f"add: shapes {shape} and {n.value.shape}")
    out = nodes[0].value.copy()
    for n in nodes[1:]:
        out += n.value

    def back(gy):
        for n in nodes:
            n.accumulate(gy)

    return g._record(out, back, "add")


def one_minus(g: Graph, x: NodeLike) -> Node:
    """``1 - x`` component-wise."""
    xn = g.as_node(x)

    def back(gy):
        xn.accumulate(-gy)

    return g._record(1.0 - xn.value, back, "one_minus")


def sum_all(g: Graph, xs: Iterable[NodeLike]) -> Node:
    """Scalar sum of every entry of every input."""
    nodes = [g.as_node(x) for x in xs]
    total = np.asarray(sum(float(n.value.sum()) for n in nodes), dtype=DTYPE)

    def back(gy):
        for n in nodes:
            n.accumulate(np.full(n.value.shape, float(gy)))

    return g._record(total, back, "sum")


def masked_softmax(scores: np.ndarray, legal: Sequence[int]) -> np.ndarray:
    """Softmax restricted to ``legal``; every other entry is exactly 0."""
    idx = np.asarray(legal, dtype=np.intp)
    if idx.size == 0:
        raise ContractError("softmax over an empty legal set")
    s = scores[idx]
    e = np.exp(s - s.max())
    probs = np.zeros_like(scores, dtype=DTYPE)
    probs[idx] = e / e.sum()
    return probs


def masked_neg_log_softmax(g: Graph, scores: NodeLike, legal: Sequence[int], gold: int) -> Node:
    sn = g.as_node(scores)
    legal = list(legal)
    if not legal:
        raise ContractError("empty legal set")
    if gold not in legal:
        raise ContractError(f"gold index {gold} is not among the legal indices {legal}")
    idx = np.asarray(legal, dtype=np.intp)
    s = sn.value[idx]
    m = s.max()
    log_z = m + np.log(np.exp(s - m).sum())
    loss = np.asarray(log_z - sn.value[gold], dtype=DTYPE)

    def back(gy):
        d = masked_softmax(sn.value, legal)
        d[gold] -= 1.0
        sn.accumulate(float(gy) * d)

    return g._record(loss, back, "masked_nll")


def backward(graph: Graph, loss: Node) -> None:
    """Accumulate d(loss)/d(parameter) into every parameter used by ``graph``."""
    if graph._backward_done:
        raise ContractError("backward already ran on this graph")
    if loss.value.size != 1:
        raise ContractError(f"loss must be a scalar, got shape {loss.value.shape}")
    graph._backward_done = True
    loss.grad = np.ones_like(loss.value)
    for node in reversed(graph.nodes):
        if node.grad is not None and node.backward_fn is not None:
            node.backward_fn(node.grad)
    graph._flush_weights()


@dataclass
class SgdState:
    """Plain SGD with ``lr = lr0 / (1 + decay * epoch)``.

    ``clip`` rescales the update when the global gradient norm exceeds it.
    """

    learning_rate: float = 0.1
    decay: float = 0.1
    epoch: int = 0
    clip: float | None = 5.0
    updates: int = field(default=0, repr=False)

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ContractError("learning rate must be positive")
        if self.decay < 0:
            raise ContractError("learning-rate decay must be non-negative")

    @property
    def rate(self) -> float:
        return self.learning_rate / (1.0 + self.decay * self.epoch)

    def next_epoch(self) -> None:
        self.epoch += 1


def sgd_step(params: Iterable[Parameter], state: SgdState) -> None:
    """``p -= rate * grad`` for every touched parameter, then clear gradients."""
    touched = [p for p in params if p.touched]
    sq = 0.0
    for p in touched:
        g = p.grad if p._dense else p.grad[sorted(p._rows)]
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient in parameter {p.name!r}")
        sq += float(np.sum(g * g))
    scale = 1.0
    if state.clip is not None and sq > state.clip * state.clip:
        scale = state.clip / np.sqrt(sq)
    rate = state.rate * scale
    for p in touched:
        if p._dense:
            p.value -= rate * p.grad
        else:
            rows = sorted(p._rows)
            p.value[rows] -= rate * p.grad[rows]
        p.zero_grad()
    state.updates += 1
