"""LSTM cells with coupled input/forget gates and peepholes, stack LSTMs, and
the bidirectional character encoder."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Graph, Node, Parameter, ParameterCollection
from .errors import ContractError, DimensionError


@dataclass
class LstmParams:
    W_ix: Parameter
    W_ih: Parameter
    W_ic: Parameter
    b_i: Parameter
    W_cx: Parameter
    W_ch: Parameter
    b_c: Parameter
    W_ox: Parameter
    W_oh: Parameter
    W_oc: Parameter
    b_o: Parameter
    n_in: int
    n_h: int
    full_peepholes: bool = False

    @classmethod
    def create(
        cls,
        store: ParameterCollection,
        prefix: str,
        n_in: int,
        n_h: int,
        rng: np.random.Generator,
        full_peepholes: bool = False,
    ) -> "LstmParams":
        peep = (n_h, n_h) if full_peepholes else (n_h,)

        def mat(name, shape):
            return store.add_glorot(f"{prefix}.{name}", shape, rng)

        return cls(
            W_ix=mat("W_ix", (n_h, n_in)),
            W_ih=mat("W_ih", (n_h, n_h)),
            W_ic=mat("W_ic", peep),
            b_i=store.add_zeros(f"{prefix}.b_i", (n_h,)),
            W_cx=mat("W_cx", (n_h, n_in)),
            W_ch=mat("W_ch", (n_h, n_h)),
            b_c=store.add_zeros(f"{prefix}.b_c", (n_h,)),
            W_ox=mat("W_ox", (n_h, n_in)),
            W_oh=mat("W_oh", (n_h, n_h)),
            W_oc=mat("W_oc", peep),
            b_o=store.add_zeros(f"{prefix}.b_o", (n_h,)),
            n_in=n_in,
            n_h=n_h,
            full_peepholes=full_peepholes,
        )

    def parameters(self) -> list[Parameter]:
        return [
            self.W_ix, self.W_ih, self.W_ic, self.b_i,
            self.W_cx, self.W_ch, self.b_c,
            self.W_ox, self.W_oh, self.W_oc, self.b_o,
        ]


@dataclass
class LstmState:
    h: Node
    c: Node
    # gate activations of the step that produced this state, for inspection
    i: np.ndarray | None = None
    f: np.ndarray | None = None
    o: np.ndarray | None = None


def zero_state(g: Graph, n_h: int) -> LstmState:
    z = g.constant(np.zeros(n_h))
    return LstmState(z, z)


def _peep(W: Parameter, c: np.ndarray) -> np.ndarray:
    return W.value @ c if W.value.ndim == 2 else W.value * c


def lstm_step(g: Graph, params: LstmParams, x: Node, prev: LstmState) -> LstmState:
    """One step of::

        i = logistic(W_ix x + W_ih h' + W_ic . c' + b_i)
        f = 1 - i
        c = f * c' + i * tanh(W_cx x + W_ch h' + b_c)
        o = logistic(W_ox x + W_oh h' + W_oc . c + b_o)
        h = o * tanh(c)

    where ``.`` is a component-wise product (or a matrix product with
    ``full_peepholes``). The whole step is one graph node; ``h`` and ``c``
    are slices of it.
    """
    P = params
    if x.value.shape != (P.n_in,):
        raise DimensionError(f"LSTM input has shape {x.value.shape}, expected ({P.n_in},)")
    hn, cn = prev.h, prev.c
    xv, hv, cv = x.value, hn.value, cn.value
    i = ad.logistic_values(P.W_ix.value @ xv + P.W_ih.value @ hv + _peep(P.W_ic, cv) + P.b_i.value)
    f = 1.0 - i
    cand = np.tanh(P.W_cx.value @ xv + P.W_ch.value @ hv + P.b_c.value)
    c = f * cv + i * cand
    o = ad.logistic_values(P.W_ox.value @ xv + P.W_oh.value @ hv + _peep(P.W_oc, c) + P.b_o.value)
    tc = np.tanh(c)
    h = o * tc
    n = P.n_h

    def back(gy):
        gh, gc = gy[:n], gy[n:]
        da_o = gh * tc * o * (1.0 - o)
        gc = gc + gh * o * (1.0 - tc * tc)
        if P.full_peepholes:
            gc = gc + P.W_oc.value.T @ da_o
            g._use_weight(P.W_oc, da_o, c)
        else:
            gc = gc + P.W_oc.value * da_o
            P.W_oc.grad += da_o * c
            P.W_oc._dense = True
        da_i = gc * (cand - cv) * i * (1.0 - i)
        da_c = gc * i * (1.0 - cand * cand)
        dc_prev = gc * f
        if P.full_peepholes:
            dc_prev = dc_prev + P.W_ic.value.T @ da_i
            g._use_weight(P.W_ic, da_i, cv)
        else:
            dc_prev = dc_prev + P.W_ic.value * da_i
            P.W_ic.grad += da_i * cv
            P.W_ic._dense = True
        for b, d in ((P.b_i, da_i), (P.b_c, da_c), (P.b_o, da_o)):
            b.grad += d
            b._dense = True
        for W, d in ((P.W_ix, da_i), (P.W_cx, da_c), (P.W_ox, da_o)):
            g._use_weight(W, d, xv)
        for W, d in ((P.W_ih, da_i), (P.W_ch, da_c), (P.W_oh, da_o)):
            g._use_weight(W, d, hv)
        x.accumulate(P.W_ix.value.T @ da_i + P.W_cx.value.T @ da_c + P.W_ox.value.T @ da_o)
        hn.accumulate(P.W_ih.value.T @ da_i + P.W_ch.value.T @ da_c + P.W_oh.value.T @ da_o)
        cn.accumulate(dc_prev)

    both = g._record(np.concatenate([h, c]), back, "lstm")
    return LstmState(ad.slice_(g, both, 0, n), ad.slice_(g, both, n, 2 * n), i, f, o)


def run_lstm(g: Graph, params: LstmParams, xs: Sequence[Node], init: LstmState | None = None) -> list[LstmState]:
    state = init if init is not None else zero_state(g, params.n_h)
    out = []
    for x in xs:
        state = lstm_step(g, params, x, state)
        out.append(state)
    return out


@dataclass
class StackLstmParams:
    """Layer weights plus the learned empty-stack (guard) state."""

    layers: list[LstmParams]
    guard_h: list[Parameter]
    guard_c: list[Parameter]

    @classmethod
    def create(
        cls,
        store: ParameterCollection,
        prefix: str,
        n_in: int,
        n_h: int,
        n_layers: int,
        rng: np.random.Generator,
        full_peepholes: bool = False,
    ) -> "StackLstmParams":
        layers, guard_h, guard_c = [], [], []
        for k in range(n_layers):
            layers.append(
                LstmParams.create(store, f"{prefix}.l{k}", n_in if k == 0 else n_h, n_h, rng, full_peepholes)
            )
            guard_h.append(store.add(f"{prefix}.l{k}.guard_h", rng.uniform(-0.1, 0.1, n_h)))
            guard_c.append(store.add(f"{prefix}.l{k}.guard_c", rng.uniform(-0.1, 0.1, n_h)))
        return cls(layers, guard_h, guard_c)

    @property
    def input_dim(self) -> int:
        return self.layers[0].n_in

    @property
    def hidden_dim(self) -> int:
        return self.layers[-1].n_h

    def parameters(self) -> list[Parameter]:
        out = []
        for layer, gh, gc in zip(self.layers, self.guard_h, self.guard_c):
            out.extend(layer.parameters())
            out.extend([gh, gc])
        return out


class _Snapshot:
    __slots__ = ("states", "parent", "depth")

    def __init__(self, states, parent, depth):
        self.states = states
        self.parent = parent
        self.depth = depth


class StackLstm:
    """An LSTM whose predecessor state is chosen by a movable top pointer.

    History is append-only: ``pop`` only moves the pointer back, so the
    state it lands on is the exact object computed earlier.
    """

    def __init__(self, params: StackLstmParams, graph: Graph):
        self.params = params
        self.graph = graph
        guard = [
            LstmState(graph.parameter(h), graph.parameter(c))
            for h, c in zip(params.guard_h, params.guard_c)
        ]
        self.history: list[_Snapshot] = [_Snapshot(guard, None, 0)]
        self.top = 0

    @property
    def depth(self) -> int:
        return self.history[self.top].depth

    def push(self, x: Node) -> None:
        g = self.graph
        cur = self.history[self.top]
        states = []
        inp = x
        for layer, prev in zip(self.params.layers, cur.states):
            s = lstm_step(g, layer, inp, prev)
            states.append(s)
            inp = s.h
        self.history.append(_Snapshot(states, self.top, cur.depth + 1))
        self.top = len(self.history) - 1

    def pop(self) -> None:
        parent = self.history[self.top].parent
        if parent is None:
            raise ContractError("pop on an empty stack LSTM")
        self.top = parent

    def embedding(self) -> Node:
        return self.history[self.top].states[-1].h

    def top_states(self) -> list[LstmState]:
        return self.history[self.top].states


def stack_push(s: StackLstm, x: Node) -> None:
    s.push(x)


def stack_pop(s: StackLstm) -> None:
    s.pop()


def stack_embedding(s: StackLstm) -> Node:
    return s.embedding()


@dataclass
class CharBiLstm:
    forward: LstmParams
    backward: LstmParams
    char_table: Parameter

    @classmethod
    def create(
        cls,
        store: ParameterCollection,
        prefix: str,
        n_chars: int,
        char_dim: int,
        n_h: int,
        rng: np.random.Generator,
        full_peepholes: bool = False,
    ) -> "CharBiLstm":
        table = store.add(f"{prefix}.chars", rng.uniform(-0.1, 0.1, (n_chars, char_dim)))
        fw = LstmParams.create(store, f"{prefix}.fw", char_dim, n_h, rng, full_peepholes)
        bw = LstmParams.create(store, f"{prefix}.bw", char_dim, n_h, rng, full_peepholes)
        return cls(fw, bw, table)

    @property
    def output_dim(self) -> int:
        return self.forward.n_h + self.backward.n_h

    def parameters(self) -> list[Parameter]:
        return [self.char_table] + self.forward.parameters() + self.backward.parameters()


def bilstm_encode(g: Graph, enc: CharBiLstm, chars: Sequence[int]) -> tuple[Node, Node]:
    """Final forward state over ``chars`` and final backward state over the
    reversed sequence."""
    if len(chars) == 0:
        raise ContractError("cannot encode an empty character sequence")
    xs = [g.lookup(enc.char_table, c) for c in chars]
    fw = run_lstm(g, enc.forward, xs)[-1].h
    bw = run_lstm(g, enc.backward, xs[::-1])[-1].h
    return fw, bw
