"""Shared oracles for the test-suite: central finite differences and tiny models."""

from __future__ import annotations

from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from lstm_parser import autodiff as ad
from lstm_parser.autodiff import Graph, Node, Parameter
from lstm_parser.errors import InvalidTreeError
from lstm_parser.parser import ParserDims, ParserModel, sentence_loss
from lstm_parser.representations import RepresentationConfig, Vocabulary
from lstm_parser.transitions import DependencyTree, is_projective

DATA = Path(__file__).parent / "data"

FD_STEP = 1e-4
FD_TOL = 1e-4


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """``|a - n| / max(|a|, |n|)`` over the whole gradient tensor (2-norms)."""
    denom = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-10)
    return float(np.linalg.norm(analytic - numeric) / denom)


def numeric_gradient(loss_value: Callable[[], float], p: Parameter, coords=None, step: float = FD_STEP) -> np.ndarray:
    """Central differences of ``loss_value`` w.r.t. ``p`` at ``coords`` (all by default)."""
    out = np.zeros_like(p.value)
    flat = p.value.reshape(-1)
    for k in range(flat.size) if coords is None else coords:
        old = flat[k]
        flat[k] = old + step
        up = loss_value()
        flat[k] = old - step
        down = loss_value()
        flat[k] = old
        out.reshape(-1)[k] = (up - down) / (2 * step)
    return out


def gradient_check(
    build: Callable[[Graph], Node],
    params: Iterable[Parameter],
    max_coords: int | None = None,
    rng: np.random.Generator | None = None,
) -> dict[str, float]:
    """Relative error between backprop and central differences for every
    parameter; ``build`` must construct a scalar loss in the given graph.

    With ``max_coords`` only that many seeded random entries per parameter
    are perturbed, and the comparison is restricted to them.
    """
    params = list(params)
    for p in params:
        p.zero_grad()
    g = Graph()
    ad.backward(g, build(g))
    analytic = {p.name: p.grad.copy() for p in params}
    for p in params:
        p.zero_grad()

    def value() -> float:
        return float(build(Graph()).value)

    errors = {}
    rng = rng or np.random.default_rng(0)
    for p in params:
        coords = None
        if max_coords is not None and p.value.size > max_coords:
            coords = sorted(rng.choice(p.value.size, max_coords, replace=False))
        num = numeric_gradient(value, p, coords)
        a = analytic[p.name]
        if coords is not None:
            a, num = a.reshape(-1)[coords], num.reshape(-1)[coords]
        errors[p.name] = relative_error(a, num)
    return errors


def tiny_model(
    corpus,
    mode: str = "lookup",
    use_pos: bool = False,
    seed: int = 3,
    dim: int = 6,
) -> ParserModel:
    """A parser with every dimension at most 8, for gradient checks."""
    rep = RepresentationConfig(
        mode=mode,
        use_pos=use_pos,
        word_dim=5,
        char_dim=4,
        char_rep_dim=6,
        pos_dim=3,
        input_dim=dim,
        unk_replacement=False,
    )
    dims = ParserDims(hidden_dim=dim, layers=2, action_dim=4, state_dim=dim)
    return ParserModel(Vocabulary.build(corpus), rep, dims, seed=seed)


def randomize(params: Iterable[Parameter], rng: np.random.Generator, scale: float = 0.5) -> None:
    """Overwrite parameter values (zero-initialized biases included) with noise."""
    for p in params:
        p.value[...] = rng.uniform(-scale, scale, p.value.shape)


def random_tree(rng, n, projective=None):
    """Random head assignment, rejected until it is a valid tree."""
    while True:
        heads = [int(h) for h in rng.integers(0, n + 1, size=n)]
        t = DependencyTree(heads, [f"r{h % 3}" for h in heads])
        try:
            t.validate()
        except InvalidTreeError:
            continue
        if projective is None or is_projective(heads) == projective:
            return t


def relu_margin(model, sent):
    """Smallest |pre-activation| over every relu evaluated by the loss."""
    smallest = [np.inf]
    original = ad.relu

    def spy(g, x):
        smallest[0] = min(smallest[0], float(np.abs(x.value).min()))
        return original(g, x)

    ad.relu = spy
    try:
        sentence_loss(Graph(), sent, model)
    finally:
        ad.relu = original
    return smallest[0]


def kink_free_biases(model, sent, margin: float = 1e-3) -> None:
    """Give every bias a nonzero value, redrawing until no relu on the loss
    path sits within ``margin`` of its kink (finite differences are
    meaningless across a kink)."""
    for seed in range(100):
        rng = np.random.default_rng(seed)
        for p in model.store:
            if p.name.endswith((".b", ".d", ".q", ".e", ".b_i", ".b_c", ".b_o")):
                p.value[...] = rng.uniform(-0.3, 0.3, p.value.shape)
        if relu_margin(model, sent) > margin:
            return
    raise AssertionError("no kink-free bias draw found")
