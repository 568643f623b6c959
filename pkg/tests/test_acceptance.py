"""Acceptance criteria, one test per criterion.

Run ``pytest tests/test_acceptance.py -v``; the terminal summary ends with one
PASS/FAIL line per criterion. Criterion 8 trains on a real treebank for
several minutes and is marked ``slow``.
"""

import importlib.util
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import DETAILS
from helpers import (
    DATA,
    FD_TOL,
    gradient_check,
    kink_free_biases,
    random_tree,
    randomize,
    tiny_model,
)
from lstm_parser import autodiff as ad
from lstm_parser.autodiff import Graph, ParameterCollection
from lstm_parser.conllx import load_corpus
from lstm_parser.evaluation import EXCLUDE, INCLUDE, attachment_scores
from lstm_parser.model_io import model_from_bytes, model_to_bytes
from lstm_parser.parser import (
    ParserDims,
    TrainConfig,
    _current_state,
    evaluate,
    greedy_parse,
    parse_corpus,
    score_actions,
    sentence_loss,
    state_embedding,
    train,
)
from lstm_parser.recurrent import (
    LstmParams,
    LstmState,
    StackLstm,
    StackLstmParams,
    lstm_step,
    stack_embedding,
    stack_pop,
    stack_push,
)
from lstm_parser.representations import CHARS, LOOKUP, RepresentationConfig, embed_token
from lstm_parser.transitions import (
    SWAP,
    Composer,
    apply_action,
    compose,
    is_projective,
    legal_actions,
    oracle,
    replay,
)

TOY = load_corpus(str(DATA / "toy_train.conll"))
TOY_DEV = load_corpus(str(DATA / "toy_dev.conll"))
NONPROJ = load_corpus(str(DATA / "toy_nonproj.conll"))
CROSSING_INDEX = 2

# tolerances and budgets
FD_BUDGET_SECONDS = 60.0
NORMALIZATION_TOL = 1e-12
OVERFIT_EPOCHS = 50
OVERFIT_BUDGET_SECONDS = 300.0
DESK_TRAIN, DESK_DEV, DESK_EPOCHS = 1000, 200, 10
DESK_BUDGET_SECONDS = 3600.0
DESK_SEEDS = (1, 2, 3)


def note(n, text):
    DETAILS[n] = text


# --- 1 ------------------------------------------------------------------------------------


def _op_checks(rng):
    """Small losses, one per primitive, over freshly drawn parameters."""
    store = ParameterCollection()
    W = store.add("W", rng.normal(size=(4, 3)))
    x = store.add("x", rng.normal(size=3))
    b = store.add("b", rng.normal(size=4))
    y = store.add("y", rng.normal(size=4))
    E = store.add("E", rng.normal(size=(5, 4)))
    w = rng.normal(size=4)

    def dot(g, node):
        return ad.sum_all(g, [ad.hadamard(g, node, g.constant(w[: node.value.size]))])

    losses = {
        "affine": lambda g: dot(g, ad.affine(g, W, x, b)),
        "affine_sum": lambda g: dot(g, ad.affine_sum(g, b, [(W, x), (W, ad.tanh(g, x))])),
        "concat": lambda g: dot(g, ad.slice_(g, ad.concat(g, [x, g.parameter(b)]), 2, 6)),
        "tanh": lambda g: dot(g, ad.tanh(g, y)),
        "logistic": lambda g: dot(g, ad.logistic(g, y)),
        "relu": lambda g: dot(g, ad.relu(g, y)),
        "hadamard": lambda g: dot(g, ad.hadamard(g, y, b)),
        "add": lambda g: dot(g, ad.add(g, y, b, y)),
        "one_minus": lambda g: dot(g, ad.one_minus(g, y)),
        "lookup": lambda g: dot(g, ad.add(g, g.lookup(E, 1), g.lookup(E, 3), g.lookup(E, 1))),
        "masked_nll": lambda g: ad.masked_neg_log_softmax(g, ad.affine(g, W, x, b), [0, 2, 3], 2),
    }
    return {name: gradient_check(fn, store) for name, fn in losses.items()}


@pytest.mark.criterion(1)
def test_criterion_1_gradient_suite():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    errs = _op_checks(rng)

    for full in (False, True):
        store = ParameterCollection()
        P = LstmParams.create(store, "l", 3, 4, rng, full)
        randomize(store, rng)
        x, h0, c0 = (store.add(n, rng.normal(size=k)) for n, k in (("x", 3), ("h0", 4), ("c0", 4)))

        def step_loss(g):
            s = lstm_step(g, P, g.parameter(x), LstmState(g.parameter(h0), g.parameter(c0)))
            s = lstm_step(g, P, g.parameter(x), s)
            return ad.sum_all(g, [s.h, ad.hadamard(g, s.c, s.c)])

        errs[f"lstm_step(full={full})"] = gradient_check(step_loss, store)

    store = ParameterCollection()
    composer = Composer(store.add("U", rng.normal(size=(4, 11))), store.add("e", rng.normal(size=4)),
                        store.add("T", rng.normal(size=(3, 3))))
    h, d = store.add("h", rng.normal(size=4)), store.add("d", rng.normal(size=4))
    errs["compose"] = gradient_check(
        lambda g: ad.sum_all(g, [compose(g, composer, compose(g, composer, h, d, 0), d, 2)]), store)

    model = tiny_model(TOY, seed=4)
    randomize([model.W, model.d], rng)
    sb = ParameterCollection()
    s, b, a = (sb.add(n, rng.normal(size=model.dims.hidden_dim)) for n in "sba")
    errs["state_embedding"] = gradient_check(
        lambda g: ad.sum_all(g, [state_embedding(g, g.parameter(s), g.parameter(b), g.parameter(a), model)]),
        [model.W, model.d, s, b, a])

    sent = NONPROJ[CROSSING_INDEX]
    gold = oracle(sent.tree())
    for mode in (LOOKUP, CHARS):
        model = tiny_model(NONPROJ, mode=mode, use_pos=True, seed=11)
        kink_free_biases(model, sent)
        errs[f"sentence_loss({mode})"] = gradient_check(
            lambda g: sentence_loss(g, sent, model, gold_actions=gold), model.store,
            max_coords=4, rng=np.random.default_rng(5))
    seconds = time.perf_counter() - start

    worst = {name: max(e.values()) for name, e in errs.items()}
    name, value = max(worst.items(), key=lambda kv: kv[1])
    note(1, f"{len(worst)} checks, max relative error {value:.2e} ({name}), {seconds:.1f}s")
    assert value < FD_TOL, worst
    assert seconds < FD_BUDGET_SECONDS


# --- 2 ------------------------------------------------------------------------------------


@pytest.mark.criterion(2)
def test_criterion_2_gate_coupling():
    exact = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        store = ParameterCollection()
        P = LstmParams.create(store, "l", 5, 6, rng)
        randomize(store, rng, scale=2.0)
        g = Graph()
        prev = LstmState(g.constant(rng.normal(size=6)), g.constant(rng.normal(size=6)))
        s = lstm_step(g, P, g.constant(rng.normal(size=5) * 3), prev)
        exact += bool(np.all(s.i + s.f == 1.0))
    note(2, f"i + f == 1 exactly in {exact}/100 draws")
    assert exact == 100


# --- 3 ------------------------------------------------------------------------------------


@pytest.mark.criterion(3)
def test_criterion_3_stack_persistence():
    rng = np.random.default_rng(303)
    store = ParameterCollection()
    params = StackLstmParams.create(store, "S", 4, 5, 2, rng)
    randomize(store, rng)
    g = Graph()
    stack = StackLstm(params, g)
    history = [stack_embedding(stack).value.copy()]
    pops = matches = 0
    for _ in range(1000):
        if stack.depth > 0 and rng.random() < 0.45:
            stack_pop(stack)
            history.pop()
            pops += 1
            matches += stack_embedding(stack).value.tobytes() == history[-1].tobytes()
        else:
            stack_push(stack, g.constant(rng.normal(size=4)))
            history.append(stack_embedding(stack).value.copy())
    note(3, f"{matches}/{pops} pops restored the pre-push embedding bitwise")
    assert pops > 300 and matches == pops


# --- 4 ------------------------------------------------------------------------------------


@pytest.mark.criterion(4)
def test_criterion_4_oracle_round_trip():
    rng = np.random.default_rng(404)
    trees = [random_tree(rng, int(rng.integers(1, 15))) for _ in range(1200)]
    fixtures = [s.tree() for path in sorted(DATA.glob("*.conll")) for s in load_corpus(str(path))]
    ok = proj_ok = n_proj = 0
    for t in trees + fixtures:
        seq = oracle(t)
        ok += replay(len(t), seq) == t
        if is_projective(t.heads):
            n_proj += 1
            proj_ok += sum(a.kind == SWAP for a in seq) == 0 and len(seq) == 2 * len(t) + 1
    n_nonproj = len(trees) + len(fixtures) - n_proj
    note(4, f"{ok}/{len(trees) + len(fixtures)} reconstructed ({n_nonproj} non-projective); "
            f"{proj_ok}/{n_proj} projective with 0 swaps and 2n+1 actions")
    assert ok == len(trees) + len(fixtures)
    assert proj_ok == n_proj
    assert n_proj > 100 and n_nonproj > 100


# --- 5 ------------------------------------------------------------------------------------


@pytest.mark.criterion(5)
def test_criterion_5_normalization():
    rng = np.random.default_rng(505)
    worst = 0.0
    states = 0
    illegal_nonzero = 0
    for seed in range(5):
        model = tiny_model(TOY + NONPROJ, mode=CHARS if seed % 2 else LOOKUP, seed=seed, dim=8)
        randomize(model.store, rng, scale=1.5)
        for sent in (TOY + NONPROJ)[seed::5]:
            g = Graph()
            c = model.start(g, sent.forms)
            while not c.is_terminal():
                legal = legal_actions(c, model.actions)
                probs = score_actions(g, _current_state(g, c, model), legal, model)
                worst = max(worst, abs(float(probs[legal].sum()) - 1.0))
                illegal_nonzero += int(np.count_nonzero(np.delete(probs, legal)))
                states += 1
                apply_action(c, model.actions[legal[int(rng.integers(len(legal)))]])
    note(5, f"{states} random states, max |sum - 1| = {worst:.1e}, nonzero illegal entries = {illegal_nonzero}")
    assert worst <= NORMALIZATION_TOL and illegal_nonzero == 0


# --- 6 ------------------------------------------------------------------------------------


@pytest.mark.criterion(6)
def test_criterion_6_overfit(overfit_toy, overfit_nonproj):
    parts = []
    total = 0.0
    ok = True
    for mode, run in overfit_toy.items():
        first = next((r.epoch for r in run.history if r.dev_uas == 100.0), None)
        train_uas = evaluate(run.model, TOY).uas
        total += run.seconds
        parts.append(f"{mode}: UAS 100 at epoch {first}, final train UAS {train_uas:.2f}")
        ok &= first is not None and first <= OVERFIT_EPOCHS and train_uas == 100.0
    crossing = NONPROJ[CROSSING_INDEX]
    for mode, run in overfit_nonproj.items():
        tree, actions = greedy_parse(crossing, run.model)
        swaps = sum(a.kind == SWAP for a in actions)
        parts.append(f"{mode} crossing sentence exact={tree == crossing.tree()} swaps={swaps}")
        ok &= tree == crossing.tree() and swaps >= 1
    parts.append(f"toy training {total:.0f}s")
    note(6, "; ".join(parts))
    assert ok
    assert total < OVERFIT_BUDGET_SECONDS


# --- 7 ------------------------------------------------------------------------------------


@pytest.mark.criterion(7)
def test_criterion_7_oov_contract():
    forms = ["zorpak", "mivlek"]
    assert not {f for s in TOY for f in s.forms} & set(forms)
    vectors = {}
    for mode in (LOOKUP, CHARS):
        model = tiny_model(TOY, mode=mode, use_pos=True, seed=7, dim=8)
        vectors[mode] = [embed_token(Graph(), f, "NOUN", model.rep, model.vocab).value for f in forms]
    words_same = vectors[LOOKUP][0].tobytes() == vectors[LOOKUP][1].tobytes()
    chars_differ = not np.array_equal(*vectors[CHARS])

    oov_train = load_corpus(str(DATA / "toy_oov_train.conll"))
    oov_dev = load_corpus(str(DATA / "toy_oov_dev.conll"))
    config = TrainConfig(max_epochs=50, patience=50, learning_rate=0.2,
                         representation=RepresentationConfig(mode=CHARS))
    model = train(oov_train, oov_train, config)
    oov_rate = np.mean([not model.vocab.is_known(f) for s in oov_dev for f in s.forms])
    normal = evaluate(model, oov_dev)
    ablated = evaluate(model, oov_dev, oov_unk=True)
    note(7, f"words identical={words_same}, chars distinct={chars_differ}; OOV-heavy dev "
            f"({100 * oov_rate:.0f}% OOV) LAS {normal.las:.2f} -> {ablated.las:.2f} with --oov-as-unk")
    assert words_same and chars_differ
    assert ablated.las < normal.las


# --- 8 ------------------------------------------------------------------------------------


def _turkish_treebank():
    spec = importlib.util.find_spec("turkish_treebanks")
    if spec is None or spec.origin is None:
        return None
    path = Path(spec.origin).parent.parent / "data" / "web.conllu"
    return path if path.exists() else None


@pytest.mark.slow
@pytest.mark.criterion(8)
def test_criterion_8_desk_scale_chars_vs_words():
    path = _turkish_treebank()
    if path is None:
        pytest.skip("Turkish treebank package not installed (pip install turkish-treebanks)")
    sentences = load_corpus(str(path))
    tr, dev = sentences[:DESK_TRAIN], sentences[DESK_TRAIN : DESK_TRAIN + DESK_DEV]
    start = time.perf_counter()
    # one seed is too noisy for the sign of a few-point gap, so compare means over seeds
    runs = {LOOKUP: [], CHARS: []}
    for seed in DESK_SEEDS:
        for mode in (LOOKUP, CHARS):
            config = TrainConfig(max_epochs=DESK_EPOCHS, patience=DESK_EPOCHS, seed=seed,
                                 representation=RepresentationConfig(mode=mode))
            report = evaluate(train(tr, dev, config), dev)
            runs[mode].append((report.uas, report.las))
    seconds = time.perf_counter() - start
    scores = {mode: tuple(np.mean(r, axis=0)) for mode, r in runs.items()}
    per_seed = ", ".join(f"{w[1]:.2f}/{c[1]:.2f}" for w, c in zip(runs[LOOKUP], runs[CHARS]))
    note(8, f"Turkish web treebank {len(tr)}/{len(dev)} sentences, {DESK_EPOCHS} epochs, "
            f"mean of seeds {list(DESK_SEEDS)}: Words UAS/LAS {scores[LOOKUP][0]:.2f}/{scores[LOOKUP][1]:.2f}, "
            f"Chars {scores[CHARS][0]:.2f}/{scores[CHARS][1]:.2f}; per-seed LAS Words/Chars {per_seed}; "
            f"{seconds / 60:.0f} min")
    assert scores[CHARS][1] >= scores[LOOKUP][1]
    assert seconds < DESK_BUDGET_SECONDS


# --- 9 ------------------------------------------------------------------------------------


@pytest.mark.criterion(9)
def test_criterion_9_determinism_and_persistence(overfit_toy):
    rep = RepresentationConfig(mode=CHARS, word_dim=8, char_dim=6, char_rep_dim=8, input_dim=16)
    config = TrainConfig(max_epochs=2, seed=5, representation=rep, dims=ParserDims(16, 2, 6, 16))
    blobs = [model_to_bytes(train(TOY, TOY_DEV, config)) for _ in range(2)]
    same_bytes = blobs[0] == blobs[1]

    model = overfit_toy[CHARS].model
    loaded = model_from_bytes(model_to_bytes(model))
    same_parses = parse_corpus(model, TOY_DEV) == parse_corpus(loaded, TOY_DEV)
    a, b = evaluate(model, TOY_DEV), evaluate(loaded, TOY_DEV)
    note(9, f"seeded retrain bytes identical={same_bytes}; reloaded model parses identical={same_parses}, "
            f"toy dev UAS/LAS {a.uas:.2f}/{a.las:.2f} vs {b.uas:.2f}/{b.las:.2f}")
    assert same_bytes and same_parses and (a.uas, a.las) == (b.uas, b.las)


# --- 10 -----------------------------------------------------------------------------------


@pytest.mark.criterion(10)
def test_criterion_10_evaluator_fixtures():
    def load(name):
        return load_corpus(str(DATA / name))

    cases = {
        "identity": (attachment_scores(TOY, TOY), ("100.00", "100.00")),
        "60/40": (attachment_scores(load("eval_gold.conll"), load("eval_system.conll")), ("60.00", "40.00")),
        "punct include": (attachment_scores(load("punct_gold.conll"), load("punct_system.conll"), INCLUDE),
                          ("75.00", "75.00")),
        "punct exclude": (attachment_scores(load("punct_gold.conll"), load("punct_system.conll"), EXCLUDE),
                          ("100.00", "100.00")),
    }
    got = {name: (r.as_dict()["uas"], r.as_dict()["las"]) for name, (r, _) in cases.items()}
    note(10, ", ".join(f"{name} {u}/{l}" for name, (u, l) in got.items()))
    assert got == {name: want for name, (_, want) in cases.items()}
