"""The stack-LSTM parser: state embedding, action scoring, greedy decoding,
per-sentence loss, and the SGD training loop."""

from __future__ import annotations

import hashlib
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Graph, Node, ParameterCollection, SgdState
from .conllx import Sentence
from .errors import ContractError, OracleError
from .evaluation import INCLUDE, EvalReport, attachment_scores
from .recurrent import StackLstm, StackLstmParams
from .representations import CharCache, RepParams, RepresentationConfig, Vocabulary, embed_token, oov_as_unk
from .transitions import (
    Action,
    ActionSet,
    Composer,
    Configuration,
    DependencyTree,
    NeuralState,
    apply_action,
    initial_configuration,
    legal_actions,
    max_transitions,
    oracle,
)

log = logging.getLogger(__name__)


@dataclass
class ParserDims:
    hidden_dim: int = 100
    layers: int = 2
    action_dim: int = 20
    state_dim: int = 100
    full_peepholes: bool = False

    def __post_init__(self):
        for name in ("hidden_dim", "layers", "action_dim", "state_dim"):
            if getattr(self, name) <= 0:
                raise ContractError(f"{name} must be positive")


class ParserModel:
    """Every trainable parameter plus the vocabulary and configuration."""

    def __init__(
        self,
        vocab: Vocabulary,
        rep_config: RepresentationConfig | None = None,
        dims: ParserDims | None = None,
        seed: int = 1,
    ):
        self.vocab = vocab
        self.rep_config = rep_config or RepresentationConfig()
        self.dims = dims or ParserDims()
        self.seed = seed
        self.train_config: TrainConfig | None = None
        self.actions = ActionSet(vocab.relations)
        self.store = ParameterCollection()
        rng = np.random.default_rng(seed)
        d, x_dim = self.dims, self.rep_config.input_dim
        peep = d.full_peepholes
        store = self.store
        self.rep = RepParams.create(store, self.rep_config, vocab, rng, peep)
        self.stack_lstm = StackLstmParams.create(store, "S", x_dim, d.hidden_dim, d.layers, rng, peep)
        self.buffer_lstm = StackLstmParams.create(store, "B", x_dim, d.hidden_dim, d.layers, rng, peep)
        self.action_lstm = StackLstmParams.create(store, "A", d.action_dim, d.hidden_dim, d.layers, rng, peep)
        self.W = store.add_glorot("state.W", (d.state_dim, 3 * d.hidden_dim), rng)
        self.d = store.add_zeros("state.d", (d.state_dim,))
        self.G = store.add_glorot("scorer.G", (len(self.actions), d.state_dim), rng)
        self.q = store.add_zeros("scorer.q", (len(self.actions),))
        self.composer = Composer(
            U=store.add_glorot("compose.U", (x_dim, 2 * x_dim + d.action_dim), rng),
            e=store.add_zeros("compose.e", (x_dim,)),
            table=store.add("actions.E", rng.uniform(-0.1, 0.1, (len(self.actions), d.action_dim))),
        )

    @property
    def use_pos(self) -> bool:
        return self.rep_config.use_pos

    def parameter_hash(self) -> str:
        h = hashlib.sha256()
        for p in self.store:
            h.update(p.name.encode())
            h.update(p.value.tobytes())
        return h.hexdigest()

    def start(
        self,
        g: Graph,
        forms: Sequence[str],
        pos: Sequence[str] | None = None,
        train_mode: bool = False,
        rng: np.random.Generator | None = None,
        cache: CharCache | None = None,
    ) -> Configuration:
        """Initial configuration with embedded tokens and live stack LSTMs."""
        if len(forms) == 0:
            raise ContractError("cannot parse an empty sentence")
        if pos is None:
            pos = [None] * len(forms)
        vecs = [
            embed_token(g, f, t, self.rep, self.vocab, train_mode, rng, cache) for f, t in zip(forms, pos)
        ]
        root = embed_token(g, None, None, self.rep, self.vocab, train_mode, rng, cache)
        neural = NeuralState(
            graph=g,
            stack=StackLstm(self.stack_lstm, g),
            buffer=StackLstm(self.buffer_lstm, g),
            history=StackLstm(self.action_lstm, g),
            composer=self.composer,
            actions=self.actions,
        )
        return initial_configuration(forms, vecs, root, neural)


def state_embedding(g: Graph, s: Node, b: Node, a: Node, model: ParserModel) -> Node:
    """``relu(W [s; b; a] + d)``."""
    return ad.relu(g, ad.affine(g, model.W, ad.concat(g, [s, b, a]), model.d))


def action_scores(g: Graph, p: Node, model: ParserModel) -> Node:
    """Unnormalized ``G p + q`` for every action."""
    return ad.affine(g, model.G, p, model.q)


def score_actions(g: Graph, p: Node, legal: Sequence[int], model: ParserModel) -> np.ndarray:
    """Probability of every action; illegal actions get exactly 0."""
    return ad.masked_softmax(action_scores(g, p, model).value, legal)


def _current_state(g: Graph, c: Configuration, model: ParserModel) -> Node:
    nn = c.neural
    return state_embedding(g, nn.stack.embedding(), nn.buffer.embedding(), nn.history.embedding(), model)


def _inputs(sentence, model: ParserModel, oov_unk: bool):
    forms = list(sentence.forms)
    if oov_unk:
        forms = oov_as_unk(forms, model.vocab)
    pos = list(sentence.pos) if model.use_pos else None
    return forms, pos


def greedy_parse(
    sentence: Sentence,
    model: ParserModel,
    cache: CharCache | None = None,
    oov_unk: bool = False,
) -> tuple[DependencyTree, list[Action]]:
    """Repeatedly take the most probable legal action (lowest id on ties)."""
    forms, pos = _inputs(sentence, model, oov_unk)
    g = Graph()
    c = model.start(g, forms, pos, cache=cache)
    n = len(forms)
    limit = max_transitions(n)
    while not c.is_terminal():
        if len(c.history) >= limit:
            raise ContractError("decoder exceeded the transition bound")
        legal = legal_actions(c, model.actions)
        scores = action_scores(g, _current_state(g, c, model), model).value
        best = max(legal, key=lambda k: (scores[k], -k))
        apply_action(c, model.actions[best])
    return c.tree(), list(c.history)


def sentence_loss(
    g: Graph,
    sentence: Sentence,
    model: ParserModel,
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
    gold_actions: Sequence[Action] | None = None,
) -> Node:
    """Negative log-likelihood of the oracle action sequence."""
    if gold_actions is None:
        gold_actions = oracle(sentence.tree())
    forms, pos = _inputs(sentence, model, False)
    c = model.start(g, forms, pos, train_mode=train_mode, rng=rng)
    losses = []
    for action in gold_actions:
        legal = legal_actions(c, model.actions)
        scores = action_scores(g, _current_state(g, c, model), model)
        losses.append(ad.masked_neg_log_softmax(g, scores, legal, model.actions.index(action)))
        apply_action(c, action)
    if not c.is_terminal():
        raise OracleError("gold action sequence ended before a terminal configuration")
    return ad.sum_all(g, losses)


def parse_corpus(
    model: ParserModel,
    sentences: Sequence[Sentence],
    oov_unk: bool = False,
    use_cache: bool = True,
    workers: int = 1,
) -> list[DependencyTree]:
    """Greedy-parse every sentence; output order follows the input."""
    if workers > 1 and len(sentences) > 1:
        chunks = [list(sentences[k::workers]) for k in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_parse_chunk, [(model, ch, oov_unk, use_cache) for ch in chunks]))
        out: list[DependencyTree] = [None] * len(sentences)  # type: ignore[list-item]
        for k, part in enumerate(parts):
            out[k::workers] = part
        return out
    cache = CharCache() if use_cache else None
    return [greedy_parse(s, model, cache, oov_unk)[0] for s in sentences]


def _parse_chunk(args):
    model, sentences, oov_unk, use_cache = args
    return parse_corpus(model, sentences, oov_unk, use_cache, workers=1)


def evaluate(
    model: ParserModel,
    sentences: Sequence[Sentence],
    punct_mode: str = INCLUDE,
    oov_unk: bool = False,
    workers: int = 1,
) -> EvalReport:
    trees = parse_corpus(model, sentences, oov_unk=oov_unk, workers=workers)
    predicted = [s.with_tree(t) for s, t in zip(sentences, trees)]
    return attachment_scores(sentences, predicted, punct_mode)


@dataclass
class TrainConfig:
    max_epochs: int = 30
    patience: int = 5
    eval_every: int = 1
    seed: int = 1
    learning_rate: float = 0.1
    decay: float = 0.1
    clip: float | None = 5.0
    punct: str = INCLUDE
    representation: RepresentationConfig = field(default_factory=RepresentationConfig)
    dims: ParserDims = field(default_factory=ParserDims)

    def __post_init__(self):
        if self.patience < 1:
            raise ContractError("patience must be at least 1")
        if self.eval_every < 1:
            raise ContractError("eval_every must be at least 1")
        if self.max_epochs < 1:
            raise ContractError("max_epochs must be at least 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d["representation"] = RepresentationConfig(**d["representation"])
        d["dims"] = ParserDims(**d["dims"])
        return cls(**d)


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    learning_rate: float
    seconds: float
    dev_uas: float | None = None
    dev_las: float | None = None
    improved: bool = False


def train(
    corpus: Sequence[Sentence],
    dev: Sequence[Sentence],
    config: TrainConfig,
    model: ParserModel | None = None,
    history: list[EpochRecord] | None = None,
    on_epoch: Callable[[EpochRecord], None] | None = None,
) -> ParserModel:
    """Online SGD over sentences; keeps the parameters with the best dev UAS."""
    if len(corpus) == 0:
        raise ContractError("training corpus is empty")
    if model is None:
        vocab = Vocabulary.build(corpus)
        model = ParserModel(vocab, config.representation, config.dims, config.seed)
    rng = np.random.default_rng([config.seed, 7919])

    examples = []
    skipped = 0
    for k, sent in enumerate(corpus):
        try:
            examples.append((sent, oracle(sent.tree())))
        except (OracleError, ContractError) as exc:
            skipped += 1
            log.warning("event=skip_sentence index=%d reason=%s", k, str(exc).replace(" ", "_"))
    if skipped:
        log.warning("event=oracle_failures count=%d", skipped)
    if not examples:
        raise OracleError("no training sentence could be converted to an action sequence")

    sgd = SgdState(config.learning_rate, config.decay, clip=config.clip)
    params = list(model.store)
    # dev UAS decides; LAS only breaks ties between equal UAS
    best = (-1.0, -1.0)
    best_values = model.store.snapshot()
    bad_evals = 0
    for epoch in range(1, config.max_epochs + 1):
        start = time.perf_counter()
        order = rng.permutation(len(examples))
        total = 0.0
        for idx in order:
            sent, gold = examples[idx]
            g = Graph()
            loss = sentence_loss(g, sent, model, train_mode=True, rng=rng, gold_actions=gold)
            total += float(loss.value)
            ad.backward(g, loss)
            ad.sgd_step(params, sgd)
        rec = EpochRecord(epoch, total, sgd.rate, time.perf_counter() - start)
        sgd.next_epoch()
        if epoch % config.eval_every == 0 or epoch == config.max_epochs:
            report = evaluate(model, dev, config.punct)
            rec.dev_uas, rec.dev_las = report.uas, report.las
            if (report.uas, report.las) > best:
                best = (report.uas, report.las)
                best_values = model.store.snapshot()
                bad_evals = 0
                rec.improved = True
            else:
                bad_evals += 1
        log.info(
            "event=epoch epoch=%d loss=%.4f lr=%.5f seconds=%.1f dev_uas=%s dev_las=%s",
            rec.epoch, rec.loss, rec.learning_rate, rec.seconds,
            "-" if rec.dev_uas is None else f"{rec.dev_uas:.2f}",
            "-" if rec.dev_las is None else f"{rec.dev_las:.2f}",
        )
        if history is not None:
            history.append(rec)
        if on_epoch is not None:
            on_epoch(rec)
        if bad_evals >= config.patience:
            log.info("event=early_stop epoch=%d best_dev_uas=%.2f best_dev_las=%.2f", epoch, *best)
            break
        if best >= (100.0, 100.0):
            # no later evaluation can improve on a perfect score
            log.info("event=early_stop epoch=%d reason=perfect_dev", epoch)
            break
    model.store.restore(best_values)
    model.train_config = config
    return model
