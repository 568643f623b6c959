"""Vocabularies and per-token input vectors (word lookup or character BiLSTM)."""

from __future__ import annotations

import threading
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Graph, Node, Parameter, ParameterCollection
from .errors import ContractError
from .recurrent import CharBiLstm, bilstm_encode

UNK = "<UNK>"
ROOT = "<ROOT>"

LOOKUP = "lookup"
CHARS = "chars"


class Vocabulary:
    """Symbol tables for words, characters, POS tags and relations.

    Words reserve ids 0 (unknown) and 1 (root); characters and tags reserve
    0 for unknown; tags also reserve 1 for the root.
    """

    UNK_WORD = 0
    ROOT_WORD = 1
    UNK_CHAR = 0
    UNK_POS = 0
    ROOT_POS = 1

    def __init__(self):
        self.words: list[str] = [UNK, ROOT]
        self.word_freq: list[int] = [0, 0]
        self.chars: list[str] = [UNK]
        self.pos: list[str] = [UNK, ROOT]
        self.relations: list[str] = []
        self._reindex()

    def _reindex(self) -> None:
        self.word_ids = {w: k for k, w in enumerate(self.words)}
        self.char_ids = {c: k for k, c in enumerate(self.chars)}
        self.pos_ids = {p: k for k, p in enumerate(self.pos)}
        self.relation_ids = {r: k for k, r in enumerate(self.relations)}

    @classmethod
    def build(cls, sentences: Iterable) -> "Vocabulary":
        """Collect symbols in first-seen order from annotated sentences."""
        v = cls()
        counts: Counter[str] = Counter()
        seen_any = False
        for sent in sentences:
            seen_any = True
            for form, tag, rel in zip(sent.forms, sent.pos, sent.labels):
                if form not in v.word_ids:
                    v.word_ids[form] = len(v.words)
                    v.words.append(form)
                counts[form] += 1
                for ch in form:
                    if ch not in v.char_ids:
                        v.char_ids[ch] = len(v.chars)
                        v.chars.append(ch)
                if tag not in v.pos_ids:
                    v.pos_ids[tag] = len(v.pos)
                    v.pos.append(tag)
                if rel not in v.relation_ids:
                    v.relation_ids[rel] = len(v.relations)
                    v.relations.append(rel)
        if not seen_any:
            raise ContractError("cannot build a vocabulary from an empty corpus")
        v.word_freq = [counts.get(w, 0) for w in v.words]
        return v

    def word_id(self, form: str) -> int:
        return self.word_ids.get(form, self.UNK_WORD)

    def char_id(self, ch: str) -> int:
        return self.char_ids.get(ch, self.UNK_CHAR)

    def pos_id(self, tag: str) -> int:
        return self.pos_ids.get(tag, self.UNK_POS)

    def is_known(self, form: str) -> bool:
        return form in self.word_ids and self.word_ids[form] > self.ROOT_WORD

    def is_singleton(self, word_id: int) -> bool:
        return self.word_freq[word_id] == 1

    def to_dict(self) -> dict:
        return {
            "words": self.words,
            "word_freq": self.word_freq,
            "chars": self.chars,
            "pos": self.pos,
            "relations": self.relations,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabulary":
        v = cls()
        v.words = list(d["words"])
        v.word_freq = [int(x) for x in d["word_freq"]]
        v.chars = list(d["chars"])
        v.pos = list(d["pos"])
        v.relations = list(d["relations"])
        v._reindex()
        return v

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.to_dict() == other.to_dict()


@dataclass
class RepresentationConfig:
    mode: str = CHARS
    use_pos: bool = False
    word_dim: int = 32
    char_dim: int = 50
    char_rep_dim: int = 100
    pos_dim: int = 12
    input_dim: int = 100
    unk_replacement: bool = True
    unk_prob: float = 0.5

    def __post_init__(self):
        if self.mode not in (LOOKUP, CHARS):
            raise ContractError(f"unknown representation mode {self.mode!r}")
        for name in ("word_dim", "char_dim", "char_rep_dim", "pos_dim", "input_dim"):
            if getattr(self, name) <= 0:
                raise ContractError(f"{name} must be positive")
        if self.char_rep_dim % 2:
            raise ContractError("char_rep_dim must split evenly across the two directions")

    @property
    def projection_width(self) -> int:
        base = self.word_dim if self.mode == LOOKUP else self.char_rep_dim
        return base + (self.pos_dim if self.use_pos else 0)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RepParams:
    config: RepresentationConfig
    V: Parameter
    b: Parameter
    word_table: Parameter | None = None
    pos_table: Parameter | None = None
    chars: CharBiLstm | None = None
    root_chars: Parameter | None = None  # stands in for the BiLSTM output of the root

    @classmethod
    def create(
        cls,
        store: ParameterCollection,
        config: RepresentationConfig,
        vocab: Vocabulary,
        rng: np.random.Generator,
        full_peepholes: bool = False,
    ) -> "RepParams":
        p = cls(
            config,
            V=store.add_glorot("rep.V", (config.input_dim, config.projection_width), rng),
            b=store.add_zeros("rep.b", (config.input_dim,)),
        )
        if config.mode == LOOKUP:
            p.word_table = store.add("rep.words", rng.uniform(-0.1, 0.1, (len(vocab.words), config.word_dim)))
        else:
            half = config.char_rep_dim // 2
            p.chars = CharBiLstm.create(store, "rep.char", len(vocab.chars), config.char_dim, half, rng, full_peepholes)
            p.root_chars = store.add("rep.root_chars", rng.uniform(-0.1, 0.1, config.char_rep_dim))
        if config.use_pos:
            p.pos_table = store.add("rep.pos", rng.uniform(-0.1, 0.1, (len(vocab.pos), config.pos_dim)))
        return p


def _pos_segment(g: Graph, params: RepParams, vocab: Vocabulary, pos: str | None, root: bool) -> list[Node]:
    if not params.config.use_pos:
        return []
    if root:
        return [g.lookup(params.pos_table, vocab.ROOT_POS)]
    if pos is None:
        raise ContractError("this model uses POS tags but none was given")
    return [g.lookup(params.pos_table, vocab.pos_id(pos))]


def embed_word_lookup(
    g: Graph,
    word: str | None,
    pos: str | None,
    params: RepParams,
    vocab: Vocabulary,
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
) -> Node:
    """``relu(V [E_w[word]; E_t[pos]] + b)``; ``word=None`` embeds the root.

    In training, a word seen once is replaced by UNK with probability
    ``unk_prob``.
    """
    cfg = params.config
    if cfg.mode != LOOKUP:
        raise ContractError("embed_word_lookup needs a lookup-mode model")
    root = word is None
    wid = vocab.ROOT_WORD if root else vocab.word_id(word)
    if (
        train_mode
        and cfg.unk_replacement
        and not root
        and vocab.is_singleton(wid)
        and rng is not None
        and rng.random() < cfg.unk_prob
    ):
        wid = vocab.UNK_WORD
    parts = [g.lookup(params.word_table, wid)] + _pos_segment(g, params, vocab, pos, root)
    return ad.relu(g, ad.affine(g, params.V, ad.concat(g, parts), params.b))


class CharCache:
    """Thread-safe memo of composed character vectors keyed by (form, POS)."""

    def __init__(self):
        self._data: dict[tuple[str, str | None], np.ndarray] = {}
        self._lock = threading.Lock()

    def get(self, key):
        return self._data.get(key)

    def put(self, key, value: np.ndarray) -> None:
        with self._lock:
            self._data.setdefault(key, value)

    def __len__(self) -> int:
        return len(self._data)


def char_ids(form: str, vocab: Vocabulary) -> list[int]:
    return [vocab.char_id(ch) for ch in form]


def embed_word_chars(
    g: Graph,
    word: str | None,
    pos: str | None,
    params: RepParams,
    vocab: Vocabulary,
    cache: CharCache | None = None,
) -> Node:
    """``relu(V [fw; bw; E_t[pos]] + b)`` where fw/bw come from the character BiLSTM.

    ``word=None`` embeds the root. With a cache, the result is memoized and
    returned as a constant (no gradient), which is only meant for decoding.
    """
    cfg = params.config
    if cfg.mode != CHARS:
        raise ContractError("embed_word_chars needs a chars-mode model")
    root = word is None
    if not root and len(word) == 0:
        raise ContractError("cannot embed an empty word form")
    key = (word, pos if cfg.use_pos else None)
    if cache is not None:
        hit = cache.get(key)
        if hit is not None:
            return g.constant(hit)
    if root:
        parts = [g.parameter(params.root_chars)]
    else:
        fw, bw = bilstm_encode(g, params.chars, char_ids(word, vocab))
        parts = [fw, bw]
    parts += _pos_segment(g, params, vocab, pos, root)
    x = ad.relu(g, ad.affine(g, params.V, ad.concat(g, parts), params.b))
    if cache is not None:
        cache.put(key, x.value.copy())
    return x


def embed_token(
    g: Graph,
    word: str | None,
    pos: str | None,
    params: RepParams,
    vocab: Vocabulary,
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
    cache: CharCache | None = None,
) -> Node:
    if params.config.mode == LOOKUP:
        return embed_word_lookup(g, word, pos, params, vocab, train_mode, rng)
    return embed_word_chars(g, word, pos, params, vocab, cache)


def oov_as_unk(forms: Sequence[str], vocab: Vocabulary) -> list[str]:
    """Replace every out-of-vocabulary form with the literal string ``UNK``."""
    return [f if vocab.is_known(f) else "UNK" for f in forms]
