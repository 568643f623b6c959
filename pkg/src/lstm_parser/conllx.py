"""CoNLL-X treebank reading and writing."""

from __future__ import annotations

import sys
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from typing import IO, Iterable, Iterator, Sequence

from .errors import ConllFormatError, ContractError
from .transitions import DependencyTree

FIELDS = ("id", "form", "lemma", "cpostag", "postag", "feats", "head", "deprel", "phead", "pdeprel")
POS_COLUMNS = ("postag", "cpostag")


@dataclass
class ConllToken:
    id: int
    form: str
    lemma: str = "_"
    cpostag: str = "_"
    postag: str = "_"
    feats: str = "_"
    head: int | None = None  # None when the column is "_"
    deprel: str = "_"
    phead: str = "_"
    pdeprel: str = "_"

    def columns(self) -> list[str]:
        head = "_" if self.head is None else str(self.head)
        return [str(self.id), self.form, self.lemma, self.cpostag, self.postag,
                self.feats, head, self.deprel, self.phead, self.pdeprel]


@dataclass
class Sentence:
    tokens: list[ConllToken]
    comments: list[str] = field(default_factory=list)
    pos_column: str = "postag"

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def forms(self) -> list[str]:
        return [t.form for t in self.tokens]

    @property
    def pos(self) -> list[str]:
        return [getattr(t, self.pos_column) for t in self.tokens]

    @property
    def heads(self) -> list[int | None]:
        return [t.head for t in self.tokens]

    @property
    def labels(self) -> list[str]:
        return [t.deprel for t in self.tokens]

    @property
    def has_tree(self) -> bool:
        return all(t.head is not None for t in self.tokens)

    def tree(self) -> DependencyTree:
        if not self.has_tree:
            raise ContractError("sentence has unannotated heads")
        return DependencyTree(list(self.heads), list(self.labels))

    def with_tree(self, tree: DependencyTree) -> "Sentence":
        if len(tree) != len(self.tokens):
            raise ContractError(f"tree has {len(tree)} tokens, sentence has {len(self.tokens)}")
        tokens = [replace(t, head=h, deprel=r) for t, h, r in zip(self.tokens, tree.heads, tree.labels)]
        return Sentence(tokens, list(self.comments), self.pos_column)


def _parse_token(cols: list[str], lineno: int, expected_id: int) -> ConllToken:
    if len(cols) != 10:
        raise ConllFormatError(f"expected 10 tab-separated columns, found {len(cols)}", lineno)
    raw_id = cols[0]
    if "-" in raw_id or "." in raw_id:
        raise ConllFormatError(f"multiword or empty-node rows are not supported (id {raw_id!r})", lineno)
    try:
        tid = int(raw_id)
    except ValueError:
        raise ConllFormatError(f"token id {raw_id!r} is not an integer", lineno) from None
    if tid != expected_id:
        raise ConllFormatError(f"token id {tid} out of sequence, expected {expected_id}", lineno)
    if cols[6] == "_":
        head = None
    else:
        try:
            head = int(cols[6])
        except ValueError:
            raise ConllFormatError(f"head {cols[6]!r} is not an integer", lineno) from None
        if head < 0:
            raise ConllFormatError(f"negative head {head}", lineno)
    return ConllToken(tid, cols[1], cols[2], cols[3], cols[4], cols[5], head, cols[7], cols[8], cols[9])


def read_conllx(stream: IO[str] | Iterable[str], pos_column: str = "postag") -> list[Sentence]:
    if pos_column not in POS_COLUMNS:
        raise ContractError(f"pos_column must be one of {POS_COLUMNS}")
    sentences: list[Sentence] = []
    tokens: list[ConllToken] = []
    comments: list[str] = []
    head_lines: list[int] = []

    def finish():
        n = len(tokens)
        for tok, ln in zip(tokens, head_lines):
            if tok.head is not None and tok.head > n:
                raise ConllFormatError(f"head {tok.head} outside sentence of length {n}", ln)
        sentences.append(Sentence(list(tokens), list(comments), pos_column))
        tokens.clear()
        comments.clear()
        head_lines.clear()

    for lineno, line in enumerate(stream, start=1):
        line = line.rstrip("\r\n")
        if not line.strip():
            if tokens:
                finish()
            elif comments:
                comments.clear()
            continue
        if line.startswith("#"):
            if not tokens:
                comments.append(line)
            continue
        tokens.append(_parse_token(line.split("\t"), lineno, len(tokens) + 1))
        head_lines.append(lineno)
    if tokens:
        finish()
    return sentences


def write_conllx(
    sentences: Sequence[Sentence],
    trees: Sequence[DependencyTree] | None,
    stream: IO[str],
) -> None:
    """Write sentences, substituting predicted heads/labels when ``trees`` is given."""
    if trees is not None and len(trees) != len(sentences):
        raise ContractError(f"{len(trees)} trees for {len(sentences)} sentences")
    for k, sent in enumerate(sentences):
        if trees is not None:
            sent = sent.with_tree(trees[k])
        for c in sent.comments:
            stream.write(c + "\n")
        for tok in sent.tokens:
            stream.write("\t".join(tok.columns()) + "\n")
        stream.write("\n")


@contextmanager
def open_text(path: str, mode: str = "r") -> Iterator[IO[str]]:
    """Open ``path`` as UTF-8 text; ``-`` means stdin/stdout."""
    if path == "-":
        yield sys.stdin if "r" in mode else sys.stdout
        return
    with open(path, mode, encoding="utf-8", newline="\n" if "w" in mode else None) as f:
        yield f


def load_corpus(path: str, pos_column: str = "postag") -> list[Sentence]:
    with open_text(path) as f:
        return read_conllx(f, pos_column)
