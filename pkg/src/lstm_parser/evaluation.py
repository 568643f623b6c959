"""Unlabeled and labeled attachment scores."""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from typing import Sequence

from .errors import ContractError

INCLUDE = "include"
EXCLUDE = "exclude"


def is_punctuation(form: str) -> bool:
    """True when every character has a Unicode P* category."""
    return bool(form) and all(unicodedata.category(ch).startswith("P") for ch in form)


@dataclass
class SentenceScore:
    scored: int
    correct_heads: int
    correct_labels: int


@dataclass
class EvalReport:
    total: int = 0
    scored: int = 0
    excluded: int = 0
    correct_heads: int = 0
    correct_labels: int = 0
    sentences: list[SentenceScore] = field(default_factory=list)

    @property
    def uas(self) -> float:
        return 100.0 * self.correct_heads / self.scored if self.scored else 0.0

    @property
    def las(self) -> float:
        return 100.0 * self.correct_labels / self.scored if self.scored else 0.0

    def as_dict(self) -> dict[str, str]:
        return {
            "uas": f"{self.uas:.2f}",
            "las": f"{self.las:.2f}",
            "tokens": str(self.total),
            "scored": str(self.scored),
            "excluded_punct": str(self.excluded),
            "correct_heads": str(self.correct_heads),
            "correct_labels": str(self.correct_labels),
            "sentences": str(len(self.sentences)),
        }

    def format(self) -> str:
        lines = [
            f"Labeled   attachment score: {self.correct_labels} / {self.scored} * 100 = {self.las:.2f} %",
            f"Unlabeled attachment score: {self.correct_heads} / {self.scored} * 100 = {self.uas:.2f} %",
            "",
        ]
        lines += [f"{k}={v}" for k, v in self.as_dict().items()]
        return "\n".join(lines)


def attachment_scores(gold: Sequence, predicted: Sequence, punct_mode: str = INCLUDE) -> EvalReport:
    """Score ``predicted`` against ``gold``.

    Both are sequences of sentences exposing ``forms``, ``heads`` and
    ``labels`` (``conllx.Sentence`` does). In ``exclude`` mode tokens whose
    form is entirely punctuation are not scored.
    """
    if punct_mode not in (INCLUDE, EXCLUDE):
        raise ContractError(f"punct_mode must be {INCLUDE!r} or {EXCLUDE!r}")
    if len(gold) != len(predicted):
        raise ContractError(f"{len(gold)} gold sentences vs {len(predicted)} predicted")
    report = EvalReport()
    for k, (gs, ps) in enumerate(zip(gold, predicted)):
        if len(gs.heads) != len(ps.heads):
            raise ContractError(f"sentence {k + 1}: {len(gs.heads)} gold tokens vs {len(ps.heads)} predicted")
        s = SentenceScore(0, 0, 0)
        for form, gh, gl, ph, pl in zip(gs.forms, gs.heads, gs.labels, ps.heads, ps.labels):
            report.total += 1
            if punct_mode == EXCLUDE and is_punctuation(form):
                report.excluded += 1
                continue
            s.scored += 1
            if gh == ph:
                s.correct_heads += 1
                if gl == pl:
                    s.correct_labels += 1
        report.scored += s.scored
        report.correct_heads += s.correct_heads
        report.correct_labels += s.correct_labels
        report.sentences.append(s)
    return report
