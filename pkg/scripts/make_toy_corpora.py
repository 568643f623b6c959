"""Regenerate the toy CoNLL-X fixtures under tests/data.

The toy language is agglutinative and verb-final: noun phrases carry a case
suffix that alone decides their relation to the verb (bare = nsubj, -i = obj,
-a = iobj, -de = obl; every stem ends in a consonant so the suffixes never
collide with stems), arguments appear in scrambled order, an optional
adjective modifies the following noun, and the sentence ends with a verb
(past -di or progressive -iyor) followed by a full stop.

Usage: python scripts/make_toy_corpora.py [OUTPUT_DIR]
"""

from __future__ import annotations

import random
import sys
from pathlib import Path

NOUNS = ["kitap", "adam", "kadin", "cocuk", "okul", "ev", "kopek", "agac", "defter", "bahcivan"]
ONSETS = "bcdgklmnprstyz"
VOWELS = "aeiou"
CODAS = "klmnrst"

ADJECTIVES = ["buyuk", "kucuk", "guzel", "eski"]
VERBS = ["gel", "gor", "ver", "al", "sev", "oku", "bul", "yaz"]
TENSES = ["di", "iyor"]
CASES = [("", "nsubj"), ("i", "obj"), ("a", "iobj"), ("de", "obl")]


def _row(idx, form, cpos, pos, head, rel):
    return [str(idx), form, "_", cpos, pos, "_", str(head), rel, "_", "_"]


def pseudo_stems(rng: random.Random, count: int, exclude: set[str]) -> list[str]:
    """Consonant-final CV(C)CVC stems outside the main noun list."""
    out: list[str] = []
    while len(out) < count:
        stem = rng.choice(ONSETS) + rng.choice(VOWELS)
        if rng.random() < 0.5:
            stem += rng.choice(CODAS)
        stem += rng.choice(ONSETS) + rng.choice(VOWELS) + rng.choice(CODAS)
        if stem not in exclude and stem not in out:
            out.append(stem)
    return out


def make_sentence(rng: random.Random, nouns, min_args: int = 1, forms=None) -> list[list[str]]:
    """One verb-final sentence; ``forms`` optionally maps a case suffix to
    the noun forms allowed to carry it."""
    n_args = rng.randint(min_args, 3)
    if n_args == 1:
        cases = [rng.choice(CASES)]
    else:
        cases = [CASES[0]] + rng.sample(CASES[1:], n_args - 1)
    rng.shuffle(cases)
    phrases = []
    for suffix, rel in cases:
        adj = rng.choice(ADJECTIVES) if rng.random() < 0.35 else None
        noun = rng.choice(forms[suffix]) if forms else rng.choice(nouns) + suffix
        phrases.append((adj, noun, rel))
    n_tokens = sum(2 if adj else 1 for adj, _, _ in phrases) + 2
    verb_idx = n_tokens - 1
    rows = []
    for adj, noun, rel in phrases:
        if adj:
            rows.append(_row(len(rows) + 1, adj, "A", "ADJ", len(rows) + 2, "amod"))
        rows.append(_row(len(rows) + 1, noun, "N", "NOUN", verb_idx, rel))
    rows.append(_row(verb_idx, rng.choice(VERBS) + rng.choice(TENSES), "V", "VERB", 0, "root"))
    rows.append(_row(n_tokens, ".", "P", "PUNCT", verb_idx, "punct"))
    return rows


def split_inflections(rng: random.Random, stems: list[str]):
    """Hold out one case form per stem: training sees the stem and every
    suffix, but never these stem+suffix combinations."""
    seen = {suffix: [] for suffix, _ in CASES}
    held = {suffix: [] for suffix, _ in CASES}
    for stem in stems:
        out = rng.choice(CASES)[0]
        for suffix, _ in CASES:
            (held if suffix == out else seen)[suffix].append(stem + suffix)
    return seen, held


# heads [3, 4, 0, 3]: arcs 3->1 and 4->2 cross
CROSSING = [
    _row(1, "kitapi", "N", "NOUN", 3, "obj"),
    _row(2, "cok", "R", "ADV", 4, "advmod"),
    _row(3, "okudu", "V", "VERB", 0, "root"),
    _row(4, "hizli", "R", "ADV", 3, "advmod"),
]

EVAL_GOLD = [
    [
        _row(1, "kucuk", "A", "ADJ", 2, "amod"),
        _row(2, "kopek", "N", "NOUN", 4, "nsubj"),
        _row(3, "kitapi", "N", "NOUN", 4, "obj"),
        _row(4, "gordu", "V", "VERB", 0, "root"),
        _row(5, ".", "P", "PUNCT", 4, "punct"),
    ]
]
# three heads right (tokens 1, 2, 4); labels right on 1 and 4 only
EVAL_SYSTEM = [
    [
        _row(1, "kucuk", "A", "ADJ", 2, "amod"),
        _row(2, "kopek", "N", "NOUN", 4, "obj"),
        _row(3, "kitapi", "N", "NOUN", 2, "obj"),
        _row(4, "gordu", "V", "VERB", 0, "root"),
        _row(5, ".", "P", "PUNCT", 3, "punct"),
    ]
]
PUNCT_GOLD = [
    [
        _row(1, "adam", "N", "NOUN", 4, "nsubj"),
        _row(2, ",", "P", "PUNCT", 1, "punct"),
        _row(3, "kitapi", "N", "NOUN", 4, "obj"),
        _row(4, "okudu", "V", "VERB", 0, "root"),
    ]
]
PUNCT_SYSTEM = [
    [
        _row(1, "adam", "N", "NOUN", 4, "nsubj"),
        _row(2, ",", "P", "PUNCT", 4, "punct"),
        _row(3, "kitapi", "N", "NOUN", 4, "obj"),
        _row(4, "okudu", "V", "VERB", 0, "root"),
    ]
]


def write(path: Path, sentences, header: str | None = None) -> None:
    lines = []
    for k, rows in enumerate(sentences):
        if header and k == 0:
            lines.append(f"# {header}")
        lines.extend("\t".join(r) for r in rows)
        lines.append("")
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def main(out_dir: str = "tests/data") -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(20160701)
    train = [make_sentence(rng, NOUNS) for _ in range(20)]
    dev = [make_sentence(rng, NOUNS) for _ in range(8)]
    nonproj = [make_sentence(rng, NOUNS) for _ in range(5)]
    nonproj.insert(2, CROSSING)
    # the OOV pair: dev nouns are unseen inflections of stems seen in training
    stems = pseudo_stems(rng, 40, set(NOUNS))
    seen, held = split_inflections(rng, stems)
    oov_train = [make_sentence(rng, None, min_args=2, forms=seen) for _ in range(60)]
    oov_dev = [make_sentence(rng, None, min_args=2, forms=held) for _ in range(20)]
    write(out / "toy_train.conll", train, "toy agglutinative corpus, projective")
    write(out / "toy_dev.conll", dev)
    write(out / "toy_nonproj.conll", nonproj, "sentence 3 has crossing arcs")
    write(out / "toy_oov_train.conll", oov_train, "pseudo-word noun stems with case suffixes")
    write(out / "toy_oov_dev.conll", oov_dev, "unseen stem+case combinations of training stems")
    write(out / "eval_gold.conll", EVAL_GOLD)
    write(out / "eval_system.conll", EVAL_SYSTEM)
    write(out / "punct_gold.conll", PUNCT_GOLD)
    write(out / "punct_system.conll", PUNCT_SYSTEM)


if __name__ == "__main__":
    main(*sys.argv[1:])
