"""Command-line interface: ``lstm-parser {train,parse,eval,dump-vectors,ablate-oov}``."""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Sequence

import numpy as np

from .autodiff import Graph
from .conllx import load_corpus, open_text, read_conllx, write_conllx
from .errors import ParserError
from .evaluation import EXCLUDE, INCLUDE, attachment_scores
from .model_io import load_model, save_model
from .parser import ParserDims, TrainConfig, evaluate, parse_corpus, train
from .representations import CHARS, LOOKUP, RepresentationConfig, embed_token

log = logging.getLogger("lstm_parser")

REP_MODES = {"words": LOOKUP, "chars": CHARS}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--pos-column", choices=["postag", "cpostag"], default="postag",
                   help="CoNLL-X column holding the POS tag (default: postag)")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")


def build_arg_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lstm-parser", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a model")
    t.add_argument("--train", required=True, help="training treebank (CoNLL-X)")
    t.add_argument("--dev", required=True, help="development treebank for early stopping")
    t.add_argument("--model", required=True, help="output model file")
    t.add_argument("--rep", choices=sorted(REP_MODES), default="chars")
    t.add_argument("--use-pos", action="store_true")
    t.add_argument("--epochs", type=int, default=30)
    t.add_argument("--patience", type=int, default=5)
    t.add_argument("--eval-every", type=int, default=1, help="dev evaluation period in epochs")
    t.add_argument("--seed", type=int, default=1)
    t.add_argument("--learning-rate", type=float, default=0.1)
    t.add_argument("--decay", type=float, default=0.1, help="lr = lr0 / (1 + decay * epoch)")
    t.add_argument("--clip", type=float, default=5.0, help="gradient norm clip; 0 disables")
    t.add_argument("--punct", choices=[INCLUDE, EXCLUDE], default=INCLUDE,
                   help="punctuation convention for dev UAS")
    t.add_argument("--no-unk-replacement", action="store_true",
                   help="never replace singleton words by UNK during training")
    t.add_argument("--unk-prob", type=float, default=0.5)
    t.add_argument("--word-dim", type=int, default=32)
    t.add_argument("--char-dim", type=int, default=50)
    t.add_argument("--char-rep-dim", type=int, default=100)
    t.add_argument("--pos-dim", type=int, default=12)
    t.add_argument("--input-dim", type=int, default=100)
    t.add_argument("--hidden-dim", type=int, default=100)
    t.add_argument("--layers", type=int, default=2)
    t.add_argument("--action-dim", type=int, default=20)
    t.add_argument("--state-dim", type=int, default=100)
    t.add_argument("--full-peepholes", action="store_true")
    _add_common(t)

    p = sub.add_parser("parse", help="parse a treebank with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True, help="CoNLL-X input, '-' for stdin")
    p.add_argument("--output", default="-", help="CoNLL-X output, '-' for stdout")
    p.add_argument("--oov-as-unk", action="store_true",
                   help="replace out-of-vocabulary forms with the string UNK before embedding")
    p.add_argument("--workers", type=int, default=1)
    _add_common(p)

    e = sub.add_parser("eval", help="score a system treebank against gold")
    e.add_argument("--gold", required=True)
    e.add_argument("--system", required=True)
    e.add_argument("--punct", choices=[INCLUDE, EXCLUDE], default=INCLUDE)
    _add_common(e)

    d = sub.add_parser("dump-vectors", help="write word input vectors as TSV")
    d.add_argument("--model", required=True)
    src = d.add_mutually_exclusive_group(required=True)
    src.add_argument("--words", help="file with one word per line")
    src.add_argument("--corpus", help="draw words from this CoNLL-X file")
    d.add_argument("--sample", type=int, default=0, help="random sample size from --corpus (0 = all types)")
    d.add_argument("--seed", type=int, default=1)
    d.add_argument("--pos", help="fixed POS tag for models that use tags")
    d.add_argument("--output", default="-")
    _add_common(d)

    a = sub.add_parser("ablate-oov", help="compare dev scores with and without OOV->UNK replacement")
    a.add_argument("--model", required=True)
    a.add_argument("--dev", required=True)
    a.add_argument("--punct", choices=[INCLUDE, EXCLUDE], default=INCLUDE)
    _add_common(a)
    return ap


def cmd_train(args) -> int:
    corpus = load_corpus(args.train, args.pos_column)
    dev = load_corpus(args.dev, args.pos_column)
    rep = RepresentationConfig(
        mode=REP_MODES[args.rep],
        use_pos=args.use_pos,
        word_dim=args.word_dim,
        char_dim=args.char_dim,
        char_rep_dim=args.char_rep_dim,
        pos_dim=args.pos_dim,
        input_dim=args.input_dim,
        unk_replacement=not args.no_unk_replacement,
        unk_prob=args.unk_prob,
    )
    dims = ParserDims(args.hidden_dim, args.layers, args.action_dim, args.state_dim, args.full_peepholes)
    config = TrainConfig(
        max_epochs=args.epochs,
        patience=args.patience,
        eval_every=args.eval_every,
        seed=args.seed,
        learning_rate=args.learning_rate,
        decay=args.decay,
        clip=args.clip if args.clip > 0 else None,
        punct=args.punct,
        representation=rep,
        dims=dims,
    )
    log.info("event=start_training train_sentences=%d dev_sentences=%d rep=%s use_pos=%s",
             len(corpus), len(dev), args.rep, args.use_pos)
    model = train(corpus, dev, config)
    save_model(model, args.model)
    report = evaluate(model, dev, args.punct)
    log.info("event=saved model=%s dev_uas=%.2f dev_las=%.2f", args.model, report.uas, report.las)
    return 0


def cmd_parse(args) -> int:
    model = load_model(args.model)
    with open_text(args.input) as f:
        sentences = read_conllx(f, args.pos_column)
    trees = parse_corpus(model, sentences, oov_unk=args.oov_as_unk, workers=args.workers)
    with open_text(args.output, "w") as out:
        write_conllx(sentences, trees, out)
    log.info("event=parsed sentences=%d oov_as_unk=%s", len(sentences), args.oov_as_unk)
    return 0


def cmd_eval(args) -> int:
    gold = load_corpus(args.gold, args.pos_column)
    system = load_corpus(args.system, args.pos_column)
    report = attachment_scores(gold, system, args.punct)
    print(report.format())
    return 0


def _word_list(args) -> list[tuple[str, str | None]]:
    if args.words:
        with open_text(args.words) as f:
            words = [line.strip() for line in f]
        return [(w, args.pos) for w in words]
    corpus = load_corpus(args.corpus, args.pos_column)
    types = list(dict.fromkeys(f for s in corpus for f in s.forms))
    if args.sample and args.sample < len(types):
        rng = np.random.default_rng(args.seed)
        types = [types[k] for k in sorted(rng.choice(len(types), args.sample, replace=False))]
    return [(w, args.pos) for w in types]


def cmd_dump_vectors(args) -> int:
    model = load_model(args.model)
    pos_fallback = "<UNK>" if model.use_pos else None
    rows = 0
    with open_text(args.output, "w") as out:
        for word, pos in _word_list(args):
            if not word:
                log.warning("event=skip_empty_word")
                continue
            g = Graph()
            x = embed_token(g, word, pos if pos is not None else pos_fallback, model.rep, model.vocab)
            out.write(word + "\t" + " ".join(repr(float(v)) for v in x.value) + "\n")
            rows += 1
    log.info("event=dumped rows=%d", rows)
    return 0


def cmd_ablate_oov(args) -> int:
    model = load_model(args.model)
    dev = load_corpus(args.dev, args.pos_column)
    tokens = [f for s in dev for f in s.forms]
    oov = sum(1 for f in tokens if not model.vocab.is_known(f))
    normal = evaluate(model, dev, args.punct)
    ablated = evaluate(model, dev, args.punct, oov_unk=True)
    print(f"oov_rate={100.0 * oov / max(1, len(tokens)):.2f}")
    print(f"uas={normal.uas:.2f} las={normal.las:.2f}")
    print(f"uas_oov_unk={ablated.uas:.2f} las_oov_unk={ablated.las:.2f}")
    print(f"delta_uas={ablated.uas - normal.uas:.2f} delta_las={ablated.las - normal.las:.2f}")
    return 0


COMMANDS = {
    "train": cmd_train,
    "parse": cmd_parse,
    "eval": cmd_eval,
    "dump-vectors": cmd_dump_vectors,
    "ablate-oov": cmd_ablate_oov,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_arg_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args)
    except (ParserError, OSError) as exc:
        print(f"lstm-parser: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
