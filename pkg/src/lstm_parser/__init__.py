"""Greedy stack-LSTM transition parser with lookup or character-based word
representations and a SWAP transition for non-projective trees."""

from .conllx import Sentence, load_corpus, read_conllx, write_conllx
from .evaluation import EXCLUDE, INCLUDE, EvalReport, attachment_scores
from .model_io import load_model, save_model
from .parser import ParserDims, ParserModel, TrainConfig, evaluate, greedy_parse, parse_corpus, train
from .representations import CHARS, LOOKUP, RepresentationConfig, Vocabulary
from .transitions import DependencyTree, oracle

__version__ = "0.1.0"

__all__ = [
    "CHARS",
    "EXCLUDE",
    "INCLUDE",
    "LOOKUP",
    "DependencyTree",
    "EvalReport",
    "ParserDims",
    "ParserModel",
    "RepresentationConfig",
    "Sentence",
    "TrainConfig",
    "Vocabulary",
    "attachment_scores",
    "evaluate",
    "greedy_parse",
    "load_corpus",
    "load_model",
    "oracle",
    "parse_corpus",
    "read_conllx",
    "save_model",
    "train",
    "write_conllx",
]
