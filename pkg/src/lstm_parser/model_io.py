"""Binary model files.

Layout (all integers little-endian)::

    magic        8 bytes   b"LSTMPRS\\x00"
    version      uint32    FORMAT_VERSION
    header_len   uint64    byte length of the JSON header
    header       UTF-8 JSON (sorted keys): configuration, vocabulary, and
                 the ordered list of {"name", "shape"} parameter records
    payload      for each parameter record in order, prod(shape) float64
                 values, little-endian, row-major

The header is fully determined by the model, so saving the same model twice
yields identical bytes.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict

import numpy as np

from .errors import ModelFormatError
from .parser import ParserDims, ParserModel, TrainConfig
from .representations import RepresentationConfig, Vocabulary

MAGIC = b"LSTMPRS\x00"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<8sIQ")


def model_to_bytes(model: ParserModel) -> bytes:
    header = {
        "format_version": FORMAT_VERSION,
        "seed": model.seed,
        "representation": model.rep_config.to_dict(),
        "dims": asdict(model.dims),
        "train_config": None if model.train_config is None else model.train_config.to_dict(),
        "vocabulary": model.vocab.to_dict(),
        "parameters": [{"name": p.name, "shape": list(p.shape)} for p in model.store],
    }
    blob = json.dumps(header, sort_keys=True, ensure_ascii=False, separators=(",", ":")).encode("utf-8")
    parts = [_PREFIX.pack(MAGIC, FORMAT_VERSION, len(blob)), blob]
    for p in model.store:
        parts.append(p.value.astype("<f8", copy=False).tobytes(order="C"))
    return b"".join(parts)


def model_from_bytes(data: bytes) -> ParserModel:
    if len(data) < _PREFIX.size:
        raise ModelFormatError("file too short to hold a model header")
    magic, version, header_len = _PREFIX.unpack_from(data, 0)
    if magic != MAGIC:
        raise ModelFormatError("bad magic bytes: not a parser model file (version error)")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {version}, expected {FORMAT_VERSION}")
    offset = _PREFIX.size
    if len(data) < offset + header_len:
        raise ModelFormatError("truncated header")
    try:
        header = json.loads(data[offset : offset + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"corrupt header: {exc}") from exc
    offset += header_len

    try:
        model = ParserModel(
            Vocabulary.from_dict(header["vocabulary"]),
            RepresentationConfig(**header["representation"]),
            ParserDims(**header["dims"]),
            seed=header["seed"],
        )
        if header.get("train_config") is not None:
            model.train_config = TrainConfig.from_dict(header["train_config"])
        records = header["parameters"]
    except (KeyError, TypeError) as exc:
        raise ModelFormatError(f"incomplete header: {exc}") from exc

    expected = model.store.names()
    names = [r["name"] for r in records]
    if names != expected:
        missing = sorted(set(expected) - set(names))
        extra = sorted(set(names) - set(expected))
        raise ModelFormatError(f"parameter list mismatch: missing={missing} unexpected={extra}")
    for rec in records:
        p = model.store[rec["name"]]
        shape = tuple(rec["shape"])
        if shape != p.shape:
            raise ModelFormatError(f"parameter {rec['name']!r}: stored shape {shape}, model expects {p.shape}")
        nbytes = 8 * int(np.prod(shape, dtype=np.int64))
        if len(data) < offset + nbytes:
            raise ModelFormatError(f"truncated data for parameter {rec['name']!r}")
        p.value[...] = np.frombuffer(data, dtype="<f8", count=nbytes // 8, offset=offset).reshape(shape)
        offset += nbytes
    if offset != len(data):
        raise ModelFormatError(f"{len(data) - offset} trailing bytes after the last parameter")
    return model


def save_model(model: ParserModel, path: str) -> None:
    with open(path, "wb") as f:
        f.write(model_to_bytes(model))


def load_model(path: str) -> ParserModel:
    with open(path, "rb") as f:
        return model_from_bytes(f.read())
