"""Binary checkpoint format for translation models.

Layout (little-endian throughout):
  magic "PNMT" | u32 version | u32 config length | config bytes (key=value
  lines, UTF-8) | tensor records until EOF.
Each tensor record: u32 name length | name UTF-8 | u32 rank | u32 dims... |
row-major float32 payload.
"""

from __future__ import annotations

import struct
from dataclasses import asdict, fields

import numpy as np

from .model import ModelConfig, TranslationModel

MAGIC = b"PNMT"
VERSION = 1


class CheckpointError(ValueError):
    pass


def _config_to_bytes(cfg: ModelConfig) -> bytes:
    lines = [f"{k}={v}" for k, v in asdict(cfg).items()]
    return "\n".join(lines).encode("utf-8")


def _config_from_bytes(blob: bytes) -> ModelConfig:
    kv = {}
    for line in blob.decode("utf-8").splitlines():
        if not line:
            continue
        key, _, value = line.partition("=")
        kv[key] = value
    typed = {}
    for f in fields(ModelConfig):
        if f.name not in kv:
            raise CheckpointError(f"checkpoint config missing key {f.name!r}")
        raw = kv[f.name]
        if f.type == "bool":
            typed[f.name] = raw == "True"
        elif f.type == "int":
            typed[f.name] = int(raw)
        elif f.type == "float":
            typed[f.name] = float(raw)
        else:
            typed[f.name] = raw
    return ModelConfig(**typed)


def save_checkpoint(model: TranslationModel, path) -> None:
    cfg_blob = _config_to_bytes(model.config)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(struct.pack("<I", len(cfg_blob)))
        f.write(cfg_blob)
        for name in sorted(model.params):
            arr = np.ascontiguousarray(model.params[name], dtype=np.float32)
            name_b = name.encode("utf-8")
            f.write(struct.pack("<I", len(name_b)))
            f.write(name_b)
            f.write(struct.pack("<I", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(arr.astype("<f4").tobytes())


def _read_exact(f, n: int, what: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise CheckpointError(f"truncated checkpoint while reading {what}")
    return data


def load_checkpoint(path) -> TranslationModel:
    with open(path, "rb") as f:
        magic = _read_exact(f, 4, "magic")
        if magic != MAGIC:
            raise CheckpointError(f"bad magic {magic!r}, expected {MAGIC!r}")
        (version,) = struct.unpack("<I", _read_exact(f, 4, "version"))
        if version != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        (cfg_len,) = struct.unpack("<I", _read_exact(f, 4, "config length"))
        cfg = _config_from_bytes(_read_exact(f, cfg_len, "config"))
        params: dict[str, np.ndarray] = {}
        while True:
            head = f.read(4)
            if not head:
                break
            if len(head) != 4:
                raise CheckpointError("truncated checkpoint while reading record header")
            (name_len,) = struct.unpack("<I", head)
            name = _read_exact(f, name_len, "tensor name").decode("utf-8")
            (rank,) = struct.unpack("<I", _read_exact(f, 4, "rank"))
            dims = struct.unpack(f"<{rank}I", _read_exact(f, 4 * rank, "dims"))
            count = int(np.prod(dims)) if dims else 1
            payload = _read_exact(f, 4 * count, f"tensor {name}")
            params[name] = np.frombuffer(payload, dtype="<f4").reshape(dims).copy()
    model = TranslationModel(cfg, params)
    expected = set(TranslationModel(cfg).params)
    if set(params) != expected:
        missing = expected - set(params)
        extra = set(params) - expected
        raise CheckpointError(f"tensor set mismatch: missing={sorted(missing)} extra={sorted(extra)}")
    return model


def validate_compatible(model: TranslationModel, src_vocab_size: int,
                        tgt_vocab_size: int, pinyin_size: int) -> None:
    cfg = model.config
    if (cfg.src_vocab_size, cfg.tgt_vocab_size, cfg.pinyin_size) != (
        src_vocab_size, tgt_vocab_size, pinyin_size
    ):
        raise CheckpointError(
            "checkpoint was built for vocab/inventory sizes "
            f"({cfg.src_vocab_size}, {cfg.tgt_vocab_size}, {cfg.pinyin_size}), "
            f"got ({src_vocab_size}, {tgt_vocab_size}, {pinyin_size})"
        )
