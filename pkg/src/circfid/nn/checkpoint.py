"""Checkpoint file: one JSON header line, then raw little-endian float32 tensors.

The header records the format version, the model config, the tensor table
(name, shape, byte offset into the payload) and optionally the vocabulary and
its fingerprint, so a checkpoint alone is enough to tokenize and predict.
"""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import CheckpointError
from .model import Model, ModelConfig, param_shapes

FORMAT = "circfid-lstm"
VERSION = 1
_LE_F32 = np.dtype("<f4")


def dumps_checkpoint(model: Model, vocab=None, extra: Optional[dict] = None) -> bytes:
    tensors, blobs, offset = [], [], 0
    for name in param_shapes(model.config):
        arr = np.ascontiguousarray(model.params[name], dtype=_LE_F32)
        tensors.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blobs.append(arr.tobytes())
        offset += arr.nbytes
    header = {
        "format": FORMAT,
        "version": VERSION,
        "config": model.config.to_dict(),
        "tensors": tensors,
        "payload_bytes": offset,
    }
    if vocab is not None:
        header["vocab"] = vocab.to_dict()["labels"]
        header["vocab_hash"] = vocab.fingerprint()
    if extra:
        header["extra"] = extra
    return json.dumps(header, sort_keys=True).encode() + b"\n" + b"".join(blobs)


def save_checkpoint(model: Model, path, vocab=None, extra: Optional[dict] = None) -> None:
    path = Path(path)
    data = dumps_checkpoint(model, vocab, extra)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def loads_checkpoint(data: bytes, expect_config: Optional[ModelConfig] = None):
    """Returns ``(model, header)``; raises :class:`CheckpointError` on any inconsistency."""
    head, sep, payload = data.partition(b"\n")
    if not sep:
        raise CheckpointError("checkpoint has no header terminator")
    try:
        header = json.loads(head)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CheckpointError(f"corrupted checkpoint header: {exc}") from None
    if not isinstance(header, dict) or header.get("format") != FORMAT:
        raise CheckpointError("not a circfid checkpoint")
    if header.get("version") != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {header.get('version')!r}")
    try:
        config = ModelConfig.from_dict(header["config"])
        table = {t["name"]: t for t in header["tensors"]}
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"bad checkpoint config: {exc}") from None
    if expect_config is not None and config != expect_config:
        raise CheckpointError(f"checkpoint config {config} does not match expected {expect_config}")
    if len(payload) != header.get("payload_bytes"):
        raise CheckpointError("checkpoint payload is truncated or padded")
    params = {}
    for name, shape in param_shapes(config).items():
        entry = table.get(name)
        if entry is None or tuple(entry["shape"]) != shape:
            raise CheckpointError(f"tensor {name} missing or of wrong shape")
        count = int(np.prod(shape))
        start = entry["offset"]
        if start < 0 or start + 4 * count > len(payload):
            raise CheckpointError(f"tensor {name} runs past the payload")
        params[name] = np.frombuffer(payload, dtype=_LE_F32, count=count, offset=start).reshape(shape).astype(np.float32)
    return Model(config, params), header


def load_checkpoint(path, expect_config: Optional[ModelConfig] = None):
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint: {exc}") from None
    return loads_checkpoint(data, expect_config)
