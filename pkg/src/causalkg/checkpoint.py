"""Binary model checkpoints.

Layout: magic and format version, model kind, a SHA-256 digest of the
canonical config JSON, the config and vocabulary blobs, named float64
tensors (parameters, then optional Adam state), training position, and
a trailing CRC-32 over everything before it. Loads verify the CRC and
the config digest before trusting any field.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import CheckpointError
from .numeric import AdamState, Params
from .vocab import Vocabulary

MAGIC = b"CKGC"
VERSION = 1

KINDS = ("base", "hyper")


def config_digest(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass
class Checkpoint:
    kind: str
    config: dict
    vocab: Vocabulary
    params: Params
    opt_state: AdamState | None
    epoch: int
    val_mrr: float


def atomic_write_bytes(path: str, data: bytes) -> None:
    """Write via a sibling temp file and rename, so readers never see a
    partial file."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-causalkg-")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _put_bytes(buf: bytearray, data: bytes) -> None:
    buf += struct.pack("<I", len(data))
    buf += data


def _put_str(buf: bytearray, text: str) -> None:
    _put_bytes(buf, text.encode("utf-8"))


def _put_tensors(buf: bytearray, tensors: Params) -> None:
    buf += struct.pack("<I", len(tensors))
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype=np.float64)
        _put_str(buf, name)
        buf += struct.pack("<B", arr.ndim)
        for size in arr.shape:
            buf += struct.pack("<I", size)
        buf += arr.tobytes(order="C")


class _Cursor:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError("truncated checkpoint")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return struct.unpack("<B", self.take(1))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self.take(8))[0]

    def blob(self) -> bytes:
        return self.take(self.u32())

    def text(self) -> str:
        return self.blob().decode("utf-8")

    def tensors(self) -> Params:
        out: Params = {}
        for _ in range(self.u32()):
            name = self.text()
            ndim = self.u8()
            shape = tuple(self.u32() for _ in range(ndim))
            count = int(np.prod(shape)) if shape else 1
            raw = self.take(count * 8)
            out[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
        return out


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    if ckpt.kind not in KINDS:
        raise CheckpointError(f"kind must be one of {KINDS}, got {ckpt.kind!r}")
    buf = bytearray()
    buf += MAGIC
    buf += struct.pack("<B", VERSION)
    _put_str(buf, ckpt.kind)
    _put_str(buf, config_digest(ckpt.config))
    _put_str(buf, json.dumps(ckpt.config, sort_keys=True))
    _put_str(buf, json.dumps(ckpt.vocab.to_dict(), sort_keys=True))
    _put_tensors(buf, ckpt.params)
    if ckpt.opt_state is None:
        buf += struct.pack("<B", 0)
    else:
        buf += struct.pack("<B", 1)
        buf += struct.pack("<Q", ckpt.opt_state.step)
        _put_tensors(buf, ckpt.opt_state.m)
        _put_tensors(buf, ckpt.opt_state.v)
    buf += struct.pack("<Q", ckpt.epoch)
    buf += struct.pack("<d", ckpt.val_mrr)
    buf += struct.pack("<I", zlib.crc32(bytes(buf)))
    return bytes(buf)


def decode_checkpoint(data: bytes, expect_kind: str | None = None) -> Checkpoint:
    if len(data) < len(MAGIC) + 1 + 4:
        raise CheckpointError("truncated checkpoint")
    body, stored = data[:-4], struct.unpack("<I", data[-4:])[0]
    if zlib.crc32(body) != stored:
        raise CheckpointError("checksum mismatch: checkpoint is corrupt")

    cur = _Cursor(body)
    if cur.take(len(MAGIC)) != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    version = cur.u8()
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    kind = cur.text()
    if kind not in KINDS:
        raise CheckpointError(f"unknown model kind {kind!r}")
    if expect_kind is not None and kind != expect_kind:
        raise CheckpointError(f"expected a {expect_kind} checkpoint, found {kind}")
    digest = cur.text()
    config = json.loads(cur.text())
    if config_digest(config) != digest:
        raise CheckpointError("config digest mismatch")
    vocab = Vocabulary.from_dict(json.loads(cur.text()))
    params = cur.tensors()
    opt_state = None
    if cur.u8():
        step = cur.u64()
        m = cur.tensors()
        v = cur.tensors()
        opt_state = AdamState(step=step, m=m, v=v)
    epoch = cur.u64()
    val_mrr = cur.f64()
    if cur.pos != len(body):
        raise CheckpointError("trailing bytes after checkpoint payload")
    return Checkpoint(
        kind=kind,
        config=config,
        vocab=vocab,
        params=params,
        opt_state=opt_state,
        epoch=epoch,
        val_mrr=val_mrr,
    )


def save_checkpoint(path: str, ckpt: Checkpoint) -> None:
    atomic_write_bytes(path, encode_checkpoint(ckpt))


def load_checkpoint(path: str, expect_kind: str | None = None) -> Checkpoint:
    with open(path, "rb") as handle:
        data = handle.read()
    return decode_checkpoint(data, expect_kind)
