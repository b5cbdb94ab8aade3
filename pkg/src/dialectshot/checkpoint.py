"""Bit-exact binary checkpoints for :class:`~dialectshot.model.Head`.

Layout (little-endian throughout):

    magic    8 bytes  b"EMBHEAD1"
    version  u32
    arch     u32 length + canonical JSON (sorted keys)
    tensors  u32 count, then per tensor in sorted name order:
             u16 name length, name utf-8, u8 rank, u32 dims..., float32 data
    cls dig  32 bytes, sha256 over the classifier parameter block
    file dig 32 bytes, sha256 over every preceding byte

Tensors cover trainable parameters and normalization running statistics, so a
round trip restores the model bit for bit.
"""

import hashlib
import json
import struct

import numpy as np

from .model import Arch, CLASSIFIER_PREFIX, Head

MAGIC = b"EMBHEAD1"
VERSION = 1


class CheckpointError(ValueError):
    """Raised on malformed, corrupted, or inconsistent checkpoint files."""


def save_checkpoint(head: Head, path):
    """Write ``head`` to ``path``; only float32 models are checkpointable."""
    if head.dtype != np.float32:
        raise CheckpointError(f"checkpoints store float32 tensors, model is {head.dtype}")
    tensors = dict(head.params)
    tensors.update(head.stats)
    out = bytearray()
    out += MAGIC
    out += struct.pack("<I", VERSION)
    arch_json = json.dumps(head.arch.to_dict(), sort_keys=True).encode()
    out += struct.pack("<I", len(arch_json))
    out += arch_json
    out += struct.pack("<I", len(tensors))
    cls_hash = hashlib.sha256()
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype="<f4")
        raw = arr.tobytes()
        encoded = name.encode()
        out += struct.pack("<H", len(encoded))
        out += encoded
        out += struct.pack("<B", arr.ndim)
        out += struct.pack(f"<{arr.ndim}I", *arr.shape)
        out += raw
        if name.startswith(CLASSIFIER_PREFIX):
            cls_hash.update(raw)
    out += cls_hash.digest()
    out += hashlib.sha256(bytes(out)).digest()
    with open(path, "wb") as fh:
        fh.write(bytes(out))


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.data):
            raise CheckpointError(f"truncated file while reading {what}")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt, what):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def load_checkpoint(path) -> Head:
    """Read a checkpoint back into a fresh :class:`Head`, verifying both digests."""
    with open(path, "rb") as fh:
        data = fh.read()
    r = _Reader(data)
    if r.take(len(MAGIC), "magic") != MAGIC:
        raise CheckpointError("wrong magic bytes, not a model checkpoint")
    (version,) = r.unpack("<I", "version")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (arch_len,) = r.unpack("<I", "arch length")
    try:
        arch_dict = json.loads(r.take(arch_len, "arch descriptor"))
        arch = Arch(**arch_dict)
        arch.validate()
    except (ValueError, TypeError) as exc:
        raise CheckpointError(f"bad architecture descriptor: {exc}") from exc
    (n_tensors,) = r.unpack("<I", "tensor count")
    tensors = {}
    cls_hash = hashlib.sha256()
    for _ in range(n_tensors):
        (name_len,) = r.unpack("<H", "tensor name length")
        name = r.take(name_len, "tensor name").decode()
        (rank,) = r.unpack("<B", f"rank of {name!r}")
        shape = r.unpack(f"<{rank}I", f"dims of {name!r}")
        count = int(np.prod(shape, dtype=np.int64)) if rank else 1
        raw = r.take(4 * count, f"data of {name!r}")
        tensors[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
        if name.startswith(CLASSIFIER_PREFIX):
            cls_hash.update(raw)
    stored_cls = r.take(32, "classifier digest")
    payload_end = r.pos
    stored_file = r.take(32, "file digest")
    if r.pos != len(data):
        raise CheckpointError("trailing bytes after file digest")
    if hashlib.sha256(data[:payload_end]).digest() != stored_file:
        raise CheckpointError("file digest mismatch, checkpoint corrupted")
    if cls_hash.digest() != stored_cls:
        raise CheckpointError("classifier digest mismatch")

    head = Head(arch, seed=0, dtype=np.float32)
    expected = dict(head.params)
    expected.update(head.stats)
    if set(tensors) != set(expected):
        missing = sorted(set(expected) - set(tensors))
        extra = sorted(set(tensors) - set(expected))
        raise CheckpointError(f"tensor set mismatch: missing={missing} extra={extra}")
    for name, arr in tensors.items():
        if arr.shape != expected[name].shape:
            raise CheckpointError(
                f"tensor {name!r} has shape {arr.shape}, descriptor requires "
                f"{expected[name].shape}"
            )
        expected[name][...] = arr
    return head
