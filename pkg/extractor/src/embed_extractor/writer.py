"""Embedded-dataset directory writer.

The format is the cross-tool contract, little-endian throughout:

    embeddings.bin  magic "EMB1", u32 N, u32 S, u32 D, then N*S*D float32
    labels.bin      magic "LBL1", u32 N, then N * u32
    lengths.bin     magic "LEN1", u32 N, then N * u32 (omitted when all S)
    manifest.json   metadata plus a sha256 hex digest per payload file
"""

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

EMB_MAGIC = b"EMB1"
LBL_MAGIC = b"LBL1"
LEN_MAGIC = b"LEN1"


def write_dataset_dir(
    out_dir,
    embeddings,
    lengths,
    labels,
    *,
    name,
    dialect,
    task,
    metric,
    k,
):
    """Write arrays and metadata as a dataset directory; returns the manifest."""
    embeddings = np.ascontiguousarray(embeddings, dtype="<f4")
    lengths = np.asarray(lengths, dtype=np.int64)
    n, s, d = embeddings.shape
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    digests = {}

    payload = EMB_MAGIC + struct.pack("<III", n, s, d) + embeddings.tobytes()
    (out_dir / "embeddings.bin").write_bytes(payload)
    digests["embeddings.bin"] = hashlib.sha256(payload).hexdigest()

    if labels is not None:
        labels = np.asarray(labels, dtype=np.int64)
        payload = LBL_MAGIC + struct.pack("<I", n) + labels.astype("<u4").tobytes()
        (out_dir / "labels.bin").write_bytes(payload)
        digests["labels.bin"] = hashlib.sha256(payload).hexdigest()

    if not np.all(lengths == s):
        payload = LEN_MAGIC + struct.pack("<I", n) + lengths.astype("<u4").tobytes()
        (out_dir / "lengths.bin").write_bytes(payload)
        digests["lengths.bin"] = hashlib.sha256(payload).hexdigest()

    manifest = {
        "format_version": 1,
        "name": name,
        "dialect": dialect,
        "task": task,
        "metric": metric,
        "n": int(n),
        "s": int(s),
        "d": int(d),
        "k": int(k),
        "digests": digests,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
