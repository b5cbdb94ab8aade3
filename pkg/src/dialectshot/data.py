"""Embedded-dataset directories, batching, stratified splits, and a synthetic shift generator.

A dataset directory holds the output of a frozen encoder plus task metadata:

    embeddings.bin  magic "EMB1", u32 N, u32 S, u32 D, then N*S*D float32
    labels.bin      magic "LBL1", u32 N, then N * u32 (absent for unlabeled sets)
    lengths.bin     magic "LEN1", u32 N, then N * u32 (absent means every length is S)
    manifest.json   metadata plus a sha256 digest per payload file

Everything is little-endian.  Loaded arrays are frozen read-only; no operation
in this module mutates embeddings in place.
"""

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

EMB_MAGIC = b"EMB1"
LBL_MAGIC = b"LBL1"
LEN_MAGIC = b"LEN1"

METRIC_KINDS = ("accuracy", "mcc")
SHIFT_KINDS = ("rotation", "translation", "mixed")

# Canonical shift transform at magnitude 1: a 30 degree rotation of the
# discriminative plane plus a one-sigma translation.
_BASE_ROTATION_DEG = 30.0
_BASE_TRANSLATION_SIGMA = 1.0
_AR_COEFF = 0.5


class DatasetError(ValueError):
    """Raised on malformed dataset directories or invariant violations."""


def _freeze(arr):
    arr.flags.writeable = False
    return arr


@dataclass
class EmbeddedDataset:
    """Frozen-encoder sequences plus labels and task metadata."""

    name: str
    dialect: str
    task: str
    metric: str
    k: int
    embeddings: np.ndarray  # (N, S, D) float32
    lengths: np.ndarray  # (N,) int64
    labels: Optional[np.ndarray] = None  # (N,) int64 or None for target-only sets

    def __post_init__(self):
        self.embeddings = _freeze(np.ascontiguousarray(self.embeddings, dtype=np.float32))
        self.lengths = _freeze(np.ascontiguousarray(self.lengths, dtype=np.int64))
        if self.labels is not None:
            self.labels = _freeze(np.ascontiguousarray(self.labels, dtype=np.int64))
        self.validate()

    @property
    def n(self):
        return self.embeddings.shape[0]

    @property
    def s(self):
        return self.embeddings.shape[1]

    @property
    def d(self):
        return self.embeddings.shape[2]

    def validate(self):
        if self.embeddings.ndim != 3 or min(self.embeddings.shape) < 1:
            raise DatasetError(f"embeddings must be (N, S, D) with N, S, D > 0, got {self.embeddings.shape}")
        if self.metric not in METRIC_KINDS:
            raise DatasetError(f"metric must be one of {METRIC_KINDS}, got {self.metric!r}")
        if self.k < 2:
            raise DatasetError(f"class count k={self.k} must be >= 2")
        if not np.all(np.isfinite(self.embeddings)):
            raise DatasetError("embeddings contain non-finite values")
        if self.lengths.shape != (self.n,):
            raise DatasetError("lengths must hold one entry per example")
        bad = np.nonzero((self.lengths < 1) | (self.lengths > self.s))[0]
        if bad.size:
            i = int(bad[0])
            raise DatasetError(f"example {i} has length {int(self.lengths[i])} outside [1, {self.s}]")
        if self.labels is not None:
            if self.labels.shape != (self.n,):
                raise DatasetError("labels must hold one entry per example")
            bad = np.nonzero((self.labels < 0) | (self.labels >= self.k))[0]
            if bad.size:
                i = int(bad[0])
                raise DatasetError(f"example {i} has label {int(self.labels[i])} outside [0, {self.k})")


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def save_dataset(ds: EmbeddedDataset, path):
    """Write ``ds`` as a dataset directory; returns the manifest dict."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    digests = {}

    emb = EMB_MAGIC + struct.pack("<III", ds.n, ds.s, ds.d)
    emb += np.ascontiguousarray(ds.embeddings, dtype="<f4").tobytes()
    (path / "embeddings.bin").write_bytes(emb)
    digests["embeddings.bin"] = _digest(emb)

    if ds.labels is not None:
        lbl = LBL_MAGIC + struct.pack("<I", ds.n)
        lbl += ds.labels.astype("<u4").tobytes()
        (path / "labels.bin").write_bytes(lbl)
        digests["labels.bin"] = _digest(lbl)

    if not np.all(ds.lengths == ds.s):
        ln = LEN_MAGIC + struct.pack("<I", ds.n)
        ln += ds.lengths.astype("<u4").tobytes()
        (path / "lengths.bin").write_bytes(ln)
        digests["lengths.bin"] = _digest(ln)

    manifest = {
        "format_version": 1,
        "name": ds.name,
        "dialect": ds.dialect,
        "task": ds.task,
        "metric": ds.metric,
        "n": ds.n,
        "s": ds.s,
        "d": ds.d,
        "k": ds.k,
        "digests": digests,
    }
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


_MANIFEST_KEYS = {"format_version", "name", "dialect", "task", "metric", "n", "s", "d", "k", "digests"}


def _read_payload(path: Path, fname, magic, digests):
    fpath = path / fname
    if not fpath.exists():
        return None
    data = fpath.read_bytes()
    if fname not in digests:
        raise DatasetError(f"{fname} present but missing from manifest digests")
    if _digest(data) != digests[fname]:
        raise DatasetError(f"{fname} digest mismatch, payload corrupted")
    if data[: len(magic)] != magic:
        raise DatasetError(f"{fname} has wrong magic bytes")
    return data


def load_dataset(path) -> EmbeddedDataset:
    """Load and fully validate a dataset directory."""
    path = Path(path)
    mpath = path / "manifest.json"
    if not mpath.exists():
        raise DatasetError(f"no manifest.json in {path}")
    try:
        manifest = json.loads(mpath.read_text())
    except json.JSONDecodeError as exc:
        raise DatasetError(f"manifest.json is not valid JSON: {exc}") from exc
    if set(manifest) != _MANIFEST_KEYS:
        missing = sorted(_MANIFEST_KEYS - set(manifest))
        unknown = sorted(set(manifest) - _MANIFEST_KEYS)
        raise DatasetError(f"manifest key mismatch: missing={missing} unknown={unknown}")
    if manifest["format_version"] != 1:
        raise DatasetError(f"unsupported dataset format_version {manifest['format_version']}")
    n, s, d = manifest["n"], manifest["s"], manifest["d"]
    digests = manifest["digests"]

    emb = _read_payload(path, "embeddings.bin", EMB_MAGIC, digests)
    if emb is None:
        raise DatasetError(f"no embeddings.bin in {path}")
    if len(emb) < 16:
        raise DatasetError("embeddings.bin truncated in header")
    hn, hs, hd = struct.unpack("<III", emb[4:16])
    if (hn, hs, hd) != (n, s, d):
        raise DatasetError(
            f"embeddings.bin header ({hn}, {hs}, {hd}) does not match manifest ({n}, {s}, {d})"
        )
    expected = 16 + 4 * n * s * d
    if len(emb) < expected:
        raise DatasetError(
            f"embeddings.bin truncated: {len(emb)} bytes, {expected} required for {n} examples"
        )
    if len(emb) > expected:
        raise DatasetError("embeddings.bin has trailing bytes")
    embeddings = np.frombuffer(emb[16:], dtype="<f4").reshape(n, s, d)

    labels = None
    lbl = _read_payload(path, "labels.bin", LBL_MAGIC, digests)
    if lbl is not None:
        (ln,) = struct.unpack("<I", lbl[4:8])
        if ln != n:
            raise DatasetError(f"labels.bin declares {ln} rows, manifest says {n}")
        if len(lbl) != 8 + 4 * n:
            raise DatasetError(f"labels.bin truncated: {len(lbl)} bytes for {n} labels")
        labels = np.frombuffer(lbl[8:], dtype="<u4").astype(np.int64)

    lengths = np.full(n, s, dtype=np.int64)
    lend = _read_payload(path, "lengths.bin", LEN_MAGIC, digests)
    if lend is not None:
        (ln,) = struct.unpack("<I", lend[4:8])
        if ln != n:
            raise DatasetError(f"lengths.bin declares {ln} rows, manifest says {n}")
        if len(lend) != 8 + 4 * n:
            raise DatasetError(f"lengths.bin truncated: {len(lend)} bytes for {n} lengths")
        lengths = np.frombuffer(lend[8:], dtype="<u4").astype(np.int64)

    return EmbeddedDataset(
        name=manifest["name"],
        dialect=manifest["dialect"],
        task=manifest["task"],
        metric=manifest["metric"],
        k=manifest["k"],
        embeddings=embeddings,
        lengths=lengths,
        labels=labels,
    )


class Batch(NamedTuple):
    embeddings: np.ndarray
    lengths: np.ndarray
    labels: Optional[np.ndarray]
    indices: np.ndarray


def batch_iter(ds: EmbeddedDataset, batch_size, seed=0, shuffle=False):
    """Yield batches covering every example exactly once; the last may be short.

    With ``shuffle`` the order is a seeded permutation; ``seed`` may be an int
    or a ``numpy.random.SeedSequence``.
    """
    if batch_size < 1:
        raise DatasetError(f"batch_size {batch_size} must be >= 1")
    if ds.n == 0:
        raise DatasetError("cannot batch an empty dataset")
    if shuffle:
        order = np.random.default_rng(seed).permutation(ds.n)
    else:
        order = np.arange(ds.n)
    for start in range(0, ds.n, batch_size):
        idx = order[start : start + batch_size]
        yield Batch(
            embeddings=ds.embeddings[idx],
            lengths=ds.lengths[idx],
            labels=None if ds.labels is None else ds.labels[idx],
            indices=idx,
        )


def split(ds: EmbeddedDataset, fractions, seed=0):
    """Stratified split into len(fractions) disjoint datasets covering ds.

    Per class, examples are permuted with the seed and allotted by the
    largest-remainder rule so counts match the fractions as closely as
    possible.  A split that would receive zero examples of some class is an
    error.
    """
    fractions = list(fractions)
    if any(f <= 0 for f in fractions):
        raise DatasetError("split fractions must be positive")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise DatasetError(f"split fractions sum to {sum(fractions)}, expected 1")
    if ds.labels is None:
        raise DatasetError("stratified split requires a labeled dataset")
    rng = np.random.default_rng(seed)
    assignments = [[] for _ in fractions]
    for cls in range(ds.k):
        idx = np.nonzero(ds.labels == cls)[0]
        idx = idx[rng.permutation(idx.size)]
        exact = [f * idx.size for f in fractions]
        counts = [int(np.floor(e)) for e in exact]
        leftovers = idx.size - sum(counts)
        by_remainder = sorted(range(len(fractions)), key=lambda j: (-(exact[j] - counts[j]), j))
        for j in by_remainder[:leftovers]:
            counts[j] += 1
        for j, c in enumerate(counts):
            if c == 0:
                raise DatasetError(f"split {j} receives zero examples of class {cls}")
        pos = 0
        for j, c in enumerate(counts):
            assignments[j].extend(idx[pos : pos + c].tolist())
            pos += c
    out = []
    for j, rows in enumerate(assignments):
        rows = np.sort(np.asarray(rows, dtype=np.int64))
        out.append(
            EmbeddedDataset(
                name=f"{ds.name}/split{j}",
                dialect=ds.dialect,
                task=ds.task,
                metric=ds.metric,
                k=ds.k,
                embeddings=ds.embeddings[rows],
                lengths=ds.lengths[rows],
                labels=ds.labels[rows],
            )
        )
    return out


@dataclass
class ShiftConfig:
    """Knobs for the synthetic covariate-shift pair used in desk-scale runs."""

    k: int = 2
    d: int = 16
    s: int = 8
    n: int = 2000
    separation: float = 2.0
    kind: str = "mixed"
    magnitude: float = 1.0
    noise: float = 1.0
    seed: int = 0

    def validate(self):
        if self.kind not in SHIFT_KINDS:
            raise DatasetError(f"shift kind must be one of {SHIFT_KINDS}, got {self.kind!r}")
        if self.magnitude < 0:
            raise DatasetError("shift magnitude must be >= 0")
        if self.noise <= 0:
            raise DatasetError("degenerate covariance: noise scale must be > 0")
        if self.k < 2 or self.d < self.k or self.s < 1 or self.n < self.k:
            raise DatasetError("require k >= 2, d >= k, s >= 1, n >= k")
        if self.separation < 0:
            raise DatasetError("class separation must be >= 0")


def _draw_domain(rng, cfg, means):
    labels = rng.permutation(np.arange(cfg.n) % cfg.k)
    lengths = rng.integers(max(1, cfg.s // 2), cfg.s + 1, size=cfg.n)
    # AR(1) noise around the class mean at every position.
    x = np.empty((cfg.n, cfg.s, cfg.d))
    e = rng.normal(0.0, cfg.noise, size=(cfg.n, cfg.d))
    x[:, 0, :] = e
    for t in range(1, cfg.s):
        e = _AR_COEFF * e + np.sqrt(1.0 - _AR_COEFF**2) * rng.normal(
            0.0, cfg.noise, size=(cfg.n, cfg.d)
        )
        x[:, t, :] = e
    x += means[labels][:, None, :]
    return x, lengths, labels


def _unit(v):
    return v / np.linalg.norm(v)


def gen_synthetic_shift(cfg: ShiftConfig):
    """Generate a (source, target) dataset pair under a label-preserving shift.

    Both domains draw from the same class-conditional process; the target
    additionally passes through a fixed input-space transform: a rotation of
    the plane spanned by the class-mean difference and a random direction,
    plus a constant translation, both scaled by ``cfg.magnitude``.  Target
    labels are kept (for evaluation only).
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    basis, _ = np.linalg.qr(rng.normal(size=(cfg.d, cfg.k)))
    means = cfg.separation * basis.T  # (k, d)

    src_x, src_len, src_y = _draw_domain(rng, cfg, means)
    tgt_x, tgt_len, tgt_y = _draw_domain(rng, cfg, means)

    # Rotation plane: class-mean difference plus a random orthogonal direction.
    u1 = _unit(means[1] - means[0])
    raw = rng.normal(size=cfg.d)
    u2 = _unit(raw - (raw @ u1) * u1)
    trans_dir = _unit(rng.normal(size=cfg.d))

    theta = 0.0
    translation = np.zeros(cfg.d)
    if cfg.kind in ("rotation", "mixed"):
        theta = np.deg2rad(_BASE_ROTATION_DEG * cfg.magnitude)
    if cfg.kind in ("translation", "mixed"):
        translation = _BASE_TRANSLATION_SIGMA * cfg.magnitude * cfg.noise * trans_dir
    rot = (
        np.eye(cfg.d)
        + (np.cos(theta) - 1.0) * (np.outer(u1, u1) + np.outer(u2, u2))
        + np.sin(theta) * (np.outer(u2, u1) - np.outer(u1, u2))
    )
    tgt_x = tgt_x @ rot.T + translation

    def build(x, lengths, labels, dialect):
        return EmbeddedDataset(
            name=f"synthetic-{dialect}",
            dialect=dialect,
            task="synthetic",
            metric="accuracy",
            k=cfg.k,
            embeddings=x.astype(np.float32),
            lengths=lengths,
            labels=labels,
        )

    return build(src_x, src_len, src_y, "base"), build(tgt_x, tgt_len, tgt_y, "shifted")
