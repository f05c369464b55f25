"""Dataset formats and frame-level transforms.

On-disk formats
---------------
* Manifest: JSON Lines, one utterance record per line. An optional first line
  ``{"label_ranges": [a_min, a_max, v_min, v_max]}`` overrides the default
  label ranges (arousal in [0, 1], valence in [-1, 1]).
* AFF1 tensor file: ``b"AFF1"`` magic, one rank byte (1 or 2), ``rank``
  little-endian uint32 dims, then a row-major little-endian float32 payload.

All transforms are pure functions over :class:`FeatureSequence`; stochastic
ones take an explicit ``numpy.random.Generator``.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import AffFormatError, ManifestError

AFF1_MAGIC = b"AFF1"

MODALITIES = ("visual", "audio_vec", "audio_wave", "text_emb")
SPLITS = ("train", "validation", "test")

DEFAULT_LABEL_RANGES = (0.0, 1.0, -1.0, 1.0)


# ---------------------------------------------------------------------------
# AFF1 tensor files
# ---------------------------------------------------------------------------

def write_aff1(path: str | Path, array: np.ndarray) -> None:
    """Write a rank-1 or rank-2 float array as an AFF1 file (float32 payload)."""
    arr = np.asarray(array)
    if arr.ndim not in (1, 2):
        raise AffFormatError(f"AFF1 stores rank 1 or 2 tensors, got rank {arr.ndim}")
    if arr.size == 0:
        raise AffFormatError("AFF1 tensors must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise AffFormatError("refusing to write non-finite values")
    payload = np.ascontiguousarray(arr, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(AFF1_MAGIC)
        fh.write(struct.pack("B", arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        fh.write(payload.tobytes())


def read_aff1(path: str | Path) -> np.ndarray:
    """Read an AFF1 file, returning a float32 array with the declared shape."""
    data = Path(path).read_bytes()
    if data[:4] != AFF1_MAGIC:
        raise AffFormatError(f"{path}: bad magic {data[:4]!r}")
    if len(data) < 5:
        raise AffFormatError(f"{path}: truncated header")
    rank = data[4]
    if rank not in (1, 2):
        raise AffFormatError(f"{path}: unsupported rank {rank}")
    header_end = 5 + 4 * rank
    if len(data) < header_end:
        raise AffFormatError(f"{path}: truncated dims")
    dims = struct.unpack(f"<{rank}I", data[5:header_end])
    if any(d < 1 for d in dims):
        raise AffFormatError(f"{path}: zero-sized dim in {dims}")
    expected = int(np.prod(dims)) * 4
    if len(data) - header_end != expected:
        raise AffFormatError(
            f"{path}: payload holds {len(data) - header_end} bytes, "
            f"dims {dims} require {expected}"
        )
    arr = np.frombuffer(data[header_end:], dtype="<f4").reshape(dims)
    if not np.all(np.isfinite(arr)):
        raise AffFormatError(f"{path}: non-finite entry in payload")
    return arr


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FeatureSequence:
    """A frames x dim matrix of per-frame feature vectors for one utterance."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise ValueError(f"FeatureSequence needs a 2-D matrix, got rank {arr.ndim}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"FeatureSequence needs frames>=1 and dim>=1, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("FeatureSequence entries must be finite")
        object.__setattr__(self, "data", arr)

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


class PaddedSequence(NamedTuple):
    """Fixed-length sequence plus the validity mask separating real rows
    from zero padding."""

    seq: FeatureSequence
    mask: np.ndarray  # bool, one entry per row


def read_feature_tensor(path: str | Path) -> FeatureSequence:
    """Load an AFF1 file as a FeatureSequence.

    Rank-2 files map directly to frames x dim; rank-1 files (e.g. raw
    waveforms) become an n x 1 sequence of scalars.
    """
    arr = read_aff1(path)
    if arr.ndim == 1:
        arr = arr[:, None]
    return FeatureSequence(arr)


def write_feature_tensor(path: str | Path, seq: FeatureSequence) -> None:
    write_aff1(path, seq.data)


@dataclass(frozen=True)
class UtteranceRecord:
    """One labeled utterance and its per-modality feature file references."""

    utterance_id: str
    video_id: str
    arousal: float
    valence: float
    split: str
    visual: str | None = None
    audio_vec: str | None = None
    audio_wave: str | None = None
    text_emb: str | None = None

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ManifestError(
                f"{self.utterance_id}: split must be one of {SPLITS}, got {self.split!r}"
            )
        if all(self.path_for(m) is None for m in MODALITIES):
            raise ManifestError(f"{self.utterance_id}: no modality reference present")

    def path_for(self, modality: str) -> str | None:
        if modality not in MODALITIES:
            raise KeyError(f"unknown modality {modality!r}")
        return getattr(self, modality)


@dataclass
class DatasetManifest:
    """All utterance records of one dataset plus the configured label ranges.

    Tensor payloads are loaded lazily through :meth:`load`; parsing only
    checks that the referenced files exist.
    """

    records: list[UtteranceRecord]
    label_ranges: tuple[float, float, float, float] = DEFAULT_LABEL_RANGES
    root: Path = field(default_factory=Path)

    def __iter__(self):
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def split_records(self, split: str) -> list[UtteranceRecord]:
        return [r for r in self.records if r.split == split]

    def resolve(self, record: UtteranceRecord, modality: str) -> Path:
        rel = record.path_for(modality)
        if rel is None:
            raise ManifestError(f"{record.utterance_id}: no {modality} reference")
        return self.root / rel

    def load(self, record: UtteranceRecord, modality: str) -> np.ndarray:
        """Load one modality payload as stored (rank preserved)."""
        return read_aff1(self.resolve(record, modality))


def _check_label(name: str, value: float, lo: float, hi: float, rid: str) -> None:
    if not (math.isfinite(value) and lo <= value <= hi):
        raise ManifestError(
            f"{rid}: {name}={value} outside configured range [{lo}, {hi}]"
        )


def parse_manifest(path: str | Path) -> DatasetManifest:
    """Parse a JSON-lines manifest and validate every invariant.

    Errors name the offending line, utterance id, or file. Feature payloads
    are not read here; only their existence is verified.
    """
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest not found: {path}")
    root = path.parent
    ranges = DEFAULT_LABEL_RANGES
    records: list[UtteranceRecord] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise ManifestError(f"{path}:{lineno}: expected an object")
            if lineno == 1 and "label_ranges" in obj and "utterance_id" not in obj:
                lr = obj["label_ranges"]
                if not (isinstance(lr, list) and len(lr) == 4):
                    raise ManifestError(f"{path}:1: label_ranges must be a 4-element list")
                ranges = tuple(float(v) for v in lr)
                continue
            try:
                record = UtteranceRecord(
                    utterance_id=str(obj["utterance_id"]),
                    video_id=str(obj["video_id"]),
                    arousal=float(obj["arousal"]),
                    valence=float(obj["valence"]),
                    split=str(obj["split"]),
                    **{m: obj.get(m) for m in MODALITIES},
                )
            except KeyError as exc:
                raise ManifestError(f"{path}:{lineno}: missing field {exc}") from exc
            if record.utterance_id in seen:
                raise ManifestError(
                    f"{path}:{lineno}: duplicate utterance_id {record.utterance_id!r}"
                )
            seen.add(record.utterance_id)
            _check_label("arousal", record.arousal, ranges[0], ranges[1], record.utterance_id)
            _check_label("valence", record.valence, ranges[2], ranges[3], record.utterance_id)
            for modality in MODALITIES:
                rel = record.path_for(modality)
                if rel is not None and not (root / rel).exists():
                    raise ManifestError(
                        f"{record.utterance_id}: missing referenced file {root / rel}"
                    )
            records.append(record)
    return DatasetManifest(records=records, label_ranges=ranges, root=root)


def write_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    """Write a manifest in the JSON-lines format parse_manifest reads."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"label_ranges": list(manifest.label_ranges)}) + "\n")
        for r in manifest.records:
            obj = {
                "utterance_id": r.utterance_id,
                "video_id": r.video_id,
                "arousal": r.arousal,
                "valence": r.valence,
                "split": r.split,
            }
            for m in MODALITIES:
                if r.path_for(m) is not None:
                    obj[m] = r.path_for(m)
            fh.write(json.dumps(obj) + "\n")


# ---------------------------------------------------------------------------
# Frame-level transforms
# ---------------------------------------------------------------------------

def downsample_every_k(seq: FeatureSequence, k: int) -> FeatureSequence:
    """Keep rows 0, k, 2k, ...; output length is ceil(frames / k)."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k == 1:
        return seq
    return FeatureSequence(seq.data[::k])


def ssa_sample(seq: FeatureSequence, chunk: int, rng: np.random.Generator) -> FeatureSequence:
    """Sample one row uniformly from every consecutive chunk of `chunk` rows.

    The trailing chunk may be shorter but still contributes one row, so the
    output length is ceil(frames / chunk).
    """
    if chunk < 1:
        raise ValueError(f"chunk must be >= 1, got {chunk}")
    if chunk == 1:
        return seq
    n = seq.frames
    starts = np.arange(0, n, chunk)
    sizes = np.minimum(starts + chunk, n) - starts
    picks = starts + rng.integers(0, sizes)
    return FeatureSequence(seq.data[picks])


def csa_sample(seq: FeatureSequence, window: int, rng: np.random.Generator) -> FeatureSequence:
    """Take a contiguous block of `window` rows at a uniform random offset.

    Inputs shorter than the window pass through unchanged; zero padding is
    pad_truncate's job, not this one's.
    """
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    n = seq.frames
    if n <= window:
        return seq
    start = int(rng.integers(0, n - window + 1))
    return FeatureSequence(seq.data[start:start + window])


def pad_truncate(seq: FeatureSequence, target_frames: int) -> PaddedSequence:
    """Force a sequence to exactly `target_frames` rows.

    Short inputs are zero-padded at the end; over-length inputs are uniformly
    subsampled at indices floor(i*n/T + 0.5) to preserve temporal coverage.
    The returned mask marks real rows.
    """
    if target_frames < 1:
        raise ValueError(f"target_frames must be >= 1, got {target_frames}")
    n, d = seq.data.shape
    if n == target_frames:
        return PaddedSequence(seq, np.ones(n, dtype=bool))
    if n < target_frames:
        out = np.zeros((target_frames, d), dtype=seq.data.dtype)
        out[:n] = seq.data
        mask = np.zeros(target_frames, dtype=bool)
        mask[:n] = True
        return PaddedSequence(FeatureSequence(out), mask)
    idx = np.floor(np.arange(target_frames) * n / target_frames + 0.5).astype(int)
    return PaddedSequence(FeatureSequence(seq.data[idx]), np.ones(target_frames, dtype=bool))


def abs_pearson_scores(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """|Pearson(X[:, j], y)| per column; constant columns (or constant y)
    score 0. Population moments throughout."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n, d = X.shape
    if n < 2:
        raise ValueError(f"need at least 2 samples to correlate, got {n}")
    xc = X - X.mean(axis=0)
    yc = y - y.mean()
    sx = np.sqrt((xc ** 2).mean(axis=0))
    sy = math.sqrt(float((yc ** 2).mean()))
    cov = (xc * yc[:, None]).mean(axis=0)
    denom = sx * sy
    scores = np.zeros(d)
    ok = denom > 0
    scores[ok] = np.abs(cov[ok] / denom[ok])
    return scores


def select_features(X: np.ndarray, y: np.ndarray, k: int) -> list[int]:
    """Indices of the k columns with the largest |Pearson(X[:, j], y)|,
    ties broken toward the lower index.

    Supervised top-k selection over hand-crafted feature vectors; the scoring
    function is pluggable at the call site by ranking `abs_pearson_scores`
    replacements the same way.
    """
    scores = abs_pearson_scores(X, y)
    d = scores.size
    if not 1 <= k <= d:
        raise ValueError(f"k must be in [1, {d}], got {k}")
    order = np.lexsort((np.arange(d), -scores))
    return [int(j) for j in order[:k]]


# ---------------------------------------------------------------------------
# Fold splitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FoldAssignment:
    """Maps utterance ids to folds 0..k-1."""

    fold_of: dict[str, int]
    k: int

    def fold_indices(self, ids: Sequence[str]) -> np.ndarray:
        """Fold index per entry of `ids`, aligned with data rows."""
        return np.array([self.fold_of[i] for i in ids], dtype=int)


def kfold_split(
    ids: Sequence[str],
    k: int,
    seed: int,
    video_of: Mapping[str, str] | None = None,
) -> FoldAssignment:
    """Deterministic grouped k-fold assignment.

    Groups (one per video, or one per id when `video_of` is None) are shuffled
    by the seed and dealt round-robin, so group counts per fold differ by at
    most one. All utterances of one video land in the same fold, preventing
    leakage across folds; with multi-utterance videos the per-utterance fold
    sizes are balanced only at group granularity.
    """
    ids = list(ids)
    if len(set(ids)) != len(ids):
        raise ValueError("ids must be unique")
    if k < 1 or k > len(ids):
        raise ValueError(f"k must be in [1, {len(ids)}], got {k}")
    if video_of is None:
        video_of = {i: i for i in ids}
    groups: dict[str, list[str]] = {}
    for i in ids:
        groups.setdefault(str(video_of[i]), []).append(i)
    names = sorted(groups)
    if k > len(names):
        raise ValueError(f"k={k} exceeds the {len(names)} distinct video groups")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))
    order = rng.permutation(len(names))
    fold_of: dict[str, int] = {}
    for pos, gi in enumerate(order):
        for utt in groups[names[gi]]:
            fold_of[utt] = pos % k
    return FoldAssignment(fold_of=fold_of, k=k)
