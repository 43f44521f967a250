"""Feature matrix IO, utterance manifests, frame labels, and frame sampling.

A feature matrix is a T x D float64 numpy array (T frames, D dimensions).
On disk it uses a small self-describing binary container:

    offset 0   magic   b"DSUK"
    offset 4   u16     format version (1)
    offset 6   u16     dtype code (1 = float64, little-endian)
    offset 8   u64     rows (T)
    offset 16  u64     cols (D)
    offset 24  payload row-major float64 values, rows*cols*8 bytes

All integers are little-endian.  Manifests and label files are UTF-8 TSV.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError

MATRIX_MAGIC = b"DSUK"
MATRIX_VERSION = 1
DTYPE_FLOAT64 = 1
_HEADER = struct.Struct("<4sHHQQ")

# Guards against absurd headers allocating petabytes.
_MAX_DIM = 1 << 40


def as_matrix(x, what: str = "matrix") -> np.ndarray:
    """Validate a feature matrix: 2-D, float64, T >= 1, D >= 1, all finite."""
    m = np.asarray(x, dtype=np.float64)
    if m.ndim != 2:
        raise DataError(f"{what}: expected a 2-D array, got {m.ndim}-D")
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise DataError(f"{what}: empty matrix (shape {m.shape[0]}x{m.shape[1]})")
    if not np.all(np.isfinite(m)):
        t, d = np.argwhere(~np.isfinite(m))[0]
        raise DataError(f"{what}: non-finite value at row {t}, col {d}")
    return m


def read_matrix(path: str | Path) -> np.ndarray:
    path = Path(path)
    try:
        raw_header = path.open("rb").read(_HEADER.size)
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from e
    if len(raw_header) < _HEADER.size:
        raise DataError(
            f"{path}: truncated header, expected {_HEADER.size} bytes, got {len(raw_header)}"
        )
    magic, version, dtype, rows, cols = _HEADER.unpack(raw_header)
    if magic != MATRIX_MAGIC:
        raise DataError(f"{path}: bad magic {magic!r} at byte offset 0")
    if version != MATRIX_VERSION:
        raise DataError(f"{path}: unsupported format version {version} at byte offset 4")
    if dtype != DTYPE_FLOAT64:
        raise DataError(f"{path}: unsupported dtype code {dtype} at byte offset 6")
    if rows == 0 or cols == 0:
        raise DataError(f"{path}: empty matrix ({rows}x{cols}) in header at byte offset 8")
    if rows > _MAX_DIM or cols > _MAX_DIM or rows * cols > _MAX_DIM:
        raise DataError(f"{path}: dimension overflow ({rows}x{cols}) in header at byte offset 8")
    expected = _HEADER.size + rows * cols * 8
    actual = path.stat().st_size
    if actual != expected:
        raise DataError(f"{path}: expected {expected} bytes, got {actual}")
    with path.open("rb") as f:
        f.seek(_HEADER.size)
        payload = f.read(rows * cols * 8)
    values = np.frombuffer(payload, dtype="<f8").reshape(rows, cols)
    if not np.all(np.isfinite(values)):
        t, d = np.argwhere(~np.isfinite(values))[0]
        offset = _HEADER.size + (t * cols + d) * 8
        raise DataError(f"{path}: non-finite value at byte offset {offset} (row {t}, col {d})")
    return np.ascontiguousarray(values)


def write_matrix(m: np.ndarray, path: str | Path) -> None:
    m = as_matrix(m)
    path = Path(path)
    header = _HEADER.pack(MATRIX_MAGIC, MATRIX_VERSION, DTYPE_FLOAT64, m.shape[0], m.shape[1])
    try:
        with path.open("wb") as f:
            f.write(header)
            f.write(np.ascontiguousarray(m, dtype="<f8").tobytes())
    except OSError as e:
        raise DataError(f"cannot write {path}: {e}") from e


def sample_frames(m: np.ndarray, fraction: float, seed: int) -> np.ndarray:
    """Draw a uniform without-replacement row sample, keeping row order.

    The sample size is fraction*T rounded half up, with a floor of one row.
    The same seed always selects the same rows.
    """
    m = as_matrix(m)
    if not 0.0 < fraction <= 1.0:
        raise ConfigError(f"sample fraction must be in (0, 1], got {fraction}")
    t = m.shape[0]
    n = max(1, int(np.floor(fraction * t + 0.5)))
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(t, size=n, replace=False))
    return m[idx]


@dataclass(frozen=True)
class ManifestEntry:
    utt_id: str
    path: str
    frames: int
    duration_s: float


@dataclass(frozen=True)
class LabeledSegment:
    utt_id: str
    start: int
    end: int
    label: str


def read_manifest(path: str | Path) -> list[ManifestEntry]:
    """Parse a TSV manifest: id<TAB>path<TAB>frames<TAB>duration_s."""
    path = Path(path)
    entries = []
    seen = set()
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise DataError(f"cannot read manifest {path}: {e}") from e
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise DataError(f"{path}:{lineno}: expected 4 tab-separated fields, got {len(parts)}")
        utt_id, feat_path, frames_s, dur_s = parts
        if utt_id in seen:
            raise DataError(f"{path}:{lineno}: duplicate utterance id {utt_id!r}")
        seen.add(utt_id)
        try:
            frames = int(frames_s)
            duration = float(dur_s)
        except ValueError as e:
            raise DataError(f"{path}:{lineno}: {e}") from e
        if frames < 0:
            raise DataError(f"{path}:{lineno}: negative frame count {frames}")
        if not duration > 0:
            raise DataError(f"{path}:{lineno}: duration must be positive, got {duration}")
        entries.append(ManifestEntry(utt_id, feat_path, frames, duration))
    if not entries:
        raise DataError(f"{path}: empty manifest")
    return entries


def write_manifest(entries: list[ManifestEntry], path: str | Path) -> None:
    lines = [f"{e.utt_id}\t{e.path}\t{e.frames}\t{e.duration_s!r}" for e in entries]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_labels(path: str | Path) -> list[LabeledSegment]:
    """Parse a TSV label file: utt_id<TAB>start_frame<TAB>end_frame<TAB>label."""
    path = Path(path)
    segments = []
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise DataError(f"cannot read labels {path}: {e}") from e
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise DataError(f"{path}:{lineno}: expected 4 tab-separated fields, got {len(parts)}")
        utt_id, start_s, end_s, label = parts
        try:
            start, end = int(start_s), int(end_s)
        except ValueError as e:
            raise DataError(f"{path}:{lineno}: {e}") from e
        if not 0 <= start < end:
            raise DataError(f"{path}:{lineno}: invalid segment range [{start}, {end})")
        segments.append(LabeledSegment(utt_id, start, end, label))
    return segments


def write_labels(segments: list[LabeledSegment], path: str | Path) -> None:
    lines = [f"{s.utt_id}\t{s.start}\t{s.end}\t{s.label}" for s in segments]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
