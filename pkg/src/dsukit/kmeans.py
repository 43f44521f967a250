"""K-means under Euclidean or cosine distance, producing frame-level unit indices.

The cosine variant is spherical k-means: rows are L2-normalized once,
assignment maximizes the dot product against unit-norm centroids, and the
centroid update renormalizes the member mean.  Initialization is k-means++
under the active metric's squared distance.  All reductions run in a fixed
order, so a fit is bitwise reproducible for a given seed.

Model files:

    offset 0   magic   b"DSUM"
    offset 4   u16     format version (1)
    offset 6   u16     metric code (1 euclid, 2 cosine)
    offset 8   u64     k
    offset 16  u64     dimension D
    offset 24  payload centroids, k*D row-major float64 little-endian
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import as_matrix
from .errors import ConfigError, DataError

MODEL_MAGIC = b"DSUM"
MODEL_VERSION = 1
_MHEADER = struct.Struct("<4sHHQQ")
_METRIC_CODES = {"euclid": 1, "cosine": 2}
_METRIC_NAMES = {v: k for k, v in _METRIC_CODES.items()}

# Frames processed per distance-matrix block; bounds memory at large T.
_CHUNK = 8192


@dataclass(frozen=True)
class KMeansModel:
    centroids: np.ndarray
    metric: str
    inertia: float | None = None
    inertia_history: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]


def _check_metric(metric: str) -> str:
    if metric not in _METRIC_CODES:
        raise ConfigError(f"unknown metric {metric!r}, expected one of {sorted(_METRIC_CODES)}")
    return metric


def _unit_rows(x: np.ndarray, what: str) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1)
    if np.any(norms == 0.0):
        row = int(np.argmax(norms == 0.0))
        raise DataError(f"{what}: zero-norm row {row} under cosine metric")
    return x / norms[:, None]


def _assign_dist(data: np.ndarray, centroids: np.ndarray, metric: str):
    """Labels and each frame's distance to its centroid.

    Distances are squared Euclidean, or 1 - cosine similarity; `data` must
    already be unit-normalized for the cosine metric.  Ties go to the
    lowest centroid index.
    """
    t = data.shape[0]
    labels = np.empty(t, dtype=np.int64)
    dist = np.empty(t)
    if metric == "euclid":
        c2 = (centroids**2).sum(axis=1)
        for lo in range(0, t, _CHUNK):
            block = data[lo : lo + _CHUNK]
            d2 = (block**2).sum(axis=1)[:, None] - 2.0 * (block @ centroids.T) + c2[None, :]
            np.maximum(d2, 0.0, out=d2)
            idx = np.argmin(d2, axis=1)
            labels[lo : lo + block.shape[0]] = idx
            dist[lo : lo + block.shape[0]] = d2[np.arange(block.shape[0]), idx]
    else:
        for lo in range(0, t, _CHUNK):
            block = data[lo : lo + _CHUNK]
            sims = block @ centroids.T
            idx = np.argmax(sims, axis=1)
            labels[lo : lo + block.shape[0]] = idx
            dist[lo : lo + block.shape[0]] = 1.0 - sims[np.arange(block.shape[0]), idx]
    return labels, dist


def _plusplus_init(data: np.ndarray, k: int, metric: str, rng: np.random.Generator) -> np.ndarray:
    t = data.shape[0]
    centroids = np.empty((k, data.shape[1]))
    centroids[0] = data[int(rng.integers(t))]
    if k == 1:
        return centroids
    _, dist = _assign_dist(data, centroids[:1], metric)
    weights = dist**2 if metric == "cosine" else dist  # squared active-metric distance
    for j in range(1, k):
        total = weights.sum()
        if total <= 0.0:
            raise DataError(f"cannot place {k} distinct centroids: data has too few distinct rows")
        idx = int(rng.choice(t, p=weights / total))
        centroids[j] = data[idx]
        _, dist_j = _assign_dist(data, centroids[j : j + 1], metric)
        w_j = dist_j**2 if metric == "cosine" else dist_j
        np.minimum(weights, w_j, out=weights)
    return centroids


def _repair_empty(data, centroids, empty, dist):
    """Re-seed empty clusters at the frame farthest from its own centroid.

    Frames bitwise equal to a current centroid are skipped so the repair
    never collapses two centroids onto one point; ties pick the lowest
    frame index.
    """
    dist = dist.copy()
    for j in empty:
        while True:
            p = int(np.argmax(dist))
            if dist[p] == -np.inf:
                raise DataError("cannot repair empty cluster: too few distinct rows")
            if np.any(np.all(centroids == data[p], axis=1)):
                dist[p] = -np.inf
                continue
            centroids[j] = data[p]
            dist[p] = -np.inf
            break
    return centroids


def fit_kmeans(
    x: np.ndarray,
    k: int,
    metric: str = "euclid",
    seed: int = 0,
    max_iters: int = 300,
    tol: float = 1e-6,
) -> KMeansModel:
    """Lloyd iterations from a k-means++ start.

    Stops when the largest centroid movement is at most tol relative to
    the RMS data scale, or after max_iters update steps.  Assignment-step
    inertia is recorded per iteration and is non-increasing.
    """
    x = as_matrix(x)
    _check_metric(metric)
    t, d = x.shape
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    if k > t:
        raise ConfigError(f"k={k} exceeds frame count T={t}")
    data = _unit_rows(x, "fit_kmeans") if metric == "cosine" else x

    rng = np.random.default_rng(seed)
    centroids = _plusplus_init(data, k, metric, rng)
    tol_abs = tol * np.sqrt(np.mean(data**2))

    labels, dist = _assign_dist(data, centroids, metric)
    history = [float(dist.sum())]
    for _ in range(max_iters):
        sums = np.zeros((k, d))
        np.add.at(sums, labels, data)
        counts = np.bincount(labels, minlength=k)
        new_centroids = centroids.copy()
        empty = []
        for j in range(k):
            if counts[j] == 0:
                empty.append(j)
                continue
            mean = sums[j] / counts[j]
            if metric == "cosine":
                norm = np.linalg.norm(mean)
                if norm == 0.0:
                    empty.append(j)
                    continue
                mean = mean / norm
            new_centroids[j] = mean
        if empty:
            new_centroids = _repair_empty(data, new_centroids, empty, dist)
        movement = float(np.max(np.linalg.norm(new_centroids - centroids, axis=1)))
        centroids = new_centroids
        labels, dist = _assign_dist(data, centroids, metric)
        history.append(float(dist.sum()))
        if movement <= tol_abs:
            break
    return KMeansModel(
        centroids=centroids,
        metric=metric,
        inertia=history[-1],
        inertia_history=np.asarray(history),
    )


def assign(m: KMeansModel, x: np.ndarray) -> np.ndarray:
    """Cluster index per frame; ties go to the lowest centroid index."""
    x = as_matrix(x)
    if x.shape[1] != m.dim:
        raise DataError(f"dimension mismatch: model has D={m.dim}, data has D={x.shape[1]}")
    data = _unit_rows(x, "assign") if m.metric == "cosine" else x
    labels, _ = _assign_dist(data, m.centroids, m.metric)
    return labels


def save_model(m: KMeansModel, path: str | Path) -> None:
    header = _MHEADER.pack(MODEL_MAGIC, MODEL_VERSION, _METRIC_CODES[m.metric], m.k, m.dim)
    try:
        with Path(path).open("wb") as f:
            f.write(header)
            f.write(np.ascontiguousarray(m.centroids, dtype="<f8").tobytes())
    except OSError as e:
        raise DataError(f"cannot write {path}: {e}") from e


def load_model(path: str | Path) -> KMeansModel:
    path = Path(path)
    try:
        buf = path.read_bytes()
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from e
    if len(buf) < _MHEADER.size:
        raise DataError(f"{path}: truncated header, expected {_MHEADER.size} bytes, got {len(buf)}")
    magic, version, metric_code, k, d = _MHEADER.unpack_from(buf)
    if magic != MODEL_MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}")
    if version != MODEL_VERSION:
        raise DataError(f"{path}: unsupported format version {version}")
    if metric_code not in _METRIC_NAMES:
        raise DataError(f"{path}: unknown metric code {metric_code}")
    if k < 1 or d < 1:
        raise DataError(f"{path}: invalid model shape k={k}, D={d}")
    expected = _MHEADER.size + k * d * 8
    if len(buf) != expected:
        raise DataError(f"{path}: expected {expected} bytes, got {len(buf)}")
    centroids = np.frombuffer(buf, dtype="<f8", offset=_MHEADER.size).reshape(k, d).copy()
    if not np.all(np.isfinite(centroids)):
        raise DataError(f"{path}: non-finite centroid values")
    return KMeansModel(centroids=centroids, metric=_METRIC_NAMES[metric_code])
