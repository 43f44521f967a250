"""Centroid similarity histograms, nearest-neighbor labeling, ICA extremes.

These mirror the qualitative studies run on fitted artifacts: how
orthogonal the cluster centroids are, which labeled segments sit closest
to each centroid, and which segments sit at the positive and negative
ends of each ICA component.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import LabeledSegment, as_matrix
from .errors import ConfigError, DataError
from .kmeans import KMeansModel
from .preprocess import IcaTransform, apply_ica

DEFAULT_BINS = 50
DEFAULT_NEIGHBORS = 10
DEFAULT_EXTREMES = 5


@dataclass(frozen=True)
class SimilarityHistogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    mean_similarity: float


@dataclass(frozen=True)
class NeighborEntry:
    """Neighbor list for one centroid (or one ICA component direction)."""

    key: int
    direction: str | None
    neighbors: tuple[tuple[int, str, float], ...]  # (pool index, label, distance or coordinate)
    label_counts: tuple[tuple[str, int], ...]
    pure: bool


@dataclass(frozen=True)
class NeighborReport:
    entries: tuple[NeighborEntry, ...]
    m: int


def centroid_similarity(m: KMeansModel, bins: int = DEFAULT_BINS) -> SimilarityHistogram:
    """Cosine similarities of all unordered centroid pairs on [-1, 1] bins."""
    if m.k < 2:
        raise ConfigError(f"similarity histogram needs k >= 2, got k={m.k}")
    if bins < 1:
        raise ConfigError(f"bins must be >= 1, got {bins}")
    norms = np.linalg.norm(m.centroids, axis=1)
    if np.any(norms == 0.0):
        raise DataError(f"centroid {int(np.argmax(norms == 0.0))} has zero norm")
    unit = m.centroids / norms[:, None]
    sims = np.clip(unit @ unit.T, -1.0, 1.0)
    upper = sims[np.triu_indices(m.k, k=1)]
    counts, edges = np.histogram(upper, bins=bins, range=(-1.0, 1.0))
    return SimilarityHistogram(bin_edges=edges, counts=counts, mean_similarity=float(upper.mean()))


def pooled_segments(
    features: dict[str, np.ndarray], segments: list[LabeledSegment]
) -> list[tuple[str, np.ndarray]]:
    """Average-pool each labeled segment's frame rows into one vector."""
    pool = []
    for seg in segments:
        if seg.utt_id not in features:
            raise DataError(f"segment references unknown utterance {seg.utt_id!r}")
        x = as_matrix(features[seg.utt_id], what=seg.utt_id)
        if seg.end > x.shape[0]:
            raise DataError(
                f"{seg.utt_id}: segment [{seg.start}, {seg.end}) exceeds {x.shape[0]} frames"
            )
        pool.append((seg.label, x[seg.start : seg.end].mean(axis=0)))
    return pool


def _tally(labels: list[str]) -> tuple[tuple[tuple[str, int], ...], bool]:
    counts = Counter(labels)
    ordered = tuple(sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])))
    return ordered, len(counts) == 1


def nearest_to_centroids(
    m: KMeansModel, pool: list[tuple[str, np.ndarray]], m_neighbors: int = DEFAULT_NEIGHBORS
) -> NeighborReport:
    """The m nearest pooled vectors per centroid under the model's metric.

    Distance ties keep the lower pool index.  An entry is flagged pure when
    all m neighbors carry the same label.
    """
    if not pool:
        raise ConfigError("empty pool")
    if m_neighbors > len(pool):
        raise ConfigError(f"m_neighbors={m_neighbors} exceeds pool size {len(pool)}")
    labels = [label for label, _ in pool]
    vectors = np.stack([vec for _, vec in pool]).astype(np.float64)
    if vectors.shape[1] != m.dim:
        raise DataError(f"dimension mismatch: model has D={m.dim}, pool has D={vectors.shape[1]}")
    if m.metric == "cosine":
        norms = np.linalg.norm(vectors, axis=1)
        if np.any(norms == 0.0):
            raise DataError(f"pool vector {int(np.argmax(norms == 0.0))} has zero norm")
        dists = 1.0 - (vectors / norms[:, None]) @ m.centroids.T
    else:
        diffs = vectors[:, None, :] - m.centroids[None, :, :]
        dists = np.sqrt((diffs**2).sum(axis=2))
    entries = []
    for j in range(m.k):
        order = np.argsort(dists[:, j], kind="stable")[:m_neighbors]
        neighbors = tuple((int(i), labels[i], float(dists[i, j])) for i in order)
        tally, pure = _tally([labels[i] for i in order])
        entries.append(
            NeighborEntry(key=j, direction=None, neighbors=neighbors, label_counts=tally, pure=pure)
        )
    return NeighborReport(entries=tuple(entries), m=m_neighbors)


def component_extremes(
    t: IcaTransform, pool: list[tuple[str, np.ndarray]], m_top: int = DEFAULT_EXTREMES
) -> NeighborReport:
    """Labels of the m_top largest and smallest coordinates per ICA component.

    Pooled vectors are passed through the full transform; each component
    yields a "pos" and a "neg" entry, flagged pure when its m_top segments
    share one label.
    """
    if not pool:
        raise ConfigError("empty pool")
    if m_top < 1:
        raise ConfigError(f"m_top must be >= 1, got {m_top}")
    if m_top > len(pool):
        raise ConfigError(f"m_top={m_top} exceeds pool size {len(pool)}")
    labels = [label for label, _ in pool]
    vectors = np.stack([vec for _, vec in pool]).astype(np.float64)
    coords = apply_ica(t, vectors)
    entries = []
    for d in range(coords.shape[1]):
        col = coords[:, d]
        for direction, order in (
            ("pos", np.argsort(-col, kind="stable")[:m_top]),
            ("neg", np.argsort(col, kind="stable")[:m_top]),
        ):
            neighbors = tuple((int(i), labels[i], float(col[i])) for i in order)
            tally, pure = _tally([labels[i] for i in order])
            entries.append(
                NeighborEntry(
                    key=d, direction=direction, neighbors=neighbors, label_counts=tally, pure=pure
                )
            )
    return NeighborReport(entries=tuple(entries), m=m_top)


def write_histogram_csv(h: SimilarityHistogram, path: str | Path) -> None:
    """CSV schema: bin_lo,bin_hi,count."""
    with Path(path).open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["bin_lo", "bin_hi", "count"])
        for lo, hi, count in zip(h.bin_edges[:-1], h.bin_edges[1:], h.counts):
            writer.writerow([repr(float(lo)), repr(float(hi)), int(count)])


def write_neighbors_csv(report: NeighborReport, path: str | Path) -> None:
    """CSV schema: centroid,rank,label,distance."""
    with Path(path).open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["centroid", "rank", "label", "distance"])
        for entry in report.entries:
            for rank, (_, label, dist) in enumerate(entry.neighbors):
                writer.writerow([entry.key, rank, label, repr(dist)])


def write_extremes_csv(report: NeighborReport, path: str | Path) -> None:
    """CSV schema: component,direction,rank,label,coordinate."""
    with Path(path).open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["component", "direction", "rank", "label", "coordinate"])
        for entry in report.entries:
            for rank, (_, label, value) in enumerate(entry.neighbors):
                writer.writerow([entry.key, entry.direction, rank, label, repr(value)])
