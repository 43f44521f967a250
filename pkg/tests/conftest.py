import numpy as np
import pytest

from dsukit.data import (
    LabeledSegment,
    ManifestEntry,
    write_labels,
    write_manifest,
    write_matrix,
)


@pytest.fixture
def corpus(tmp_path):
    """Small anisotropic corpus: manifest, feature files, labels.

    Two loose point groups with very unequal axis scales, so whitening
    changes k-means assignments, plus one zero-frame utterance.
    """
    root = tmp_path / "corpus"
    root.mkdir()
    rng = np.random.default_rng(42)
    scales = np.array([5.0, 1.0, 0.5, 0.2])
    entries, segs = [], []
    for i in range(5):
        t = int(rng.integers(60, 140))
        center = np.full(4, 2.0 * (i % 2))
        x = center + rng.normal(size=(t, 4)) * scales
        write_matrix(x, root / f"utt{i}.dsuk")
        entries.append(ManifestEntry(f"utt{i}", f"utt{i}.dsuk", t, t / 50.0))
        segs.append(LabeledSegment(f"utt{i}", 0, 10, f"ph{i % 2}"))
    entries.append(ManifestEntry("silence", "utt0.dsuk", 0, 0.4))
    write_manifest(entries, root / "manifest.tsv")
    write_labels(segs, root / "labels.tsv")
    return root
