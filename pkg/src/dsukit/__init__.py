"""Discrete speech unit extraction: linear preprocessing, k-means, BPE.

Fits standardization / PCA / whitening / ICA transforms and a k-means
codebook on pooled frame features, encodes utterances into deduplicated
(optionally BPE-merged) unit sequences, and reports bit-rate and
centroid/component diagnostics.  Ships as a library, a CLI (``dsukit``)
and a FastAPI service sharing one pipeline layer.
"""

__version__ = "0.1.0"

from .analysis import (
    centroid_similarity,
    component_extremes,
    nearest_to_centroids,
    pooled_segments,
)
from .data import (
    LabeledSegment,
    ManifestEntry,
    read_labels,
    read_manifest,
    read_matrix,
    sample_frames,
    write_labels,
    write_manifest,
    write_matrix,
)
from .errors import ConfigError, DataError, DsukitError, NumericalError
from .kmeans import KMeansModel, assign, fit_kmeans, load_model, save_model
from .linalg import SymmetricEigen, eigh, solve_row
from .preprocess import (
    IcaTransform,
    PcaTransform,
    StandardizeTransform,
    WhitenTransform,
    apply_transform,
    fit_ica,
    fit_pca,
    fit_standardize,
    fit_whiten,
    ica_loglik,
    load_transform,
    save_transform,
)
from .units import (
    BpeModel,
    UnitSequence,
    apply_bpe,
    bitrate,
    bitrate_per_utterance,
    deduplicate,
    expand_bpe,
    fit_bpe,
    load_bpe,
    read_units,
    save_bpe,
    write_units,
)

__all__ = [
    "__version__",
    "BpeModel",
    "ConfigError",
    "DataError",
    "DsukitError",
    "IcaTransform",
    "KMeansModel",
    "LabeledSegment",
    "ManifestEntry",
    "NumericalError",
    "PcaTransform",
    "StandardizeTransform",
    "SymmetricEigen",
    "UnitSequence",
    "WhitenTransform",
    "apply_bpe",
    "apply_transform",
    "assign",
    "bitrate",
    "bitrate_per_utterance",
    "centroid_similarity",
    "component_extremes",
    "deduplicate",
    "eigh",
    "expand_bpe",
    "fit_bpe",
    "fit_ica",
    "fit_kmeans",
    "fit_pca",
    "fit_standardize",
    "fit_whiten",
    "ica_loglik",
    "load_bpe",
    "load_model",
    "load_transform",
    "nearest_to_centroids",
    "pooled_segments",
    "read_labels",
    "read_manifest",
    "read_matrix",
    "read_units",
    "sample_frames",
    "save_bpe",
    "save_model",
    "save_transform",
    "solve_row",
    "write_labels",
    "write_manifest",
    "write_matrix",
    "write_units",
]
