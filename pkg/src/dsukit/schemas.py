"""Pydantic request/response models shared by the service and the CLI.

Request models are the pipeline configuration: the CLI builds them from
flags and an optional key=value file, the service receives them as JSON
bodies.  Defaults mirror the standard extraction recipe (2000 clusters,
5% frame sample, 100 ICA iterations, BPE vocabulary 3000).
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

Preprocessing = Literal["none", "std", "pca", "whiten", "ica"]
Metric = Literal["euclid", "cosine"]


class _Schema(BaseModel):
    # Allows field names like model_path, which pydantic reserves by default.
    model_config = ConfigDict(protected_namespaces=())


class FitRequest(_Schema):
    manifest: str
    outdir: str
    preprocessing: Preprocessing = "none"
    metric: Metric = "euclid"
    k: int = Field(default=2000, ge=1)
    sample_fraction: float = Field(default=0.05, gt=0.0, le=1.0)
    ica_iters: int = Field(default=100, ge=1)
    seed: int = 0
    kmeans_max_iters: int = Field(default=300, ge=1)
    kmeans_tol: float = Field(default=1e-6, ge=0.0)
    # Fit the preprocessing transform on all frames instead of the sample.
    fit_on_full: bool = False


class FitResponse(_Schema):
    model_path: Optional[str]
    transform_path: Optional[str]
    run_manifest: str
    frames_total: int
    frames_sampled: int
    config_hash: str


class EncodeRequest(_Schema):
    manifest: str
    outdir: str
    model_path: str
    transform_path: Optional[str] = None
    bpe_path: Optional[str] = None
    threads: int = Field(default=1, ge=1)


class EncodeResponse(_Schema):
    units_path: str
    frame_units_path: str
    bitrate_path: str
    vocab_size: int
    mean_bitrate: float
    utterances: int


class AnalyzeRequest(_Schema):
    model_path: str
    outdir: str
    transform_path: Optional[str] = None
    labels: Optional[str] = None
    manifest: Optional[str] = None
    bins: int = Field(default=50, ge=1)
    neighbors: int = Field(default=10, ge=1)
    extremes: int = Field(default=5, ge=1)


class AnalyzeResponse(_Schema):
    histogram_path: str
    summary_path: str
    mean_similarity: float
    neighbors_path: Optional[str]
    extremes_path: Optional[str]
    notices: list[str]


class BpeTrainRequest(_Schema):
    units: str
    out: str
    base_vocab: int = Field(ge=1)
    vocab_size: int = Field(default=3000, ge=2)
    dedup: bool = True


class BpeTrainResponse(_Schema):
    bpe_path: str
    merges: int
    vocab_size: int


class BitrateRequest(_Schema):
    units: str
    manifest: str
    vocab_size: int = Field(default=3000, ge=2)
    out: Optional[str] = None


class BitrateResponse(_Schema):
    mean_bitrate: float
    vocab_size: int
    utterances: int
    out: Optional[str]


class ConvertRequest(_Schema):
    input: str
    output: str


class ConvertResponse(_Schema):
    output: str
    rows: int
    cols: int


class HealthResponse(_Schema):
    status: str
    version: str
