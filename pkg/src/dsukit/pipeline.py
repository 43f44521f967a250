"""End-to-end runners: fit, encode, analyze, bpe-train, bitrate, convert.

Each runner takes a request model and returns a response model, so the
FastAPI service and the CLI share one code path.  Feature paths inside a
manifest resolve relative to the manifest's directory.  Every fit writes
a run manifest (config echo, config hash, input digests, artifact list)
with no timestamps, so identical configs and inputs reproduce outputs
byte for byte.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    centroid_similarity,
    component_extremes,
    nearest_to_centroids,
    pooled_segments,
    write_extremes_csv,
    write_histogram_csv,
    write_neighbors_csv,
)
from .data import (
    ManifestEntry,
    read_labels,
    read_manifest,
    read_matrix,
    sample_frames,
    write_matrix,
)
from .errors import ConfigError, DataError
from .kmeans import assign, fit_kmeans, load_model, save_model
from .preprocess import (
    IcaTransform,
    apply_transform,
    fit_ica,
    fit_pca,
    fit_standardize,
    fit_whiten,
    load_transform,
    save_transform,
)
from .schemas import (
    AnalyzeRequest,
    AnalyzeResponse,
    BitrateRequest,
    BitrateResponse,
    BpeTrainRequest,
    BpeTrainResponse,
    ConvertRequest,
    ConvertResponse,
    EncodeRequest,
    EncodeResponse,
    FitRequest,
    FitResponse,
)
from .units import (
    UnitSequence,
    apply_bpe,
    bitrate_per_utterance,
    deduplicate,
    fit_bpe,
    load_bpe,
    read_units,
    save_bpe,
    write_units,
)


def _require(path: str | None, what: str) -> Path:
    if path is None:
        raise ConfigError(f"{what} path is required")
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"{what} not found: {p}")
    return p


def _feature_path(manifest_path: Path, entry: ManifestEntry) -> Path:
    p = Path(entry.path)
    return p if p.is_absolute() else manifest_path.parent / p


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _load_entry(manifest_path: Path, entry: ManifestEntry) -> np.ndarray:
    m = read_matrix(_feature_path(manifest_path, entry))
    if m.shape[0] != entry.frames:
        raise DataError(
            f"{entry.utt_id}: manifest says {entry.frames} frames, file has {m.shape[0]}"
        )
    return m


def _pooled_features(manifest_path: Path, entries: list[ManifestEntry]) -> np.ndarray:
    matrices = [_load_entry(manifest_path, e) for e in entries if e.frames > 0]
    if not matrices:
        raise DataError("manifest contains no frames")
    dims = {m.shape[1] for m in matrices}
    if len(dims) != 1:
        raise DataError(f"inconsistent feature dimensions across utterances: {sorted(dims)}")
    return np.concatenate(matrices, axis=0)


def run_fit(req: FitRequest) -> FitResponse:
    manifest_path = _require(req.manifest, "manifest")
    outdir = Path(req.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    entries = read_manifest(manifest_path)
    pooled = _pooled_features(manifest_path, entries)
    sample = sample_frames(pooled, req.sample_fraction, req.seed)
    fit_data = pooled if req.fit_on_full else sample

    transform = None
    if req.preprocessing == "std":
        transform = fit_standardize(fit_data)
    elif req.preprocessing == "pca":
        transform = fit_pca(fit_data)
    elif req.preprocessing == "whiten":
        transform = fit_whiten(fit_data)
    elif req.preprocessing == "ica":
        transform = fit_ica(fit_data, iters=req.ica_iters, seed=req.seed)

    train = apply_transform(transform, sample) if transform is not None else sample
    model = fit_kmeans(
        train, req.k, req.metric, seed=req.seed, max_iters=req.kmeans_max_iters, tol=req.kmeans_tol
    )

    transform_path = None
    if transform is not None:
        transform_path = outdir / "transform.dsut"
        save_transform(transform, transform_path)
    model_path = outdir / "kmeans.dsum"
    save_model(model, model_path)

    config = req.model_dump()
    # Hash the computational configuration only; outdir does not affect
    # the fitted artifacts.
    hashed = {k: v for k, v in config.items() if k != "outdir"}
    config_hash = hashlib.sha256(json.dumps(hashed, sort_keys=True).encode()).hexdigest()
    run_manifest = {
        "tool": "dsukit",
        "version": __version__,
        "config": config,
        "config_hash": config_hash,
        "inputs": {
            "manifest": _sha256(manifest_path),
            "features": {
                e.utt_id: _sha256(_feature_path(manifest_path, e))
                for e in entries
                if e.frames > 0
            },
        },
        "artifacts": {
            "model": str(model_path),
            "transform": str(transform_path) if transform_path else None,
        },
        "frames_total": int(pooled.shape[0]),
        "frames_sampled": int(sample.shape[0]),
    }
    run_path = outdir / "run.json"
    run_path.write_text(json.dumps(run_manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return FitResponse(
        model_path=str(model_path),
        transform_path=str(transform_path) if transform_path else None,
        run_manifest=str(run_path),
        frames_total=int(pooled.shape[0]),
        frames_sampled=int(sample.shape[0]),
        config_hash=config_hash,
    )


def run_encode(req: EncodeRequest) -> EncodeResponse:
    manifest_path = _require(req.manifest, "manifest")
    model_path = _require(req.model_path, "model")
    outdir = Path(req.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    entries = read_manifest(manifest_path)
    model = load_model(model_path)
    transform = load_transform(_require(req.transform_path, "transform")) if req.transform_path else None
    if transform is not None and transform.dim != model.dim:
        raise DataError(
            f"transform dimension D={transform.dim} does not match model dimension D={model.dim}"
        )
    bpe = load_bpe(_require(req.bpe_path, "bpe model")) if req.bpe_path else None
    if bpe is not None and bpe.base_vocab != model.k:
        raise DataError(f"bpe base vocabulary {bpe.base_vocab} does not match model k {model.k}")

    def encode_one(entry: ManifestEntry) -> UnitSequence:
        if entry.frames == 0:
            return UnitSequence(utt_id=entry.utt_id, units=(), duration_s=entry.duration_s)
        x = _load_entry(manifest_path, entry)
        if transform is not None:
            x = apply_transform(transform, x)
        labels = assign(model, x)
        return UnitSequence(utt_id=entry.utt_id, units=tuple(labels), duration_s=entry.duration_s)

    if req.threads > 1:
        with ThreadPoolExecutor(max_workers=req.threads) as pool:
            frame_seqs = list(pool.map(encode_one, entries))
    else:
        frame_seqs = [encode_one(e) for e in entries]

    encoded = [deduplicate(s) for s in frame_seqs]
    vocab_size = model.k
    if bpe is not None:
        encoded = [apply_bpe(bpe, s) for s in encoded]
        vocab_size = bpe.vocab_size

    frame_units_path = outdir / "units_frames.txt"
    units_path = outdir / "units.txt"
    write_units(frame_seqs, frame_units_path)
    write_units(encoded, units_path)

    rates = {s.utt_id: bitrate_per_utterance(s, vocab_size) for s in encoded}
    mean_rate = sum(rates.values()) / len(rates)
    bitrate_path = outdir / "bitrate.json"
    bitrate_path.write_text(
        json.dumps(
            {"vocab_size": vocab_size, "mean": mean_rate, "per_utterance": rates},
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    return EncodeResponse(
        units_path=str(units_path),
        frame_units_path=str(frame_units_path),
        bitrate_path=str(bitrate_path),
        vocab_size=vocab_size,
        mean_bitrate=mean_rate,
        utterances=len(encoded),
    )


def run_analyze(req: AnalyzeRequest) -> AnalyzeResponse:
    model_path = _require(req.model_path, "model")
    outdir = Path(req.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    model = load_model(model_path)
    transform = load_transform(_require(req.transform_path, "transform")) if req.transform_path else None

    notices: list[str] = []
    hist = centroid_similarity(model, bins=req.bins)
    histogram_path = outdir / "histogram.csv"
    write_histogram_csv(hist, histogram_path)

    neighbors_path = None
    extremes_path = None
    purity = None
    if req.labels is not None:
        labels_path = _require(req.labels, "labels")
        manifest_path = _require(req.manifest, "manifest (required for neighbor analysis)")
        segments = read_labels(labels_path)
        if not segments:
            raise DataError(f"{labels_path}: no labeled segments")
        entries = read_manifest(manifest_path)
        by_id = {e.utt_id: e for e in entries}
        needed = sorted({s.utt_id for s in segments})
        missing = [u for u in needed if u not in by_id]
        if missing:
            raise DataError(f"labels reference utterances missing from manifest: {missing[:5]}")
        features = {u: _load_entry(manifest_path, by_id[u]) for u in needed}
        pool = pooled_segments(features, segments)

        if transform is not None:
            vectors = apply_transform(transform, np.stack([v for _, v in pool]))
            model_pool = [(label, vectors[i]) for i, (label, _) in enumerate(pool)]
        else:
            model_pool = pool
        report = nearest_to_centroids(model, model_pool, m_neighbors=req.neighbors)
        neighbors_path = outdir / "neighbors.csv"
        write_neighbors_csv(report, neighbors_path)
        purity = sum(1 for e in report.entries if e.pure)

        if isinstance(transform, IcaTransform):
            extremes = component_extremes(transform, pool, m_top=req.extremes)
            extremes_path = outdir / "extremes.csv"
            write_extremes_csv(extremes, extremes_path)
        else:
            notices.append("component extremes skipped: no ica transform supplied")
    else:
        notices.append("neighbor analysis skipped: no labels supplied")

    summary = {
        "mean_similarity": hist.mean_similarity,
        "bins": req.bins,
        "pairs": int(hist.counts.sum()),
        "pure_centroids": purity,
        "notices": notices,
        "artifacts": {
            "histogram": str(histogram_path),
            "neighbors": str(neighbors_path) if neighbors_path else None,
            "extremes": str(extremes_path) if extremes_path else None,
        },
    }
    summary_path = outdir / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return AnalyzeResponse(
        histogram_path=str(histogram_path),
        summary_path=str(summary_path),
        mean_similarity=hist.mean_similarity,
        neighbors_path=str(neighbors_path) if neighbors_path else None,
        extremes_path=str(extremes_path) if extremes_path else None,
        notices=notices,
    )


def run_bpe_train(req: BpeTrainRequest) -> BpeTrainResponse:
    units_path = _require(req.units, "units")
    seqs = read_units(units_path)
    if req.dedup:
        seqs = [deduplicate(s) for s in seqs]
    model = fit_bpe(seqs, vocab_size=req.vocab_size, base_vocab=req.base_vocab)
    out = Path(req.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_bpe(model, out)
    return BpeTrainResponse(bpe_path=str(out), merges=len(model.merges), vocab_size=model.vocab_size)


def run_bitrate(req: BitrateRequest) -> BitrateResponse:
    units_path = _require(req.units, "units")
    manifest_path = _require(req.manifest, "manifest")
    durations = {e.utt_id: e.duration_s for e in read_manifest(manifest_path)}
    seqs = read_units(units_path, durations)
    if not seqs:
        raise DataError(f"{units_path}: no unit sequences")
    rates = {s.utt_id: bitrate_per_utterance(s, req.vocab_size) for s in seqs}
    mean_rate = sum(rates.values()) / len(rates)
    out = None
    if req.out is not None:
        out = Path(req.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(
            json.dumps(
                {"vocab_size": req.vocab_size, "mean": mean_rate, "per_utterance": rates},
                indent=2,
                sort_keys=True,
            )
            + "\n",
            encoding="utf-8",
        )
    return BitrateResponse(
        mean_bitrate=mean_rate,
        vocab_size=req.vocab_size,
        utterances=len(seqs),
        out=str(out) if out else None,
    )


def run_convert(req: ConvertRequest) -> ConvertResponse:
    src = _require(req.input, "input")
    if src.suffix == ".npy":
        try:
            values = np.load(src, allow_pickle=False)
        except ValueError as e:
            raise DataError(f"{src}: {e}") from e
    else:
        try:
            values = np.loadtxt(src, dtype=np.float64, ndmin=2)
        except ValueError as e:
            raise DataError(f"{src}: {e}") from e
    out = Path(req.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_matrix(np.asarray(values, dtype=np.float64), out)
    return ConvertResponse(output=str(out), rows=int(values.shape[0]), cols=int(values.shape[1]))
