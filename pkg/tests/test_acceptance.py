"""Acceptance gate: one test per release criterion.

Each test prints a single PASS/FAIL line with the measured quantity and
its threshold, then asserts.  Expected values come from independent
oracles: closed-form arithmetic, the data generator itself, or exact
invariance arguments; none are copied from this implementation's output.
"""

import filecmp
import itertools
import math
import time

import numpy as np
import pytest

from dsukit.analysis import centroid_similarity
from dsukit.kmeans import assign, fit_kmeans
from dsukit.linalg import eigh
from dsukit.pipeline import run_encode, run_fit
from dsukit.preprocess import (
    apply_ica,
    apply_pca,
    apply_whiten,
    fit_ica,
    fit_pca,
    fit_whiten,
)
from dsukit.schemas import EncodeRequest, FitRequest
from dsukit.units import (
    UnitSequence,
    apply_bpe,
    bitrate_per_utterance,
    deduplicate,
    expand_bpe,
    fit_bpe,
)


@pytest.fixture
def report(capsys):
    """One line per criterion, visible even under captured output."""

    def _report(criterion, ok, detail):
        status = "PASS" if ok else "FAIL"
        with capsys.disabled():
            print(f"[acceptance {criterion:2d}] {status}  {detail}")

    return _report


def amari_index(g):
    """Normalized Amari index of a gain matrix; 0 iff scaled permutation."""
    a = np.abs(np.asarray(g, dtype=np.float64))
    d = a.shape[0]
    rows = (a.sum(axis=1) / a.max(axis=1) - 1.0).sum()
    cols = (a.sum(axis=0) / a.max(axis=0) - 1.0).sum()
    return float((rows + cols) / (2.0 * d * (d - 1)))


def test_whitening_identity(report):
    # 20 random matrices; post-whitening covariance must be identity.
    start = time.perf_counter()
    worst = 0.0
    for i in range(20):
        rng = np.random.default_rng(1000 + i)
        d = 8 if i < 10 else 64
        x = rng.normal(size=(5000, d)) @ rng.normal(size=(d, d)) + rng.normal(size=d)
        z = apply_whiten(fit_whiten(x), x)
        cov = (z.T @ z) / (z.shape[0] - 1)
        worst = max(worst, float(np.max(np.abs(cov - np.eye(d)))))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-6 and elapsed < 30.0
    report(1, ok, f"whitening: max |cov - I| {worst:.2e} (tol 1e-6), {elapsed:.1f}s (< 30s)")
    assert ok, (worst, elapsed)


def test_ica_loglik_monotone(report):
    # Log-likelihood must not decrease at any of 100 iterations.
    worst = math.inf
    for i in range(10):
        rng = np.random.default_rng(2000 + i)
        d = int(rng.integers(2, 7))
        s = rng.laplace(size=(1500, d)) * (1.0 + rng.random(d))
        x = s @ rng.normal(size=(d, d)).T
        t = fit_ica(x, iters=100)
        worst = min(worst, float(np.min(np.diff(t.loglik))))
    ok = worst >= -1e-9
    report(2, ok, f"ICA monotone: min per-step loglik change {worst:.2e} (>= -1e-9)")
    assert ok, worst


def test_ica_separation(report):
    start = time.perf_counter()
    rng = np.random.default_rng(0)
    d, n = 4, 50000
    s = rng.laplace(size=(n, d))
    mixing = rng.normal(size=(d, d))
    x = s @ mixing.T
    t = fit_ica(x, iters=100)
    total = t.whiten.pca.basis * t.whiten.scale
    gain = t.demixing @ total.T @ mixing
    amari = amari_index(gain)
    s_hat = apply_ica(t, x)
    corr = np.corrcoef(s_hat.T, s.T)[:d, d:]
    best = max(
        min(abs(corr[i, p[i]]) for i in range(d))
        for p in itertools.permutations(range(d))
    )
    elapsed = time.perf_counter() - start
    ok = amari <= 0.05 and best >= 0.98 and elapsed < 60.0
    report(3, ok, f"ICA separation: Amari {amari:.4f} (<= 0.05), "
                  f"matched |corr| {best:.4f} (>= 0.98), {elapsed:.1f}s (< 60s)")
    assert ok, (amari, best, elapsed)


def test_euclidean_assignment_invariance(report):
    # Centering plus orthogonal projection must not change any assignment.
    mismatches = 0
    for seed in range(5):
        rng = np.random.default_rng(3000 + seed)
        x = rng.normal(size=(2000, 16)) * (1.0 + rng.random(16)) + rng.normal(size=16)
        y = apply_pca(fit_pca(x), x)
        a = fit_kmeans(x, 8, seed=seed, tol=0.0, max_iters=500)
        b = fit_kmeans(y, 8, seed=seed, tol=0.0, max_iters=500)
        mismatches += int(np.sum(assign(a, x) != assign(b, y)))
    ok = mismatches == 0
    report(4, ok, f"Euclidean invariance: {mismatches} assignment mismatches "
                  f"over 5x2000 frames (must be 0)")
    assert ok, mismatches


def test_cosine_scale_invariance(report):
    rng = np.random.default_rng(11)
    model = fit_kmeans(rng.normal(size=(4000, 24)), 32, metric="cosine", seed=11)
    frames = rng.normal(size=(1000, 24))
    scales = rng.uniform(0.01, 100.0, size=1000)
    changed = int(np.sum(assign(model, frames) != assign(model, frames * scales[:, None])))
    ok = changed == 0
    report(5, ok, f"cosine scale invariance: {changed} of 1000 indices changed (must be 0)")
    assert ok, changed


def test_bitrate_arithmetic(report):
    got = bitrate_per_utterance(UnitSequence("u", [0] * 10, 2.0), 3000)
    want = 10 * math.log2(3000) / 2.0
    empty = bitrate_per_utterance(UnitSequence("e", [], 2.0), 3000)
    ok = abs(got - want) <= 1e-4 and empty == 0.0
    report(6, ok, f"bit-rate: N=10 V=3000 U=2s -> {got:.4f} "
                  f"(formula {want:.4f}, tol 1e-4); N=0 -> {empty}")
    assert ok, (got, want, empty)


def test_dedup_bpe_lossless(report):
    bad = 0
    for i in range(200):
        rng = np.random.default_rng(4000 + i)
        base = int(rng.integers(2, 9))
        corpus = [
            UnitSequence(f"u{j}", list(rng.integers(0, base, size=rng.integers(0, 41))), 1.0)
            for j in range(int(rng.integers(1, 6)))
        ]
        deduped = [deduplicate(s) for s in corpus]
        model = fit_bpe(deduped, base + int(rng.integers(1, 20)), base)
        for s in deduped:
            if expand_bpe(model, apply_bpe(model, s)).units != s.units:
                bad += 1
            if deduplicate(deduplicate(s)).units != deduplicate(s).units:
                bad += 1
    ok = bad == 0
    report(7, ok, f"dedup/BPE losslessness: {bad} failures over 200 corpora (must be 0)")
    assert ok, bad


def test_anisotropy_direction(report):
    # Clusters share a large common offset; whitening removes it.
    rng = np.random.default_rng(0)
    d, k, per = 16, 16, 500
    u = np.ones(d) / math.sqrt(d)
    blocks = []
    for _ in range(k):
        center = 6.0 * u + rng.normal(size=d)
        blocks.append(center + 0.5 * rng.normal(size=(per, d)))
    x = np.concatenate(blocks)
    raw = centroid_similarity(fit_kmeans(x, k, seed=0)).mean_similarity
    w = fit_whiten(x)
    white = centroid_similarity(fit_kmeans(apply_whiten(w, x), k, seed=0)).mean_similarity
    ica = fit_ica(x, iters=30)
    after_ica = centroid_similarity(fit_kmeans(apply_ica(ica, x), k, seed=0)).mean_similarity
    ok = raw >= 0.3 and abs(white) <= 0.1 and abs(after_ica) <= 0.1
    report(8, ok, f"anisotropy: mean centroid cosine raw {raw:.3f} (>= 0.3), "
                  f"whitened {white:+.3f}, ICA {after_ica:+.3f} (|.| <= 0.1)")
    assert ok, (raw, white, after_ica)


def test_end_to_end_determinism(report, corpus, tmp_path):
    identical = True
    paths = []
    for run in ("a", "b"):
        out = tmp_path / run
        fit = run_fit(FitRequest(
            manifest=str(corpus / "manifest.tsv"), outdir=str(out / "fit"),
            preprocessing="ica", k=6, sample_fraction=0.5, ica_iters=20, seed=7,
        ))
        enc = run_encode(EncodeRequest(
            manifest=str(corpus / "manifest.tsv"), outdir=str(out / "enc"),
            model_path=fit.model_path, transform_path=fit.transform_path,
        ))
        paths.append((enc.units_path, enc.frame_units_path))
    for first, second in zip(paths[0], paths[1]):
        identical = identical and filecmp.cmp(first, second, shallow=False)
    ok = identical
    report(9, ok, "determinism: repeated fit+encode unit files byte-identical"
           if ok else "determinism: repeated fit+encode unit files DIFFER")
    assert ok


def test_eigensolver_correctness(report):
    worst_recon, worst_trace = 0.0, 0.0
    for i in range(100):
        rng = np.random.default_rng(5000 + i)
        d = int(rng.integers(2, 65))
        b = rng.normal(size=(d, d))
        a = (b + b.T) / 2.0
        e = eigh(a)
        recon = e.vectors @ np.diag(e.values) @ e.vectors.T
        worst_recon = max(worst_recon, float(np.max(np.abs(recon - a))))
        tr = float(np.trace(a))
        rel = abs(e.values.sum() - tr) / max(1.0, abs(tr))
        worst_trace = max(worst_trace, rel)
    ok = worst_recon <= 1e-8 and worst_trace <= 1e-9
    report(10, ok, f"eigensolver: max recon error {worst_recon:.2e} (<= 1e-8), "
                   f"max trace error {worst_trace:.2e} (<= 1e-9 relative)")
    assert ok, (worst_recon, worst_trace)
