"""Dense symmetric eigendecomposition and the demixing-row solver.

Both routines are plain numpy with a fixed operation order, so identical
input bits always produce identical output bits, independent of BLAS
threading.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError

_SYMMETRY_TOL = 1e-9
_JACOBI_REL_TOL = 1e-12
_JACOBI_MAX_SWEEPS = 100
_PIVOT_REL_TOL = 1e-12


@dataclass(frozen=True)
class SymmetricEigen:
    """Eigenvalues in descending order; column j of vectors pairs with values[j]."""

    values: np.ndarray
    vectors: np.ndarray


def eigh(a: np.ndarray) -> SymmetricEigen:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps stop once the off-diagonal Frobenius norm drops below
    1e-12 * ||A||_F (hard cap 100 sweeps).  Eigenvalues are returned in
    descending order (ties keep their pre-sort order); each eigenvector is
    signed so its largest-magnitude entry is positive, ties broken by the
    lowest index.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ConfigError(f"eigh: expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ConfigError("eigh: input contains non-finite values")
    n = a.shape[0]
    if np.max(np.abs(a - a.T)) > _SYMMETRY_TOL:
        raise ConfigError(f"eigh: input not symmetric within {_SYMMETRY_TOL}")

    work = (a + a.T) / 2.0
    vecs = np.eye(n)
    threshold = _JACOBI_REL_TOL * np.linalg.norm(work)
    for _ in range(_JACOBI_MAX_SWEEPS):
        off = np.linalg.norm(work - np.diag(np.diag(work)))
        if off <= threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = work[p, q]
                if apq == 0.0:
                    continue
                app, aqq = work[p, p], work[q, q]
                tau = (aqq - app) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c

                row_p, row_q = work[p, :].copy(), work[q, :].copy()
                work[p, :] = c * row_p - s * row_q
                work[q, :] = s * row_p + c * row_q
                col_p, col_q = work[:, p].copy(), work[:, q].copy()
                work[:, p] = c * col_p - s * col_q
                work[:, q] = s * col_p + c * col_q
                # Closed forms for the rotated 2x2 block avoid cancellation.
                work[p, p] = app - t * apq
                work[q, q] = aqq + t * apq
                work[p, q] = 0.0
                work[q, p] = 0.0

                vec_p, vec_q = vecs[:, p].copy(), vecs[:, q].copy()
                vecs[:, p] = c * vec_p - s * vec_q
                vecs[:, q] = s * vec_p + c * vec_q

    values = np.diag(work).copy()
    order = np.argsort(-values, kind="stable")
    values = values[order]
    vecs = vecs[:, order]
    for j in range(n):
        lead = np.argmax(np.abs(vecs[:, j]))
        if vecs[lead, j] < 0.0:
            vecs[:, j] = -vecs[:, j]
    return SymmetricEigen(values=values, vectors=vecs)


def solve_row(w: np.ndarray, v: np.ndarray, d: int) -> np.ndarray:
    """Solve (W V) x = e_d, then rescale x so that x^T V x = 1.

    Gaussian elimination with partial pivoting; a pivot below 1e-12 of its
    row norm reports the system singular for component d.
    """
    w = np.asarray(w, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    n = w.shape[0]
    if w.shape != (n, n) or v.shape != (n, n):
        raise ConfigError(f"solve_row: shape mismatch {w.shape} vs {v.shape}")
    if not 0 <= d < n:
        raise ConfigError(f"solve_row: component index {d} out of range for size {n}")

    m = w @ v
    rhs = np.zeros(n)
    rhs[d] = 1.0
    aug = np.concatenate([m, rhs[:, None]], axis=1)
    for k in range(n):
        pivot_row = k + int(np.argmax(np.abs(aug[k:, k])))
        pivot = aug[pivot_row, k]
        row_norm = np.linalg.norm(aug[pivot_row, :n])
        if row_norm == 0.0 or np.abs(pivot) < _PIVOT_REL_TOL * row_norm:
            raise NumericalError(f"singular system while updating component {d}")
        if pivot_row != k:
            aug[[k, pivot_row]] = aug[[pivot_row, k]]
        factors = aug[k + 1 :, k] / aug[k, k]
        aug[k + 1 :, k:] -= factors[:, None] * aug[k, k:]
    x = np.zeros(n)
    for k in range(n - 1, -1, -1):
        x[k] = (aug[k, n] - aug[k, k + 1 : n] @ x[k + 1 :]) / aug[k, k]

    q = float(x @ v @ x)
    if not np.isfinite(q) or q <= 0.0:
        raise NumericalError(f"degenerate normalization for component {d} (x^T V x = {q})")
    return x / np.sqrt(q)
