"""Linear preprocessing transforms: standardize, PCA, whiten, ICA.

Every transform is an affine map fitted on a feature matrix and applied
frame-wise.  ICA operates on whitened features: it estimates a demixing
matrix by maximum likelihood under a unit Laplace source model, using the
auxiliary-function method with iterative-projection row updates (identity
initialization, a fixed iteration count, and a guaranteed non-decreasing
log-likelihood).

Fitted transforms serialize to a binary container:

    offset 0   magic   b"DSUT"
    offset 4   u16     format version (1)
    offset 6   u16     kind (1 std, 2 pca, 3 whiten, 4 ica)
    offset 8   u64     dimension D
    offset 16  payload float64 little-endian arrays, in order:
               std:    mean[D], std[D]
               pca:    mean[D], basis[D*D] (row-major, columns are
                       eigenvectors), eigenvalues[D]
               whiten: pca arrays, then scale[D]
               ica:    whiten arrays, then demixing[D*D] (row-major),
                       u64 history length L, loglik[L]
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import as_matrix
from .errors import ConfigError, DataError, NumericalError
from .linalg import eigh, solve_row

TRANSFORM_MAGIC = b"DSUT"
TRANSFORM_VERSION = 1
_THEADER = struct.Struct("<4sHHQ")

STD_FLOOR = 1e-12
# Eigenvalues below this fraction of the largest one get a zero whitening
# scale: the corresponding output dimension is suppressed instead of
# amplifying noise in a null direction.
DEGENERATE_EIG_REL = 1e-10
# Floor on |w.x| inside the ICA auxiliary update, guarding the 1/r pole.
ICA_R_FLOOR = 1e-9


@dataclass(frozen=True)
class StandardizeTransform:
    mean: np.ndarray
    std: np.ndarray

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class PcaTransform:
    mean: np.ndarray
    basis: np.ndarray
    eigenvalues: np.ndarray

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class WhitenTransform:
    pca: PcaTransform
    scale: np.ndarray

    @property
    def dim(self) -> int:
        return self.pca.dim


@dataclass(frozen=True)
class IcaTransform:
    whiten: WhitenTransform
    demixing: np.ndarray
    # Log-likelihood per frame, one entry per completed iteration plus the
    # initial value; non-decreasing by construction of the update.
    loglik: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def dim(self) -> int:
        return self.whiten.dim


LinearTransform = StandardizeTransform | PcaTransform | WhitenTransform | IcaTransform


def _check_dim(t: LinearTransform, x: np.ndarray) -> np.ndarray:
    x = as_matrix(x)
    if x.shape[1] != t.dim:
        raise DataError(f"dimension mismatch: transform has D={t.dim}, data has D={x.shape[1]}")
    return x


def fit_standardize(x: np.ndarray) -> StandardizeTransform:
    x = as_matrix(x)
    if x.shape[0] < 2:
        raise ConfigError("standardize needs at least 2 frames")
    mean = x.mean(axis=0)
    std = np.maximum(x.std(axis=0, ddof=1), STD_FLOOR)
    return StandardizeTransform(mean=mean, std=std)


def apply_standardize(t: StandardizeTransform, x: np.ndarray) -> np.ndarray:
    x = _check_dim(t, x)
    return (x - t.mean) / t.std


def fit_pca(x: np.ndarray) -> PcaTransform:
    x = as_matrix(x)
    if x.shape[0] < 2:
        raise ConfigError("pca needs at least 2 frames")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (x.shape[0] - 1)
    decomp = eigh(cov)
    return PcaTransform(mean=mean, basis=decomp.vectors, eigenvalues=np.maximum(decomp.values, 0.0))


def apply_pca(t: PcaTransform, x: np.ndarray) -> np.ndarray:
    x = _check_dim(t, x)
    return (x - t.mean) @ t.basis


def fit_whiten(x: np.ndarray) -> WhitenTransform:
    pca = fit_pca(x)
    lam = pca.eigenvalues
    lam_max = lam[0]
    if lam_max <= 0.0:
        raise DataError("rank-0 data: all eigenvalues degenerate")
    degenerate = lam < DEGENERATE_EIG_REL * lam_max
    scale = np.where(degenerate, 0.0, 1.0 / np.sqrt(np.where(degenerate, 1.0, lam)))
    return WhitenTransform(pca=pca, scale=scale)


def apply_whiten(t: WhitenTransform, x: np.ndarray) -> np.ndarray:
    return apply_pca(t.pca, x) * t.scale


def ica_loglik(demixing: np.ndarray, whitened: np.ndarray) -> float:
    """Per-frame log-likelihood of whitened data under the Laplace model.

    -mean_t sum_d |w_d . z_t| - D*log(2) + log|det W|
    """
    s = whitened @ demixing.T
    _, logdet = np.linalg.slogdet(demixing)
    return float(-np.abs(s).sum(axis=1).mean() - s.shape[1] * np.log(2.0) + logdet)


def fit_ica(x: np.ndarray, iters: int = 100, seed: int = 0) -> IcaTransform:
    """Whiten the data, then run `iters` auxiliary-function ICA iterations.

    One iteration updates each demixing row d in turn: form the weighted
    covariance V_d = mean_t(z_t z_t^T / max(|w_d . z_t|, 1e-9)) and replace
    w_d with the normalized solution of (W V_d) w = e_d.  The demixing
    matrix starts at identity, so `seed` is accepted for interface
    uniformity but never consumed.
    """
    if iters < 1:
        raise ConfigError(f"ica iteration count must be >= 1, got {iters}")
    whiten = fit_whiten(x)
    z = apply_whiten(whiten, x)
    t_frames, d_dims = z.shape
    demix = np.eye(d_dims)
    history = [ica_loglik(demix, z)]
    for it in range(iters):
        for d in range(d_dims):
            r = np.maximum(np.abs(z @ demix[d]), ICA_R_FLOOR)
            vd = z.T @ (z / r[:, None]) / t_frames
            vd = (vd + vd.T) / 2.0
            try:
                demix[d] = solve_row(demix, vd, d)
            except NumericalError as e:
                raise NumericalError(f"ica iteration {it}: {e}") from e
        history.append(ica_loglik(demix, z))
    return IcaTransform(whiten=whiten, demixing=demix, loglik=np.asarray(history))


def apply_ica(t: IcaTransform, x: np.ndarray) -> np.ndarray:
    return apply_whiten(t.whiten, x) @ t.demixing.T


def apply_transform(t: LinearTransform, x: np.ndarray) -> np.ndarray:
    if isinstance(t, StandardizeTransform):
        return apply_standardize(t, x)
    if isinstance(t, IcaTransform):
        return apply_ica(t, x)
    if isinstance(t, WhitenTransform):
        return apply_whiten(t, x)
    if isinstance(t, PcaTransform):
        return apply_pca(t, x)
    raise ConfigError(f"unknown transform type {type(t).__name__}")


_KIND_CODES = {StandardizeTransform: 1, PcaTransform: 2, WhitenTransform: 3, IcaTransform: 4}


def _vec_bytes(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def save_transform(t: LinearTransform, path: str | Path) -> None:
    kind = _KIND_CODES.get(type(t))
    if kind is None:
        raise ConfigError(f"cannot save transform of type {type(t).__name__}")
    d = t.dim
    chunks = [_THEADER.pack(TRANSFORM_MAGIC, TRANSFORM_VERSION, kind, d)]
    if isinstance(t, StandardizeTransform):
        chunks += [_vec_bytes(t.mean), _vec_bytes(t.std)]
    else:
        pca = t if isinstance(t, PcaTransform) else t.pca if isinstance(t, WhitenTransform) else t.whiten.pca
        chunks += [_vec_bytes(pca.mean), _vec_bytes(pca.basis), _vec_bytes(pca.eigenvalues)]
        if isinstance(t, WhitenTransform):
            chunks.append(_vec_bytes(t.scale))
        elif isinstance(t, IcaTransform):
            chunks += [_vec_bytes(t.whiten.scale), _vec_bytes(t.demixing)]
            chunks += [struct.pack("<Q", t.loglik.shape[0]), _vec_bytes(t.loglik)]
    try:
        Path(path).write_bytes(b"".join(chunks))
    except OSError as e:
        raise DataError(f"cannot write {path}: {e}") from e


class _Cursor:
    def __init__(self, buf: bytes, path: Path):
        self.buf = buf
        self.path = path
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise DataError(
                f"{self.path}: truncated payload, expected {self.pos + n} bytes, got {len(self.buf)}"
            )
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def floats(self, count: int, shape: tuple[int, ...]) -> np.ndarray:
        return np.frombuffer(self.take(count * 8), dtype="<f8").reshape(shape).copy()

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]


def load_transform(path: str | Path) -> LinearTransform:
    path = Path(path)
    try:
        buf = path.read_bytes()
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from e
    if len(buf) < _THEADER.size:
        raise DataError(f"{path}: truncated header, expected {_THEADER.size} bytes, got {len(buf)}")
    magic, version, kind, d = _THEADER.unpack_from(buf)
    if magic != TRANSFORM_MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}")
    if version != TRANSFORM_VERSION:
        raise DataError(f"{path}: unsupported format version {version}")
    if d < 1:
        raise DataError(f"{path}: invalid dimension {d}")
    cur = _Cursor(buf, path)
    cur.pos = _THEADER.size
    if kind == 1:
        t: LinearTransform = StandardizeTransform(mean=cur.floats(d, (d,)), std=cur.floats(d, (d,)))
    elif kind in (2, 3, 4):
        pca = PcaTransform(
            mean=cur.floats(d, (d,)),
            basis=cur.floats(d * d, (d, d)),
            eigenvalues=cur.floats(d, (d,)),
        )
        if kind == 2:
            t = pca
        else:
            whiten = WhitenTransform(pca=pca, scale=cur.floats(d, (d,)))
            if kind == 3:
                t = whiten
            else:
                demixing = cur.floats(d * d, (d, d))
                hist_len = cur.u64()
                if hist_len > len(buf):
                    raise DataError(f"{path}: corrupt history length {hist_len}")
                t = IcaTransform(whiten=whiten, demixing=demixing, loglik=cur.floats(hist_len, (hist_len,)))
    else:
        raise DataError(f"{path}: unknown transform kind {kind}")
    if cur.pos != len(buf):
        raise DataError(f"{path}: trailing bytes, expected {cur.pos} bytes, got {len(buf)}")
    return t
