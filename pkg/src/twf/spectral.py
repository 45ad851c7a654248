"""Spectral initialization, plain and truncated, by matrix-free power iteration."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measurement import MeasurementEnsemble


@dataclass(frozen=True)
class InitConfig:
    alpha_y: float = 3.0
    power_iters: int = 50
    seed: int = 0
    truncated: bool = True

    def __post_init__(self):
        if self.power_iters < 1:
            raise ValueError("power_iters must be >= 1")
        if self.truncated and not self.alpha_y >= 3:
            raise ValueError(f"alpha_y must be >= 3 for truncated init, got {self.alpha_y}")


@dataclass(frozen=True)
class InitResult:
    z0: np.ndarray
    lambda0: float
    kept_count: int
    direction: np.ndarray  # unit-norm leading eigenvector estimate
    matvecs: int  # forward + adjoint applications


class SpectralInitError(RuntimeError):
    pass


def lambda0(y) -> float:
    """Norm estimate sqrt(mean(y))."""
    y = np.asarray(y, dtype=np.float64)
    if y.size == 0:
        raise ValueError("need at least one observation")
    mean = float(np.mean(y))
    if mean < 0:
        raise ValueError(f"mean of y is negative ({mean:g}); cannot estimate the norm")
    return float(np.sqrt(mean))


def truncation_keep(y, lam0: float, alpha_y: float) -> np.ndarray:
    return np.abs(y) <= alpha_y**2 * lam0**2


def truncated_matvec(e: MeasurementEnsemble, y, keep, v) -> np.ndarray:
    """Apply ``Y = (1/m) sum_i y_i a_i a_i^* 1{keep_i}`` to ``v`` without forming Y."""
    y = np.asarray(y)
    keep = np.asarray(keep, dtype=bool)
    if y.shape != (e.m,) or keep.shape != (e.m,):
        raise ValueError("y and keep must have length m")
    w = np.where(keep, y * e.forward(v), 0)
    return e.adjoint(w) / e.m


def _start_vector(rng, n, complex_field):
    v = rng.standard_normal(n)
    if complex_field:
        v = v + 1j * rng.standard_normal(n)
    return v / np.linalg.norm(v)


def spectral_init(e: MeasurementEnsemble, y, cfg: InitConfig = InitConfig()) -> InitResult:
    """Leading eigenvector of the (truncated) data matrix, rescaled to the estimated norm.

    The mask ``|y_i| <= alpha_y^2 lambda0^2`` is computed once up front. The
    untruncated variant keeps every row.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (e.m,):
        raise ValueError(f"y must have length {e.m}")
    lam0 = lambda0(y)
    if cfg.truncated:
        keep = truncation_keep(y, lam0, cfg.alpha_y)
    else:
        keep = np.ones(e.m, dtype=bool)
    kept = int(keep.sum())
    if kept == 0:
        raise SpectralInitError("every observation was truncated")

    rng = np.random.default_rng(cfg.seed)
    v = _start_vector(rng, e.n, e.is_complex)
    matvecs = 0
    restarted = False
    k = 0
    while k < cfg.power_iters:
        w = truncated_matvec(e, y, keep, v)
        matvecs += 2
        nw = np.linalg.norm(w)
        if nw == 0 or not np.isfinite(nw):
            if restarted:
                raise SpectralInitError("power iteration produced a zero vector twice")
            restarted = True
            v = _start_vector(rng, e.n, e.is_complex)
            continue
        v = w / nw
        k += 1

    scale = np.sqrt(e.m * e.n / e.sum_sq_row_norms()) * lam0
    return InitResult(scale * v, lam0, kept, v, matvecs)
