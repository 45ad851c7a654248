"""Observation models (noiseless, Poisson, caller-supplied additive) and SNR helpers.

Poisson draws come from numpy's ``Generator(PCG64(seed)).poisson``, which
uses multiplication-by-uniforms for means below 10 and Hormann's
transformed rejection (PTRS) at and above 10.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .metrics import dist


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "noiseless"  # noiseless | poisson | additive
    eta: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("noiseless", "poisson", "additive"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.kind == "additive":
            if self.eta is None or not np.all(np.isfinite(self.eta)):
                raise ValueError("additive noise needs a finite eta vector")


def observe(mu, spec: NoiseSpec = NoiseSpec(), seed: int = 0) -> np.ndarray:
    """Turn noise-free intensities ``mu`` into observations ``y``."""
    mu = np.asarray(mu, dtype=np.float64)
    if spec.kind == "noiseless":
        return mu.copy()
    if spec.kind == "poisson":
        if np.any(mu < 0):
            raise ValueError("Poisson means must be nonnegative")
        rng = np.random.default_rng(seed)
        return rng.poisson(mu).astype(np.float64)
    eta = np.asarray(spec.eta, dtype=np.float64)
    if eta.shape != mu.shape:
        raise ValueError("eta must match the shape of mu")
    return mu + eta


def snr(x) -> float:
    return 3.0 * float(np.vdot(x, x).real)


def snr_db(x) -> float:
    s = snr(x)
    if s == 0:
        raise ValueError("SNR in dB undefined for x = 0")
    return 10.0 * np.log10(s)


def norm_for_snr_db(target_db: float) -> float:
    """Signal norm whose SNR equals ``target_db``."""
    return float(np.sqrt(10.0 ** (target_db / 10.0) / 3.0))


def relative_mse(zhat, x) -> float:
    nx2 = float(np.vdot(x, x).real)
    if nx2 == 0:
        raise ValueError("relative MSE undefined for x = 0")
    return dist(zhat, x) ** 2 / nx2
