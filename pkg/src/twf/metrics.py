"""Estimation error modulo the global sign (real) or global phase (complex)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AlignedEstimate:
    z_aligned: np.ndarray
    phase: float  # 0 or pi for real signals
    distance: float


def _pair(z, x):
    z = np.asarray(z)
    x = np.asarray(x)
    if z.shape != x.shape or z.ndim != 1:
        raise ValueError(f"shape mismatch: {z.shape} vs {x.shape}")
    if np.iscomplexobj(z) != np.iscomplexobj(x):
        raise ValueError("z and x must both be real or both be complex")
    return z, x


def dist(z, x) -> float:
    z, x = _pair(z, x)
    if not np.iscomplexobj(z):
        return float(min(np.linalg.norm(z - x), np.linalg.norm(z + x)))
    sq = np.vdot(z, z).real + np.vdot(x, x).real - 2.0 * abs(np.vdot(x, z))
    return float(np.sqrt(max(sq, 0.0)))


def relative_error(z, x) -> float:
    nx = np.linalg.norm(x)
    if nx == 0:
        raise ValueError("relative error undefined for x = 0")
    return dist(z, x) / float(nx)


def align(z, x) -> AlignedEstimate:
    """Rotate ``z`` by the global phase that brings it closest to ``x``."""
    z, x = _pair(z, x)
    if not np.iscomplexobj(z):
        # ties keep the sign, i.e. phase 0 when ||z - x|| <= ||z + x||
        if np.linalg.norm(z - x) <= np.linalg.norm(z + x):
            za, phase = z.copy(), 0.0
        else:
            za, phase = -z, float(np.pi)
        return AlignedEstimate(za, phase, float(np.linalg.norm(za - x)))
    inner = np.vdot(x, z)
    phase = float(np.angle(inner)) % (2 * np.pi) if inner != 0 else 0.0
    za = z * np.exp(-1j * phase)
    return AlignedEstimate(za, phase, dist(z, x))
