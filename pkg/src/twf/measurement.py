"""Measurement ensembles: dense Gaussian designs and 1-D coded diffraction patterns.

An ensemble is a linear map ``z -> (a_1^* z, ..., a_m^* z)``. Dense ensembles
store the rows ``a_i^*`` explicitly; CDP ensembles store only the masks and
apply an unnormalized FFT, so every CDP row has norm exactly ``sqrt(n)``.

Random draws use numpy's ``Generator(PCG64(seed))``; normals come from its
ziggurat sampler and mask symbols from ``Generator.integers``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

CDP_SYMBOLS = np.array([1, -1, 1j, -1j], dtype=np.complex128)

KINDS = ("gaussian-real", "gaussian-complex", "cdp", "dense")


@dataclass(frozen=True, eq=False)
class MeasurementEnsemble:
    """Immutable forward/adjoint operator for a set of sensing vectors.

    For dense kinds ``rows[i]`` holds ``a_i^*`` (so ``forward = rows @ z``).
    For ``cdp``, ``masks`` has shape ``(L, n)`` and ``m = n * L``.
    """

    kind: str
    n: int
    m: int
    rows: Optional[np.ndarray] = None
    masks: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown ensemble kind {self.kind!r}")
        if self.kind == "cdp":
            if self.masks is None or self.masks.shape[1] != self.n:
                raise ValueError("cdp ensemble needs masks of shape (L, n)")
            if self.m != self.n * self.masks.shape[0]:
                raise ValueError("cdp ensemble must have m = n * L")
            if not np.all(np.isin(self.masks, CDP_SYMBOLS)):
                raise ValueError("cdp mask entries must lie in {1, -1, i, -i}")
            self.masks.setflags(write=False)
        else:
            if self.rows is None or self.rows.shape != (self.m, self.n):
                raise ValueError("dense ensemble needs rows of shape (m, n)")
            if not np.all(np.isfinite(self.rows)):
                raise ValueError("ensemble rows must be finite")
            self.rows.setflags(write=False)

    @property
    def is_complex(self) -> bool:
        if self.kind == "cdp":
            return True
        return np.iscomplexobj(self.rows)

    @property
    def L(self) -> int:
        return 0 if self.masks is None else self.masks.shape[0]

    def _check_signal(self, z):
        z = np.asarray(z)
        if z.shape != (self.n,):
            raise ValueError(f"signal must have shape ({self.n},), got {z.shape}")
        return z

    def _check_data(self, v):
        v = np.asarray(v)
        if v.shape != (self.m,):
            raise ValueError(f"vector must have shape ({self.m},), got {v.shape}")
        return v

    def forward(self, z) -> np.ndarray:
        z = self._check_signal(z)
        if self.kind == "cdp":
            return np.fft.fft(self.masks * z, axis=1).reshape(-1)
        return self.rows @ z

    def adjoint(self, v) -> np.ndarray:
        v = self._check_data(v)
        if self.kind == "cdp":
            blocks = v.reshape(self.L, self.n)
            # unnormalized DFT adjoint is n * ifft
            back = self.n * np.fft.ifft(blocks, axis=1)
            return np.sum(np.conj(self.masks) * back, axis=0)
        return self.rows.conj().T @ v

    def intensities(self, x) -> np.ndarray:
        return np.abs(self.forward(x)) ** 2

    def row_norms(self) -> np.ndarray:
        if self.kind == "cdp":
            return np.full(self.m, np.sqrt(self.n))
        return np.linalg.norm(self.rows, axis=1)

    def sum_sq_row_norms(self) -> float:
        if self.kind == "cdp":
            return float(self.m * self.n)
        return float(np.sum(np.abs(self.rows) ** 2))

    def dense(self) -> np.ndarray:
        """Materialize the m x n matrix (tests and small problems only)."""
        if self.kind != "cdp":
            return np.array(self.rows)
        f = np.fft.fft(np.eye(self.n), axis=0)
        return np.vstack([f * mask[None, :] for mask in self.masks])


def _check_positive(**kwargs):
    for name, value in kwargs.items():
        if int(value) != value or value < 1:
            raise ValueError(f"{name} must be a positive integer, got {value!r}")


def sample_gaussian_ensemble(n: int, m: int, field: str = "real", seed: int = 0) -> MeasurementEnsemble:
    """Draw ``m`` i.i.d. Gaussian sensing vectors in dimension ``n``.

    Real entries are N(0, 1); complex entries have independent real and
    imaginary parts, each N(0, 1/2).
    """
    _check_positive(n=n, m=m)
    rng = np.random.default_rng(seed)
    if field == "real":
        rows = rng.standard_normal((m, n))
        kind = "gaussian-real"
    elif field == "complex":
        rows = (rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))) / np.sqrt(2.0)
        kind = "gaussian-complex"
    else:
        raise ValueError(f"field must be 'real' or 'complex', got {field!r}")
    return MeasurementEnsemble(kind, n, m, rows=rows)


def sample_cdp_ensemble(n: int, L: int, seed: int = 0) -> MeasurementEnsemble:
    """Draw ``L`` masks with entries uniform over {1, -1, i, -i}."""
    _check_positive(n=n, L=L)
    rng = np.random.default_rng(seed)
    masks = CDP_SYMBOLS[rng.integers(0, 4, size=(L, n))]
    return MeasurementEnsemble("cdp", n, n * L, masks=masks)


def dense_ensemble(rows) -> MeasurementEnsemble:
    """Wrap an explicit matrix whose i-th row is ``a_i^*``."""
    rows = np.array(rows, dtype=np.complex128 if np.iscomplexobj(rows) else np.float64)
    if rows.ndim != 2:
        raise ValueError("rows must be a 2-D array")
    return MeasurementEnsemble("dense", rows.shape[1], rows.shape[0], rows=rows)


def forward(e: MeasurementEnsemble, z) -> np.ndarray:
    return e.forward(z)


def adjoint(e: MeasurementEnsemble, v) -> np.ndarray:
    return e.adjoint(v)


def intensities(e: MeasurementEnsemble, x) -> np.ndarray:
    return e.intensities(x)


def row_norms(e: MeasurementEnsemble) -> np.ndarray:
    return e.row_norms()
