"""Truncated Wirtinger Flow iterations and the untruncated Wirtinger Flow baseline.

Conventions:

* ``Az`` always means ``forward(e, z)``, i.e. the vector of ``a_i^* z``.
* The search direction ``p`` returned by :func:`truncated_gradient` already
  contains the factor 2 and the 1/m normalization, so an update is just
  ``z + step * p``.
* In the complex case the per-row weight is ``(y_i - |a_i^* z|^2) / (z^* a_i)``
  and it multiplies ``a_i`` (the adjoint), which is the Wirtinger derivative
  with respect to ``conj(z)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import List, NamedTuple, Optional, Union

import numpy as np

from .measurement import MeasurementEnsemble
from .metrics import relative_error
from .spectral import InitConfig, spectral_init

SUCCESS_TOL = 1e-5
MIN_STEP = 1e-12


@dataclass(frozen=True)
class TruncationParams:
    alpha_z_lb: float = 0.3
    alpha_z_ub: float = 5.0
    alpha_h: float = 5.0
    alpha_y: float = 3.0
    alpha_p: float = 5.0

    def __post_init__(self):
        for name in ("alpha_z_lb", "alpha_z_ub", "alpha_h", "alpha_y", "alpha_p"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def linesearch_defaults(cls) -> "TruncationParams":
        return cls(alpha_z_lb=0.1, alpha_z_ub=5.0, alpha_h=6.0, alpha_y=3.0, alpha_p=5.0)

    @classmethod
    def parse(cls, text: str) -> "TruncationParams":
        """Parse ``"lb,ub,h,y[,p]"``."""
        values = [float(tok) for tok in text.split(",")]
        if len(values) not in (4, 5):
            raise ValueError("expected 4 or 5 comma-separated thresholds")
        return cls(*values)


@dataclass(frozen=True)
class FixedStep:
    mu: float = 0.2

    def __post_init__(self):
        if not self.mu >= 0:
            raise ValueError("fixed step must be nonnegative")


@dataclass(frozen=True)
class Backtracking:
    beta: float = 0.5

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")


StepPolicy = Union[FixedStep, Backtracking]


@dataclass(frozen=True)
class SolverConfig:
    params: TruncationParams = TruncationParams()
    step: StepPolicy = FixedStep()
    max_iters: int = 1000
    grad_tol: float = 0.0
    init: InitConfig = InitConfig()
    enforce_mu0: bool = True


class ParamCheck(NamedTuple):
    zeta1: float
    zeta2: float
    mu0: float
    ok: bool


def _upper_tail(t: float) -> float:
    return 0.5 * math.erfc(t / math.sqrt(2.0))


def _second_moment_tail(t: float) -> float:
    """E[xi^2 1{|xi| > t}] for a standard normal xi and t >= 0."""
    if math.isinf(t):
        return 0.0
    pdf = math.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi)
    return 2.0 * (t * pdf + _upper_tail(t))


def validate_params(p: TruncationParams, mode: str = "fixed") -> ParamCheck:
    """Compute zeta1, zeta2 and the admissible fixed step mu0 for ``p``."""
    if mode not in ("fixed", "linesearch"):
        raise ValueError(f"mode must be 'fixed' or 'linesearch', got {mode!r}")
    lo = math.sqrt(1.01) * p.alpha_z_lb
    hi = math.sqrt(0.99) * p.alpha_z_ub
    if lo >= hi:
        zeta1 = 1.0
    else:
        # event {|xi| <= lo} or {|xi| >= hi}
        moment = (1.0 - _second_moment_tail(lo)) + _second_moment_tail(hi)
        prob = (1.0 - 2.0 * _upper_tail(lo)) + 2.0 * _upper_tail(hi)
        zeta1 = max(moment, prob)
    zeta2 = _second_moment_tail(0.473 * p.alpha_h)
    mu0 = (0.994 - zeta1 - zeta2 - math.sqrt(2.0 / (9.0 * math.pi)) / p.alpha_h) / (
        2.0 * (1.02 + 0.665 / p.alpha_h)
    )
    if mode == "fixed":
        ok = 2.0 * (zeta1 + zeta2) + math.sqrt(8.0 / (9.0 * math.pi)) / p.alpha_h < 1.99 and p.alpha_y >= 3
    else:
        ok = (
            0 < p.alpha_z_lb <= 0.1
            and p.alpha_z_ub >= 5
            and p.alpha_h >= 6
            and p.alpha_y >= 3
            and p.alpha_p >= 5
        )
    return ParamCheck(zeta1, zeta2, mu0, bool(ok))


@dataclass
class IterateState:
    z: np.ndarray
    t: int
    Az: np.ndarray
    K: float

    @classmethod
    def at(cls, e: MeasurementEnsemble, y, z, t: int = 0) -> "IterateState":
        Az = e.forward(z)
        K = float(np.mean(np.abs(y - np.abs(Az) ** 2)))
        return cls(np.asarray(z), t, Az, K)


@dataclass
class IterRecord:
    t: int
    relative_error: Optional[float]
    gradient_norm: float
    step_size: float
    kept_count: int
    matvecs: int  # cumulative, including the cost of reaching z^(t)


@dataclass
class SolverTrace:
    records: List[IterRecord] = field(default_factory=list)
    status: str = "max_iters"  # converged | max_iters | diverged
    init_error: Optional[float] = None
    final_error: Optional[float] = None
    matvecs: int = 0
    skipped_terms: int = 0
    warnings: List[str] = field(default_factory=list)

    def errors(self) -> np.ndarray:
        return np.array([r.relative_error for r in self.records], dtype=float)

    def matvecs_to_tol(self, tol: float = SUCCESS_TOL) -> Optional[int]:
        """Cumulative matvec count when the recorded error first drops to ``tol``."""
        for r in self.records:
            if r.relative_error is not None and r.relative_error <= tol:
                return r.matvecs
        if self.final_error is not None and self.final_error <= tol:
            return self.matvecs
        return None


class LineSearchFailure(RuntimeError):
    pass


def _normalized_correlation(e: MeasurementEnsemble, st: IterateState) -> np.ndarray:
    nz = np.linalg.norm(st.z)
    if nz == 0:
        raise ValueError("truncation rules are undefined at z = 0")
    return np.sqrt(e.n) / e.row_norms() * np.abs(st.Az) / nz


def truncation_mask(e: MeasurementEnsemble, y, st: IterateState, p: TruncationParams) -> np.ndarray:
    """Indices passing both the correlation (E1) and residual (E2) tests."""
    ratio = _normalized_correlation(e, st)
    e1 = (p.alpha_z_lb <= ratio) & (ratio <= p.alpha_z_ub)
    e2 = np.abs(y - np.abs(st.Az) ** 2) <= p.alpha_h * st.K * ratio
    return e1 & e2


def _score_weights(y, Az, keep) -> np.ndarray:
    w = np.zeros_like(Az)
    w[keep] = 2.0 * (y[keep] - np.abs(Az[keep]) ** 2) / np.conj(Az[keep])
    return w


def truncated_gradient(e: MeasurementEnsemble, y, st: IterateState, p: TruncationParams):
    """Return ``(p_vec, kept_count)`` with ``p_vec = (1/m) * truncated score``."""
    keep = truncation_mask(e, y, st, p)
    grad = e.adjoint(_score_weights(y, st.Az, keep)) / e.m
    return grad, int(keep.sum())


def _objective_from_products(y, Az, Ap, tau, keep) -> float:
    u2 = np.abs(Az[keep] + tau * Ap[keep]) ** 2
    yk = y[keep]
    with np.errstate(divide="ignore"):
        logs = np.where(yk == 0, 0.0, yk * np.log(u2))
    return float(np.sum(logs - u2))


def line_search_set(e: MeasurementEnsemble, z, Az, Ap, p_dir, params: TruncationParams) -> np.ndarray:
    return (np.abs(Az) >= params.alpha_z_lb * np.linalg.norm(z)) & (
        np.abs(Ap) <= params.alpha_p * np.linalg.norm(p_dir)
    )


def truncated_objective(e: MeasurementEnsemble, y, z, p_dir, params: TruncationParams) -> float:
    """(1/m) * sum over the (z, p_dir)-trimmed set of ``y_i log|a_i^* z|^2 - |a_i^* z|^2``."""
    z = np.asarray(z)
    if np.linalg.norm(z) == 0:
        raise ValueError("truncated objective is undefined at z = 0")
    Az = e.forward(z)
    Ap = e.forward(p_dir)
    keep = line_search_set(e, z, Az, Ap, p_dir, params)
    return _objective_from_products(np.asarray(y), Az, Ap, 0.0, keep) / e.m


def backtracking_search(e: MeasurementEnsemble, y, st: IterateState, p_dir, beta: float,
                        params: TruncationParams, Ap=None) -> float:
    """Shrink tau from 1 by ``beta`` until the trimmed objective gains ``tau ||p||^2 / 2``.

    The trimmed index set is frozen at ``(z, p_dir)`` for the whole search.
    """
    if not 0 < beta < 1:
        raise ValueError("beta must lie in (0, 1)")
    pn2 = float(np.vdot(p_dir, p_dir).real)
    if pn2 == 0:
        raise ValueError("search direction must be nonzero")
    y = np.asarray(y)
    if Ap is None:
        Ap = e.forward(p_dir)
    keep = line_search_set(e, st.z, st.Az, Ap, p_dir, params)
    return armijo_ascent(lambda tau: _objective_from_products(y, st.Az, Ap, tau, keep) / e.m, pn2, beta)


def armijo_ascent(objective, pn2: float, beta: float) -> float:
    """Largest ``tau = beta**k`` with ``objective(tau) >= objective(0) + tau * pn2 / 2``."""
    base = objective(0.0)
    tau = 1.0
    while objective(tau) < base + 0.5 * tau * pn2:
        tau *= beta
        if tau < MIN_STEP:
            raise LineSearchFailure("step size underflowed without sufficient increase")
    return tau


def twf_step(e: MeasurementEnsemble, y, st: IterateState, cfg: SolverConfig):
    """Advance one TWF iteration; returns ``(new_state, record, matvecs_used)``.

    The record describes the iterate the step started from.
    """
    p_vec, kept = truncated_gradient(e, y, st, cfg.params)
    used = 1
    gnorm = float(np.linalg.norm(p_vec))
    if isinstance(cfg.step, Backtracking) and gnorm > 0:
        Ap = e.forward(p_vec)
        used += 1
        step = backtracking_search(e, y, st, p_vec, cfg.step.beta, cfg.params, Ap=Ap)
    elif isinstance(cfg.step, Backtracking):
        step = 0.0
    else:
        step = cfg.step.mu
    z_new = st.z + step * p_vec
    new = IterateState.at(e, y, z_new, st.t + 1)
    used += 1
    record = IterRecord(st.t, None, gnorm, step, kept, 0)
    return new, record, used


def _check_config(cfg: SolverConfig, trace: SolverTrace):
    mode = "linesearch" if isinstance(cfg.step, Backtracking) else "fixed"
    check = validate_params(cfg.params, mode)
    notes = []
    if not check.ok:
        notes.append(f"thresholds {cfg.params} fall outside the admissible {mode} range")
    if isinstance(cfg.step, FixedStep) and cfg.step.mu > check.mu0:
        notes.append(f"fixed step {cfg.step.mu:g} exceeds mu0 = {check.mu0:.4f}")
    if cfg.enforce_mu0:
        for note in notes:
            warnings.warn(note, stacklevel=3)
    trace.warnings.extend(notes)


def _finish(z, x, trace: SolverTrace):
    if x is not None and np.all(np.isfinite(z)):
        trace.final_error = relative_error(z, x)
    return z, trace


def solve_twf(e: MeasurementEnsemble, y, cfg: SolverConfig = SolverConfig(), x=None, z0=None):
    """Truncated spectral initialization followed by ``cfg.max_iters`` TWF updates.

    ``z0`` bypasses the spectral initialization. When ground truth ``x`` is
    given, each record carries the relative error of the iterate.
    """
    y = np.asarray(y, dtype=np.float64)
    trace = SolverTrace()
    _check_config(cfg, trace)

    if z0 is None:
        init_cfg = replace(cfg.init, alpha_y=cfg.params.alpha_y) if cfg.init.truncated else cfg.init
        init = spectral_init(e, y, init_cfg)
        z = init.z0
        trace.matvecs = init.matvecs
    else:
        z = np.array(z0, dtype=np.complex128 if e.is_complex else np.float64)
    st = IterateState.at(e, y, z)
    trace.matvecs += 1
    if x is not None:
        trace.init_error = relative_error(st.z, x)

    for _ in range(cfg.max_iters):
        err = relative_error(st.z, x) if x is not None else None
        try:
            new, rec, used = twf_step(e, y, st, cfg)
        except LineSearchFailure:
            trace.status = "diverged"
            break
        rec.relative_error = err
        rec.matvecs = trace.matvecs
        trace.records.append(rec)
        if rec.gradient_norm <= cfg.grad_tol * np.linalg.norm(st.z):
            rec.step_size = 0.0
            trace.status = "converged"
            break
        trace.matvecs += used
        if not np.all(np.isfinite(new.z)):
            trace.status = "diverged"
            break
        st = new
    return _finish(st.z, x, trace)


def wf_step_size(t: int, cap: float = 0.2, tau0: float = 330.0) -> float:
    """Default WF schedule ``min(1 - exp(-t / tau0), cap)``, with t counted from 1."""
    return min(1.0 - math.exp(-t / tau0), cap)


def solve_wf(e: MeasurementEnsemble, y, cfg: SolverConfig = SolverConfig(), x=None, z0=None):
    """Plain spectral initialization plus untruncated Poisson-gradient updates.

    Rows whose ``|a_i^* z|`` falls below ``1e-14 ||z||`` are skipped and
    counted in ``trace.skipped_terms``; nothing else guards the iteration.
    """
    y = np.asarray(y, dtype=np.float64)
    trace = SolverTrace()
    if z0 is None:
        init = spectral_init(e, y, replace(cfg.init, truncated=False))
        z = init.z0
        trace.matvecs = init.matvecs
    else:
        z = np.array(z0, dtype=np.complex128 if e.is_complex else np.float64)
    Az = e.forward(z)
    trace.matvecs += 1
    if x is not None:
        trace.init_error = relative_error(z, x)

    for t in range(cfg.max_iters):
        err = relative_error(z, x) if x is not None else None
        keep = np.abs(Az) >= 1e-14 * np.linalg.norm(z)
        trace.skipped_terms += int(e.m - keep.sum())
        grad = e.adjoint(_score_weights(y, Az, keep)) / e.m
        gnorm = float(np.linalg.norm(grad))
        mu = wf_step_size(t + 1)
        rec = IterRecord(t, err, gnorm, mu, int(keep.sum()), trace.matvecs)
        trace.records.append(rec)
        if gnorm <= cfg.grad_tol * np.linalg.norm(z):
            rec.step_size = 0.0
            trace.status = "converged"
            break
        z_new = z + mu * grad
        trace.matvecs += 2
        if not (np.all(np.isfinite(z_new)) and np.linalg.norm(z_new) > 0):
            trace.status = "diverged"
            break
        z = z_new
        Az = e.forward(z)
    return _finish(z, x, trace)
