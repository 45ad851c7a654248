"""Reference solvers: CG on the normal equations and the phase-oracle Poisson MLE."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .measurement import MeasurementEnsemble
from .metrics import relative_error


@dataclass
class CgRecord:
    t: int
    residual_norm: float  # ||b - A z||
    normal_residual: float  # ||A^T b - A^T A z||
    relative_error: Optional[float]
    matvecs: int


@dataclass
class CgTrace:
    records: List[CgRecord] = field(default_factory=list)
    matvec_count: int = 0
    status: str = "max_iters"  # converged | max_iters | breakdown

    def matvecs_to_tol(self, tol: float) -> Optional[int]:
        for r in self.records:
            if r.relative_error is not None and r.relative_error <= tol:
                return r.matvecs
        return None


def solve_cg_normal(e: MeasurementEnsemble, b, tol: float = 1e-10, max_iters: int = 100, x=None):
    """Solve ``A^T A z = A^T b`` by conjugate gradients, matrix-free.

    Each iteration applies ``A`` once and ``A^T`` once. Stops when the
    normal-equation residual drops to ``tol * ||A^T b||``.
    """
    if e.is_complex:
        raise ValueError("CG baseline is defined for real ensembles only")
    if not tol > 0:
        raise ValueError("tol must be positive")
    b = np.asarray(b, dtype=np.float64)
    trace = CgTrace()
    z = np.zeros(e.n)
    rb = b.copy()
    r = e.adjoint(rb)
    trace.matvec_count = 1
    target = tol * np.linalg.norm(r)
    p = r.copy()
    rr = float(r @ r)

    def record(t):
        err = relative_error(z, x) if x is not None else None
        trace.records.append(CgRecord(t, float(np.linalg.norm(rb)), float(np.sqrt(rr)), err, trace.matvec_count))

    record(0)
    if np.sqrt(rr) <= target:
        trace.status = "converged"
        return z, trace
    for t in range(1, max_iters + 1):
        q = e.forward(p)
        s = e.adjoint(q)
        trace.matvec_count += 2
        qq = float(q @ q)
        if qq == 0:
            trace.status = "breakdown"
            break
        alpha = rr / qq
        z = z + alpha * p
        rb = rb - alpha * q
        r = r - alpha * s
        rr_new = float(r @ r)
        beta = rr_new / rr
        rr = rr_new
        p = r + beta * p
        record(t)
        if np.sqrt(rr) <= target:
            trace.status = "converged"
            break
    return z, trace


class InfeasibleSigns(ValueError):
    pass


def _oracle_objective(y, u, pos):
    """(1/m) sum of -2 y_i log(phi_i a_i^T z) + (a_i^T z)^2; ``u = phi * Az``."""
    if np.any(u[pos] <= 0):
        return np.inf
    return float(-2.0 * np.sum(y[pos] * np.log(u[pos])) + np.sum(u**2)) / len(u)


def _feasible_start(e: MeasurementEnsemble, y, signs, pos):
    rows = e.dense() * signs[:, None]
    z, *_ = np.linalg.lstsq(rows, np.sqrt(np.maximum(y, 0.0)), rcond=None)
    if np.all(rows[pos] @ z > 0):
        return z
    # maximize the worst margin inside a box; the LP is bounded and always solvable
    from scipy.optimize import linprog

    n = e.n
    box = max(float(np.max(np.abs(z))), 1.0)
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-rows[pos], np.ones((int(pos.sum()), 1))])
    bounds = [(-box, box)] * n + [(None, box)]
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(A_ub.shape[0]), bounds=bounds, method="highs")
    if res.status != 0 or res.x[-1] <= 0:
        raise InfeasibleSigns("no z satisfies the supplied signs on the positive observations")
    return res.x[:n]


def solve_phase_oracle_mle(e: MeasurementEnsemble, y, signs, max_iters: int = 200, tol: float = 1e-10,
                           method: str = "newton"):
    """Poisson MLE when the measurement signs ``phi_i`` are revealed.

    Minimizes ``sum_i -2 y_i log(phi_i a_i^T z) + (a_i^T z)^2`` (terms with
    ``y_i = 0`` have no log) by descent with Armijo backtracking. Steps are
    first clipped to 0.99 of the distance to the boundary ``phi_i a_i^T z = 0``.
    ``method="gradient"`` uses the negative gradient instead of the Newton
    direction.
    """
    if e.is_complex:
        raise ValueError("phase-oracle MLE is defined for real ensembles only")
    y = np.asarray(y, dtype=np.float64)
    signs = np.asarray(signs, dtype=np.float64)
    if np.any(y < 0):
        raise ValueError("y must be nonnegative")
    if not np.all(np.isin(signs, (-1.0, 1.0))):
        raise ValueError("signs must be +1 or -1")
    m = e.m
    pos = y > 0
    z = _feasible_start(e, y, signs, pos)
    u = signs * e.forward(z)
    f = _oracle_objective(y, u, pos)
    for _ in range(max_iters):
        ratio = np.zeros(m)
        ratio[pos] = y[pos] / u[pos]
        grad = e.adjoint(signs * (2.0 * u - 2.0 * ratio)) / m
        if np.linalg.norm(grad) <= tol:
            break
        if method == "newton":
            weights = 2.0 + np.where(pos, 2.0 * ratio / np.where(pos, u, 1.0), 0.0)
            rows = e.dense()
            hess = (rows.T * weights) @ rows / m
            d = -np.linalg.solve(hess, grad)
        else:
            d = -grad
        du = signs * e.forward(d)
        step = 1.0
        shrinking = pos & (du < 0)
        if np.any(shrinking):
            step = min(1.0, 0.99 * float(np.min(-u[shrinking] / du[shrinking])))
        slope = float(grad @ d)
        while True:
            f_new = _oracle_objective(y, u + step * du, pos)
            if f_new <= f + 1e-4 * step * slope:
                break
            step *= 0.5
            if step < 1e-16:
                return z
        z = z + step * d
        u = u + step * du
        f = f_new
    return z
