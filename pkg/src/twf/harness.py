"""Seeded Monte Carlo experiments that write CSV tables.

Every trial draws its own seeds from ``(master seed, cell coordinates,
trial index)``, so a cell's numbers do not depend on which other cells run
or in what order.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .baselines import solve_cg_normal, solve_phase_oracle_mle
from .measurement import MeasurementEnsemble, sample_cdp_ensemble, sample_gaussian_ensemble
from .metrics import relative_error
from .noise import NoiseSpec, norm_for_snr_db, observe, relative_mse
from .solver import (
    SUCCESS_TOL,
    Backtracking,
    FixedStep,
    SolverConfig,
    StepPolicy,
    TruncationParams,
    solve_twf,
    solve_wf,
)
from .spectral import InitConfig, spectral_init

EXPERIMENTS = ("phase-transition", "mse-vs-snr", "init-compare", "cg-compare")
DESIGNS = ("gaussian-real", "gaussian-complex", "cdp")


@dataclass(frozen=True)
class ExperimentSpec:
    experiment: str
    ns: Tuple[int, ...] = (128,)
    ratios: Tuple[float, ...] = (8.0,)
    snr_dbs: Tuple[float, ...] = (15.0, 25.0, 35.0, 45.0, 55.0)
    trials: int = 10
    design: str = "gaussian-real"
    solvers: Tuple[str, ...] = ("twf",)
    params: TruncationParams = TruncationParams()
    step: StepPolicy = FixedStep(0.2)
    max_iters: int = 1000
    power_iters: int = 50
    oracle: bool = False
    seed: int = 0
    out: Optional[str] = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.design not in DESIGNS:
            raise ValueError(f"unknown design {self.design!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.ns or not self.ratios or not self.snr_dbs:
            raise ValueError("grids must be nonempty")
        if any(n < 1 for n in self.ns) or any(r <= 0 for r in self.ratios):
            raise ValueError("n and ratio values must be positive")
        for s in self.solvers:
            if s not in ("twf", "wf"):
                raise ValueError(f"unknown solver {s!r}")
        if self.design == "cdp" and any(r != int(r) for r in self.ratios):
            raise ValueError("cdp ratios are mask counts and must be integers")
        if self.experiment == "cg-compare" and self.design != "gaussian-real":
            raise ValueError("cg-compare needs a real design")
        if self.oracle and self.design != "gaussian-real":
            raise ValueError("the phase-oracle MLE needs a real design")

    def solver_config(self, init_seed: int, power_iters: Optional[int] = None) -> SolverConfig:
        init = InitConfig(alpha_y=self.params.alpha_y, power_iters=power_iters or self.power_iters, seed=init_seed)
        return SolverConfig(params=self.params, step=self.step, max_iters=self.max_iters, init=init)

    def echo(self) -> str:
        d = dataclasses.asdict(self)
        d["step"] = format_step(self.step)
        d.pop("out")
        return json.dumps(d, sort_keys=True)


def format_step(step: StepPolicy) -> str:
    if isinstance(step, Backtracking):
        return f"backtrack:{step.beta:g}"
    return f"fixed:{step.mu:g}"


def parse_step(text: str) -> StepPolicy:
    kind, _, value = text.partition(":")
    if kind == "fixed":
        return FixedStep(float(value) if value else 0.2)
    if kind == "backtrack":
        return Backtracking(float(value) if value else 0.5)
    raise ValueError(f"step must be 'fixed:MU' or 'backtrack:BETA', got {text!r}")


def _stable_words(*coords) -> List[int]:
    digest = hashlib.blake2b(repr(coords).encode(), digest_size=16).digest()
    return [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]


def trial_seeds(master: int, coords: tuple, trial: int, count: int = 4) -> List[int]:
    """Independent integer seeds for one trial of one grid cell."""
    ss = np.random.SeedSequence(entropy=[int(master) & 0xFFFFFFFFFFFFFFFF, *_stable_words(*coords, trial)])
    return [int(child.generate_state(2, dtype=np.uint64)[0]) for child in ss.spawn(count)]


def draw_signal(n: int, complex_field: bool, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    if complex_field:
        return (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / math.sqrt(2.0)
    return rng.standard_normal(n)


def make_ensemble(design: str, n: int, ratio: float, seed: int) -> MeasurementEnsemble:
    if design == "cdp":
        return sample_cdp_ensemble(n, int(ratio), seed)
    m = int(round(ratio * n))
    return sample_gaussian_ensemble(n, m, "complex" if design == "gaussian-complex" else "real", seed)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("TWF_THREADS", "1")))
    except ValueError:
        return 1


def _run_tasks(fn, tasks: Sequence):
    # results come back in task order whatever the completion order
    workers = min(_threads(), len(tasks))
    if workers <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


# ---------------------------------------------------------------------------
# per-trial workers (module level so they pickle)

def _phase_transition_trial(task):
    spec, n, ratio, trial = task
    s_sig, s_ens, _, s_init = trial_seeds(spec.seed, ("pt", spec.design, n, ratio), trial)
    e = make_ensemble(spec.design, n, ratio, s_ens)
    x = draw_signal(n, e.is_complex, s_sig)
    y = e.intensities(x)
    out = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for name in spec.solvers:
            solve = solve_twf if name == "twf" else solve_wf
            z, _ = solve(e, y, spec.solver_config(s_init), x=x)
            err = relative_error(z, x) if np.all(np.isfinite(z)) else math.inf
            out[name] = err <= SUCCESS_TOL
    return out


def _mse_trial(task):
    spec, n, ratio, snr_db, trial = task
    s_sig, s_ens, s_noise, s_init = trial_seeds(spec.seed, ("mse", spec.design, n, ratio, snr_db), trial)
    e = make_ensemble(spec.design, n, ratio, s_ens)
    x = draw_signal(n, e.is_complex, s_sig)
    x *= norm_for_snr_db(snr_db) / np.linalg.norm(x)
    y = observe(e.intensities(x), NoiseSpec("poisson"), s_noise)
    out = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for name in spec.solvers:
            solve = solve_twf if name == "twf" else solve_wf
            z, _ = solve(e, y, spec.solver_config(s_init), x=x)
            out[name] = relative_mse(z, x) if np.all(np.isfinite(z)) else math.inf
    if spec.oracle:
        z = solve_phase_oracle_mle(e, y, np.sign(e.forward(x)))
        out["oracle"] = relative_mse(z, x)
    return out


def _init_trial(task):
    spec, n, ratio, trial = task
    s_sig, s_ens, _, s_init = trial_seeds(spec.seed, ("init", spec.design, n, ratio), trial)
    e = make_ensemble(spec.design, n, ratio, s_ens)
    x = draw_signal(n, e.is_complex, s_sig)
    y = e.intensities(x)
    truncated = InitConfig(alpha_y=spec.params.alpha_y, power_iters=spec.power_iters, seed=s_init)
    plain = dataclasses.replace(truncated, truncated=False)
    return (
        relative_error(spectral_init(e, y, truncated).z0, x),
        relative_error(spectral_init(e, y, plain).z0, x),
    )


def _cg_trial(task):
    spec, n, ratio, trial = task
    s_sig, s_ens, _, s_init = trial_seeds(spec.seed, ("cg", n, ratio), trial)
    e = make_ensemble("gaussian-real", n, ratio, s_ens)
    x = draw_signal(n, False, s_sig)
    _, cg = solve_cg_normal(e, e.forward(x), tol=1e-14, max_iters=spec.max_iters, x=x)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        _, tw = solve_twf(e, e.intensities(x), spec.solver_config(s_init), x=x)
    eig = np.linalg.eigvalsh(e.rows.T @ e.rows / e.m)
    return {
        "cg_errors": [r.relative_error for r in cg.records],
        "twf_errors": [r.relative_error for r in tw.records] + [tw.final_error],
        "cg_matvecs": cg.matvecs_to_tol(SUCCESS_TOL),
        "twf_matvecs": tw.matvecs_to_tol(SUCCESS_TOL),
        "cond": float(eig[-1] / eig[0]),
    }


# ---------------------------------------------------------------------------
# experiments

def _db(v: float) -> float:
    return 10.0 * math.log10(v) if v > 0 else -math.inf


def run_phase_transition(spec: ExperimentSpec) -> List[Dict]:
    rows = []
    for n in spec.ns:
        for ratio in spec.ratios:
            results = _run_tasks(_phase_transition_trial, [(spec, n, ratio, k) for k in range(spec.trials)])
            m = make_ensemble(spec.design, n, ratio, 0).m if spec.design == "cdp" else int(round(ratio * n))
            for name in spec.solvers:
                wins = sum(r[name] for r in results)
                rows.append({
                    "design": spec.design, "n": n, "ratio": ratio, "m": m, "solver": name,
                    "trials": spec.trials, "successes": wins, "success_rate": wins / spec.trials,
                    "seed": spec.seed,
                })
    _maybe_write(spec, rows)
    return rows


def run_mse_vs_snr(spec: ExperimentSpec) -> List[Dict]:
    rows = []
    methods = list(spec.solvers) + (["oracle"] if spec.oracle else [])
    for n in spec.ns:
        for ratio in spec.ratios:
            m = int(round(ratio * n)) if spec.design != "cdp" else n * int(ratio)
            for snr_db in spec.snr_dbs:
                results = _run_tasks(_mse_trial, [(spec, n, ratio, snr_db, k) for k in range(spec.trials)])
                norm_x = norm_for_snr_db(snr_db)
                for name in methods:
                    mse = float(np.mean([r[name] for r in results]))
                    rows.append({
                        "design": spec.design, "n": n, "ratio": ratio, "m": m, "snr_db": snr_db,
                        "solver": name, "trials": spec.trials, "rel_mse": mse, "rel_mse_db": _db(mse),
                        "norm_x": norm_x, "below_norm_regime": int(norm_x < math.log(m) ** 1.5),
                        "seed": spec.seed,
                    })
    _maybe_write(spec, rows)
    return rows


def run_init_compare(spec: ExperimentSpec) -> List[Dict]:
    rows = []
    for n in spec.ns:
        for ratio in spec.ratios:
            results = _run_tasks(_init_trial, [(spec, n, ratio, k) for k in range(spec.trials)])
            m = int(round(ratio * n)) if spec.design != "cdp" else n * int(ratio)
            rows.append({
                "design": spec.design, "n": n, "ratio": ratio, "m": m, "alpha_y": spec.params.alpha_y,
                "trials": spec.trials,
                "truncated_error": float(np.mean([r[0] for r in results])),
                "plain_error": float(np.mean([r[1] for r in results])),
                "seed": spec.seed,
            })
    _maybe_write(spec, rows)
    return rows


def run_cg_compare(spec: ExperimentSpec) -> List[Dict]:
    rows = []
    traces = []
    for n in spec.ns:
        for ratio in spec.ratios:
            results = _run_tasks(_cg_trial, [(spec, n, ratio, k) for k in range(spec.trials)])
            for k, r in enumerate(results):
                cgm, twm = r["cg_matvecs"], r["twf_matvecs"]
                rows.append({
                    "n": n, "ratio": ratio, "m": int(round(ratio * n)), "trial": k,
                    "cond_number": r["cond"], "cg_matvecs_to_tol": "" if cgm is None else cgm,
                    "twf_matvecs_to_tol": "" if twm is None else twm,
                    "matvec_ratio": "" if cgm is None or twm is None else twm / cgm,
                    "seed": spec.seed,
                })
                for method in ("cg", "twf"):
                    for it, err in enumerate(r[f"{method}_errors"]):
                        traces.append({"n": n, "ratio": ratio, "trial": k, "method": method,
                                       "iteration": it, "relative_error": err})
    _maybe_write(spec, rows)
    if spec.out:
        root, ext = os.path.splitext(spec.out)
        write_csv(traces, f"{root}_trace{ext or '.csv'}", spec)
    return rows


RUNNERS = {
    "phase-transition": run_phase_transition,
    "mse-vs-snr": run_mse_vs_snr,
    "init-compare": run_init_compare,
    "cg-compare": run_cg_compare,
}


def run_experiment(spec: ExperimentSpec) -> List[Dict]:
    return RUNNERS[spec.experiment](spec)


# ---------------------------------------------------------------------------
# output

def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render_csv(rows: List[Dict], spec: ExperimentSpec) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    columns = list(rows[0].keys()) if rows else []
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    buf.write(f"# version=v{__version__} spec={spec.echo()}\n")
    return buf.getvalue()


def write_csv(rows: List[Dict], path: str, spec: ExperimentSpec) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(render_csv(rows, spec))


def _maybe_write(spec: ExperimentSpec, rows: List[Dict]) -> None:
    if spec.out:
        write_csv(rows, spec.out, spec)
