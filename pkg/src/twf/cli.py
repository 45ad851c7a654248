"""Command-line entry point: ``twf <subcommand> [options]``.

Exit status is 0 on success, 2 for invalid arguments and 1 for runtime
failures.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings

import numpy as np

from .harness import (
    DESIGNS,
    ExperimentSpec,
    draw_signal,
    make_ensemble,
    parse_step,
    run_experiment,
    trial_seeds,
)
from .noise import NoiseSpec, norm_for_snr_db, observe
from .solver import SolverConfig, TruncationParams, solve_twf, solve_wf, validate_params
from .spectral import InitConfig


class UsageError(Exception):
    pass


def _int_list(text):
    return tuple(int(tok) for tok in str(text).split(","))


def _float_list(text):
    return tuple(float(tok) for tok in str(text).split(","))


def read_config(path: str) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment. Keys use flag spelling."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def _common(p: argparse.ArgumentParser, experiment: bool):
    p.add_argument("--n", default="128", help="signal dimension(s), comma separated")
    p.add_argument("--ratio", default="8", help="m/n ratio(s); mask count L for cdp")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--design", choices=DESIGNS, default="gaussian-real")
    p.add_argument("--masks", type=int, default=None, help="number of CDP masks (overrides --ratio)")
    p.add_argument("--step", default="fixed:0.2", help="fixed:MU or backtrack:BETA")
    p.add_argument("--max-iters", type=int, default=1000)
    p.add_argument("--power-iters", type=int, default=50)
    p.add_argument("--params", default=None, help="alpha_z_lb,alpha_z_ub,alpha_h,alpha_y[,alpha_p]")
    if experiment:
        p.add_argument("--trials", type=int, default=10)
        p.add_argument("--snr-db", default="15,25,35,45,55")
        p.add_argument("--solvers", default="twf", help="comma separated subset of twf,wf")
        p.add_argument("--oracle", action="store_true", help="also run the phase-oracle MLE (mse-vs-snr)")
        p.add_argument("--out", required=True, help="CSV output path")


def _solve_args(p: argparse.ArgumentParser):
    _common(p, experiment=False)
    p.add_argument("--config", default=None, help="key = value file; flags override it")
    p.add_argument("--noise", choices=("noiseless", "poisson"), default="noiseless")
    p.add_argument("--snr-db", type=float, default=None, help="rescale x to this SNR (Poisson data)")
    p.add_argument("--solver", choices=("twf", "wf"), default="twf")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twf", description="Truncated Wirtinger Flow experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("phase-transition", "mse-vs-snr", "init-compare", "cg-compare"):
        _common(sub.add_parser(name), experiment=True)
    _solve_args(sub.add_parser("solve", help="solve one synthetic instance"))
    vp = sub.add_parser("validate-params", help="check thresholds and report mu0")
    vp.add_argument("--params", default=None)
    vp.add_argument("--mode", choices=("fixed", "linesearch"), default="fixed")
    return parser


def _params(text, linesearch=False):
    if text is None:
        return TruncationParams.linesearch_defaults() if linesearch else TruncationParams()
    return TruncationParams.parse(text)


def _ratios(args):
    if args.masks is not None:
        return (float(args.masks),)
    return _float_list(args.ratio)


def _experiment(args) -> int:
    step = parse_step(args.step)
    spec = ExperimentSpec(
        experiment=args.command,
        ns=_int_list(args.n),
        ratios=_ratios(args),
        snr_dbs=_float_list(args.snr_db),
        trials=args.trials,
        design=args.design,
        solvers=tuple(s.strip() for s in args.solvers.split(",")),
        params=_params(args.params, linesearch=args.step.startswith("backtrack")),
        step=step,
        max_iters=args.max_iters,
        power_iters=args.power_iters,
        oracle=args.oracle,
        seed=args.seed,
        out=args.out,
    )
    rows = run_experiment(spec)
    print(json.dumps({"experiment": spec.experiment, "out": spec.out, "rows": rows}, default=str))
    return 0


def _solve(args, argv) -> int:
    if args.config:
        # config supplies defaults; explicit flags win
        parser = argparse.ArgumentParser(prog="twf solve")
        _solve_args(parser)
        parser.set_defaults(**read_config(args.config))
        args = parser.parse_args(argv[1:])
    n = _int_list(args.n)[0]
    ratio = _ratios(args)[0]
    seeds = trial_seeds(args.seed, ("solve", args.design, n, ratio), 0)
    e = make_ensemble(args.design, n, ratio, seeds[1])
    x = draw_signal(n, e.is_complex, seeds[0])
    snr_db = None if args.snr_db is None else float(args.snr_db)
    if snr_db is not None:
        x *= norm_for_snr_db(snr_db) / np.linalg.norm(x)
    y = observe(e.intensities(x), NoiseSpec(args.noise), seeds[2])
    step = parse_step(args.step)
    cfg = SolverConfig(
        params=_params(args.params, linesearch=str(args.step).startswith("backtrack")),
        step=step,
        max_iters=int(args.max_iters),
        init=InitConfig(power_iters=int(args.power_iters), seed=seeds[3]),
    )
    solve = solve_twf if args.solver == "twf" else solve_wf
    with warnings.catch_warnings(record=True):
        warnings.simplefilter("always")
        _, trace = solve(e, y, cfg, x=x)
    for note in trace.warnings:
        print(f"warning: {note}", file=sys.stderr)
    print(f"design={args.design} n={n} m={e.m} solver={args.solver} status={trace.status}")
    print(f"init_relative_error={trace.init_error:.6e}")
    final = "nan" if trace.final_error is None else f"{trace.final_error:.6e}"
    print(f"final_relative_error={final}")
    print(f"iterations={len(trace.records)} matvecs={trace.matvecs}")
    return 0


def _validate(args) -> int:
    params = _params(args.params, linesearch=args.mode == "linesearch")
    check = validate_params(params, args.mode)
    print(f"zeta1={check.zeta1:.6f}")
    print(f"zeta2={check.zeta2:.6f}")
    print(f"mu0={check.mu0:.6f}")
    print("ok" if check.ok else "not ok")
    return 0


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "validate-params":
            return _validate(args)
        if args.command == "solve":
            return _solve(args, argv)
        return _experiment(args)
    except (UsageError, ValueError) as exc:
        print(f"twf: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"twf: runtime failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
