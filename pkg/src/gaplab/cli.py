"""Command line front end.

Subcommands: stats, sample, variance, evolve, bounds, run.  Every JSON
output is canonical (sorted keys, two-space indent, trailing newline), so
identical inputs produce identical bytes.  Exit codes: 0 success / all
checks passed, 1 at least one check violated, 2 configuration or input
error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import jsonio
from .dynamics import (
    BoundInputs,
    expectation_curve,
    finite_time_branches,
    equilibration_bound_infinite_time,
    mixture_expectation_curve,
    moment_bounds,
)
from .linalg import operator_norm
from .moments import gap_expectation, gap_variance_bound
from .sampling import derive_rng, empirical_density_matrix, sample_gap
from .scenarios import ConfigError, build_scenario, load_scenario
from .spectra import contributing_set, gap_count, spectral_stats
from .runner import run_scenario

__all__ = ["main"]

#: Points per horizon for the mixture curve CSV export.
CSV_CURVE_POINTS = 1001

BOUND_INPUT_KEYS = (
    "epsilon",
    "delta",
    "kappa",
    "horizon",
    "norm_b",
    "norm_rho",
    "n_contributing",
    "max_degeneracy",
    "max_gap_degeneracy",
    "gap_window_count",
)


def _emit(obj, out: str | None) -> None:
    text = jsonio.dumps_canonical(obj)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _parse_times(spec: str) -> np.ndarray:
    parts = spec.split(":")
    if len(parts) != 3:
        raise ConfigError("--times must have the form t0:t1:n")
    t0, t1, n = float(parts[0]), float(parts[1]), int(parts[2])
    if n < 2 or t1 <= t0:
        raise ConfigError("--times needs t1 > t0 and n >= 2")
    return np.linspace(t0, t1, n)


def _cmd_stats(args) -> int:
    spec = jsonio.load_spectrum(args.spectrum)
    stats = spectral_stats(spec, args.gap_tol)
    record = {
        "n_distinct": stats.n_distinct,
        "max_degeneracy": stats.max_degeneracy,
        "max_gap_degeneracy": stats.max_gap_degeneracy,
        "diameter": spec.diameter,
        "window_counts": {str(k): gap_count(spec, k, args.gap_tol) for k in args.kappa},
    }
    if args.observable:
        B = jsonio.load_matrix(args.observable)
        cs = contributing_set(spec, B)
        record["contributing"] = {
            "n_distinct": cs.n_distinct,
            "max_degeneracy": cs.max_degeneracy,
            "max_gap_degeneracy": cs.max_gap_degeneracy,
            "window_counts": {str(k): cs.gap_count(k, args.gap_tol) for k in args.kappa},
        }
    _emit(record, args.out)
    return 0


def _cmd_sample(args) -> int:
    rho = jsonio.load_density(args.rho)
    rng = derive_rng(args.seed)
    states = sample_gap(rho, rng, size=args.n)
    if args.summary:
        emp = empirical_density_matrix(states)
        record = {
            "n": args.n,
            "seed": args.seed,
            "dim": rho.dim,
            "empirical_density": jsonio.matrix_to_json(emp),
        }
        _emit(record, args.out)
    elif args.out:
        jsonio.save_states(args.out, states)
    else:
        _emit(jsonio.states_to_json(states), None)
    return 0


def _cmd_variance(args) -> int:
    rho = jsonio.load_density(args.rho)
    A = jsonio.load_matrix(args.A)
    report = gap_variance_bound(rho, A)
    record = {
        "expectation": [
            float(np.real(gap_expectation(rho, A))),
            float(np.imag(gap_expectation(rho, A))),
        ],
        "exact_variance": report.exact_variance,
        "bound": report.bound,
        "quadrature_bound": report.quadrature_bound,
        "term_breakdown": report.term_breakdown,
        "clamped_terms": report.clamped_terms,
    }
    if args.mc_check:
        rng = derive_rng(args.seed)
        psis = sample_gap(rho, rng, size=args.mc_check)
        vals = np.einsum("sd,de,se->s", psis.conj(), A, psis)
        sq = np.abs(vals - vals.mean()) ** 2
        record["mc"] = {
            "n": args.mc_check,
            "seed": args.seed,
            "variance": float(sq.mean()),
            "se": float(np.std(sq) / np.sqrt(sq.size)),
        }
    _emit(record, args.out)
    return 0


def _cmd_evolve(args) -> int:
    spec = jsonio.load_spectrum(args.spectrum)
    states = jsonio.load_states(args.psi0)
    if states.shape[0] != 1:
        raise ConfigError("--psi0 file must contain exactly one state")
    B = jsonio.load_matrix(args.B)
    times = _parse_times(args.times)
    curve = expectation_curve(spec, states[0], B, times)
    jsonio.write_curve_csv(args.out, times, curve)
    return 0


def _cmd_bounds(args) -> int:
    with open(args.inputs, encoding="utf-8") as fh:
        data = json.load(fh)
    missing = [k for k in BOUND_INPUT_KEYS if k not in data]
    if missing:
        raise ConfigError(f"bound inputs missing keys: {missing}")
    kwargs = {k: data[k] for k in BOUND_INPUT_KEYS}
    if "constant" in data:
        kwargs["constant"] = data["constant"]
    inputs = BoundInputs(**kwargs)
    markov, concentration = finite_time_branches(inputs)
    moments = moment_bounds(inputs)
    record = {
        "inputs": {k: getattr(inputs, k) for k in BOUND_INPUT_KEYS},
        "constant": inputs.constant,
        "window_factor": inputs.window_factor,
        "finite_time": {
            "markov": markov,
            "concentration": concentration,
            "bound": min(markov, concentration),
            "branch": "markov" if markov <= concentration else "concentration",
        },
        "infinite_time": equilibration_bound_infinite_time(inputs),
        "moment_bounds": {
            "expected_time_variance": moments.expected_time_variance,
            "mixture_curve_deviation": moments.mixture_curve_deviation,
            "time_average_variance": moments.time_average_variance,
            "expected_dephasing_variance": moments.expected_dephasing_variance,
        },
    }
    _emit(record, args.out)
    return 0


def _cmd_run(args) -> int:
    config = load_scenario(args.config)
    base_dir = os.path.dirname(os.path.abspath(args.config))
    report = run_scenario(config, base_dir=base_dir, workers=args.workers)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
    if args.csv:
        os.makedirs(args.csv, exist_ok=True)
        scn = build_scenario(config, base_dir)
        for T in config.horizons:
            times = np.linspace(0.0, T, CSV_CURVE_POINTS)
            curve = mixture_expectation_curve(scn.spec, scn.rho, scn.observable, times)
            path = os.path.join(args.csv, f"mixture_T{T:g}.csv")
            jsonio.write_curve_csv(path, times, curve)
    if args.timings:
        with open(args.timings, "w", encoding="utf-8") as fh:
            fh.write(jsonio.dumps_canonical(report.timings))
    for check in report.checks:
        status = "PASS" if check.passed else "FAIL"
        flag = " (vacuous)" if check.vacuous else ""
        print(f"{status} {check.name}: measured={check.measured:.6g} bound={check.bound:.6g}{flag}")
    print(f"violations: {report.violations}")
    return 0 if report.violations == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gaplab")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="spectral statistics of a spectrum file")
    p.add_argument("--spectrum", required=True)
    p.add_argument("--kappa", type=float, action="append", default=[])
    p.add_argument("--gap-tol", type=float, default=None)
    p.add_argument("--observable", default=None, help="restrict to eigenvalues coupled by this observable")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_stats)

    p = sub.add_parser("sample", help="draw projected-ensemble states")
    p.add_argument("--rho", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--summary", action="store_true", help="emit empirical density matrix instead of raw states")
    p.set_defaults(fn=_cmd_sample)

    p = sub.add_parser("variance", help="exact observable variance and its closed-form bound")
    p.add_argument("--rho", required=True)
    p.add_argument("--A", required=True)
    p.add_argument("--mc-check", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_variance)

    p = sub.add_parser("evolve", help="expectation curve of an evolving state")
    p.add_argument("--spectrum", required=True)
    p.add_argument("--psi0", required=True)
    p.add_argument("--B", required=True)
    p.add_argument("--times", required=True, help="t0:t1:n")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_evolve)

    p = sub.add_parser("bounds", help="evaluate every bound from a JSON inputs record")
    p.add_argument("--inputs", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_bounds)

    p = sub.add_parser("run", help="run a scenario config and write the report")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--csv", default=None, help="directory for mixture expectation curve CSVs")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--timings", default=None, help="sidecar file for wall-clock timings")
    p.set_defaults(fn=_cmd_run)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "kappa", None) == []:
        args.kappa = [1.0]
    try:
        return args.fn(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main(argv=None))
