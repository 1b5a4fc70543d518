"""Command-line interface: spectra, controllability, assignment, demos.

Subcommands: spectrum, lyapunov, ucc, assign, verify, discretize, demo.
Exit codes: 0 success, 1 verification failure, 2 input error,
3 synthesis/numerical error.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .assignment import assign_spectrum, verify_against_targets
from .continuous import discretize_one_time
from .controllability import check_ucc
from .demos import DEMO_CASES, DemoSettings
from .errors import (
    EXIT_INPUT,
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_VERIFICATION,
    InputError,
    TvspecError,
    exit_code_for,
)
from .io import (
    RunConfig,
    load_assignment,
    load_continuous_system,
    load_control_system,
    load_system,
    parse_horizon,
    parse_targets,
    save_assignment,
    sequence_to_json,
    write_exponent_csv,
    write_report,
)
from .kernels import BACKEND
from .sequences import Horizon, apply_feedback, validate_lyapunov
from .spectrum import (
    SpectrumEstimate,
    _signed_distance,
    dichotomy_spectrum,
    lyapunov_spectrum,
    window_exponents,
)

DEMO_ALIASES = {"theorem-2.5": "assign-end-to-end"}


def _auto_window(requested: int | None, horizon: Horizon, cap: int = 1 << 10) -> int:
    limit = len(horizon) // 2
    if requested is None:
        return min(cap, limit)
    if requested > limit:
        raise InputError(
            f"window length {requested} does not fit horizon {horizon} "
            f"(maximum {limit})"
        )
    return requested


def _print(msg: str) -> None:
    sys.stdout.write(msg + "\n")


def _limit_threads(n: int | None) -> None:
    if n is None:
        return
    if n < 1:
        raise InputError("--threads must be >= 1")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(n)
    except ImportError:
        pass


def _spectrum_payload(estimate: SpectrumEstimate, config: RunConfig) -> dict:
    return {
        "tool": {"name": "tvspec", "version": __version__, "kernel_backend": BACKEND},
        "config": config.to_dict(),
        "spectrum": estimate.to_dict(),
    }


def _format_intervals(estimate) -> str:
    return " ∪ ".join(f"[{lo:.6g}, {hi:.6g}]" for lo, hi in estimate)


def cmd_spectrum(args) -> int:
    system = load_system(args.system, horizon_override=args.horizon)
    window = _auto_window(args.window_length, system.horizon)
    config = RunConfig(
        command="spectrum",
        system_path=args.system,
        out_path=args.out,
        csv_path=args.csv,
        horizon_override=args.horizon,
        window_length=window,
        grid_step=args.grid_step,
        gap_threshold=args.gap_threshold,
        side=args.side,
        emit_csv=args.csv is not None,
        extras={"method": args.method, "verdicts": args.verdicts},
    )
    table = window_exponents(system, window)
    estimate = dichotomy_spectrum(
        table,
        side=args.side,
        gap_threshold=args.gap_threshold,
        grid_step=args.grid_step,
        method=args.method,
    )
    payload = _spectrum_payload(estimate, config)
    if args.verdicts:
        lo = estimate.intervals[0][0] - 5 * args.grid_step
        hi = estimate.intervals[-1][1] + 5 * args.grid_step
        gammas = np.arange(lo, hi + args.grid_step, args.grid_step)
        merged = [tuple(iv) for iv in estimate.intervals]
        payload["verdicts"] = [
            {
                "gamma": float(g),
                "in_spectrum": _signed_distance(float(g), merged) < 0,
                "distance": _signed_distance(float(g), merged),
            }
            for g in gammas
        ]
    if args.out:
        write_report(args.out, payload)
    if args.csv:
        write_exponent_csv(args.csv, table)
    _print(f"spectrum ({estimate.side}, L={estimate.window_length}): "
           f"{_format_intervals(estimate)}")
    return EXIT_OK


def cmd_lyapunov(args) -> int:
    system = load_system(args.system, horizon_override=args.horizon)
    exponents = lyapunov_spectrum(system, n_samples=args.samples)
    config = RunConfig(
        command="lyapunov",
        system_path=args.system,
        out_path=args.out,
        horizon_override=args.horizon,
        extras={"samples": args.samples},
    )
    if args.out:
        write_report(args.out, {
            "tool": {"name": "tvspec", "version": __version__, "kernel_backend": BACKEND},
            "config": config.to_dict(),
            "exponents": list(map(float, exponents)),
        })
    _print("lyapunov exponents: " + ", ".join(f"{x:.6g}" for x in exponents))
    return EXIT_OK


def cmd_ucc(args) -> int:
    A, B = load_control_system(args.system, horizon_override=args.horizon)
    cert = check_ucc(A, B, max_window=args.max_window, floor=args.floor)
    config = RunConfig(
        command="ucc",
        system_path=args.system,
        out_path=args.out,
        horizon_override=args.horizon,
        extras={"max_window": args.max_window, "floor": args.floor},
    )
    if args.out:
        write_report(args.out, {
            "tool": {"name": "tvspec", "version": __version__, "kernel_backend": BACKEND},
            "config": config.to_dict(),
            "certificate": cert.to_dict(),
        })
    if cert.ok:
        _print(f"uniformly completely controllable: K={cert.K}, "
               f"alpha={cert.alpha:.6g}, min Gramian eig={cert.min_gramian_eig:.6g}")
        return EXIT_OK
    _print(f"not certified up to K={cert.max_window}: "
           f"min Gramian eig={cert.min_gramian_eig:.6g} < floor {cert.floor:g}")
    return EXIT_VERIFICATION


def cmd_assign(args) -> int:
    A, B = load_control_system(args.system, horizon_override=args.horizon)
    targets = parse_targets(args.targets)
    window = _auto_window(args.window_length, A.horizon)
    config = RunConfig(
        command="assign",
        system_path=args.system,
        out_path=args.out,
        horizon_override=args.horizon,
        window_length=window,
        grid_step=args.grid_step,
        gap_threshold=args.gap_threshold,
        tolerance=args.tolerance,
        seed=args.seed,
        extras={
            "targets": [list(iv) for iv in targets],
            "off_diag_scale": args.off_diag_scale,
            "off_diag_seed": args.off_diag_seed,
        },
    )
    result = assign_spectrum(
        A,
        B,
        targets,
        tolerance=args.tolerance,
        window_length=window,
        gap_threshold=args.gap_threshold,
        grid_step=args.grid_step,
        off_diag_scale=args.off_diag_scale,
        off_diag_seed=args.off_diag_seed,
        rng_seed=config.seed if config.seed is not None else 0,
    )
    if args.out:
        save_assignment(args.out, result, A, B, config)
    _print(f"targets:   {_format_intervals(result.targets)}")
    _print(f"estimated: {_format_intervals(result.estimate)}")
    _print(f"endpoint error {result.endpoint_error:.6g} "
           f"(tolerance {result.tolerance:g}) -> "
           + ("PASS" if result.passed else "FAIL"))
    return EXIT_OK if result.passed else EXIT_VERIFICATION


def cmd_verify(args) -> int:
    bundle = load_assignment(args.assignment)
    A, B, U, C, T = (bundle[k] for k in ("A", "B", "U", "C", "T"))
    targets = bundle["targets"]
    stored = bundle.get("config", {})
    window = args.window_length or stored.get("window_length") or None
    window = _auto_window(window, A.horizon)
    gap = args.gap_threshold or stored.get("gap_threshold", 0.01)
    grid = args.grid_step or stored.get("grid_step", 0.01)

    closed = apply_feedback(A, B, U)
    validation = validate_lyapunov(closed)
    # Equivalence residual: (A + B U)_n T_n - T_{n+1} C_n over the horizon.
    h = A.horizon
    closed_stack = closed.stack()
    t_stack = T.stack()
    scale = max(1.0, float(np.max(np.abs(closed_stack))))
    n_cmp = min(len(h), t_stack.shape[0] - 1)
    lhs = np.einsum("nij,njk->nik", closed_stack[:n_cmp], t_stack[:n_cmp])
    rhs = np.einsum("nij,njk->nik", t_stack[1:n_cmp + 1], C.stack()[:n_cmp])
    residual = float(np.max(np.abs(lhs - rhs))) / scale
    estimate = dichotomy_spectrum(
        closed, side="two-sided", window_length=window,
        gap_threshold=gap, grid_step=grid,
    )
    passed, err = verify_against_targets(estimate, targets, args.tolerance)
    equivalence_ok = residual <= args.identity_tol
    ok = passed and equivalence_ok and validation.ok
    payload = {
        "tool": {"name": "tvspec", "version": __version__, "kernel_backend": BACKEND},
        "assignment": args.assignment,
        "targets": targets.to_dict(),
        "estimate": estimate.to_dict(),
        "endpoint_error": err,
        "tolerance": args.tolerance,
        "equivalence_residual": residual,
        "closed_loop_lyapunov_ok": validation.ok,
        "passed": ok,
    }
    if args.out:
        write_report(args.out, payload)
    _print(f"targets:   {_format_intervals(targets)}")
    _print(f"estimated: {_format_intervals(estimate)}")
    if not passed:
        want = np.array([list(iv) for iv in targets.intervals])
        got = np.array([list(iv) for iv in estimate.intervals])
        if want.shape == got.shape:
            diff = np.abs(want - got).max(axis=1)
            for (lo, hi), d in zip(targets.intervals, diff):
                _print(f"  target [{lo:.6g}, {hi:.6g}]: endpoint diff {d:.6g}")
        else:
            _print(f"  interval count mismatch: {len(targets)} targets, "
                   f"{len(estimate)} estimated")
    _print(f"endpoint error {err:.6g} (tolerance {args.tolerance:g}), "
           f"equivalence residual {residual:.3g} -> "
           + ("PASS" if ok else "FAIL"))
    return EXIT_OK if ok else EXIT_VERIFICATION


def cmd_discretize(args) -> int:
    system = load_continuous_system(args.continuous)
    result = discretize_one_time(
        system, method=args.method, substeps=args.substeps
    )
    payload = sequence_to_json(result.sequence)
    payload["source"] = {
        "continuous": args.continuous,
        "discretization": result.to_dict(),
    }
    write_report(args.out, payload)
    _print(f"discretized {len(result.sequence.horizon)} steps "
           f"({result.method}); kappa={result.kappa:.6g}")
    return EXIT_OK


def cmd_demo(args) -> int:
    name = DEMO_ALIASES.get(args.case, args.case)
    try:
        case = DEMO_CASES[name]
    except KeyError:
        raise InputError(
            f"unknown demo case {args.case!r}; "
            f"available: {sorted(set(DEMO_CASES) | set(DEMO_ALIASES))}"
        ) from None
    config = RunConfig(
        command="demo",
        out_path=args.out,
        horizon_override=args.horizon,
        window_length=args.window_length or (1 << 9),
        grid_step=args.grid_step,
        gap_threshold=args.gap_threshold,
        seed=args.seed,
        extras={"case": args.case, "resolved_case": name,
                "targets": args.targets},
    )
    settings = DemoSettings(
        seed=config.seed,
        targets=args.targets,
        horizon=args.horizon,
        window_length=args.window_length,
        gap_threshold=args.gap_threshold,
        grid_step=args.grid_step,
    )
    payload = case(settings)
    payload["tool"] = {
        "name": "tvspec",
        "version": __version__,
        "kernel_backend": BACKEND,
    }
    payload["config"] = config.to_dict()
    if args.out:
        write_report(args.out, payload)
    verdict = "PASS" if payload["passed"] else "FAIL"
    _print(f"demo {name}: {verdict}")
    return EXIT_OK if payload["passed"] else EXIT_VERIFICATION


def _horizon_arg(text: str):
    # argparse only turns ValueError/ArgumentTypeError into clean usage
    # errors; InputError would escape parse_args as a traceback.
    try:
        return parse_horizon(text)
    except InputError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tvspec",
        description="Spectra, controllability and spectral assignment for "
                    "discrete time-varying linear systems.",
    )
    parser.add_argument("--version", action="version", version=f"tvspec {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, tolerances=True):
        p.add_argument("--horizon", type=_horizon_arg, default=None,
                       metavar="MIN:MAX", help="override the file horizon")
        p.add_argument("--threads", type=int, default=None,
                       help="cap BLAS/OpenMP parallelism")
        p.add_argument("--out", default=None, help="write a JSON report here")
        if tolerances:
            p.add_argument("--window-length", "-L", type=int, default=None,
                           help="window length (default min(1024, horizon/2))")
            p.add_argument("--gap-threshold", type=float, default=0.01)
            p.add_argument("--grid-step", type=float, default=0.01)

    p = sub.add_parser("spectrum", help="estimate the dichotomy spectrum")
    p.add_argument("--system", required=True)
    p.add_argument("--side", choices=("two-sided", "plus", "minus"),
                   default="two-sided")
    p.add_argument("--method", choices=("gamma-grid", "direct"),
                   default="gamma-grid")
    p.add_argument("--csv", default=None, help="emit window-exponent curves as CSV")
    p.add_argument("--verdicts", action="store_true",
                   help="embed a per-rate verdict table in the report")
    common(p)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("lyapunov", help="forward Lyapunov exponents")
    p.add_argument("--system", required=True)
    p.add_argument("--samples", type=int, default=None)
    common(p, tolerances=False)
    p.set_defaults(func=cmd_lyapunov)

    p = sub.add_parser("ucc", help="certify uniform complete controllability")
    p.add_argument("--system", required=True, help="control-system JSON (A and B)")
    p.add_argument("--max-window", type=int, default=32)
    p.add_argument("--floor", type=float, default=1e-8)
    common(p, tolerances=False)
    p.set_defaults(func=cmd_ucc)

    p = sub.add_parser("assign", help="assign a target spectrum by feedback")
    p.add_argument("--system", required=True, help="control-system JSON (A and B)")
    p.add_argument("--targets", required=True,
                   help='e.g. "[-1,-0.5],[0,0]"')
    p.add_argument("--tolerance", "--tol", type=float, default=0.05)
    p.add_argument("--off-diag-scale", type=float, default=0.0)
    p.add_argument("--off-diag-seed", type=int, default=None)
    p.add_argument("--seed", type=int, default=None,
                   help="retry randomization seed (TVSPEC_SEED overrides)")
    common(p)
    p.set_defaults(func=cmd_assign)

    p = sub.add_parser("verify", help="re-verify a stored assignment")
    p.add_argument("--assignment", required=True)
    p.add_argument("--tolerance", "--tol", type=float, default=0.05)
    p.add_argument("--identity-tol", type=float, default=1e-6,
                   help="allowed relative equivalence-identity residual")
    common(p)
    # Fall back to the estimation parameters stored in the assignment
    # bundle unless they are given explicitly.
    p.set_defaults(func=cmd_verify, gap_threshold=None, grid_step=None)

    p = sub.add_parser("discretize", help="1-time discretization of a continuous system")
    p.add_argument("--continuous", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--method", choices=("auto", "exact", "rk4"), default="auto")
    p.add_argument("--substeps", type=int, default=64)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_discretize)

    p = sub.add_parser("demo", help="run a packaged construction end to end")
    p.add_argument("--case", required=True,
                   choices=sorted(set(DEMO_CASES) | set(DEMO_ALIASES)))
    p.add_argument("--targets", default=None)
    p.add_argument("--seed", type=int, default=None)
    common(p)
    p.set_defaults(func=cmd_demo)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _limit_threads(getattr(args, "threads", None))
    try:
        return args.func(args)
    except TvspecError as exc:
        code = exit_code_for(exc)
        label = {
            EXIT_INPUT: "input error",
            EXIT_NUMERICAL: "numerical/synthesis error",
        }.get(code, "error")
        sys.stderr.write(f"tvspec: {label}: {exc}\n")
        return code


if __name__ == "__main__":
    sys.exit(main())
