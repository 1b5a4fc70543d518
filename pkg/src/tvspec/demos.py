"""Packaged end-to-end constructions, runnable from the CLI as one-liners.

Each case builds seeded inputs, runs the relevant pipeline, and returns
a JSON-ready payload with a boolean ``passed`` verdict, so the demos
double as quick self-checks of the toolkit's main claims:

- dyadic-spectrum: a scalar block sequence realizes a chosen interval.
- symmetric-fill: triangular fills do not move the spectrum.
- triangular-inclusion: block spectra bracket the triangular spectrum.
- assign-end-to-end: feedback assigns a requested spectrum.
- point-spectrum-chain: point targets collapse both spectra to a point.
- continuous-bridge: exact and integrated discretizations agree.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .assignment import (
    TargetSpectrum,
    assign_spectrum,
    build_diagonal_sequences,
)
from .continuous import ContinuousSystem, continuous_spectrum
from .sequences import (
    Horizon,
    MatrixSequence,
    block_triangular,
    constant_sequence,
    diagonal_from_scalars,
    dyadic_scalar_sequence,
    random_bounded_sequence,
    triangular_from_scalars,
)
from .spectrum import bohl_interval, dichotomy_spectrum, lyapunov_spectrum, merge_report

DEMO_HORIZON = Horizon(-(1 << 12), 1 << 12)
DEMO_WINDOW = 1 << 9


class DemoSettings:
    """Resolved knobs shared by all demo cases."""

    def __init__(self, seed=None, targets=None, horizon=None, window_length=None,
                 gap_threshold=0.01, grid_step=0.01):
        self.seed = 0 if seed is None else int(seed)
        self.targets = targets
        self.horizon = Horizon(*horizon) if horizon else DEMO_HORIZON
        self.window_length = window_length or DEMO_WINDOW
        self.gap_threshold = gap_threshold
        self.grid_step = grid_step

    def parse_targets(self, default: str) -> TargetSpectrum:
        from .io import parse_targets

        return parse_targets(self.targets or default)

    def spectrum_kwargs(self) -> dict:
        return {
            "window_length": self.window_length,
            "gap_threshold": self.gap_threshold,
            "grid_step": self.grid_step,
        }


def demo_dyadic_spectrum(s: DemoSettings) -> dict:
    targets = s.parse_targets("[0,1]")
    a, b = targets.intervals[0]
    scalars = dyadic_scalar_sequence(a, b, s.horizon)
    estimate = dichotomy_spectrum(scalars, **s.spectrum_kwargs())
    exact = bohl_interval(scalars, s.window_length)
    err = max(abs(estimate.intervals[0][0] - a), abs(estimate.intervals[0][1] - b))
    width_limit = 2 * s.gap_threshold
    if a == b:
        passed = estimate.intervals[0][1] - estimate.intervals[0][0] <= width_limit
    else:
        passed = len(estimate) == 1 and err <= 2 * s.gap_threshold
    return {
        "case": "dyadic-spectrum",
        "target": [a, b],
        "estimate": estimate.to_dict(),
        "window_average_range": list(exact),
        "endpoint_error": err,
        "passed": bool(passed),
    }


def demo_symmetric_fill(s: DemoSettings) -> dict:
    targets = s.parse_targets("[-1,-0.5],[0,0.5],[1,1.5]")
    diagonal = build_diagonal_sequences(targets, s.horizon, 3)
    scalar_estimates = [
        dichotomy_spectrum(p, **s.spectrum_kwargs()) for p in diagonal.scalars
    ]
    union = merge_report(scalar_estimates)
    runs = []
    passed = True
    for i, scale in enumerate((0.0, 1.0, 2.0)):
        system = triangular_from_scalars(
            diagonal.scalars, fill_seed=s.seed + i, fill_scale=scale
        )
        estimate = dichotomy_spectrum(system, **s.spectrum_kwargs())
        if len(estimate) == len(union):
            err = estimate.endpoint_distance(union)
        else:
            err = float("inf")
        runs.append({"fill_scale": scale, "estimate": estimate.to_dict(),
                     "endpoint_error_vs_union": err})
        passed = passed and err <= 0.05
    return {
        "case": "symmetric-fill",
        "scalar_union": union.to_dict(),
        "runs": runs,
        "passed": bool(passed),
    }


def demo_triangular_inclusion(s: DemoSettings) -> dict:
    rng_seed = s.seed
    top = random_bounded_sequence(1, s.horizon, seed=rng_seed, log_sv_range=(-1.0, -0.2))
    bottom = random_bounded_sequence(2, s.horizon, seed=rng_seed + 1, log_sv_range=(0.1, 0.8))
    system = block_triangular([top, bottom], fill_seed=rng_seed + 2, fill_scale=1.0)
    kw = s.spectrum_kwargs()
    est_full = dichotomy_spectrum(system, **kw)
    est_blocks = [dichotomy_spectrum(blk, **kw) for blk in (top, bottom)]
    union = merge_report(est_blocks)
    inner_ok = all(
        est_full.dilate(0.02).covers(
            dichotomy_spectrum(blk, side=side, **kw)
        )
        for blk in (top, bottom)
        for side in ("plus", "minus")
    )
    outer_ok = union.dilate(0.02).covers(est_full)
    return {
        "case": "triangular-inclusion",
        "triangular": est_full.to_dict(),
        "block_union": union.to_dict(),
        "one_sided_blocks_inside": inner_ok,
        "triangular_inside_union": outer_ok,
        "passed": bool(inner_ok and outer_ok),
    }


def demo_assign_end_to_end(s: DemoSettings) -> dict:
    targets = s.parse_targets("[-1,-0.5],[0,0]")
    A = random_bounded_sequence(2, s.horizon, seed=s.seed + 10, log_sv_range=(-0.5, 0.5))
    B = constant_sequence(np.eye(2), s.horizon)
    result = assign_spectrum(
        A, B, targets, tolerance=0.05, rng_seed=s.seed, **s.spectrum_kwargs()
    )
    return {
        "case": "assign-end-to-end",
        "targets": targets.to_dict(),
        "estimate": result.estimate.to_dict(),
        "certificate": result.certificate.to_dict(),
        "endpoint_error": result.endpoint_error,
        "feedback_sup_norm": result.diagnostics.get("feedback_sup_norm"),
        "passed": bool(result.passed),
    }


def demo_point_spectrum_chain(s: DemoSettings) -> dict:
    targets = s.parse_targets("[0.3,0.3]")
    A = random_bounded_sequence(2, s.horizon, seed=s.seed + 20, log_sv_range=(-0.5, 0.5))
    B = constant_sequence(np.eye(2), s.horizon)
    result = assign_spectrum(
        A, B, targets, tolerance=0.05, rng_seed=s.seed, **s.spectrum_kwargs()
    )
    from .sequences import apply_feedback

    closed = apply_feedback(A, B, result.U)
    exponents = lyapunov_spectrum(closed)
    point = targets.intervals[0][0]
    lyap_ok = bool(np.max(np.abs(exponents - point)) <= 0.05)
    inside_ok = all(
        result.estimate.contains_point(float(x), tol=0.02) for x in exponents
    )
    return {
        "case": "point-spectrum-chain",
        "point": point,
        "estimate": result.estimate.to_dict(),
        "lyapunov_exponents": list(map(float, exponents)),
        "dichotomy_passed": bool(result.passed),
        "lyapunov_within_tolerance": lyap_ok,
        "exponents_inside_estimate": bool(inside_ok),
        "passed": bool(result.passed and lyap_ok and inside_ok),
    }


def demo_continuous_bridge(s: DemoSettings) -> dict:
    horizon = Horizon(max(s.horizon.n_min, -(1 << 10)), min(s.horizon.n_max, 1 << 10))
    window = min(s.window_length, 1 << 8)
    targets = s.parse_targets("[-0.6,-0.2],[0.2,0.7]")
    diagonal = build_diagonal_sequences(targets, horizon, 2)
    discrete = triangular_from_scalars(diagonal.scalars, fill_seed=s.seed, fill_scale=0.5)
    # Continuous embedding: one unit interval per discrete step, with the
    # matrix logarithm of each factor as the constant coefficient.
    stack = discrete.stack()
    table = np.stack([np.real(scipy.linalg.logm(m)) for m in stack[:-1]])
    systemc = ContinuousSystem.piecewise_constant(table, horizon)
    kw = {"window_length": window, "gap_threshold": s.gap_threshold,
          "grid_step": s.grid_step}
    est_exact = continuous_spectrum(systemc, method="exact", **kw)
    est_rk4 = continuous_spectrum(systemc, method="rk4", substeps=64, **kw)
    est_discrete = dichotomy_spectrum(discrete, **kw)
    err_paths = (
        est_exact.endpoint_distance(est_rk4)
        if len(est_exact) == len(est_rk4)
        else float("inf")
    )
    err_embed = (
        est_exact.endpoint_distance(est_discrete)
        if len(est_exact) == len(est_discrete)
        else float("inf")
    )
    passed = err_paths <= 0.02 and err_embed <= 0.02
    return {
        "case": "continuous-bridge",
        "exact": est_exact.to_dict(),
        "integrated": est_rk4.to_dict(),
        "discrete_source": est_discrete.to_dict(),
        "endpoint_error_exact_vs_integrated": err_paths,
        "endpoint_error_exact_vs_source": err_embed,
        "passed": bool(passed),
    }


DEMO_CASES = {
    "dyadic-spectrum": demo_dyadic_spectrum,
    "symmetric-fill": demo_symmetric_fill,
    "triangular-inclusion": demo_triangular_inclusion,
    "assign-end-to-end": demo_assign_end_to_end,
    "point-spectrum-chain": demo_point_spectrum_chain,
    "continuous-bridge": demo_continuous_bridge,
}
