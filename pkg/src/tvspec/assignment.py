"""Spectral assignment by bounded time-varying state feedback.

Given a uniformly completely controllable pair (A, B) and a target list
of rate intervals, the pipeline is:

1. realize each target interval [a_i, b_i] as a positive scalar
   sequence whose window-averaged growth rates sweep exactly [a_i, b_i]
   (dyadic block construction), collected into a triangular target
   system C;
2. split the horizon into controllability windows and choose open-loop
   gains on each window so the controlled window transition equals the
   target window transition exactly; the interior state maps convert
   the gains into a state feedback U and a kinematic transform T with
   (A_n + B_n U_n) T_n = T_{n+1} C_n;
3. estimate the closed-loop spectrum and compare it with the targets.

Each window solve has null-space freedom whenever K * input_dim exceeds
the state dimension; ill-conditioned interior maps are retried with
random null-space perturbations (which leave the window transition
untouched) and, failing that, by merging the window with its neighbor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .controllability import (
    DEFAULT_GRAMIAN_FLOOR,
    DEFAULT_MAX_WINDOW,
    UccCertificate,
    _gramian_and_maps,
    _solve_spd,
    check_ucc,
)
from .errors import InputError, SynthesisError
from .sequences import (
    Horizon,
    MatrixSequence,
    apply_feedback,
    dyadic_scalar_sequence,
    explicit_sequence,
    triangular_from_scalars,
    validate_lyapunov,
)
from .spectrum import (
    DEFAULT_GAP,
    DEFAULT_GRID,
    DEFAULT_WINDOW,
    SpectrumEstimate,
    dichotomy_spectrum,
)

__all__ = [
    "TargetSpectrum",
    "DiagonalTargets",
    "build_diagonal_sequences",
    "assign_window_transition",
    "SynthesisMaps",
    "triangularize_with_feedback",
    "AssignmentResult",
    "assign_spectrum",
]


@dataclass(frozen=True)
class TargetSpectrum:
    """A requested spectrum: disjoint closed rate intervals, ascending."""

    intervals: tuple[tuple[float, float], ...]

    def __post_init__(self):
        clean = tuple((float(a), float(b)) for a, b in self.intervals)
        if not clean:
            raise InputError("target spectrum needs at least one interval")
        prev_hi = -math.inf
        for a, b in clean:
            if not (math.isfinite(a) and math.isfinite(b)):
                raise InputError("target endpoints must be finite")
            if a > b:
                raise InputError(f"malformed target interval [{a}, {b}]")
            if a <= prev_hi:
                raise InputError("target intervals must be disjoint and ascending")
            prev_hi = b
        object.__setattr__(self, "intervals", clean)

    def __len__(self) -> int:
        return len(self.intervals)

    def __iter__(self) -> Iterator[tuple[float, float]]:
        return iter(self.intervals)

    def to_dict(self) -> dict:
        return {"intervals": [list(iv) for iv in self.intervals]}


@dataclass(frozen=True)
class DiagonalTargets:
    """Scalar realizations of the target intervals, one per state row.

    Rows beyond the number of target intervals reuse the first scalar
    sequence, so the realized spectrum is exactly the requested union.
    Every sequence is positive and symmetric (p_n = p_{-n}).
    """

    scalars: tuple[MatrixSequence, ...]
    targets: TargetSpectrum
    horizon: Horizon

    @property
    def dim(self) -> int:
        return len(self.scalars)


def build_diagonal_sequences(
    targets: TargetSpectrum, horizon: Horizon, dim: int
) -> DiagonalTargets:
    """Realize target intervals as dyadic scalar sequences, one per row."""
    if not horizon.is_symmetric:
        raise InputError(
            f"diagonal targets need a horizon symmetric about 0, got {horizon}"
        )
    if len(targets) > dim:
        raise InputError(
            f"{len(targets)} target intervals exceed state dimension {dim}"
        )
    scalars = [
        dyadic_scalar_sequence(a, b, horizon) for a, b in targets.intervals
    ]
    scalars.extend(scalars[0] for _ in range(dim - len(targets)))
    return DiagonalTargets(tuple(scalars), targets, horizon)


def _condition(mat: np.ndarray) -> float:
    sv = np.linalg.svd(mat, compute_uv=False)
    if sv[-1] == 0.0:
        return math.inf
    return float(sv[0] / sv[-1])


def _state_maps(a: np.ndarray, b: np.ndarray, gains: np.ndarray) -> np.ndarray:
    K, d = gains.shape[0], a.shape[1]
    maps = np.empty((K + 1, d, d))
    maps[0] = np.eye(d)
    for t in range(K):
        maps[t + 1] = a[t] @ maps[t] + b[t] @ gains[t]
    return maps


def assign_window_transition(
    A: MatrixSequence,
    B: MatrixSequence,
    k0: int,
    target_partials: np.ndarray,
    rng: np.random.Generator | None = None,
    max_retries: int = 4,
    cond_threshold: float = 1e8,
) -> tuple[np.ndarray, np.ndarray]:
    """Choose gains making one window transition match a target exactly.

    ``target_partials`` holds the partial target transitions P_0 = I,
    ..., P_K = D of the window [k0, k0+K).  Returns open-loop gains F
    (K, input_dim, dim) acting on the window-entry state and the
    resulting interior state maps L (K+1, dim, dim) with L_K = D.  The
    maps are accepted when every L_t P_t^{-1} is invertible with
    condition number below ``cond_threshold``; otherwise the gains are
    re-randomized inside the null space of the window reachability
    operator, which preserves L_K = D exactly.
    """
    target_partials = np.asarray(target_partials, dtype=np.float64)
    K = target_partials.shape[0] - 1
    if K < 1:
        raise InputError("window must contain at least one step")
    d, s = A.rows, B.cols
    off = k0 - A.horizon.n_min
    a = A.stack()[off:off + K]
    b = B.stack()[off:off + K]
    gram, maps = _gramian_and_maps(A, B, k0, K)
    free_transition = np.eye(d)
    for t in range(K):
        free_transition = a[t] @ free_transition
    target = target_partials[K]

    lam = _solve_spd(gram, target - free_transition, k0)
    gains = np.einsum("tij,ik->tjk", maps, lam)
    state_maps = _state_maps(a, b, gains)
    # One refinement pass keeps the endpoint identity at rounding level.
    lam = _solve_spd(gram, target - state_maps[K], k0)
    gains = gains + np.einsum("tij,ik->tjk", maps, lam)
    state_maps = _state_maps(a, b, gains)

    null_basis = None
    for attempt in range(max_retries + 1):
        conds = [
            _condition(np.linalg.solve(target_partials[t].T, state_maps[t].T).T)
            for t in range(K + 1)
        ]
        if max(conds) <= cond_threshold:
            return gains, state_maps
        if attempt == max_retries:
            break
        if null_basis is None:
            reach = maps.transpose(1, 0, 2).reshape(d, K * s)
            _, sv, vt = np.linalg.svd(reach)
            rank = int(np.sum(sv > sv[0] * 1e-12)) if sv.size else 0
            null_basis = vt[rank:].T  # (K*s, q)
            if null_basis.shape[1] == 0:
                raise SynthesisError(
                    k0,
                    "no gain freedom left to regularize interior state maps "
                    f"(window length {K}, input dim {s})",
                )
        if rng is None:
            rng = np.random.default_rng(0)
        coeffs = rng.standard_normal((null_basis.shape[1], d))
        z = (null_basis @ coeffs).reshape(K, s, d)
        scale = 0.5**attempt * max(float(np.max(np.abs(gains))), 1.0)
        z_peak = float(np.max(np.abs(z)))
        if z_peak > 0.0:
            z *= scale / z_peak
        gains = gains + z
        state_maps = _state_maps(a, b, gains)
    raise SynthesisError(
        k0,
        f"interior state maps stayed ill-conditioned after {max_retries} "
        f"null-space retries (worst condition {max(conds):.2e})",
    )


@dataclass(frozen=True)
class SynthesisMaps:
    """Feedback and equivalence data produced by the triangularization."""

    U: MatrixSequence
    C: MatrixSequence
    T: MatrixSequence
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __iter__(self):
        return iter((self.U, self.C, self.T))


def triangularize_with_feedback(
    A: MatrixSequence,
    B: MatrixSequence,
    diagonal: DiagonalTargets,
    certificate: UccCertificate | None = None,
    off_diag_scale: float = 0.0,
    off_diag_seed: int | None = None,
    cond_threshold: float = 1e8,
    max_retries: int = 4,
    rng_seed: int = 0,
) -> SynthesisMaps:
    """Build feedback U with closed loop kinematically equal to a target C.

    C is (block) triangular with the realized target scalars on its
    diagonal (optionally with bounded seeded strictly-upper fill).  The
    horizon is split into certificate-length windows — the last window
    absorbs the remainder — and on each window the controlled transition
    is matched to the target transition exactly.  Windows whose interior
    maps cannot be regularized are merged with the following window and
    retried.  Returns U, C and the transform T with
    (A_n + B_n U_n) T_n = T_{n+1} C_n on the whole horizon.
    """
    if diagonal.horizon != A.horizon:
        raise InputError(
            f"target horizon {diagonal.horizon} differs from system horizon {A.horizon}"
        )
    if diagonal.dim != A.rows:
        raise InputError(
            f"{diagonal.dim} target rows for state dimension {A.rows}"
        )
    if certificate is None:
        certificate = check_ucc(A, B)
    if not certificate.ok:
        raise SynthesisError(
            None,
            "system is not uniformly completely controllable up to window "
            f"length {certificate.max_window}; cannot assign a spectrum",
        )
    target = triangular_from_scalars(
        diagonal.scalars, fill_seed=off_diag_seed, fill_scale=off_diag_scale
    )
    h = A.horizon
    n_pts = len(h)
    K = certificate.K
    if n_pts < K:
        raise InputError(
            f"horizon {h} is shorter than the certified window length {K}"
        )

    starts = list(range(h.n_min, h.n_max + 1, K))
    if len(starts) > 1 and (h.n_max + 1 - starts[-1]) < K:
        starts.pop()  # last window absorbs the remainder

    c_stack = target.stack()
    u_parts: list[np.ndarray] = []
    t_parts: list[np.ndarray] = []
    merges = 0
    worst_cond = 1.0
    idx = 0
    while idx < len(starts):
        w = starts[idx]
        w_end = starts[idx + 1] if idx + 1 < len(starts) else h.n_max + 1
        while True:
            kw = w_end - w
            off = w - h.n_min
            partials = np.empty((kw + 1, A.rows, A.rows))
            partials[0] = np.eye(A.rows)
            for t in range(kw):
                partials[t + 1] = c_stack[off + t] @ partials[t]
            rng = np.random.default_rng([abs(int(rng_seed)), off])
            try:
                gains, state_maps = assign_window_transition(
                    A,
                    B,
                    w,
                    partials,
                    rng=rng,
                    max_retries=max_retries,
                    cond_threshold=cond_threshold,
                )
                break
            except SynthesisError:
                if idx + 1 >= len(starts):
                    raise
                idx += 1
                merges += 1
                w_end = starts[idx + 1] if idx + 1 < len(starts) else h.n_max + 1
        for t in range(kw):
            u_parts.append(np.linalg.solve(state_maps[t].T, gains[t].T).T)
            transform = np.linalg.solve(partials[t].T, state_maps[t].T).T
            t_parts.append(transform)
            worst_cond = max(worst_cond, _condition(transform))
        idx += 1
    t_parts.append(np.eye(A.rows))  # T at n_max + 1: window transitions match exactly

    feedback = explicit_sequence(np.array(u_parts), h)
    transform = explicit_sequence(
        np.array(t_parts), Horizon(h.n_min, h.n_max + 1)
    )
    diagnostics = {
        "window_length": K,
        "num_windows": len(starts),
        "merged_windows": merges,
        "worst_transform_condition": worst_cond,
        "feedback_sup_norm": feedback.sup_norm(),
        "transform_sup_norm": transform.sup_norm(),
        "off_diag_scale": off_diag_scale,
    }
    return SynthesisMaps(feedback, target, transform, diagnostics)


@dataclass(frozen=True)
class AssignmentResult:
    """Outcome of the full assignment pipeline with verification."""

    U: MatrixSequence
    C: MatrixSequence
    T: MatrixSequence
    certificate: UccCertificate
    targets: TargetSpectrum
    estimate: SpectrumEstimate
    tolerance: float
    passed: bool
    endpoint_error: float
    diagnostics: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        return {
            "targets": self.targets.to_dict(),
            "certificate": self.certificate.to_dict(),
            "estimate": self.estimate.to_dict(),
            "tolerance": self.tolerance,
            "passed": self.passed,
            "endpoint_error": self.endpoint_error,
            "diagnostics": self.diagnostics,
        }


def verify_against_targets(
    estimate: SpectrumEstimate, targets: TargetSpectrum, tolerance: float
) -> tuple[bool, float]:
    """Endpointwise comparison of an estimated spectrum with its targets."""
    if len(estimate) != len(targets):
        return False, math.inf
    est = estimate.endpoints
    want = np.array(targets.intervals).reshape(-1)
    err = float(np.max(np.abs(est - want)))
    return err <= tolerance, err


def assign_spectrum(
    A: MatrixSequence,
    B: MatrixSequence,
    targets: TargetSpectrum | Sequence[tuple[float, float]],
    tolerance: float = 0.05,
    window_length: int = DEFAULT_WINDOW,
    gap_threshold: float = DEFAULT_GAP,
    grid_step: float = DEFAULT_GRID,
    off_diag_scale: float = 0.0,
    off_diag_seed: int | None = None,
    max_window: int = DEFAULT_MAX_WINDOW,
    gramian_floor: float = DEFAULT_GRAMIAN_FLOOR,
    cond_threshold: float = 1e8,
    rng_seed: int = 0,
) -> AssignmentResult:
    """Assign a target spectrum by feedback and verify the closed loop.

    Runs the full pipeline: controllability certification, dyadic
    realization of the targets, windowed feedback synthesis, and a
    dichotomy-spectrum estimate of the closed loop compared endpointwise
    with the requested intervals.
    """
    if not isinstance(targets, TargetSpectrum):
        targets = TargetSpectrum(tuple(targets))
    certificate = check_ucc(A, B, max_window=max_window, floor=gramian_floor)
    if not certificate.ok:
        raise SynthesisError(
            None,
            "system is not uniformly completely controllable up to window "
            f"length {max_window} (smallest Gramian eigenvalue "
            f"{certificate.min_gramian_eig:.3e} < floor {certificate.floor:g})",
        )
    diagonal = build_diagonal_sequences(targets, A.horizon, A.rows)
    maps = triangularize_with_feedback(
        A,
        B,
        diagonal,
        certificate=certificate,
        off_diag_scale=off_diag_scale,
        off_diag_seed=off_diag_seed,
        cond_threshold=cond_threshold,
        rng_seed=rng_seed,
    )
    closed = apply_feedback(A, B, maps.U)
    closed_validation = validate_lyapunov(closed)
    estimate = dichotomy_spectrum(
        closed,
        side="two-sided",
        window_length=window_length,
        gap_threshold=gap_threshold,
        grid_step=grid_step,
    )
    passed, err = verify_against_targets(estimate, targets, tolerance)
    diagnostics = dict(maps.diagnostics)
    diagnostics["closed_loop_lyapunov_ok"] = closed_validation.ok
    diagnostics["closed_loop_sup_norm"] = closed_validation.norm_bound
    return AssignmentResult(
        U=maps.U,
        C=maps.C,
        T=maps.T,
        certificate=certificate,
        targets=targets,
        estimate=estimate,
        tolerance=tolerance,
        passed=passed,
        endpoint_error=err,
        diagnostics=diagnostics,
    )
