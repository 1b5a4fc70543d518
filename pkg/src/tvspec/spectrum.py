"""Finite-horizon exponential-dichotomy and Lyapunov spectrum estimation.

The central object is the :class:`WindowExponentTable`: for a window
length L it tabulates, for every admissible window start n, the sorted
exponents

    mu_i(n) = (1/L) log sigma_i(transition(n + L, n)),

computed overflow-free through a sequential orthogonal triangular
reduction of the factor sequence (window sums of per-step log
diagonals).  Orthogonal reductions preserve the singular values of
every window transition, so for triangular systems with positive
diagonals — and for every scalar system — the tabulated exponents are
exact; in general they are the standard one-sided surrogate whose
window averages converge to the same spectral intervals.

A rate gamma admits an exponential dichotomy on the sampled horizon
exactly when some split index r separates the exponent curves:
mu_r(n) > gamma + gap and mu_{r+1}(n) < gamma - gap for all n.  The
estimated spectrum is the closure of the gamma that fail this test.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator

import math

import numpy as np

from . import kernels
from .errors import InputError, SingularMatrixError
from .sequences import Horizon, MatrixSequence

__all__ = [
    "WindowExponentTable",
    "window_exponents",
    "EDVerdict",
    "ed_test",
    "SpectrumEstimate",
    "dichotomy_spectrum",
    "bohl_interval",
    "lyapunov_spectrum",
    "merge_report",
]

SIDES = ("two-sided", "plus", "minus")

DEFAULT_WINDOW = 1 << 10
DEFAULT_GAP = 0.01
DEFAULT_GRID = 0.01

# A collapsed column during the orthogonal reduction is reported as -inf
# by the numpy kernel and as a large negative sentinel by the compiled
# one; anything at or below this floor means a singular factor.
_SINGULAR_FLOOR = -1e307


def _check_side(side: str) -> str:
    if side not in SIDES:
        raise InputError(f"side must be one of {SIDES}, got {side!r}")
    return side


def _merge_intervals(
    intervals: Iterable[tuple[float, float]], gap: float = 0.0
) -> list[tuple[float, float]]:
    """Union of closed intervals, also fusing gaps smaller than ``gap``."""
    ordered = sorted((float(lo), float(hi)) for lo, hi in intervals)
    merged: list[tuple[float, float]] = []
    for lo, hi in ordered:
        if merged and lo <= merged[-1][1] + gap:
            prev_lo, prev_hi = merged[-1]
            merged[-1] = (prev_lo, max(prev_hi, hi))
        else:
            merged.append((lo, hi))
    return merged


def _signed_distance(x: float, merged: list[tuple[float, float]]) -> float:
    """Distance of x to a merged interval union: negative inside."""
    inside = -math.inf
    outside = math.inf
    for lo, hi in merged:
        if lo <= x <= hi:
            inside = max(inside, -min(x - lo, hi - x))
        else:
            outside = min(outside, lo - x if x < lo else x - hi)
    if inside > -math.inf:
        return inside
    return outside


def _initial_flag(steps: np.ndarray, window_length: int) -> np.ndarray | None:
    """Starting orthogonal frame for the reduction scan.

    For exactly upper-triangular factor sequences the identity start is
    the right choice: the reduction then reproduces the diagonal of every
    window transition without error.  For dense sequences an identity
    start can sit on an invariant subspace of the flow (e.g. closed loops
    whose conjugating transform is the identity at the horizon start), and
    the scan then spends an alignment transient of up to ~37/L in exponent
    units — machine precision crossed at the spectral-gap rate — that
    contaminates the earliest window rows.  Pre-aligning with the right
    singular flag of the first window transition makes the first window
    sums exactly its singular-value exponents and removes the transient.
    """
    lower = np.tril_indices(steps.shape[1], k=-1)
    if not steps[(slice(None),) + lower].any():
        return None
    first, _ = kernels.renorm_product(steps[:window_length])
    return np.linalg.svd(first)[2].T


class WindowExponentTable:
    """Sorted sliding-window singular-value exponents of a sequence."""

    def __init__(self, system: MatrixSequence, window_length: int):
        if system.rows != system.cols:
            raise InputError("window exponents need a square sequence")
        window_length = int(window_length)
        n_steps = len(system.horizon) - 1
        if window_length < 1:
            raise InputError("window length must be >= 1")
        if 2 * window_length > len(system.horizon):
            raise InputError(
                f"window length {window_length} too long for horizon "
                f"{system.horizon} (need at least 2 windows of slack)"
            )
        self.system = system
        self.window_length = window_length
        self.horizon = system.horizon
        self.dim = system.rows

        steps = system.stack()[1:]
        logdiag = kernels.qr_logdiag_scan(steps, _initial_flag(steps, window_length))
        bad = ~(logdiag > _SINGULAR_FLOOR)
        if bad.any():
            offset = int(np.argwhere(bad.any(axis=1))[0, 0])
            raise SingularMatrixError(
                system.horizon.n_min + 1 + offset,
                "factor is singular to working precision; window exponents undefined",
            )
        self.per_step = logdiag  # (n_steps, dim), unsorted reduction order
        prefix = np.zeros((n_steps + 1, self.dim))
        np.cumsum(logdiag, axis=0, out=prefix[1:])
        mu = (prefix[window_length:] - prefix[:-window_length]) / window_length
        mu.sort(axis=1)
        self.mu = mu[:, ::-1]  # sorted descending per window
        self.starts = np.arange(
            self.horizon.n_min, self.horizon.n_max - window_length + 1
        )
        self._sorted_steps: np.ndarray | None = None

    def side_mask(self, side: str) -> np.ndarray:
        _check_side(side)
        if side == "plus":
            mask = self.starts >= 0
        elif side == "minus":
            mask = self.starts + self.window_length <= 0
        else:
            mask = np.ones_like(self.starts, dtype=bool)
        if not mask.any():
            raise InputError(
                f"no complete windows of length {self.window_length} on side "
                f"{side!r} within horizon {self.horizon}"
            )
        return mask

    def curve_ranges(self, side: str = "two-sided") -> np.ndarray:
        """(dim, 2) array of [min, max] of each sorted exponent curve."""
        rows = self.mu[self.side_mask(side)]
        return np.stack([rows.min(axis=0), rows.max(axis=0)], axis=1)

    def _sorted_per_step(self) -> np.ndarray:
        if self._sorted_steps is None:
            srt = np.sort(self.per_step, axis=1)
            self._sorted_steps = srt[:, ::-1]
        return self._sorted_steps

    def _step_slice(self, side: str) -> slice:
        starts = self.starts[self.side_mask(side)]
        lo = int(starts[0] - self.horizon.n_min)
        hi = int(starts[-1] - self.horizon.n_min + self.window_length)
        return slice(lo, hi)


def window_exponents(system: MatrixSequence, window_length: int = DEFAULT_WINDOW) -> WindowExponentTable:
    """Tabulate sorted window exponents for all admissible starts."""
    return WindowExponentTable(system, window_length)


@dataclass(frozen=True)
class EDVerdict:
    """Outcome of the finite-horizon exponential-dichotomy test at one rate."""

    gamma: float
    has_ed: bool
    projector_rank: int
    fitted_alpha: float
    fitted_K: float
    margin: float
    side: str
    gap_threshold: float
    window_length: int

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "has_ed": self.has_ed,
            "projector_rank": self.projector_rank,
            "fitted_alpha": self.fitted_alpha,
            "fitted_K": self.fitted_K,
            "margin": self.margin,
            "side": self.side,
            "gap_threshold": self.gap_threshold,
            "window_length": self.window_length,
        }


def _fitted_transient(
    table: WindowExponentTable, gamma: float, alpha: float, split: int, side: str
) -> float:
    """Worst excursion of cumulative log growth beyond the certified rates.

    Returns the smallest K >= 1 such that partial products along the
    per-step surrogate curves respect K * exp(+/-(gamma -/+ alpha) k).
    """
    steps = table._sorted_per_step()[table._step_slice(side)]
    worst = 0.0
    for col in range(table.dim):
        if col < split:
            excess = (gamma + alpha) - steps[:, col]  # unstable side, growth lower bound
        else:
            excess = steps[:, col] - (gamma - alpha)  # stable side, decay upper bound
        walk = np.concatenate(([0.0], np.cumsum(excess)))
        drawup = float(np.max(walk - np.minimum.accumulate(walk)))
        worst = max(worst, drawup)
    return float(np.exp(min(worst, 690.0)))


def ed_test(
    system: MatrixSequence | WindowExponentTable,
    gamma: float,
    window_length: int = DEFAULT_WINDOW,
    gap_threshold: float = DEFAULT_GAP,
    side: str = "two-sided",
) -> EDVerdict:
    """Test whether the rate ``gamma`` admits an exponential dichotomy.

    The shifted system exp(-gamma) M has a dichotomy on the sampled
    windows exactly when the sorted exponent curves avoid the band
    [gamma - gap, gamma + gap] with a consistent split index.
    """
    _check_side(side)
    if isinstance(system, WindowExponentTable):
        table = system
    else:
        table = window_exponents(system, window_length)
    gamma = float(gamma)
    if gap_threshold <= 0:
        raise InputError("gap_threshold must be positive")
    ranges = table.curve_ranges(side)
    merged = _merge_intervals(map(tuple, ranges))
    sd = _signed_distance(gamma, merged)
    has_ed = sd > gap_threshold
    split = int(np.sum(ranges[:, 0] > gamma))
    fitted_alpha = max(sd, 0.0)
    if has_ed:
        fitted_k = _fitted_transient(table, gamma, fitted_alpha, split, side)
    else:
        fitted_k = math.inf
    return EDVerdict(
        gamma=gamma,
        has_ed=has_ed,
        projector_rank=table.dim - split,
        fitted_alpha=fitted_alpha,
        fitted_K=fitted_k,
        margin=sd - gap_threshold,
        side=side,
        gap_threshold=gap_threshold,
        window_length=table.window_length,
    )


@dataclass(frozen=True)
class SpectrumEstimate:
    """A finite union of closed rate intervals with provenance."""

    intervals: tuple[tuple[float, float], ...]
    side: str = "two-sided"
    window_length: int | None = None
    horizon: Horizon | None = None
    method: str = "gamma-grid"
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        clean = tuple(
            (float(lo), float(hi)) for lo, hi in self.intervals
        )
        if not clean:
            raise InputError("a spectrum estimate needs at least one interval")
        prev_hi = -math.inf
        for lo, hi in clean:
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise InputError("spectrum endpoints must be finite")
            if lo > hi:
                raise InputError(f"malformed interval [{lo}, {hi}]")
            if lo < prev_hi:
                raise InputError("spectrum intervals must be disjoint and sorted")
            prev_hi = hi
        object.__setattr__(self, "intervals", clean)
        # "union" marks a merge of estimates computed on different sides.
        if self.side != "union":
            _check_side(self.side)

    def __iter__(self) -> Iterator[tuple[float, float]]:
        return iter(self.intervals)

    def __len__(self) -> int:
        return len(self.intervals)

    @property
    def endpoints(self) -> np.ndarray:
        return np.array(self.intervals).reshape(-1)

    def dilate(self, eps: float) -> "SpectrumEstimate":
        """Widen every interval by eps on both sides (merging overlaps)."""
        widened = _merge_intervals((lo - eps, hi + eps) for lo, hi in self.intervals)
        return SpectrumEstimate(
            tuple(widened),
            side=self.side,
            window_length=self.window_length,
            horizon=self.horizon,
            method=self.method,
            diagnostics=dict(self.diagnostics),
        )

    def contains_point(self, x: float, tol: float = 0.0) -> bool:
        return any(lo - tol <= x <= hi + tol for lo, hi in self.intervals)

    def covers(self, other: "SpectrumEstimate", tol: float = 0.0) -> bool:
        """True if every interval of ``other`` lies inside this union dilated by tol."""
        mine = _merge_intervals((lo - tol, hi + tol) for lo, hi in self.intervals)
        return all(
            any(mlo <= lo and hi <= mhi for mlo, mhi in mine)
            for lo, hi in other.intervals
        )

    def endpoint_distance(self, other: "SpectrumEstimate") -> float:
        """Max absolute endpoint difference; requires equal interval counts."""
        if len(self) != len(other):
            raise InputError(
                f"interval counts differ ({len(self)} vs {len(other)}); "
                "endpoint comparison undefined"
            )
        return float(np.max(np.abs(self.endpoints - other.endpoints)))

    def to_dict(self) -> dict:
        return {
            "intervals": [list(iv) for iv in self.intervals],
            "side": self.side,
            "window_length": self.window_length,
            "horizon": self.horizon.to_dict() if self.horizon else None,
            "method": self.method,
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SpectrumEstimate":
        return cls(
            tuple((float(lo), float(hi)) for lo, hi in data["intervals"]),
            side=data.get("side", "two-sided"),
            window_length=data.get("window_length"),
            horizon=Horizon.from_dict(data["horizon"]) if data.get("horizon") else None,
            method=data.get("method", "gamma-grid"),
            diagnostics=data.get("diagnostics", {}),
        )


def _cap_interval_count(intervals: list[tuple[float, float]], cap: int) -> list[tuple[float, float]]:
    ivs = list(intervals)
    while len(ivs) > cap:
        gaps = [ivs[i + 1][0] - ivs[i][1] for i in range(len(ivs) - 1)]
        i = int(np.argmin(gaps))
        ivs[i:i + 2] = [(ivs[i][0], ivs[i + 1][1])]
    return ivs


def _bisect_to_failure(
    passing: float, failing: float, merged: list[tuple[float, float]], tol: float
) -> float:
    """Shrink [passing, failing] (in either orientation) to width tol.

    Returns the certified-failing endpoint, so reported intervals never
    claim more spectrum than the test exhibits.
    """
    while abs(failing - passing) > tol:
        mid = 0.5 * (passing + failing)
        if _signed_distance(mid, merged) < 0:
            failing = mid
        else:
            passing = mid
    return failing


def dichotomy_spectrum(
    system: MatrixSequence | WindowExponentTable,
    side: str = "two-sided",
    window_length: int = DEFAULT_WINDOW,
    gap_threshold: float = DEFAULT_GAP,
    grid_step: float = DEFAULT_GRID,
    method: str = "gamma-grid",
) -> SpectrumEstimate:
    """Estimate the dichotomy spectrum as a union of rate intervals.

    ``gamma-grid`` sweeps a uniform rate grid over the observed exponent
    range (padded so the failure set cannot be clipped), detects runs of
    failing rates, and refines each run endpoint by bisection to
    ``grid_step / 8``, always reporting the certified-failing side.
    ``direct`` skips the sweep and returns the merged exponent-curve
    ranges dilated by the gap threshold, which the sweep converges to.
    """
    _check_side(side)
    if isinstance(system, WindowExponentTable):
        table = system
    else:
        table = window_exponents(system, window_length)
    if gap_threshold <= 0 or grid_step <= 0:
        raise InputError("gap_threshold and grid_step must be positive")
    ranges = table.curve_ranges(side)
    failure = _merge_intervals(
        (lo - gap_threshold, hi + gap_threshold) for lo, hi in ranges
    )
    diagnostics = {
        "gap_threshold": gap_threshold,
        "grid_step": grid_step,
        "num_windows": int(table.side_mask(side).sum()),
        "dim": table.dim,
        "curve_ranges": [list(map(float, r)) for r in ranges],
    }
    if method == "direct":
        intervals = _cap_interval_count(failure, table.dim)
        label = "bohl-exact-scalar" if table.dim == 1 else "windowed-svd"
        return SpectrumEstimate(
            tuple(intervals),
            side=side,
            window_length=table.window_length,
            horizon=table.horizon,
            method=label,
            diagnostics=diagnostics,
        )
    if method != "gamma-grid":
        raise InputError(f"unknown spectrum method {method!r}")

    pad = gap_threshold + grid_step
    g_lo = float(ranges[:, 0].min()) - pad
    g_hi = float(ranges[:, 1].max()) + pad
    count = int(math.ceil((g_hi - g_lo) / grid_step)) + 1
    grid = g_lo + grid_step * np.arange(count + 1)
    inside = np.array([_signed_distance(g, failure) < 0 for g in grid])
    tol = grid_step / 8.0

    intervals: list[tuple[float, float]] = []
    idx = 0
    while idx < len(grid):
        if not inside[idx]:
            idx += 1
            continue
        run_start = idx
        while idx + 1 < len(grid) and inside[idx + 1]:
            idx += 1
        run_end = idx
        lo = _bisect_to_failure(grid[run_start] - grid_step, grid[run_start], failure, tol)
        hi = _bisect_to_failure(grid[run_end] + grid_step, grid[run_end], failure, tol)
        intervals.append((float(lo), float(hi)))
        idx += 1
    intervals = _merge_intervals(intervals, gap=grid_step)
    intervals = _cap_interval_count(intervals, table.dim)
    diagnostics["grid_points"] = int(count + 1)
    return SpectrumEstimate(
        tuple(intervals),
        side=side,
        window_length=table.window_length,
        horizon=table.horizon,
        method="gamma-grid",
        diagnostics=diagnostics,
    )


def bohl_interval(
    scalars: MatrixSequence,
    window_length: int = DEFAULT_WINDOW,
    side: str = "two-sided",
) -> tuple[float, float]:
    """Exact window-averaged growth-rate interval of a scalar sequence.

    Returns (min, max) over admissible window starts of the average of
    log |p_n| over the window; for scalar systems these are exactly the
    extreme finite-horizon Bohl exponents.
    """
    if (scalars.rows, scalars.cols) != (1, 1):
        raise InputError("bohl_interval is defined for scalar sequences")
    table = window_exponents(scalars, window_length)
    rows = table.mu[table.side_mask(side), 0]
    return float(rows.min()), float(rows.max())


def lyapunov_spectrum(system: MatrixSequence, n_samples: int | None = None) -> np.ndarray:
    """Forward Lyapunov exponents from time 0, sorted descending.

    Propagates the orthogonal reduction from 0 through ``n_samples``
    steps (default: to the top of the horizon) and averages the log
    diagonals.  Exact in the triangular/scalar cases; the standard
    finite-time estimator otherwise.
    """
    if system.rows != system.cols:
        raise InputError("lyapunov_spectrum needs a square sequence")
    horizon = system.horizon
    if 0 not in horizon or horizon.n_max < 1:
        raise InputError(
            f"horizon {horizon} must contain [0, 1] for forward exponents"
        )
    n = int(n_samples) if n_samples is not None else horizon.n_max
    if not 1 <= n <= horizon.n_max:
        raise InputError(
            f"n_samples must lie in [1, {horizon.n_max}], got {n}"
        )
    first = horizon.offset(1) - 1  # step index of the factor mapping 0 -> 1
    steps = system.stack()[1:][first:first + n]
    logdiag = kernels.qr_logdiag_scan(steps)
    bad = ~(logdiag > _SINGULAR_FLOOR)
    if bad.any():
        offset = int(np.argwhere(bad.any(axis=1))[0, 0])
        raise SingularMatrixError(
            1 + offset, "singular factor; Lyapunov exponents undefined"
        )
    exponents = logdiag.mean(axis=0)
    exponents[::-1].sort()
    return exponents


def merge_report(
    estimates: Iterable[SpectrumEstimate], min_gap: float = 0.0
) -> SpectrumEstimate:
    """Merge several spectrum estimates into one interval union.

    Intervals that overlap or sit closer than ``min_gap`` are fused.
    The result carries side "union" unless all inputs agree.
    """
    estimates = list(estimates)
    if not estimates:
        raise InputError("merge_report needs at least one estimate")
    intervals = _merge_intervals(
        (iv for est in estimates for iv in est.intervals), gap=min_gap
    )
    sides = {est.side for est in estimates}
    lengths = {est.window_length for est in estimates if est.window_length}
    horizons = [est.horizon for est in estimates if est.horizon is not None]
    hull = None
    if horizons:
        hull = Horizon(
            min(h.n_min for h in horizons), max(h.n_max for h in horizons)
        )
    return SpectrumEstimate(
        tuple(intervals),
        side=sides.pop() if len(sides) == 1 else "union",
        window_length=max(lengths) if lengths else None,
        horizon=hull,
        method="merge",
        diagnostics={"sources": [est.method for est in estimates], "min_gap": min_gap},
    )
