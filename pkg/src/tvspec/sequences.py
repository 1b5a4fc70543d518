"""Time-varying matrix sequences over finite integer horizons.

A :class:`MatrixSequence` is a deterministic, immutable provider of d x d
(or d x s) real matrices indexed by integers n in a finite
:class:`Horizon`.  Sequences are materialized lazily into a single
read-only numpy stack, which every numerical routine in the package
consumes directly.  Two evaluations at the same index are therefore
bit-identical, and concurrent reads are safe (duplicate materialization
is idempotent).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import HorizonError, InputError, SingularMatrixError

__all__ = [
    "Horizon",
    "MatrixSequence",
    "LyapunovValidation",
    "validate_lyapunov",
    "apply_feedback",
    "kinematic_conjugate",
    "shift",
    "constant_sequence",
    "explicit_sequence",
    "from_function",
    "periodic_sequence",
    "dyadic_scalar_sequence",
    "diagonal_from_scalars",
    "triangular_from_scalars",
    "block_triangular",
    "random_bounded_sequence",
    "random_input_sequence",
    "rotation_sequence",
]

DEFAULT_HORIZON_RADIUS = 2**14
DEFAULT_SV_FLOOR = 1e-9


@dataclass(frozen=True, order=True)
class Horizon:
    """Closed integer index range [n_min, n_max] with n_min < n_max."""

    n_min: int
    n_max: int

    def __post_init__(self):
        if self.n_min >= self.n_max:
            raise InputError(f"horizon needs n_min < n_max, got [{self.n_min}, {self.n_max}]")

    def __len__(self) -> int:
        return self.n_max - self.n_min + 1

    def __contains__(self, n: int) -> bool:
        return self.n_min <= n <= self.n_max

    def offset(self, n: int) -> int:
        """Array offset of index n; raises HorizonError outside the range."""
        if n not in self:
            raise HorizonError(f"index {n} outside horizon [{self.n_min}, {self.n_max}]")
        return n - self.n_min

    @property
    def is_symmetric(self) -> bool:
        return self.n_min == -self.n_max

    def to_dict(self) -> dict:
        return {"min": self.n_min, "max": self.n_max}

    @classmethod
    def default(cls) -> "Horizon":
        return cls(-DEFAULT_HORIZON_RADIUS, DEFAULT_HORIZON_RADIUS)

    @classmethod
    def from_dict(cls, d) -> "Horizon":
        try:
            return cls(int(d["min"]), int(d["max"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"bad horizon spec {d!r}") from exc


class MatrixSequence:
    """Finite-horizon sequence of real matrices with one-shot materialization.

    Parameters
    ----------
    rows, cols : int
        Matrix shape at every index.
    horizon : Horizon
        Valid index range.
    kind : str
        Generator label, carried into reports.
    materializer : callable
        Zero-argument callable returning the full (len(horizon), rows, cols)
        float64 stack.  Must be a pure function of the constructor inputs.
    seed : int, optional
        Seed recorded for provenance (generators that draw randomness
        derive their streams from it).
    """

    def __init__(self, rows, cols, horizon, kind, materializer, seed=None):
        if rows < 1 or cols < 1:
            raise InputError(f"matrix shape {rows}x{cols} invalid")
        self.rows = int(rows)
        self.cols = int(cols)
        self.horizon = horizon
        self.kind = str(kind)
        self.seed = seed
        self._materializer = materializer
        self._stack = None

    @property
    def is_square(self) -> bool:
        return self.rows == self.cols

    def stack(self) -> np.ndarray:
        """Full (N, rows, cols) read-only stack; built once, cached."""
        if self._stack is None:
            arr = np.ascontiguousarray(self._materializer(), dtype=np.float64)
            expected = (len(self.horizon), self.rows, self.cols)
            if arr.shape != expected:
                raise InputError(f"generator produced shape {arr.shape}, expected {expected}")
            if not np.all(np.isfinite(arr)):
                raise InputError(f"non-finite entries in '{self.kind}' sequence")
            arr.flags.writeable = False
            self._stack = arr
        return self._stack

    def at(self, n: int) -> np.ndarray:
        """Matrix at index n (read-only view)."""
        return self.stack()[self.horizon.offset(n)]

    def sup_norm(self) -> float:
        """sup over the horizon of the spectral norm."""
        svals = np.linalg.svd(self.stack(), compute_uv=False)
        return float(svals[:, 0].max())

    def __repr__(self):
        h = self.horizon
        return (f"MatrixSequence({self.rows}x{self.cols}, kind={self.kind!r}, "
                f"horizon=[{h.n_min}, {h.n_max}])")


@dataclass(frozen=True)
class LyapunovValidation:
    """Invertibility/boundedness report for a square sequence.

    ``ok`` holds iff every matrix on the horizon has its smallest singular
    value above ``floor`` relative to its largest, making the inverse
    sequence bounded as well.
    """

    norm_bound: float
    inverse_norm_bound: float
    min_singular_value: float
    ok: bool
    floor: float
    first_failing_index: int | None = None

    def to_dict(self) -> dict:
        return {
            "norm_bound": self.norm_bound,
            "inverse_norm_bound": self.inverse_norm_bound,
            "min_singular_value": self.min_singular_value,
            "ok": self.ok,
            "floor": self.floor,
            "first_failing_index": self.first_failing_index,
        }


def validate_lyapunov(M: MatrixSequence, floor: float = DEFAULT_SV_FLOOR) -> LyapunovValidation:
    """Check that M is bounded with a bounded inverse sequence.

    Parameters
    ----------
    M : MatrixSequence
        Square sequence to validate.
    floor : float
        Relative singular-value floor: index n fails when
        sigma_min(M_n) < floor * sigma_max(M_n).

    Returns
    -------
    LyapunovValidation
        Bounds over the full horizon plus the ok flag; the first failing
        index is reported instead of raising.
    """
    if not M.is_square:
        raise InputError(f"validate_lyapunov needs a square sequence, got {M.rows}x{M.cols}")
    svals = np.linalg.svd(M.stack(), compute_uv=False)
    smax, smin = svals[:, 0], svals[:, -1]
    bad = smin < floor * np.maximum(smax, np.finfo(float).tiny)
    with np.errstate(divide="ignore"):
        inv_bound = float(np.max(np.where(smin > 0.0, 1.0 / np.maximum(smin, np.finfo(float).tiny), np.inf)))
    failing = int(np.argmax(bad)) + M.horizon.n_min if bad.any() else None
    return LyapunovValidation(
        norm_bound=float(smax.max()),
        inverse_norm_bound=inv_bound,
        min_singular_value=float(smin.min()),
        ok=not bad.any(),
        floor=floor,
        first_failing_index=failing,
    )


# ---------------------------------------------------------------------------
# generators


def constant_sequence(matrix, horizon: Horizon, kind="constant") -> MatrixSequence:
    """Sequence equal to ``matrix`` at every index."""
    mat = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    rows, cols = mat.shape
    return MatrixSequence(
        rows, cols, horizon, kind,
        lambda: np.broadcast_to(mat, (len(horizon), rows, cols)).copy(),
    )


def explicit_sequence(matrices, horizon: Horizon, kind="explicit") -> MatrixSequence:
    """Sequence given by an explicit list covering the horizon."""
    stack = np.asarray(matrices, dtype=np.float64)
    if stack.ndim == 1:
        stack = stack.reshape(-1, 1, 1)
    if stack.ndim != 3:
        raise InputError("explicit generator expects a list of matrices")
    if stack.shape[0] != len(horizon):
        raise InputError(
            f"explicit generator has {stack.shape[0]} matrices for a horizon of {len(horizon)}")
    return MatrixSequence(stack.shape[1], stack.shape[2], horizon, kind, lambda: stack)


def from_function(fn: Callable[[int], np.ndarray], rows, cols, horizon: Horizon,
                  kind="function") -> MatrixSequence:
    """Sequence n -> fn(n); fn must be deterministic."""

    def build():
        return np.stack([np.asarray(fn(n), dtype=np.float64).reshape(rows, cols)
                         for n in range(horizon.n_min, horizon.n_max + 1)])

    return MatrixSequence(rows, cols, horizon, kind, build)


def periodic_sequence(matrices, horizon: Horizon, kind="periodic") -> MatrixSequence:
    """Sequence n -> mats[n mod p] for the given period-p list."""
    mats = np.asarray(matrices, dtype=np.float64)
    if mats.ndim == 1:
        mats = mats.reshape(-1, 1, 1)
    p = mats.shape[0]
    if p < 1:
        raise InputError("periodic generator needs at least one matrix")

    def build():
        idx = np.arange(horizon.n_min, horizon.n_max + 1) % p
        return mats[idx]

    return MatrixSequence(mats.shape[1], mats.shape[2], horizon, kind, build)


def dyadic_block_values(a: float, b: float, indices: np.ndarray) -> np.ndarray:
    """Scalar dyadic profile: e^a on blocks [2^(2m), 2^(2m+1)), e^b on
    [2^(2m+1), 2^(2m+2)), mirrored to negative indices, e^a at 0."""
    n = np.abs(np.asarray(indices, dtype=np.int64))
    # floor(log2 n) parity decides the block; n = 0 joins the e^a family.
    exponent = np.zeros(n.shape, dtype=np.int64)
    pos = n > 0
    exponent[pos] = np.frexp(n[pos].astype(np.float64))[1] - 1
    return np.where(exponent % 2 == 0, math.exp(a), math.exp(b))


def dyadic_scalar_sequence(a: float, b: float, horizon: Horizon) -> MatrixSequence:
    """Scalar (1x1) dyadic sequence with symmetric profile p_n = p_{-n}.

    The window-averaged log of this sequence sweeps exactly [a, b] once the
    window is shorter than the largest constant blocks inside the horizon.
    """
    if not a <= b:
        raise InputError(f"dyadic interval needs a <= b, got [{a}, {b}]")

    def build():
        idx = np.arange(horizon.n_min, horizon.n_max + 1)
        return dyadic_block_values(a, b, idx).reshape(-1, 1, 1)

    return MatrixSequence(1, 1, horizon, "dyadic", build)


def diagonal_from_scalars(scalars: Sequence[MatrixSequence], kind="diagonal") -> MatrixSequence:
    """Diagonal d x d sequence assembled from d scalar sequences."""
    if not scalars:
        raise InputError("need at least one scalar sequence")
    horizon = scalars[0].horizon
    for s in scalars:
        if s.rows != 1 or s.cols != 1:
            raise InputError("diagonal assembly needs 1x1 sequences")
        if s.horizon != horizon:
            raise InputError("scalar horizons disagree")
    d = len(scalars)

    def build():
        out = np.zeros((len(horizon), d, d))
        for i, s in enumerate(scalars):
            out[:, i, i] = s.stack()[:, 0, 0]
        return out

    return MatrixSequence(d, d, horizon, kind, build)


def triangular_from_scalars(scalars: Sequence[MatrixSequence], fill_seed=None,
                            fill_scale: float = 0.0) -> MatrixSequence:
    """Upper-triangular sequence with prescribed diagonal scalar sequences.

    Strictly-upper entries are seeded uniform draws in
    [-fill_scale, fill_scale]; with fill_scale = 0 the result is diagonal.
    """
    base = diagonal_from_scalars(scalars, kind="triangular")
    if fill_scale == 0.0:
        return base
    d, horizon = base.rows, base.horizon

    def build():
        out = np.array(base.stack())
        rng = np.random.default_rng(fill_seed)
        iu = np.triu_indices(d, k=1)
        draws = rng.uniform(-fill_scale, fill_scale, size=(len(horizon), len(iu[0])))
        out[:, iu[0], iu[1]] = draws
        return out

    return MatrixSequence(d, d, horizon, "triangular", build, seed=fill_seed)


def block_triangular(blocks: Sequence[MatrixSequence], fill_seed=None,
                     fill_scale: float = 1.0, fill: MatrixSequence | None = None) -> MatrixSequence:
    """Block upper-triangular sequence from square diagonal blocks.

    The strictly-upper block region is either the explicit ``fill``
    sequence (for two blocks: shape k x (d-k)) or seeded bounded noise.
    """
    if len(blocks) < 2:
        raise InputError("need at least two diagonal blocks")
    horizon = blocks[0].horizon
    for blk in blocks:
        if not blk.is_square:
            raise InputError("diagonal blocks must be square")
        if blk.horizon != horizon:
            raise InputError("block horizons disagree")
    sizes = [blk.rows for blk in blocks]
    d = sum(sizes)
    offsets = np.cumsum([0] + sizes)
    if fill is not None and len(blocks) != 2:
        raise InputError("explicit fill supported only for two blocks")

    def build():
        out = np.zeros((len(horizon), d, d))
        for blk, off in zip(blocks, offsets):
            out[:, off:off + blk.rows, off:off + blk.rows] = blk.stack()
        if fill is not None:
            if fill.rows != sizes[0] or fill.cols != sizes[1]:
                raise InputError("fill block has wrong shape")
            out[:, 0:sizes[0], sizes[0]:d] = fill.stack()
        elif fill_scale != 0.0:
            rng = np.random.default_rng(fill_seed)
            for i, oi in enumerate(offsets[:-1]):
                for j in range(i + 1, len(sizes)):
                    oj = offsets[j]
                    out[:, oi:oi + sizes[i], oj:oj + sizes[j]] = rng.uniform(
                        -fill_scale, fill_scale, size=(len(horizon), sizes[i], sizes[j]))
        return out

    return MatrixSequence(d, d, horizon, "block-triangular", build, seed=fill_seed)


def random_bounded_sequence(dim: int, horizon: Horizon, seed: int,
                            log_sv_range=(-1.0, 1.0)) -> MatrixSequence:
    """Seeded random Lyapunov sequence.

    Each matrix is Q1 diag(e^u) Q2^T with Haar-ish orthogonal factors and
    u drawn uniformly in ``log_sv_range``, so norms and inverse norms are
    bounded by construction.
    """
    lo, hi = float(log_sv_range[0]), float(log_sv_range[1])
    if not lo <= hi:
        raise InputError(f"bad log_sv_range [{lo}, {hi}]")

    def build():
        rng = np.random.default_rng(seed)
        n = len(horizon)
        q1 = _orthogonalize(rng.standard_normal((n, dim, dim)))
        q2 = _orthogonalize(rng.standard_normal((n, dim, dim)))
        svals = np.exp(rng.uniform(lo, hi, size=(n, dim)))
        return np.einsum("nij,nj,nkj->nik", q1, svals, q2)

    return MatrixSequence(dim, dim, horizon, "random_bounded", build, seed=seed)


def random_input_sequence(rows: int, cols: int, horizon: Horizon, seed: int,
                          scale: float = 1.0) -> MatrixSequence:
    """Seeded bounded input-channel sequence with entries in [-scale, scale]."""

    def build():
        rng = np.random.default_rng(seed)
        return rng.uniform(-scale, scale, size=(len(horizon), rows, cols))

    return MatrixSequence(rows, cols, horizon, "random_input", build, seed=seed)


def rotation_sequence(horizon: Horizon, omega: float = 1.0) -> MatrixSequence:
    """Planar rotations: M_n rotates by angle omega * n (orthogonal, norm 1)."""

    def build():
        angles = omega * np.arange(horizon.n_min, horizon.n_max + 1)
        c, s = np.cos(angles), np.sin(angles)
        out = np.empty((len(horizon), 2, 2))
        out[:, 0, 0] = c
        out[:, 0, 1] = -s
        out[:, 1, 0] = s
        out[:, 1, 1] = c
        return out

    return MatrixSequence(2, 2, horizon, "rotation", build)


def _orthogonalize(stack: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(stack)
    signs = np.sign(np.einsum("nii->ni", r))
    signs[signs == 0] = 1.0
    return q * signs[:, None, :]


# ---------------------------------------------------------------------------
# composites


def apply_feedback(A: MatrixSequence, B: MatrixSequence, U: MatrixSequence) -> MatrixSequence:
    """Closed-loop sequence n -> A_n + B_n U_n.

    Raises
    ------
    InputError
        On dimension mismatch (A: d x d, B: d x s, U: s x d) or horizon
        disagreement.
    """
    if not A.is_square:
        raise InputError("state sequence A must be square")
    if B.rows != A.rows or U.cols != A.rows or U.rows != B.cols:
        raise InputError(
            f"feedback dimensions incompatible: A {A.rows}x{A.cols}, "
            f"B {B.rows}x{B.cols}, U {U.rows}x{U.cols}")
    if not (A.horizon == B.horizon == U.horizon):
        raise InputError("feedback horizons disagree")

    def build():
        return A.stack() + np.einsum("nij,njk->nik", B.stack(), U.stack())

    return MatrixSequence(A.rows, A.cols, A.horizon, "closed_loop", build)


def kinematic_conjugate(M: MatrixSequence, T: MatrixSequence,
                        floor: float = DEFAULT_SV_FLOOR) -> MatrixSequence:
    """Conjugated sequence n -> T_{n+1}^{-1} M_n T_n.

    T must be a Lyapunov sequence (validated here); the defining identity
    M_n T_n = T_{n+1} (result)_n then holds to rounding.  The result's
    horizon loses the top index because T_{n+1} is needed.
    """
    if not (M.is_square and T.is_square) or M.rows != T.rows:
        raise InputError("conjugation needs square sequences of equal size")
    check = validate_lyapunov(T, floor=floor)
    if not check.ok:
        raise SingularMatrixError(check.first_failing_index,
                                  f"transform not invertible at index {check.first_failing_index}")
    n_max = min(M.horizon.n_max, T.horizon.n_max - 1)
    n_min = max(M.horizon.n_min, T.horizon.n_min)
    result_horizon = Horizon(n_min, n_max)

    def build():
        t_stack = T.stack()
        lo = T.horizon.offset(n_min)
        t_now = t_stack[lo:lo + len(result_horizon)]
        t_next = t_stack[lo + 1:lo + 1 + len(result_horizon)]
        m_lo = M.horizon.offset(n_min)
        m = M.stack()[m_lo:m_lo + len(result_horizon)]
        return np.linalg.solve(t_next, np.einsum("nij,njk->nik", m, t_now))

    return MatrixSequence(M.rows, M.cols, result_horizon, "conjugate", build)


def shift(M: MatrixSequence, gamma: float) -> MatrixSequence:
    """Exponentially shifted sequence n -> e^{-gamma} M_n."""
    if not M.is_square:
        raise InputError("shift needs a square sequence")
    factor = math.exp(-gamma)
    return MatrixSequence(M.rows, M.cols, M.horizon, "shifted",
                          lambda: factor * M.stack())
