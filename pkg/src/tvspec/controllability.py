"""Window controllability Gramians and uniform complete controllability.

For the controlled system x_{k+1} = A_k x_k + B_k u_k the window
Gramian over [k0, k0 + K) is

    W(k0, K) = sum_{j=k0}^{k0+K-1} S(k0+K, j+1) B_j B_j^T S(k0+K, j+1)^T,

where S(m, n) = A_{m-1} ... A_n is the arrival-time-indexed solution
transition (S(m, n) = evolution(m-1, n-1) of the A sequence).  The
system is uniformly completely controllable on the horizon when some
fixed window length K makes every window Gramian uniformly positive
definite; the certificate also bounds the minimum-energy steering gain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import HorizonError, InputError, SingularMatrixError
from .sequences import Horizon, MatrixSequence

__all__ = [
    "solution_transition",
    "controllability_gramian",
    "UccCertificate",
    "check_ucc",
    "min_energy_steering",
    "simulate_controlled",
]

DEFAULT_GRAMIAN_FLOOR = 1e-8
DEFAULT_MAX_WINDOW = 32


def _check_pair(A: MatrixSequence, B: MatrixSequence) -> None:
    if A.rows != A.cols:
        raise InputError("state sequence must be square")
    if B.rows != A.rows:
        raise InputError(
            f"input sequence row count {B.rows} does not match state dim {A.rows}"
        )
    if B.horizon != A.horizon:
        raise InputError(
            f"state and input sequences need a common horizon "
            f"({A.horizon} vs {B.horizon})"
        )


def _window_offsets(A: MatrixSequence, k0: int, K: int, *, end_slack: int = 0) -> int:
    """Validate the window [k0, k0+K] and return the stack offset of k0."""
    if K < 1:
        raise InputError("window length must be >= 1")
    h = A.horizon
    if k0 < h.n_min or k0 + K > h.n_max + end_slack:
        raise HorizonError(
            f"window [{k0}, {k0 + K}] does not fit inside horizon {h}"
        )
    return k0 - h.n_min


def solution_transition(A: MatrixSequence, m: int, n: int) -> np.ndarray:
    """Product A_{m-1} ... A_n mapping the state at time n to time m >= n."""
    if A.rows != A.cols:
        raise InputError("solution transitions need a square sequence")
    if m < n:
        raise InputError("solution_transition requires m >= n")
    h = A.horizon
    if n < h.n_min or m - 1 > h.n_max:
        raise HorizonError(f"transition ({m}, {n}) uses factors outside {h}")
    out = np.eye(A.rows)
    stack = A.stack()
    for j in range(n, m):
        out = stack[j - h.n_min] @ out
    return out


def _gramian_and_maps(
    A: MatrixSequence, B: MatrixSequence, k0: int, K: int
) -> tuple[np.ndarray, np.ndarray]:
    """Window Gramian plus the stack of S(k0+K, j+1) B_j for j in the window."""
    off = k0 - A.horizon.n_min
    a = A.stack()[off:off + K]
    b = B.stack()[off:off + K]
    d = A.rows
    maps = np.empty((K, d, B.cols))
    trans = np.eye(d)
    for t in range(K - 1, -1, -1):
        maps[t] = trans @ b[t]
        trans = trans @ a[t]
    gram = np.einsum("tij,tkj->ik", maps, maps)
    return gram, maps


def controllability_gramian(
    A: MatrixSequence, B: MatrixSequence, k0: int, K: int
) -> np.ndarray:
    """Controllability Gramian of the window [k0, k0 + K)."""
    _check_pair(A, B)
    _window_offsets(A, k0, K)
    gram, _ = _gramian_and_maps(A, B, k0, K)
    return gram


@dataclass(frozen=True)
class UccCertificate:
    """Uniform complete controllability certificate over a horizon.

    ``K`` is the smallest certified window length (0 when none was
    found up to ``max_window``); ``alpha`` bounds the per-step norm of
    the minimum-energy control steering across any unit target over any
    certified window.
    """

    ok: bool
    K: int
    alpha: float
    min_gramian_eig: float
    max_gramian_eig: float
    floor: float
    max_window: int
    num_windows: int
    horizon: Horizon

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "K": self.K,
            "alpha": self.alpha,
            "min_gramian_eig": self.min_gramian_eig,
            "max_gramian_eig": self.max_gramian_eig,
            "floor": self.floor,
            "max_window": self.max_window,
            "num_windows": self.num_windows,
            "horizon": self.horizon.to_dict(),
        }


def check_ucc(
    A: MatrixSequence,
    B: MatrixSequence,
    max_window: int = DEFAULT_MAX_WINDOW,
    floor: float = DEFAULT_GRAMIAN_FLOOR,
) -> UccCertificate:
    """Scan window lengths K = 1..max_window for a uniform Gramian floor.

    All windows [k0, k0+K] inside the horizon are checked at once via
    the sliding recursion W(k0, t+1)[...] = A W(k0, t) A^T + B B^T.  The
    first K whose smallest window-Gramian eigenvalue clears ``floor`` is
    certified, and the steering gain alpha is evaluated for it.
    """
    _check_pair(A, B)
    if max_window < 1:
        raise InputError("max_window must be >= 1")
    if floor <= 0:
        raise InputError("floor must be positive")
    h = A.horizon
    n_pts = len(h)
    a = A.stack()
    b = B.stack()
    bbt = np.einsum("nij,nkj->nik", b, b)
    gram = bbt.copy()

    best_min = -math.inf
    best = None  # (K, min_eig, max_eig, eigs_valid, gram_valid)
    for K in range(1, max_window + 1):
        if K > 1:
            m = n_pts - K + 1
            a_sl = a[K - 1:K - 1 + m]
            gram[:m] = np.einsum("nij,njk,nlk->nil", a_sl, gram[:m], a_sl)
            gram[:m] += bbt[K - 1:K - 1 + m]
        num = n_pts - K  # windows with k0 + K <= n_max
        if num < 1:
            break
        eigs = np.linalg.eigvalsh(gram[:num])
        min_eig = float(eigs[:, 0].min())
        max_eig = float(eigs[:, -1].max())
        if min_eig > best_min:
            best_min = min_eig
            best = (K, min_eig, max_eig, eigs[:, 0].copy(), gram[:num].copy())
        if min_eig >= floor:
            break

    K, min_eig, max_eig, min_eigs, grams = best
    ok = min_eig >= floor
    alpha = math.inf
    if ok:
        num = n_pts - K
        d, s = A.rows, B.cols
        trans = np.broadcast_to(np.eye(d), (num, d, d)).copy()
        peak = np.zeros(num)
        for t in range(K - 1, -1, -1):
            mapped = trans @ b[t:t + num]
            norms = np.linalg.svd(mapped, compute_uv=False)[:, 0]
            np.maximum(peak, norms, out=peak)
            if t > 0:
                trans = trans @ a[t:t + num]
        alpha = float(np.max(peak / min_eigs))
    return UccCertificate(
        ok=ok,
        K=K if ok else 0,
        alpha=alpha,
        min_gramian_eig=min_eig,
        max_gramian_eig=max_eig,
        floor=floor,
        max_window=max_window,
        num_windows=int(n_pts - K) if ok else 0,
        horizon=h,
    )


def _solve_spd(gram: np.ndarray, rhs: np.ndarray, index: int) -> np.ndarray:
    """Solve W x = rhs for symmetric positive definite W."""
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError:
        raise SingularMatrixError(
            index, "window Gramian is not positive definite; cannot steer"
        ) from None
    y = np.linalg.solve(chol, rhs)
    return np.linalg.solve(chol.T, y)


def min_energy_steering(
    A: MatrixSequence,
    B: MatrixSequence,
    k0: int,
    K: int,
    target: np.ndarray,
    x0: np.ndarray | None = None,
) -> np.ndarray:
    """Minimum-energy control moving x_{k0} = x0 to x_{k0+K} = target.

    Returns the (K, input_dim) control sequence
    u_j = B_j^T S(k0+K, j+1)^T W^{-1} (target - S(k0+K, k0) x0).
    """
    _check_pair(A, B)
    _window_offsets(A, k0, K)
    target = np.asarray(target, dtype=np.float64).reshape(A.rows)
    gram, maps = _gramian_and_maps(A, B, k0, K)
    residual = target.copy()
    if x0 is not None:
        x0 = np.asarray(x0, dtype=np.float64).reshape(A.rows)
        residual -= solution_transition(A, k0 + K, k0) @ x0
    lam = _solve_spd(gram, residual, k0)
    return np.einsum("tij,i->tj", maps, lam)


def simulate_controlled(
    A: MatrixSequence,
    B: MatrixSequence,
    u: np.ndarray,
    k0: int,
    x0: np.ndarray,
) -> np.ndarray:
    """Forward trajectory of x_{k+1} = A_k x_k + B_k u_k from x_{k0} = x0.

    Returns the (K+1, dim) array of states x_{k0}, ..., x_{k0+K} where K
    is the number of supplied control steps.
    """
    _check_pair(A, B)
    u = np.asarray(u, dtype=np.float64)
    if u.ndim != 2 or u.shape[1] != B.cols:
        raise InputError(f"controls must have shape (K, {B.cols})")
    K = u.shape[0]
    off = _window_offsets(A, k0, K, end_slack=1)
    a = A.stack()[off:off + K]
    b = B.stack()[off:off + K]
    traj = np.empty((K + 1, A.rows))
    traj[0] = np.asarray(x0, dtype=np.float64).reshape(A.rows)
    for t in range(K):
        traj[t + 1] = a[t] @ traj[t] + b[t] @ u[t]
    return traj
