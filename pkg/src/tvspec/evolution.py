"""Evolution operators of a linear difference system.

For a square sequence (M_n) the evolution operator is

    transition(m, n) = M_m M_{m-1} ... M_{n+1}          for m > n,
    transition(n, n) = I,
    transition(m, n) = M_{m+1}^{-1} ... M_n^{-1}        for m < n,

so that x_m = transition(m, n) x_n solves x_{k+1} = M_{k+1} x_k.  Long
products over- or underflow doubles quickly, so everything here is
carried in the scaled form ``mat * exp(log_scale)`` with ``mat`` kept in
range.  An :class:`EvolutionCache` amortizes repeated queries with
checkpointed partial products.
"""

from __future__ import annotations

import math

import numpy as np

from . import kernels
from .errors import HorizonError, NumericalRangeError, SingularMatrixError
from .sequences import MatrixSequence, validate_lyapunov

__all__ = ["EvolutionCache", "evolution", "evolution_scaled"]

_LOG_DOUBLE_MAX = math.log(np.finfo(np.float64).max)


class _ChunkedChain:
    """Scaled range products over factors stored in application order.

    ``factors[i]`` is applied i-th, so ``range_product(lo, hi)`` returns
    the scaled value of factors[hi-1] @ ... @ factors[lo].  Chunk
    products at a fixed stride make long ranges cost O(stride + span /
    stride) matrix multiplies.
    """

    def __init__(self, factors: np.ndarray, stride: int):
        self.factors = factors
        self.stride = stride
        self._chunks: list[tuple[np.ndarray, float]] | None = None

    def _chunk_products(self) -> list[tuple[np.ndarray, float]]:
        if self._chunks is None:
            chunks = []
            for lo in range(0, self.factors.shape[0], self.stride):
                chunks.append(kernels.renorm_product(self.factors[lo:lo + self.stride]))
            self._chunks = chunks
        return self._chunks

    def range_product(self, lo: int, hi: int) -> tuple[np.ndarray, float]:
        if not 0 <= lo <= hi <= self.factors.shape[0]:
            raise IndexError("factor range out of bounds")
        stride = self.stride
        first_chunk = -(-lo // stride)  # first chunk boundary at or after lo
        last_chunk = hi // stride
        if last_chunk <= first_chunk:
            return kernels.renorm_product(self.factors[lo:hi])
        chunks = self._chunk_products()
        mat, log_scale = kernels.renorm_product(self.factors[lo:first_chunk * stride])
        for idx in range(first_chunk, last_chunk):
            cmat, cscale = chunks[idx]
            mat = cmat @ mat
            log_scale += cscale
            peak = np.max(np.abs(mat))
            if peak > 1e100 or 0.0 < peak < 1e-100:
                mat = mat / peak
                log_scale += math.log(peak)
        tail, tail_scale = kernels.renorm_product(self.factors[last_chunk * stride:hi])
        return tail @ mat, log_scale + tail_scale


class EvolutionCache:
    """Memoized evolution operators of a square matrix sequence.

    Backward queries (m < n) invert the factors and therefore require
    the sequence to pass :func:`validate_lyapunov`; the first offending
    index is reported otherwise.
    """

    def __init__(self, base: MatrixSequence, stride: int = 64, floor: float = 1e-9):
        if base.rows != base.cols:
            raise ValueError("evolution operators need a square sequence")
        self.base = base
        self.stride = int(stride)
        self.floor = float(floor)
        if self.stride < 1:
            raise ValueError("stride must be positive")
        self._memo: dict[tuple[int, int], tuple[np.ndarray, float]] = {}
        self._forward: _ChunkedChain | None = None
        self._backward: _ChunkedChain | None = None

    @property
    def dim(self) -> int:
        return self.base.rows

    def _forward_chain(self) -> _ChunkedChain:
        if self._forward is None:
            # Step j (mapping index j-1 to j) lives at stack offset j - n_min,
            # so application order is simply ascending offsets 1..N-1.
            self._forward = _ChunkedChain(self.base.stack()[1:], self.stride)
        return self._forward

    def _backward_chain(self) -> _ChunkedChain:
        if self._backward is None:
            validation = validate_lyapunov(self.base, floor=self.floor)
            if not validation.ok:
                raise SingularMatrixError(
                    validation.first_failing_index,
                    "factor is singular to working precision; "
                    "backward evolution is undefined",
                )
            inverses = np.linalg.inv(self.base.stack()[1:])
            # Backward products apply M_n^{-1} first and M_{m+1}^{-1} last,
            # i.e. descending step index: reverse the inverse stack.
            self._backward = _ChunkedChain(inverses[::-1].copy(), self.stride)
        return self._backward

    def scaled(self, m: int, n: int) -> tuple[np.ndarray, float]:
        """Return (mat, log_scale) with transition(m, n) = mat * exp(log_scale)."""
        key = (int(m), int(n))
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        m, n = key
        horizon = self.base.horizon
        for idx in key:
            if idx not in horizon:
                raise HorizonError(f"index {idx} outside horizon {horizon}")
        n_min, n_max = horizon.n_min, horizon.n_max
        if m == n:
            result = (np.eye(self.dim), 0.0)
        elif m > n:
            result = self._forward_chain().range_product(n - n_min, m - n_min)
        else:
            result = self._backward_chain().range_product(n_max - n, n_max - m)
        mat, log_scale = result
        mat = np.ascontiguousarray(mat)
        mat.flags.writeable = False
        result = (mat, float(log_scale))
        self._memo[key] = result
        return result

    def __call__(self, m: int, n: int) -> np.ndarray:
        """Plain (unscaled) evolution operator, if representable."""
        mat, log_scale = self.scaled(m, n)
        if log_scale == 0.0:
            return mat.copy()
        peak = np.max(np.abs(mat))
        if peak > 0.0 and log_scale + math.log(peak) > _LOG_DOUBLE_MAX:
            raise NumericalRangeError(
                f"evolution operator ({m}, {n}) overflows double precision "
                f"(log-scale {log_scale + math.log(peak):.1f}); "
                "use the scaled form instead"
            )
        return mat * math.exp(log_scale)


def evolution_scaled(base: MatrixSequence, m: int, n: int) -> tuple[np.ndarray, float]:
    """One-shot scaled evolution operator (no cache reuse)."""
    return EvolutionCache(base).scaled(m, n)


def evolution(base: MatrixSequence, m: int, n: int) -> np.ndarray:
    """One-shot plain evolution operator (no cache reuse)."""
    return EvolutionCache(base)(m, n)
