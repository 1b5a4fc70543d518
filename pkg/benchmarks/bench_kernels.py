#!/usr/bin/env python3
"""Compare the compiled and pure-numpy reduction kernels.

Times ``qr_logdiag_scan`` (the sliding-exponent workhorse) and
``renorm_product`` (scaled window products) on random bounded sequences
and prints per-dimension timings with the compiled-over-pure speedup.

Usage: python benchmarks/bench_kernels.py [--steps 16384] [--repeats 5]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from tvspec.kernels import get_backend


def _random_steps(n_steps: int, dim: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    mats = rng.normal(size=(n_steps, dim, dim))
    # Keep factors well conditioned so both kernels stay in range.
    u, _, vt = np.linalg.svd(mats)
    sv = np.exp(rng.uniform(-0.5, 0.5, size=(n_steps, dim)))
    return np.einsum("nij,nj,njk->nik", u, sv, vt)


def _best_time(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--steps", type=int, default=1 << 14)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--dims", type=int, nargs="+", default=[2, 3, 5])
    args = parser.parse_args()

    try:
        compiled = get_backend("compiled")
    except ValueError as exc:
        raise SystemExit(f"compiled backend unavailable: {exc}")
    pure = get_backend("pure")

    header = (
        f"{'kernel':<18} {'d':>2} {'steps':>7} "
        f"{'compiled':>11} {'pure':>11} {'speedup':>8}"
    )
    print(header)
    print("-" * len(header))
    for dim in args.dims:
        steps = _random_steps(args.steps, dim, seed=dim)
        flag = np.linalg.qr(np.random.default_rng(0).normal(size=(dim, dim)))[0]

        ref = compiled.qr_logdiag_scan(steps, flag)
        alt = pure.qr_logdiag_scan(steps, flag)
        assert np.allclose(ref, alt, atol=1e-10), "backends disagree on scan"

        t_c = _best_time(lambda: compiled.qr_logdiag_scan(steps, flag), args.repeats)
        t_p = _best_time(lambda: pure.qr_logdiag_scan(steps, flag), args.repeats)
        print(
            f"{'qr_logdiag_scan':<18} {dim:>2} {args.steps:>7} "
            f"{t_c * 1e3:>9.2f}ms {t_p * 1e3:>9.2f}ms {t_p / t_c:>7.1f}x"
        )

        window = steps[: min(1 << 10, args.steps)]
        m_c, s_c = compiled.renorm_product(window)
        m_p, s_p = pure.renorm_product(window)
        assert np.allclose(m_c, m_p, atol=1e-10) and abs(s_c - s_p) < 1e-10

        t_c = _best_time(lambda: compiled.renorm_product(window), args.repeats)
        t_p = _best_time(lambda: pure.renorm_product(window), args.repeats)
        print(
            f"{'renorm_product':<18} {dim:>2} {len(window):>7} "
            f"{t_c * 1e3:>9.2f}ms {t_p * 1e3:>9.2f}ms {t_p / t_c:>7.1f}x"
        )


if __name__ == "__main__":
    main()
