"""Seeded system builders shared across the test modules."""

from __future__ import annotations

import numpy as np

import tvspec


def companion_pair(dim: int, horizon: tvspec.Horizon, seed: int):
    """Single-input controllable pair in time-varying companion form.

    The state matrix carries seeded coefficients in its first row and a
    shift body below; the top-right coefficient (the determinant up to
    sign) is kept away from zero so every step stays invertible.  The
    input channel feeds the first coordinate.
    """
    rng = np.random.default_rng(seed)
    n = len(horizon)
    mats = np.zeros((n, dim, dim))
    mats[:, 0, :] = rng.uniform(-0.9, 0.9, size=(n, dim))
    for i in range(1, dim):
        mats[:, i, i - 1] = 1.0
    last = mats[:, 0, dim - 1]
    mats[:, 0, dim - 1] = np.sign(last) * np.maximum(np.abs(last), 0.3)
    A = tvspec.explicit_sequence(mats, horizon)
    b = np.zeros((dim, 1))
    b[0, 0] = 1.0
    B = tvspec.constant_sequence(b, horizon)
    return A, B


def fully_actuated_pair(dim: int, horizon: tvspec.Horizon, seed: int,
                        log_sv_range=(-1.0, 1.0)):
    """Fully actuated pair: seeded bounded invertible drift, B = I."""
    A = tvspec.random_bounded_sequence(dim, horizon, seed=seed,
                                       log_sv_range=log_sv_range)
    B = tvspec.constant_sequence(np.eye(dim), horizon)
    return A, B


def brute_force_scalar_interval(scalars: tvspec.MatrixSequence,
                                window_length: int) -> tuple[float, float]:
    """Direct min/max of window-averaged log |p| over every window start."""
    values = np.log(np.abs(scalars.stack()[:, 0, 0]))
    steps = values[1:]  # factor at index n maps n-1 -> n; drop the unused n_min entry
    sums = np.cumsum(np.concatenate(([0.0], steps)))
    window = (sums[window_length:] - sums[:-window_length]) / window_length
    return float(window.min()), float(window.max())
