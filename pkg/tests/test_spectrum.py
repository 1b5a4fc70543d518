"""Dichotomy tests, spectrum estimates, Bohl intervals, Lyapunov exponents."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import tvspec
from tvspec import (
    Horizon,
    SpectrumEstimate,
    bohl_interval,
    dichotomy_spectrum,
    dyadic_scalar_sequence,
    ed_test,
    lyapunov_spectrum,
    merge_report,
    window_exponents,
)
from tvspec.errors import InputError, SingularMatrixError

from helpers import brute_force_scalar_interval

H64 = Horizon(-64, 64)


def hyperbolic_system(horizon=H64):
    return tvspec.constant_sequence(np.diag([math.e, 1.0 / math.e]), horizon)


class TestWindowExponents:
    def test_constant_hyperbolic_diagonal(self):
        table = window_exponents(hyperbolic_system(), window_length=16)
        assert np.allclose(table.mu[:, 0], 1.0, atol=1e-12)
        assert np.allclose(table.mu[:, 1], -1.0, atol=1e-12)

    def test_alternating_scalar_even_window(self):
        seq = tvspec.periodic_sequence(
            [np.array([[1.0]]), np.array([[math.e]])], H64
        )
        table = window_exponents(seq, window_length=16)
        assert np.allclose(table.mu[:, 0], 0.5, atol=1e-12)

    def test_identity_system(self):
        table = window_exponents(tvspec.constant_sequence(np.eye(3), H64), 16)
        assert np.allclose(table.mu, 0.0, atol=1e-14)

    def test_starts_cover_admissible_windows(self):
        table = window_exponents(hyperbolic_system(), window_length=16)
        assert table.starts[0] == -64
        assert table.starts[-1] == 64 - 16
        assert table.mu.shape == (len(table.starts), 2)

    def test_rows_sorted_descending(self):
        seq = tvspec.random_bounded_sequence(4, H64, seed=2)
        table = window_exponents(seq, window_length=8)
        assert (np.diff(table.mu, axis=1) <= 1e-15).all()

    def test_window_too_long(self):
        with pytest.raises(InputError):
            window_exponents(hyperbolic_system(Horizon(-8, 8)), window_length=9)

    def test_singular_factor_names_index(self):
        mats = np.broadcast_to(np.eye(2), (len(H64), 2, 2)).copy()
        mats[H64.offset(3)] = 0.0
        seq = tvspec.explicit_sequence(mats, H64)
        with pytest.raises(SingularMatrixError) as info:
            window_exponents(seq, window_length=8)
        assert info.value.index == 3

    def test_warm_start_removes_alignment_transient(self):
        # A constant hyperbolic system conjugated by orthogonal frames
        # that start at the identity: the identity frame then sits on an
        # invariant subspace, and a cold reduction start would smear
        # ~log(eps)/L (about 0.14 here) across the earliest windows.
        h = Horizon(-1024, 1024)
        M = tvspec.constant_sequence(np.diag([math.exp(0.4), math.exp(-0.5)]), h)
        frames = np.linalg.qr(
            np.random.default_rng(0).standard_normal((len(h), 2, 2))
        )[0]
        frames[0] = np.eye(2)
        T = tvspec.explicit_sequence(frames, h)
        conj = tvspec.kinematic_conjugate(M, T)
        table = window_exponents(conj, window_length=256)
        assert np.abs(table.mu[:, 0] - 0.4).max() <= 0.02
        assert np.abs(table.mu[:, 1] + 0.5).max() <= 0.02


class TestEDTest:
    def test_hyperbolic_split(self):
        verdict = ed_test(hyperbolic_system(), gamma=0.0, window_length=16)
        assert verdict.has_ed
        assert verdict.projector_rank == 1
        assert verdict.fitted_alpha > 0
        assert math.isfinite(verdict.fitted_K) and verdict.fitted_K >= 1.0
        assert verdict.margin > 0

    def test_identity_has_no_dichotomy_at_zero(self):
        verdict = ed_test(tvspec.constant_sequence(np.eye(2), H64), 0.0, 16)
        assert not verdict.has_ed
        assert verdict.margin < 0
        assert verdict.fitted_K == math.inf

    def test_dyadic_interior_rate_fails(self):
        seq = dyadic_scalar_sequence(0.0, 1.0, H64)
        assert not ed_test(seq, gamma=0.5, window_length=16).has_ed

    def test_extreme_rates(self):
        sys = hyperbolic_system()
        below = ed_test(sys, gamma=-2.0, window_length=16)
        assert below.has_ed and below.projector_rank == 0
        above = ed_test(sys, gamma=2.0, window_length=16)
        assert above.has_ed and above.projector_rank == 2

    def test_accepts_precomputed_table(self):
        table = window_exponents(hyperbolic_system(), 16)
        v1 = ed_test(table, gamma=0.0)
        v2 = ed_test(hyperbolic_system(), gamma=0.0, window_length=16)
        assert v1 == v2

    def test_gap_threshold_validation(self):
        with pytest.raises(InputError):
            ed_test(hyperbolic_system(), 0.0, 16, gap_threshold=0.0)

    def test_verdict_serializes(self):
        verdict = ed_test(hyperbolic_system(), 0.0, 16)
        data = verdict.to_dict()
        assert data["has_ed"] is True
        assert data["gamma"] == 0.0


class TestDichotomySpectrum:
    def test_constant_scalar_point(self):
        h = Horizon(-256, 256)
        seq = tvspec.constant_sequence(np.array([[math.exp(0.3)]]), h)
        est = dichotomy_spectrum(seq, window_length=64)
        assert len(est) == 1
        lo, hi = est.intervals[0]
        assert abs(lo - 0.3) <= 0.02 and abs(hi - 0.3) <= 0.02

    def test_dyadic_interval(self):
        h = Horizon(-4096, 4096)
        seq = dyadic_scalar_sequence(-1.0, -0.5, h)
        est = dichotomy_spectrum(seq, window_length=512)
        assert len(est) == 1
        lo, hi = est.intervals[0]
        assert abs(lo + 1.0) <= 0.02 and abs(hi + 0.5) <= 0.02

    def test_periodic_alternating(self):
        seq = tvspec.periodic_sequence([np.array([[1.0]]), np.array([[math.e]])], H64)
        est = dichotomy_spectrum(seq, window_length=16)
        lo, hi = est.intervals[0]
        assert abs(lo - 0.5) <= 0.02 and abs(hi - 0.5) <= 0.02

    def test_two_intervals_for_hyperbolic(self):
        est = dichotomy_spectrum(hyperbolic_system(), window_length=16)
        assert len(est) == 2
        assert est.contains_point(-1.0, tol=0.02)
        assert est.contains_point(1.0, tol=0.02)
        assert not est.contains_point(0.0, tol=0.02)

    def test_direct_method_matches_grid(self):
        sys = tvspec.random_bounded_sequence(2, Horizon(-512, 512), seed=4)
        table = window_exponents(sys, 128)
        grid = dichotomy_spectrum(table)
        direct = dichotomy_spectrum(table, method="direct")
        assert len(grid) == len(direct)
        assert grid.endpoint_distance(direct) <= 0.01
        assert direct.method == "windowed-svd"

    def test_direct_scalar_label(self):
        seq = dyadic_scalar_sequence(0.0, 0.5, H64)
        assert dichotomy_spectrum(seq, window_length=16, method="direct").method == (
            "bohl-exact-scalar"
        )

    def test_table_reuse_equals_fresh(self):
        sys = hyperbolic_system()
        table = window_exponents(sys, 16)
        assert dichotomy_spectrum(table).intervals == dichotomy_spectrum(
            sys, window_length=16
        ).intervals

    def test_parameter_validation(self):
        with pytest.raises(InputError):
            dichotomy_spectrum(hyperbolic_system(), window_length=16, grid_step=0.0)
        with pytest.raises(InputError):
            dichotomy_spectrum(hyperbolic_system(), window_length=16, method="subspace")
        with pytest.raises(InputError):
            dichotomy_spectrum(hyperbolic_system(), side="left", window_length=16)

    def test_report_carries_provenance(self):
        est = dichotomy_spectrum(hyperbolic_system(), window_length=16)
        assert est.window_length == 16
        assert est.horizon == H64
        assert est.method == "gamma-grid"
        assert est.diagnostics["num_windows"] == len(H64) - 16


class TestOneSided:
    @staticmethod
    def _asymmetric():
        h = Horizon(-256, 256)
        return tvspec.from_function(
            lambda n: np.array([[math.e if n >= 1 else 1.0 / math.e]]), 1, 1, h
        )

    def test_half_horizon_restrictions(self):
        seq = self._asymmetric()
        plus = dichotomy_spectrum(seq, side="plus", window_length=64)
        minus = dichotomy_spectrum(seq, side="minus", window_length=64)
        both = dichotomy_spectrum(seq, side="two-sided", window_length=64)
        assert abs(plus.intervals[0][0] - 1.0) <= 0.02
        assert abs(plus.intervals[0][1] - 1.0) <= 0.02
        assert abs(minus.intervals[0][0] + 1.0) <= 0.02
        assert abs(minus.intervals[0][1] + 1.0) <= 0.02
        assert both.covers(plus) and both.covers(minus)

    def test_empty_side_raises(self):
        h = Horizon(-100, 20)
        seq = tvspec.constant_sequence(np.eye(1), h)
        table = window_exponents(seq, 32)
        with pytest.raises(InputError):
            table.side_mask("plus")


class TestBohlInterval:
    def test_constant(self):
        p = tvspec.constant_sequence(np.array([[2.0]]), H64)
        lo, hi = bohl_interval(p, window_length=16)
        assert lo == pytest.approx(math.log(2.0), abs=1e-14)
        assert hi == pytest.approx(math.log(2.0), abs=1e-14)

    def test_dyadic_attains_endpoints_at_default_scale(self):
        p = dyadic_scalar_sequence(0.0, 1.0, Horizon.default())
        lo, hi = bohl_interval(p, window_length=1 << 10)
        assert lo == pytest.approx(0.0, abs=1e-9)
        assert hi == pytest.approx(1.0, abs=1e-9)

    def test_matches_brute_force_scan(self):
        h = Horizon(-128, 128)
        rng = np.random.default_rng(12)
        vals = np.exp(rng.uniform(-1.0, 1.0, size=(len(h), 1, 1)))
        p = tvspec.explicit_sequence(vals, h)
        lo, hi = bohl_interval(p, window_length=32)
        blo, bhi = brute_force_scalar_interval(p, 32)
        assert lo == pytest.approx(blo, abs=1e-12)
        assert hi == pytest.approx(bhi, abs=1e-12)

    def test_scalar_only(self):
        with pytest.raises(InputError):
            bohl_interval(hyperbolic_system(), window_length=16)


class TestLyapunovSpectrum:
    def test_constant_hyperbolic(self):
        exps = lyapunov_spectrum(hyperbolic_system())
        assert np.allclose(exps, [1.0, -1.0], atol=1e-12)

    def test_dyadic_value_inside_interval(self):
        p = dyadic_scalar_sequence(-0.8, 0.3, Horizon(-1024, 1024))
        exps = lyapunov_spectrum(p)
        assert exps.shape == (1,)
        assert -0.8 - 1e-9 <= exps[0] <= 0.3 + 1e-9

    def test_triangular_constant_matches_eigenvalues(self):
        seq = tvspec.constant_sequence(np.array([[2.0, 1.0], [0.0, 0.5]]), H64)
        exps = lyapunov_spectrum(seq)
        assert np.allclose(exps, [math.log(2.0), -math.log(2.0)], atol=1e-12)

    def test_sample_count_validation(self):
        sys = hyperbolic_system()
        assert np.allclose(lyapunov_spectrum(sys, n_samples=10), [1.0, -1.0])
        with pytest.raises(InputError):
            lyapunov_spectrum(sys, n_samples=0)
        with pytest.raises(InputError):
            lyapunov_spectrum(sys, n_samples=65)
        off_zero = tvspec.constant_sequence(np.eye(2), Horizon(2, 8))
        with pytest.raises(InputError):
            lyapunov_spectrum(off_zero)

    def test_singular_factor_rejected(self):
        mats = np.broadcast_to(np.eye(2), (len(H64), 2, 2)).copy()
        mats[H64.offset(3)] = 0.0
        with pytest.raises(SingularMatrixError):
            lyapunov_spectrum(tvspec.explicit_sequence(mats, H64))


class TestSpectrumEstimate:
    def test_validation(self):
        with pytest.raises(InputError):
            SpectrumEstimate(())
        with pytest.raises(InputError):
            SpectrumEstimate(((1.0, 0.0),))
        with pytest.raises(InputError):
            SpectrumEstimate(((0.0, 1.0), (0.5, 2.0)))
        with pytest.raises(InputError):
            SpectrumEstimate(((0.0, math.inf),))

    def test_dilate_merges_overlaps(self):
        est = SpectrumEstimate(((0.0, 1.0), (1.01, 2.0)))
        fat = est.dilate(0.05)
        assert fat.intervals == ((-0.05, 2.05),)

    def test_contains_and_covers(self):
        est = SpectrumEstimate(((0.0, 1.0), (2.0, 3.0)))
        assert est.contains_point(0.5)
        assert not est.contains_point(1.5)
        assert est.contains_point(1.05, tol=0.1)
        inner = SpectrumEstimate(((0.1, 0.9), (2.5, 3.0)))
        assert est.covers(inner)
        assert not inner.covers(est)
        shifted = SpectrumEstimate(((-0.01, 1.01),))
        assert est.covers(shifted, tol=0.02)

    def test_endpoint_distance(self):
        a = SpectrumEstimate(((0.0, 1.0), (2.0, 3.0)))
        b = SpectrumEstimate(((0.1, 1.0), (2.0, 2.95)))
        assert a.endpoint_distance(b) == pytest.approx(0.1)
        with pytest.raises(InputError):
            a.endpoint_distance(SpectrumEstimate(((0.0, 3.0),)))

    def test_dict_roundtrip(self):
        est = dichotomy_spectrum(hyperbolic_system(), window_length=16)
        back = SpectrumEstimate.from_dict(est.to_dict())
        assert back.intervals == est.intervals
        assert back.horizon == est.horizon
        assert back.window_length == est.window_length

    @given(
        data=st.lists(
            st.tuples(st.floats(-5, 5), st.floats(0, 2)), min_size=1, max_size=4
        ),
        eps=st.floats(0, 1),
    )
    @settings(max_examples=100, deadline=None)
    def test_dilation_always_covers(self, data, eps):
        intervals = []
        cursor = -10.0
        for offset, width in sorted(data):
            lo = max(cursor + 0.01, offset)
            intervals.append((lo, lo + width))
            cursor = lo + width
        est = SpectrumEstimate(tuple(intervals))
        assert est.dilate(eps).covers(est)
        for lo, hi in est:
            assert est.contains_point(lo) and est.contains_point(hi)


class TestMergeReport:
    def test_disjoint_preserved(self):
        a = SpectrumEstimate(((0.0, 1.0),))
        b = SpectrumEstimate(((2.0, 3.0),))
        merged = merge_report([a, b])
        assert merged.intervals == ((0.0, 1.0), (2.0, 3.0))

    def test_overlap_fused(self):
        a = SpectrumEstimate(((0.0, 1.0),))
        b = SpectrumEstimate(((0.5, 2.0),))
        assert merge_report([a, b]).intervals == ((0.0, 2.0),)

    def test_degenerate_points(self):
        a = SpectrumEstimate(((0.3, 0.3),))
        assert merge_report([a, a]).intervals == ((0.3, 0.3),)

    def test_min_gap_fuses_near_misses(self):
        a = SpectrumEstimate(((0.0, 1.0),))
        b = SpectrumEstimate(((1.005, 2.0),))
        assert len(merge_report([a, b], min_gap=0.01)) == 1
        assert len(merge_report([a, b])) == 2

    def test_mixed_sides_label_union(self):
        a = dichotomy_spectrum(hyperbolic_system(), side="plus", window_length=16)
        b = dichotomy_spectrum(hyperbolic_system(), side="minus", window_length=16)
        merged = merge_report([a, b])
        assert merged.side == "union"
        assert merged.method == "merge"

    def test_empty_input_rejected(self):
        with pytest.raises(InputError):
            merge_report([])


class TestInvariances:
    def test_shift_equivariance(self):
        sys = tvspec.random_bounded_sequence(2, Horizon(-512, 512), seed=21)
        base = dichotomy_spectrum(sys, window_length=128)
        for gamma in (-0.5, 1.0):
            shifted = dichotomy_spectrum(tvspec.shift(sys, gamma), window_length=128)
            moved = SpectrumEstimate(tuple((lo - gamma, hi - gamma) for lo, hi in base))
            assert len(shifted) == len(moved)
            assert shifted.endpoint_distance(moved) <= 0.02

    def test_kinematic_invariance(self):
        h = Horizon(-1024, 1024)
        sys = tvspec.random_bounded_sequence(2, h, seed=22)
        T = tvspec.random_bounded_sequence(2, h, seed=23, log_sv_range=(-0.6, 0.6))
        conj = tvspec.kinematic_conjugate(sys, T)
        base = dichotomy_spectrum(sys, window_length=256)
        moved = dichotomy_spectrum(conj, window_length=256)
        assert len(base) == len(moved)
        assert base.endpoint_distance(moved) <= 0.02

    def test_conjugated_diagonal_regression(self):
        # Endpoint fidelity, not just interval overlap, for the
        # warm-start scenario of TestWindowExponents.
        h = Horizon(-1024, 1024)
        M = tvspec.constant_sequence(np.diag([math.exp(0.4), math.exp(-0.5)]), h)
        frames = np.linalg.qr(
            np.random.default_rng(1).standard_normal((len(h), 2, 2))
        )[0]
        frames[0] = np.eye(2)
        conj = tvspec.kinematic_conjugate(M, tvspec.explicit_sequence(frames, h))
        est = dichotomy_spectrum(conj, window_length=256)
        ref = dichotomy_spectrum(M, window_length=256)
        assert len(est) == 2
        assert est.endpoint_distance(ref) <= 0.02
