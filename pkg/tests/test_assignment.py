"""Dyadic diagonal targets, window assignment, and the feedback pipeline."""

import math

import numpy as np
import pytest

import tvspec
from tvspec import (
    Horizon,
    apply_feedback,
    assign_spectrum,
    assign_window_transition,
    build_diagonal_sequences,
    check_ucc,
    lyapunov_spectrum,
    triangularize_with_feedback,
)
from tvspec.assignment import TargetSpectrum, verify_against_targets
from tvspec.errors import InputError, SynthesisError
from tvspec.spectrum import SpectrumEstimate

from helpers import companion_pair

H = Horizon(-64, 64)


def jordan_pair(horizon=H):
    A = tvspec.constant_sequence(np.array([[1.0, 1.0], [0.0, 1.0]]), horizon)
    B = tvspec.constant_sequence(np.array([[0.0], [1.0]]), horizon)
    return A, B


class TestTargetSpectrum:
    def test_accepts_sorted_disjoint(self):
        ts = TargetSpectrum(((-1.0, -0.5), (0.0, 0.0), (0.5, 1.0)))
        assert len(ts) == 3
        assert list(ts) == [(-1.0, -0.5), (0.0, 0.0), (0.5, 1.0)]

    def test_rejects_malformed(self):
        with pytest.raises(InputError):
            TargetSpectrum(())
        with pytest.raises(InputError):
            TargetSpectrum(((0.5, 0.0),))
        with pytest.raises(InputError):
            TargetSpectrum(((0.0, 1.0), (0.5, 2.0)))
        with pytest.raises(InputError):
            TargetSpectrum(((1.0, 2.0), (-1.0, 0.0)))
        with pytest.raises(InputError):
            TargetSpectrum(((0.0, math.nan),))


class TestBuildDiagonalSequences:
    def test_degenerate_interval_gives_constant_one(self):
        diag = build_diagonal_sequences(TargetSpectrum(((0.0, 0.0),)), H, 1)
        assert np.allclose(diag.scalars[0].stack(), 1.0)

    def test_unit_interval_block_pattern(self):
        diag = build_diagonal_sequences(TargetSpectrum(((0.0, 1.0),)), H, 1)
        p = diag.scalars[0]
        assert p.at(1)[0, 0] == 1.0
        assert p.at(2)[0, 0] == pytest.approx(math.e)
        assert p.at(3)[0, 0] == pytest.approx(math.e)
        for n in range(4, 8):
            assert p.at(n)[0, 0] == 1.0

    def test_symmetry_is_exact(self):
        diag = build_diagonal_sequences(
            TargetSpectrum(((-0.7, -0.2), (0.1, 0.9))), H, 2
        )
        for p in diag.scalars:
            for n in (1, 2, 5, 13, 33, 64):
                assert p.at(-n)[0, 0] == p.at(n)[0, 0]

    def test_extra_rows_copy_first_family(self):
        diag = build_diagonal_sequences(TargetSpectrum(((-0.5, 0.5),)), H, 3)
        assert diag.dim == 3
        base = diag.scalars[0].stack()
        assert np.array_equal(diag.scalars[1].stack(), base)
        assert np.array_equal(diag.scalars[2].stack(), base)

    def test_validation(self):
        with pytest.raises(InputError):
            build_diagonal_sequences(
                TargetSpectrum(((0.0, 1.0),)), Horizon(-3, 5), 1
            )
        with pytest.raises(InputError):
            build_diagonal_sequences(
                TargetSpectrum(((0.0, 0.1), (0.5, 0.6))), H, 1
            )


class TestAssignWindowTransition:
    def test_fully_actuated_single_step(self):
        A = tvspec.random_bounded_sequence(2, H, seed=1)
        B = tvspec.constant_sequence(np.eye(2), H)
        D = np.diag([1.5, 0.25])
        gains, state_maps = assign_window_transition(
            A, B, 4, np.stack([np.eye(2), D])
        )
        assert np.allclose(gains[0], D - A.at(4), atol=1e-10)
        assert np.allclose(state_maps[1], D, atol=1e-12)

    def test_drift_target_needs_no_gain(self):
        A, B = jordan_pair()
        drift = A.at(1) @ A.at(0)
        partials = np.stack([np.eye(2), A.at(0), drift])
        gains, state_maps = assign_window_transition(A, B, 0, partials)
        assert np.allclose(gains, 0.0, atol=1e-12)
        assert np.allclose(state_maps[2], drift, atol=1e-12)

    def test_jordan_pair_reaches_diagonal_target(self):
        A, B = jordan_pair()
        D = np.diag([math.e, math.e])
        partials = np.stack([np.eye(2), A.at(0), D])
        gains, state_maps = assign_window_transition(A, B, 0, partials)
        assert np.allclose(state_maps[2], D, atol=1e-10)
        # Convert the open-loop gains to feedback and simulate the
        # closed-loop window transition.
        closed = np.eye(2)
        for t in range(2):
            U_t = np.linalg.solve(state_maps[t].T, gains[t].T).T
            closed = (A.at(t) + B.at(t) @ U_t) @ closed
        assert np.allclose(closed, D, atol=1e-10)

    def test_no_null_freedom_is_reported(self):
        # K * input_dim == dim leaves no gain freedom, so an impossible
        # conditioning demand must fail loudly and name the window.
        A, B = jordan_pair()
        D = np.diag([math.e, math.e])
        partials = np.stack([np.eye(2), A.at(0), D])
        with pytest.raises(SynthesisError) as info:
            assign_window_transition(A, B, 0, partials, cond_threshold=1.0)
        assert info.value.window == 0

    def test_window_length_validation(self):
        A, B = jordan_pair()
        with pytest.raises(InputError):
            assign_window_transition(A, B, 0, np.eye(2)[None])


class TestTriangularize:
    def test_fully_actuated_matches_target_exactly(self):
        A = tvspec.random_bounded_sequence(2, H, seed=3)
        B = tvspec.constant_sequence(np.eye(2), H)
        diag = build_diagonal_sequences(
            TargetSpectrum(((0.0, 0.0), (1.0, 1.0))), H, 2
        )
        U, C, T = triangularize_with_feedback(A, B, diag)
        assert U.horizon == H
        assert np.allclose(U.stack(), C.stack() - A.stack(), atol=1e-12)
        closed = apply_feedback(A, B, U)
        assert np.allclose(closed.stack(), C.stack(), atol=1e-12)
        # Exact window matching means the transform is the identity.
        assert np.allclose(T.stack(), np.eye(2), atol=1e-12)

    def test_identity_pair_constant_diagonal(self):
        A = tvspec.constant_sequence(np.eye(2), H)
        B = tvspec.constant_sequence(np.eye(2), H)
        diag = build_diagonal_sequences(TargetSpectrum(((1.0, 1.0),)), H, 2)
        U, C, T = triangularize_with_feedback(A, B, diag)
        closed = apply_feedback(A, B, U)
        assert np.allclose(closed.stack(), math.e * np.eye(2), atol=1e-12)

    def test_equivalence_identity_on_single_input_pair(self):
        A, B = jordan_pair()
        diag = build_diagonal_sequences(TargetSpectrum(((-0.5, 0.0),)), H, 2)
        U, C, T = triangularize_with_feedback(A, B, diag)
        assert T.horizon == Horizon(H.n_min, H.n_max + 1)
        assert np.array_equal(T.at(H.n_max + 1), np.eye(2))
        closed = apply_feedback(A, B, U)
        scale = max(closed.sup_norm() * T.sup_norm(), 1.0)
        for n in range(H.n_min, H.n_max + 1):
            residual = closed.at(n) @ T.at(n) - T.at(n + 1) @ C.at(n)
            assert np.abs(residual).max() <= 1e-8 * scale

    def test_diagonal_fidelity_is_bit_exact(self):
        A, B = jordan_pair()
        diag = build_diagonal_sequences(TargetSpectrum(((-0.5, 0.0),)), H, 2)
        _, C, _ = triangularize_with_feedback(
            A, B, diag, off_diag_scale=1.5, off_diag_seed=4
        )
        stack = C.stack()
        for i, p in enumerate(diag.scalars):
            assert np.array_equal(stack[:, i, i], p.stack()[:, 0, 0])
        fills = stack[:, 0, 1]
        assert np.abs(fills).max() <= 1.5
        assert np.abs(fills).max() > 0.0

    def test_diagnostics_and_horizons(self):
        A, B = jordan_pair()
        cert = check_ucc(A, B)
        diag = build_diagonal_sequences(TargetSpectrum(((0.0, 0.0),)), H, 2)
        maps = triangularize_with_feedback(A, B, diag, certificate=cert)
        info = maps.diagnostics
        assert info["window_length"] == cert.K
        assert info["merged_windows"] == 0
        assert info["num_windows"] >= 1
        assert math.isfinite(info["feedback_sup_norm"])
        assert tvspec.validate_lyapunov(apply_feedback(A, B, maps.U)).ok

    def test_non_ucc_rejected(self):
        A = tvspec.constant_sequence(np.eye(2), H)
        B = tvspec.constant_sequence(np.zeros((2, 1)), H)
        diag = build_diagonal_sequences(TargetSpectrum(((0.0, 0.0),)), H, 2)
        with pytest.raises(SynthesisError):
            triangularize_with_feedback(A, B, diag)

    def test_horizon_mismatch_rejected(self):
        A, B = jordan_pair()
        other = Horizon(-32, 32)
        diag = build_diagonal_sequences(TargetSpectrum(((0.0, 0.0),)), other, 2)
        with pytest.raises(InputError):
            triangularize_with_feedback(A, B, diag)


class TestVerifyAgainstTargets:
    def test_count_mismatch_is_infinite_error(self):
        est = SpectrumEstimate(((0.0, 1.0),))
        ok, err = verify_against_targets(
            est, TargetSpectrum(((0.0, 0.4), (0.6, 1.0))), 0.05
        )
        assert not ok and err == math.inf

    def test_endpoint_error_measured(self):
        est = SpectrumEstimate(((0.01, 0.99),))
        ok, err = verify_against_targets(est, TargetSpectrum(((0.0, 1.0),)), 0.05)
        assert ok and err == pytest.approx(0.01)
        ok, _ = verify_against_targets(est, TargetSpectrum(((0.0, 1.0),)), 0.005)
        assert not ok


class TestAssignSpectrum:
    def test_scalar_point_target(self):
        h = Horizon(-512, 512)
        A = tvspec.constant_sequence(np.array([[2.0]]), h)
        B = tvspec.constant_sequence(np.array([[1.0]]), h)
        res = assign_spectrum(A, B, ((0.0, 0.0),), window_length=128)
        assert res.passed
        assert res.endpoint_error <= 0.05
        assert res.diagnostics["closed_loop_lyapunov_ok"]
        closed = apply_feedback(A, B, res.U)
        assert np.allclose(closed.stack(), 1.0, atol=1e-10)

    def test_fully_actuated_two_intervals(self):
        h = Horizon(-2048, 2048)
        A = tvspec.random_bounded_sequence(2, h, seed=6)
        B = tvspec.constant_sequence(np.eye(2), h)
        res = assign_spectrum(A, B, ((-1.0, -0.5), (0.5, 1.0)), window_length=512)
        assert res.passed
        assert res.endpoint_error <= 0.05
        assert len(res.estimate) == 2

    def test_point_target_matches_lyapunov_chain(self):
        h = Horizon(-2048, 2048)
        A, B = companion_pair(2, h, seed=7)
        res = assign_spectrum(A, B, ((0.3, 0.3),), window_length=512, rng_seed=2)
        assert res.passed
        closed = apply_feedback(A, B, res.U)
        exps = lyapunov_spectrum(closed)
        assert np.abs(exps - 0.3).max() <= 0.05

    def test_off_diagonal_fill_does_not_move_spectrum(self):
        h = Horizon(-1024, 1024)
        A = tvspec.random_bounded_sequence(2, h, seed=8)
        B = tvspec.constant_sequence(np.eye(2), h)
        targets = ((0.0, 0.0), (1.0, 1.0))
        plain = assign_spectrum(A, B, targets, window_length=256)
        filled = assign_spectrum(
            A, B, targets, window_length=256, off_diag_scale=2.0, off_diag_seed=9
        )
        assert plain.passed and filled.passed
        assert plain.estimate.endpoint_distance(filled.estimate) <= 0.05

    def test_non_ucc_raises(self):
        A = tvspec.constant_sequence(np.eye(2), H)
        B = tvspec.constant_sequence(np.zeros((2, 1)), H)
        with pytest.raises(SynthesisError):
            assign_spectrum(A, B, ((0.0, 0.0),), window_length=16)

    def test_result_serializes(self):
        h = Horizon(-512, 512)
        A = tvspec.constant_sequence(np.array([[2.0]]), h)
        B = tvspec.constant_sequence(np.array([[1.0]]), h)
        res = assign_spectrum(A, B, ((0.0, 0.0),), window_length=128)
        data = res.to_dict()
        assert data["passed"] is True
        assert data["targets"]["intervals"] == [[0.0, 0.0]]
        assert data["certificate"]["ok"] is True
        assert data["estimate"]["intervals"]
