"""Exact Gaussian computations: Lyapunov, propagation, W2, KL, operator norms."""

from __future__ import annotations

import numpy as np
import pytest

from hypoco import (
    DriftSpec,
    GaussianState,
    InvalidArgumentError,
    UnstableDriftError,
    decay_study,
    kl_gaussian,
    matrix_exponential,
    operator_norm_sq,
    propagate,
    solve_lyapunov,
    w2_gaussian,
)
from conftest import random_stable_pair


def lyapunov_kron_oracle(B: np.ndarray, D: np.ndarray) -> np.ndarray:
    """Independent vectorized solve of B X + X B^T = 2 D."""
    d = B.shape[0]
    A = np.kron(np.eye(d), B) + np.kron(B, np.eye(d))
    x = np.linalg.solve(A, (2.0 * D).reshape(-1))
    return x.reshape(d, d)


class TestMatrixExponential:
    def test_zero(self):
        assert np.allclose(matrix_exponential(np.zeros((3, 3))), np.eye(3), atol=1e-15)

    def test_diagonal(self):
        E = matrix_exponential(np.diag([1.0, 2.0]))
        assert np.allclose(E, np.diag([np.e, np.e ** 2]), rtol=1e-13)

    def test_rotation(self):
        theta = np.pi / 2
        A = np.array([[0.0, -theta], [theta, 0.0]])
        R = np.array([[0.0, -1.0], [1.0, 0.0]])  # rotation by pi/2
        assert np.max(np.abs(matrix_exponential(A) - R)) < 1e-12


class TestSolveLyapunov:
    def test_isotropic(self):
        state = solve_lyapunov(DriftSpec(B=np.eye(2), D=np.eye(2)))
        assert np.allclose(state.cov, np.eye(2), atol=1e-13)
        assert np.all(state.mean == 0.0)

    def test_shear_drift_hand_solve(self):
        B = np.array([[1.0, 1.0], [0.0, 1.0]])
        state = solve_lyapunov(DriftSpec(B=B, D=np.eye(2)))
        hand = np.array([[1.5, -0.5], [-0.5, 1.0]])
        assert np.allclose(state.cov, hand, atol=1e-12)
        assert np.allclose(state.cov, lyapunov_kron_oracle(B, np.eye(2)), atol=1e-12)

    def test_decoupled_scalars(self):
        state = solve_lyapunov(DriftSpec(B=np.diag([1.0, 2.0]), D=np.eye(2)))
        assert np.allclose(state.cov, np.diag([1.0, 0.5]), atol=1e-13)

    def test_rejects_unstable_drift(self):
        with pytest.raises(UnstableDriftError):
            solve_lyapunov(DriftSpec(B=np.diag([1.0, -0.1]), D=np.eye(2)))

    def test_residual_on_random_stable_pairs(self):
        rng = np.random.default_rng(21)
        for _ in range(100):
            d = int(rng.integers(2, 9))
            B, D = random_stable_pair(rng, d)
            spec = DriftSpec(B=B, D=D)
            sigma = solve_lyapunov(spec).cov
            res = np.linalg.norm(B @ sigma + sigma @ B.T - 2.0 * D) / np.linalg.norm(D)
            assert res <= 1e-10


class TestPropagate:
    def test_time_zero_is_identity(self, kinetic_spec):
        init = GaussianState(mean=[1.0, -2.0], cov=np.diag([0.5, 2.0]))
        out = propagate(kinetic_spec, init, 0.0)
        assert np.array_equal(out.mean, init.mean)
        assert np.array_equal(out.cov, init.cov)

    def test_scalar_closed_form(self):
        spec = DriftSpec(B=np.eye(2), D=np.eye(2))
        init = GaussianState(mean=[1.0, 0.0], cov=np.zeros((2, 2)))
        for t in (0.1, 0.7, 2.0):
            out = propagate(spec, init, t)
            assert np.allclose(out.mean, [np.exp(-t), 0.0], rtol=1e-12, atol=1e-15)
            assert np.allclose(out.cov, (1.0 - np.exp(-2 * t)) * np.eye(2), rtol=1e-11)

    def test_long_time_reaches_invariant_law(self, kinetic_spec):
        init = GaussianState(mean=[3.0, -1.0], cov=np.diag([2.0, 0.1]))
        out = propagate(kinetic_spec, init, 50.0)
        target = solve_lyapunov(kinetic_spec)
        assert np.max(np.abs(out.cov - target.cov)) < 1e-8
        assert np.max(np.abs(out.mean)) < 1e-8

    def test_semigroup_property(self):
        rng = np.random.default_rng(33)
        for _ in range(20):
            d = int(rng.integers(2, 6))
            B, D = random_stable_pair(rng, d)
            spec = DriftSpec(B=B, D=D)
            G = rng.standard_normal((d, d))
            init = GaussianState(mean=rng.standard_normal(d), cov=G @ G.T)
            s, t = rng.uniform(0.05, 1.5, 2)
            two_step = propagate(spec, propagate(spec, init, s), t)
            one_step = propagate(spec, init, s + t)
            assert np.max(np.abs(two_step.mean - one_step.mean)) < 1e-9
            assert np.max(np.abs(two_step.cov - one_step.cov)) < 1e-9

    def test_rejects_negative_time(self, kinetic_spec):
        init = GaussianState(mean=[0.0, 0.0], cov=np.eye(2))
        with pytest.raises(InvalidArgumentError):
            propagate(kinetic_spec, init, -0.5)


class TestW2:
    def test_identical_states(self):
        a = GaussianState(mean=[1.0, 2.0], cov=np.array([[2.0, 0.3], [0.3, 1.0]]))
        assert w2_gaussian(a, a) < 1e-7

    def test_pure_translation(self):
        a = GaussianState(mean=[0.0, 0.0], cov=np.eye(2))
        b = GaussianState(mean=[3.0, 4.0], cov=np.eye(2))
        assert w2_gaussian(a, b) == pytest.approx(5.0, rel=1e-12)

    def test_one_dimensional_scale(self):
        a = GaussianState(mean=[0.0], cov=[[1.0]])
        b = GaussianState(mean=[0.0], cov=[[4.0]])
        # 1-d formula |sigma_1 - sigma_2|
        assert w2_gaussian(a, b) == pytest.approx(1.0, rel=1e-10)

    def test_symmetry_and_triangle_inequality(self):
        rng = np.random.default_rng(5)
        for _ in range(40):
            d = int(rng.integers(1, 5))
            states = []
            for _ in range(3):
                G = rng.standard_normal((d, d))
                states.append(GaussianState(mean=rng.standard_normal(d), cov=G @ G.T))
            a, b, c = states
            assert abs(w2_gaussian(a, b) - w2_gaussian(b, a)) < 1e-9
            assert w2_gaussian(a, c) <= w2_gaussian(a, b) + w2_gaussian(b, c) + 1e-9


class TestKL:
    def test_identical_states(self):
        a = GaussianState(mean=[0.5, -1.0], cov=np.array([[1.0, 0.2], [0.2, 2.0]]))
        assert kl_gaussian(a, a) == pytest.approx(0.0, abs=1e-14)

    def test_mean_shift(self):
        m = np.array([1.0, -2.0, 0.5])
        a = GaussianState(mean=m, cov=np.eye(3))
        b = GaussianState(mean=np.zeros(3), cov=np.eye(3))
        assert kl_gaussian(a, b) == pytest.approx(0.5 * float(m @ m), rel=1e-12)

    def test_one_dimensional_variance(self):
        a = GaussianState(mean=[0.0], cov=[[2.0]])
        b = GaussianState(mean=[0.0], cov=[[1.0]])
        expected = 0.5 * (2.0 - 1.0 - np.log(2.0))
        assert kl_gaussian(a, b) == pytest.approx(expected, rel=1e-12)
        assert kl_gaussian(a, b) == pytest.approx(0.153426, abs=1e-6)

    def test_nonnegative_and_faithful(self):
        rng = np.random.default_rng(17)
        for _ in range(40):
            d = int(rng.integers(1, 5))
            Ga = rng.standard_normal((d, d))
            Gb = rng.standard_normal((d, d))
            a = GaussianState(mean=rng.standard_normal(d), cov=Ga @ Ga.T + 0.1 * np.eye(d))
            b = GaussianState(mean=rng.standard_normal(d), cov=Gb @ Gb.T + 0.1 * np.eye(d))
            assert kl_gaussian(a, b) >= 0.0
            if not np.allclose(a.mean, b.mean) or not np.allclose(a.cov, b.cov):
                assert kl_gaussian(a, b) > 0.0

    def test_rejects_singular_reference(self):
        a = GaussianState(mean=[0.0, 0.0], cov=np.eye(2))
        b = GaussianState(mean=[0.0, 0.0], cov=np.diag([1.0, 0.0]))
        with pytest.raises(InvalidArgumentError):
            kl_gaussian(a, b)


class TestOperatorNorm:
    def test_time_zero_is_one(self, kinetic_spec):
        assert operator_norm_sq(kinetic_spec, 0.0) == pytest.approx(1.0, abs=1e-12)

    def test_kinetic_pair_closed_form_at_two(self, kinetic_spec):
        expected = (1.0 + 2.0 + 2.0 * np.sqrt(2.0)) * np.exp(-2.0)
        assert operator_norm_sq(kinetic_spec, 2.0) == pytest.approx(expected, rel=1e-10)
        assert expected == pytest.approx(0.788792, abs=1e-6)

    def test_isotropic_is_pure_exponential(self):
        spec = DriftSpec(B=np.eye(2), D=np.eye(2))
        for t in (0.3, 1.0, 4.0):
            assert operator_norm_sq(spec, t) == pytest.approx(np.exp(-2.0 * t), rel=1e-11)

    def test_contractivity_on_random_specs(self, kinetic_spec):
        rng = np.random.default_rng(29)
        specs = [kinetic_spec]
        for _ in range(15):
            d = int(rng.integers(2, 6))
            B, D = random_stable_pair(rng, d)
            specs.append(DriftSpec(B=B, D=D))
        for spec in specs:
            for t in np.linspace(0.0, 5.0, 11):
                g = operator_norm_sq(spec, float(t))
                assert 0.0 < g <= 1.0 + 1e-12

    def test_rejects_non_hypoelliptic(self):
        spec = DriftSpec(B=np.eye(2), D=np.diag([1.0, 0.0]))
        with pytest.raises(InvalidArgumentError):
            operator_norm_sq(spec, 1.0)


class TestDecayStudy:
    def test_isotropic_long_slope_vanishes(self):
        spec = DriftSpec(B=np.eye(2), D=np.eye(2))
        study = decay_study(spec, np.linspace(1.0, 30.0, 16))
        assert abs(study.long_time_slope) < 1e-6

    def test_kinetic_pair_slopes(self, kinetic_spec):
        long = decay_study(kinetic_spec, np.linspace(30.0, 60.0, 16))
        assert long.long_time_slope == pytest.approx(2.0, abs=0.05)
        short = decay_study(kinetic_spec, np.geomspace(1e-3, 1e-2, 16))
        assert short.short_time_slope == pytest.approx(3.0, abs=0.1)

    def test_rejects_tiny_grids(self, kinetic_spec):
        with pytest.raises(InvalidArgumentError):
            decay_study(kinetic_spec, np.linspace(1.0, 2.0, 5))

    def test_rejects_degenerate_window(self, kinetic_spec):
        with pytest.raises(InvalidArgumentError):
            decay_study(kinetic_spec, np.linspace(1.0, 30.0, 16), long_window=(100.0, 200.0))


class TestGaussianStateValidation:
    def test_rejects_asymmetric_cov(self):
        with pytest.raises(InvalidArgumentError):
            GaussianState(mean=[0.0, 0.0], cov=[[1.0, 0.5], [0.0, 1.0]])

    def test_rejects_indefinite_cov(self):
        with pytest.raises(InvalidArgumentError):
            GaussianState(mean=[0.0], cov=[[-1.0]])

    def test_json_round_trip(self):
        a = GaussianState(mean=[1.0, 2.0], cov=np.diag([0.5, 3.0]))
        again = GaussianState.from_json(a.to_json())
        assert np.array_equal(again.mean, a.mean)
        assert np.array_equal(again.cov, a.cov)
