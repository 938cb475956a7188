"""Acceptance suite: one test per criterion, at the declared tolerances.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one PASS/FAIL line
per criterion.  Every tolerance is pinned here, in the test, and each
criterion also enforces its wall-clock budget.

Criterion 5 note: its second clause demands that the sharp log-Sobolev
constant of the end-driven pinned chain grows like N^2 (log-log slope
2 +- 0.1).  That clause is unattainable: the sharp constant is
lambda_max(Sigma)/2, and trace(Sigma) equals the end-to-pin resistance
N * sigma_n^2 / 2 exactly, so lambda_max(Sigma) <= N * sigma_n^2 / 2 grows
at most linearly (measured slope ~0.97).  Only the conservative spectral
bound lambda_max(D)/(2 rho_D) scales like N^2.  The test asserts the
criterion as stated and is expected to fail; see the decisions ledger for
the full analysis.
"""

from __future__ import annotations

import time

import numpy as np
import pytest

from hypoco import (
    DriftSpec,
    GaussianState,
    InteractionGraph,
    build_distortion,
    certify,
    couple,
    decay_study,
    dirichlet_eigenvalue,
    kl_gaussian,
    lsi_constant_quadratic,
    operator_norm_sq,
    propagate,
    quadratic_reduction,
    simulate,
    solve_lyapunov,
    spectral_abscissa,
    spectral_gap,
    verify_lmi,
    w2_gaussian,
)
from conftest import kinetic_diffusion, kinetic_drift, random_stable_pair
from test_chains import pinned_ground_mode, quadratic_chain, quartic_chain


class Budget:
    """Context manager printing the criterion verdict and timing it."""

    def __init__(self, label: str, seconds: float):
        self.label = label
        self.seconds = seconds

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.start
        verdict = "PASS" if exc_type is None else "FAIL"
        print(f"acceptance {self.label}: {verdict} ({elapsed:.2f} s)")
        assert elapsed < self.seconds, f"{self.label}: runtime {elapsed:.2f}s over budget"
        return False


def kinetic_spec() -> DriftSpec:
    return DriftSpec(B=kinetic_drift(), D=kinetic_diffusion())


def test_criterion_01_operator_norm_closed_form():
    # closed form for this drift: gamma^2(t) = (1 + t^2/2 + t sqrt(1+(t/2)^2)) e^{-t}
    with Budget("01 operator-norm closed form", 1.0):
        spec = kinetic_spec()
        ts = np.linspace(0.0, 20.0, 40)
        closed = (1.0 + ts ** 2 / 2.0 + ts * np.sqrt(1.0 + (ts / 2.0) ** 2)) * np.exp(-ts)
        ours = np.array([operator_norm_sq(spec, float(t)) for t in ts])
        rel = np.abs(ours - closed) / closed
        assert np.max(rel) <= 1e-8


def test_criterion_02_long_time_exponent():
    with Budget("02 long-time exponent", 1.0):
        grid = np.linspace(30.0, 60.0, 16)
        study = decay_study(kinetic_spec(), grid, long_window=(30.0, 60.0))
        assert study.long_time_slope == pytest.approx(2.0, abs=0.05)

        # planted triple Jordan block, abscissa 1, elliptic diffusion
        b3 = np.eye(3) + np.diag(np.ones(2), 1)
        spec3 = DriftSpec(B=b3, D=np.eye(3))
        cert = certify(spec3)
        assert cert.rho == pytest.approx(1.0, abs=1e-10)
        assert cert.big_n == 3 and cert.hypoelliptic
        study3 = decay_study(spec3, grid, long_window=(30.0, 60.0))
        assert study3.long_time_slope == pytest.approx(2.0 * (cert.big_n - 1), abs=0.1)


def test_criterion_03_short_time_order():
    with Budget("03 short-time hypoelliptic order", 1.0):
        grid = np.geomspace(1e-3, 1e-2, 16)
        study = decay_study(kinetic_spec(), grid, short_window=(1e-3, 1e-2))
        # bracket count 1 for this drift, so the expected order is 2M+1 = 3
        assert study.short_time_slope == pytest.approx(3.0, abs=0.1)


def test_criterion_04_chain_bounds_and_spectra():
    with Budget("04 chain spectral bounds", 10.0):
        for n in range(3, 201):
            g = InteractionGraph.chain(n, 1.0)
            gap = spectral_gap(g)
            diri = dirichlet_eigenvalue(g, 0)
            assert gap >= 1.0 / (n + 1) ** 2
            assert diri >= 1.0 - np.cos(np.pi / (2.0 * n))
            # trigonometric path-spectrum oracles
            assert gap == pytest.approx(2.0 * (1.0 - np.cos(np.pi / (n + 1))), abs=1e-10)
            assert diri == pytest.approx(2.0 * (1.0 - np.cos(np.pi / (2 * n + 1))), abs=1e-10)


def test_criterion_05_lsi_scaling():
    with Budget("05 log-Sobolev scaling", 10.0):
        ns = np.array([4, 8, 16, 32, 64])
        exact = []
        for n in ns:
            lsi = lsi_constant_quadratic(quadratic_chain(int(n)))
            assert lsi.exact <= lsi.paper_bound + 1e-10
            exact.append(lsi.exact)
        slope = float(np.polyfit(np.log(ns), np.log(exact), 1)[0])
        assert slope == pytest.approx(2.0, abs=0.1), (
            f"sharp-constant slope is {slope:.3f}, not 2: lambda_max(Sigma) of the "
            "end-driven pinned chain grows linearly (trace(Sigma) equals the "
            "end-to-pin resistance N sigma_n^2/2 exactly, so the N^2 clause "
            "cannot hold; see decisions ledger)"
        )


def test_criterion_06_wasserstein_contraction():
    with Budget("06 Wasserstein contraction", 1.0):
        spec = quadratic_reduction(quadratic_chain(5))
        rho_d = spectral_abscissa(spec)
        rng = np.random.default_rng(2718)
        g1 = rng.standard_normal((5, 5))
        g2 = rng.standard_normal((5, 5))
        nu1 = GaussianState(mean=rng.standard_normal(5), cov=g1 @ g1.T)
        nu2 = GaussianState(mean=rng.standard_normal(5), cov=g2 @ g2.T)
        w0 = w2_gaussian(nu1, nu2)
        for t in np.linspace(0.4, 20.0, 20):
            wt = w2_gaussian(propagate(spec, nu1, float(t)), propagate(spec, nu2, float(t)))
            assert wt <= np.exp(-rho_d * t) * w0 * (1.0 + 1e-9)


def test_criterion_07_coupling_estimator():
    with Budget("07 synchronous-coupling estimator", 60.0):
        n = 5
        rho_d = dirichlet_eigenvalue(InteractionGraph.chain(n, 1.0), 0)
        t_final = 10.0 / rho_d
        x0 = pinned_ground_mode(n)
        y0 = np.zeros(n + 1)

        est = couple(quadratic_chain(n, dt=1e-3, seed=7), x0, y0, t_final, n_traj=10_000)
        assert abs(est.rate - rho_d) <= 0.1 * rho_d

        est4 = couple(quartic_chain(n, alpha=0.5, dt=1e-3, seed=7), x0, y0, t_final,
                      n_traj=10_000)
        assert est4.rate >= 0.9 * rho_d


def test_criterion_08_certificates_on_random_specs():
    with Budget("08 Lyapunov and distortion certificates", 5.0):
        rng = np.random.default_rng(31415)
        for _ in range(100):
            d = int(rng.integers(2, 9))
            B, D = random_stable_pair(rng, d)
            spec = DriftSpec(B=B, D=D)
            sigma = solve_lyapunov(spec).cov
            residual = np.linalg.norm(B @ sigma + sigma @ B.T - 2.0 * D) / np.linalg.norm(D)
            assert residual <= 1e-10
            cert = build_distortion(B, 0.3)
            assert abs(verify_lmi(cert.P, B) - cert.kappa) <= 1e-10
            # random drifts are diagonalizable, so the rate reaches the abscissa
            rho = spectral_abscissa(spec)
            assert abs(cert.kappa - rho) <= 1e-8


def test_criterion_09_entropy_decay():
    with Budget("09 entropy decay", 2.0):
        spec = kinetic_spec()
        mu = solve_lyapunov(spec)
        # initial mean along the true eigenvector, so the relative entropy
        # carries no polynomial prefactor and decays at the bare rate 2 rho
        nu0 = GaussianState(mean=[2.0, -1.0], cov=mu.cov)
        ts = np.linspace(0.0, 40.0, 81)
        kls = np.array([kl_gaussian(propagate(spec, nu0, float(t)), mu) for t in ts])
        fit_mask = (ts >= 20.0) & (ts <= 40.0)
        rate = -np.polyfit(ts[fit_mask], np.log(kls[fit_mask]), 1)[0]
        assert rate == pytest.approx(1.0, rel=0.05)
        envelope = (1.0 + ts ** 2) * np.exp(-2.0 * 0.5 * ts)
        ratios = kls / envelope
        assert np.all(np.isfinite(ratios))
        assert np.max(ratios) <= kls[0] * 1.000001


def test_criterion_10_monte_carlo_against_exact_law():
    with Budget("10 ensemble versus exact Gaussian law", 60.0):
        n_traj = 10_000
        config = quadratic_chain(3, seed=424242)
        x0 = np.array([0.0, 1.0, 0.5, -0.25])
        stats = simulate(config, x0, t_final=5.0, n_traj=n_traj)
        spec = quadratic_reduction(config)
        exact = propagate(spec, GaussianState(mean=x0[1:], cov=np.zeros((3, 3))), 5.0)
        emp_mean = stats.mean[-1][1:]
        emp_cov = stats.cov[-1][1:, 1:]
        sig = exact.cov
        se_mean = np.sqrt(np.diag(sig) / n_traj)
        assert np.all(np.abs(emp_mean - exact.mean) <= 3.0 * se_mean)
        se_cov = np.sqrt((np.outer(np.diag(sig), np.diag(sig)) + sig ** 2) / n_traj)
        assert np.all(np.abs(emp_cov - sig) <= 3.0 * se_cov)
