import math

import numpy as np
import numpy.testing as npt
import pytest

from pls_lab.errors import ConsistencyError
from pls_lab.linalg import Matrix2, eig2x2, spectral_radius2
from pls_lab.rng import SeededRng
from pls_lab.stability import (
    accsgd_nominal_eigenvalues,
    accsgd_rate_window,
    accsgd_stability,
    accsgd_system,
    amsgrad_discriminant,
    amsgrad_rate_window,
    amsgrad_system,
    common_certificate,
    lyapunov_verdict,
    sgd_factor,
    sgd_rate_window,
    simulate_factors,
    simulate_system,
    sqrt_vhat_representatives,
)


class TestSgdWindow:
    def test_substitution(self):
        assert sgd_rate_window(2.0, 0.5) == (0.25, 0.5)

    def test_widest_window_near_rate_one(self):
        lo, hi = sgd_rate_window(4.0, 1.0 - 1e-12)
        npt.assert_allclose(lo, 0.0, atol=1e-12)
        assert hi == 0.25

    def test_inside_window_contracts_at_rate(self):
        report = simulate_factors([sgd_factor(0.4, 2.0)] * 100, 1.0, 0.5)
        assert report.max_ratio <= 1.0 + 1e-12
        assert report.stable

    def test_above_window_still_contracts_but_excluded(self):
        # step 0.6 with curvature 2: factor -0.2, outside the one-sided
        # window yet contracting with radius 0.2
        lo, hi = sgd_rate_window(2.0, 0.5)
        eta = 0.6
        assert not (lo <= eta <= hi)
        factor = sgd_factor(eta, 2.0)
        npt.assert_allclose(abs(factor), 0.2, rtol=1e-12)
        assert simulate_factors([factor] * 100, 1.0, 0.5).max_ratio <= 1.0

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            sgd_rate_window(0.0, 0.5)
        with pytest.raises(ValueError):
            sgd_rate_window(1.0, 1.5)


class TestAmsgradSystem:
    def test_window_values(self):
        lo, hi = amsgrad_rate_window(0.9, 1.0, 1.0)
        npt.assert_allclose(lo, 0.026334, atol=1e-6)
        npt.assert_allclose(hi, 37.9737, atol=1e-4)

    def test_window_collapses_as_beta_vanishes(self):
        lo, hi = amsgrad_rate_window(1e-12, 2.0, 4.0)
        npt.assert_allclose(lo, 0.5, rtol=1e-5)
        npt.assert_allclose(hi, 0.5, rtol=1e-5)

    def test_two_window_forms_agree(self):
        rng = SeededRng(3)
        for _ in range(1000):
            beta = rng.uniform(0.01, 0.99)
            s = math.sqrt(beta)
            npt.assert_allclose((1 - s) / (1 + s), (1 - s) ** 2 / (1 - beta), rtol=1e-12)
            npt.assert_allclose((1 + s) / (1 - s), (1 + s) ** 2 / (1 - beta), rtol=1e-12)

    def test_radius_is_sqrt_beta_inside_window(self):
        rng = SeededRng(4)
        for _ in range(2000):
            beta = rng.uniform(0.01, 0.99)
            sqrt_vhat = rng.uniform(0.1, 10.0)
            L = rng.uniform(0.1, 10.0)
            lo, hi = amsgrad_rate_window(beta, sqrt_vhat, L)
            eta = lo + (hi - lo) * rng.uniform(0.05, 0.95)
            a = amsgrad_system(beta, eta, L, sqrt_vhat)
            assert abs(spectral_radius2(a) - math.sqrt(beta)) <= 1e-9

    def test_characteristic_polynomial_at_roots(self):
        rng = SeededRng(5)
        for _ in range(2000):
            beta = rng.uniform(0.01, 0.99)
            sqrt_vhat = rng.uniform(0.1, 10.0)
            L = rng.uniform(0.1, 10.0)
            eta = rng.uniform(0.0, 5.0)
            a = amsgrad_system(beta, eta, L, sqrt_vhat)
            s = 1.0 + beta - (1.0 - beta) * eta * L / sqrt_vhat
            for lam in eig2x2(a):
                assert abs(lam * lam - s * lam + beta) <= 1e-9

    def test_discriminant_vanishes_on_boundaries(self):
        rng = SeededRng(6)
        for _ in range(1000):
            beta = rng.uniform(0.01, 0.99)
            sqrt_vhat = rng.uniform(0.1, 10.0)
            L = rng.uniform(0.1, 10.0)
            lo, hi = amsgrad_rate_window(beta, sqrt_vhat, L)
            assert abs(amsgrad_discriminant(beta, lo, L, sqrt_vhat)) <= 1e-9
            assert abs(amsgrad_discriminant(beta, hi, L, sqrt_vhat)) <= 1e-9

    def test_degenerate_beta_rejected(self):
        with pytest.raises(ValueError):
            amsgrad_rate_window(0.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            amsgrad_rate_window(1.0, 1.0, 1.0)


class TestLyapunovVerdict:
    def test_stable_just_above_radius(self):
        beta = 0.9
        lo, hi = amsgrad_rate_window(beta, 1.0, 1.0)
        a = amsgrad_system(beta, (lo + hi) / 2.0, 1.0, 1.0)
        verdict = lyapunov_verdict(a, math.sqrt(beta) + 1e-6)
        assert verdict.stable
        assert verdict.lyapunov_p is not None
        assert verdict.cond_p >= 1.0

    def test_identity_unstable(self):
        verdict = lyapunov_verdict(Matrix2.identity(), 0.99)
        assert not verdict.stable
        assert verdict.lyapunov_p is None
        assert verdict.cond_p is None

    def test_verdict_mirrors_spectral_radius(self):
        rng = SeededRng(7)
        for _ in range(2000):
            m = Matrix2(*rng.uniform_array(4, -1.0, 1.0))
            rho = rng.uniform(0.05, 1.3)
            if abs(spectral_radius2(m) - rho) <= 1e-9:
                continue
            verdict = lyapunov_verdict(m, rho)
            assert verdict.stable == (verdict.spectral_radius < rho)


class TestAccsgdSystem:
    def test_nominal_pair_values(self):
        lam = accsgd_nominal_eigenvalues(1000.0, 10.0, 0.5, 1.0)
        npt.assert_allclose(lam[0], 0.9951, rtol=1e-12)
        npt.assert_allclose(lam[1], 0.496524, atol=1e-6)

    def test_window_negative_lower_bound(self):
        lo, hi = accsgd_rate_window(1000.0, 10.0, 1.0, 0.996)
        npt.assert_allclose(lo, -0.002972, atol=1e-6)
        assert hi == 1.0

    def test_rate_below_alpha_never_stable(self):
        alpha = accsgd_nominal_eigenvalues(1000.0, 10.0, 0.5, 1.0)[0]
        verdict = accsgd_stability(1000.0, 10.0, 0.5, 1.0, rho=alpha - 1e-6)
        assert not verdict.alpha_ok
        assert not verdict.stable

    def test_verdict_equals_nominal_pair_in_rate_disk(self):
        rng = SeededRng(8)
        checked = 0
        while checked < 2000:
            kappa = rng.uniform(1.0, 2000.0)
            xi = rng.uniform(0.1, math.sqrt(kappa))
            L = rng.uniform(0.1, 10.0)
            eta = rng.uniform(-0.5, 1.5) / L
            rho = rng.uniform(0.05, 0.999)
            lam = accsgd_nominal_eigenvalues(kappa, xi, eta, L)
            margins = [abs(lam[0] - rho), abs(lam[1] - rho), abs(lam[1]), abs(lam[0])]
            if min(margins) <= 1e-9:
                continue
            verdict = accsgd_stability(kappa, xi, eta, L, rho)
            expected = (0.0 < lam[0] < rho) and (0.0 < lam[1] < rho)
            assert verdict.stable == expected
            checked += 1

    def test_nominal_pair_is_not_the_true_spectrum(self):
        # the nominal pair reproduces det exactly; the trace differs by
        # b*(1-alpha)*(1-a*eta*L), so the true eigenvalues are different
        kappa, xi, eta, L = 1000.0, 10.0, 0.5, 1.0
        b = accsgd_system(kappa, xi, eta, L)
        lam_nom = accsgd_nominal_eigenvalues(kappa, xi, eta, L)
        npt.assert_allclose(b.det(), lam_nom[0] * lam_nom[1], rtol=1e-12)
        assert abs(b.trace() - (lam_nom[0] + lam_nom[1])) > 1e-3
        true_radius = spectral_radius2(b)
        assert abs(true_radius - max(lam_nom)) > 1e-2
        npt.assert_allclose(true_radius, 0.9438357494355838, rtol=1e-9)

    def test_matrix_matches_update_dynamics(self):
        # iterating the state matrix reproduces the actual optimizer update
        # under a linearized gradient
        from pls_lab.optimizers import AccsgdState, accsgd_coefficients

        kappa, xi, eta, L, x_star = 3.0, 1.2, 0.3, 2.0, 0.7
        alpha, a, bb = accsgd_coefficients(kappa, xi)
        st = AccsgdState(np.array([1.3]), alpha, a, bb)
        x = np.array([1.9])
        z = np.array([st.m[0] - x_star, x[0] - x_star])
        m2 = accsgd_system(kappa, xi, eta, L).as_array()
        for _ in range(5):
            x = st.step(x, L * (x - x_star), eta)
            z = m2 @ z
            npt.assert_allclose(z, [st.m[0] - x_star, x[0] - x_star], rtol=1e-10)


class TestSimulation:
    def test_constant_half_rate_within_envelope(self):
        m = Matrix2.diagonal(0.25, 0.25)
        report = simulate_system([m] * 50, np.array([1.0, 1.0]), 0.5)
        assert report.max_ratio <= 1.0 + 1e-12
        assert report.stable

    def test_zero_start_stays_zero(self):
        report = simulate_system([Matrix2.identity()] * 10, np.zeros(2), 0.9)
        assert report.max_ratio == 0.0

    def test_overflow_reported_unstable(self):
        report = simulate_factors([3.0] * 400, 1.0, 0.9)
        assert report.overflowed
        assert not report.stable

    def test_certificate_bound_honored(self):
        m = Matrix2(0.4, 0.2, -0.1, 0.3)
        verdict = lyapunov_verdict(m, 0.8)
        report = simulate_system([m] * 100, np.array([1.0, -1.0]), 0.8,
                                 verdict.lyapunov_p)
        assert report.bound == pytest.approx(math.sqrt(verdict.cond_p))
        assert report.within_bound

    def test_time_varying_moment_schedule_falls_back_to_radii(self):
        # beta1 decaying as 0.9/t with each step's rate in its own window;
        # at rho = sqrt(0.9) the first step sits exactly on the boundary, so
        # no common certificate exists and per-step radii carry the story
        rho = math.sqrt(0.9)
        mats = []
        for t in range(1, 51):
            beta = 0.9 / t
            lo, hi = amsgrad_rate_window(beta, 1.0, 2.0)
            mats.append(amsgrad_system(beta, (lo + hi) / 2.0, 2.0, 1.0))
        cert = common_certificate(mats, rho)
        assert not cert.valid_for_all
        assert len(cert.per_step_radii) == 50
        assert all(r <= rho + 1e-9 for r in cert.per_step_radii)
        npt.assert_allclose(cert.per_step_radii[0], rho, atol=1e-9)
        # the envelope still tracks rho^t decay within a bounded constant
        report = simulate_system(mats, np.array([1.0, 1.0]), rho, None)
        assert not report.overflowed
        assert report.max_ratio < 20.0

    def test_common_certificate_validates_stationary_sequence(self):
        lo, hi = amsgrad_rate_window(0.9, 1.0, 2.0)
        m = amsgrad_system(0.9, (lo + hi) / 2.0, 2.0, 1.0)
        rho = math.sqrt(0.9) + 1e-6
        cert = common_certificate([m] * 30, rho)
        assert cert.valid_for_all
        assert cert.cond_p >= 1.0
        report = simulate_system([m] * 30, np.array([1.0, -0.5]), rho, cert.p)
        assert report.within_bound

    def test_vhat_representatives(self):
        reps = sqrt_vhat_representatives(np.array([4.0, 9.0, 16.0]))
        assert reps == {"min": 2.0, "mean": pytest.approx(3.0), "max": 4.0}
        with pytest.raises(ValueError):
            sqrt_vhat_representatives(np.array([-1.0]))
