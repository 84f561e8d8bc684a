import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqoed.errors import ConvergenceError, DomainError
from seqoed.vle import (
    AntoineParams,
    InputPoint,
    ParamVector,
    antoine_pressure,
    boiling_temperature,
    nrtl_gamma,
)
from conftest import draw_feasible_thetas

PROPANOL = AntoineParams("propanol", 4.65413, 1292.869, -91.992)
ACETATE = AntoineParams("propyl acetate", 3.84871, 1088.392, -90.571)


class TestAntoine:
    def test_boiling_point_round_trip(self):
        # closed-form inversion at 1 bar, then forward evaluation
        T = boiling_temperature(1e5, PROPANOL)
        assert T == pytest.approx(369.78, abs=0.01)
        assert antoine_pressure(T, PROPANOL) == pytest.approx(1e5, rel=1e-3)

    def test_pole_is_a_domain_error(self):
        with pytest.raises(DomainError):
            antoine_pressure(91.992, PROPANOL)

    def test_nonpositive_temperature_rejected(self):
        with pytest.raises(DomainError):
            antoine_pressure(-10.0, PROPANOL)

    @pytest.mark.parametrize("comp", [PROPANOL, ACETATE])
    def test_monotone_on_operating_window(self, comp):
        T = np.linspace(300.0, 450.0, 400)
        P = antoine_pressure(T, comp)
        assert np.all(np.diff(P) > 0)

    def test_pole_inside_window_rejected(self):
        with pytest.raises(DomainError):
            AntoineParams("bad", 4.0, 1000.0, -350.0)

    def test_negative_b_rejected(self):
        with pytest.raises(DomainError):
            AntoineParams("bad", 4.0, -1.0, -90.0)


class TestNrtlGamma:
    @given(
        a12=st.floats(-5, 5),
        a21=st.floats(-5, 5),
        b12=st.floats(-1500, 1500),
        b21=st.floats(-1500, 1500),
        c12=st.floats(0.01, 0.6),
        T=st.floats(300, 450),
    )
    @settings(max_examples=60, deadline=None)
    def test_pure_component_limits(self, a12, a21, b12, b21, c12, T):
        theta = (a12, a21, b12, b21, c12)
        g1, _ = nrtl_gamma(1.0, T, theta)
        _, g2 = nrtl_gamma(0.0, T, theta)
        assert abs(g1 - 1.0) < 1e-12
        assert abs(g2 - 1.0) < 1e-12

    def test_infinite_dilution_limit(self):
        # analytic limit: ln gamma1 -> tau21 + tau12 * exp(-alpha * tau12)
        theta = (0.5, -0.3, 100.0, 200.0, 0.3)
        T = 370.0
        tau12 = 0.5 + 100.0 / T
        tau21 = -0.3 + 200.0 / T
        expected = np.exp(tau21 + tau12 * np.exp(-0.3 * tau12))
        g1, _ = nrtl_gamma(1e-12, T, theta)
        assert g1 == pytest.approx(expected, rel=1e-6)

    def test_positive_and_continuous(self):
        theta = (1.0, -1.0, 300.0, -200.0, 0.3)
        l = np.linspace(0, 1, 101)
        g1, g2 = nrtl_gamma(l, 380.0, theta)
        assert np.all(g1 > 0) and np.all(g2 > 0)
        assert np.max(np.abs(np.diff(g1))) < 0.1

    def test_domain_checks(self):
        with pytest.raises(DomainError):
            nrtl_gamma(1.2, 370.0, (0, 0, 0, 0, 0.3))
        with pytest.raises(DomainError):
            nrtl_gamma(0.5, -1.0, (0, 0, 0, 0, 0.3))


class TestBubblePoint:
    def test_pure_component_reduces_to_antoine(self, model, theta_tot):
        out = model.bubble_point((1.0, 1e5), theta_tot)
        assert out.v == pytest.approx(1.0, abs=1e-12)
        assert out.T == pytest.approx(boiling_temperature(1e5, PROPANOL), abs=1e-8)

    def test_measured_center_point(self, model, theta_tot):
        # instrument floor is sigma_v=0.0015, sigma_T=0.03; allow model-data gap
        out = model.bubble_point((0.4466, 199950.0), theta_tot)
        assert abs(out.v - 0.5257) <= 0.01
        assert abs(out.T - 389.12) <= 0.3

    def test_residual_postcondition(self, model, theta_tot):
        for l, P in [(0.1, 1e5), (0.5, 2e5), (0.9, 2.9e5), (0.33, 1.7e5)]:
            out = model.bubble_point((l, P), theta_tot)
            g1, g2 = model.activity_coefficients(l, out.T, theta_tot)
            resid = (
                antoine_pressure(out.T, model.component1) * g1 * l
                + antoine_pressure(out.T, model.component2) * g2 * (1 - l)
                - P
            )
            assert abs(resid) / P < 1e-10
            assert 0.0 <= out.v <= 1.0

    def test_no_sign_change_raises(self, model):
        # gigantic positive deviation pushes the bubble point below the bracket
        theta = (49.0, 49.0, 9000.0, 9000.0, 0.01)
        with pytest.raises(ConvergenceError):
            model.bubble_point((0.5, 1e5), theta)

    def test_input_validation(self, model, theta_tot):
        with pytest.raises(DomainError):
            model.predict((1.5, 1e5), theta_tot)
        with pytest.raises(DomainError):
            InputPoint(-0.1, 1e5)
        with pytest.raises(DomainError):
            ParamVector(np.nan, 0, 0, 0, 0.3)


class TestBubblePointJacobian:
    def test_boundary_rows_vanish(self, model):
        rng = np.random.default_rng(7)
        for theta in draw_feasible_thetas(model, rng, 5):
            for l in (0.0, 1.0):
                J = model.bubble_point_jacobian((l, 2.2e5), theta)
                assert np.all(np.abs(J) < 1e-12)

    def test_matches_central_finite_differences(self, model):
        # relative agreement to 1e-5 wherever the central difference resolves
        # the entry; entries below the difference quotient's roundoff floor
        # (eps * |y| / h) are excused through an explicit absolute term
        rng = np.random.default_rng(42)
        steps = 1e-6 * np.array([1.0, 1.0, 100.0, 100.0, 0.01])
        eps = np.finfo(float).eps
        tested = 0
        while tested < 50:
            l = rng.uniform(0.05, 0.95)
            P = rng.uniform(1e5, 3e5)
            theta = draw_feasible_thetas(model, rng, 1, l=l, P=P)[0]
            J = model.bubble_point_jacobian((l, P), theta)
            y0 = np.abs(model.predict((l, P), theta).as_array())
            J_fd = np.empty_like(J)
            ok = True
            for j in range(5):
                tp, tm = theta.copy(), theta.copy()
                tp[j] += steps[j]
                tm[j] -= steps[j]
                try:
                    yp = model.predict((l, P), tp).as_array()
                    ym = model.predict((l, P), tm).as_array()
                except Exception:
                    ok = False
                    break
                J_fd[:, j] = (yp - ym) / (2 * steps[j])
            if not ok:
                continue
            noise_floor = 1e3 * eps * np.maximum(y0, 1.0)[:, None] / steps[None, :]
            bad = np.abs(J - J_fd) > 1e-5 * np.abs(J_fd) + noise_floor
            assert not bad.any(), f"FD mismatch at l={l}, P={P}, theta={theta}"
            tested += 1

    def test_vectorized_consistent_with_scalar(self, model, theta_tot):
        l = np.array([0.2, 0.5, 0.8])
        P = np.array([1.2e5, 2.1e5, 2.9e5])
        v, T, dv, dT = model.jacobian_many(l, P, theta_tot)
        for i in range(3):
            J = model.bubble_point_jacobian((l[i], P[i]), theta_tot)
            assert np.allclose(J[0], dv[:, i], rtol=1e-12, atol=0)
            assert np.allclose(J[1], dT[:, i], rtol=1e-12, atol=0)
