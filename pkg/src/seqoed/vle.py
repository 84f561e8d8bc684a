"""Binary vapor-liquid equilibrium model: Antoine vapor pressures, NRTL
activity coefficients, and the implicit bubble-point state equation.

The model maps an input x = (l, P) -- liquid mole fraction of component 1 and
system pressure -- to an output y = (v, T) -- equilibrium vapor mole fraction
of component 1 and equilibrium temperature.  T is defined implicitly by

    P1(T) * gamma1(l, T) * l + P2(T) * gamma2(l, T) * (1 - l) = P

and v = P1(T) * gamma1(l, T) * l / P.  Parameter sensitivities of (v, T) are
obtained with the implicit function theorem from hand-coded derivatives of the
NRTL equations; agreement with finite differences is enforced by the test
suite rather than by the implementation technique.

All numerical kernels are vectorized over input points; the scalar API wraps
them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DomainError, SingularMatrixError

LN10 = float(np.log(10.0))

#: Operating temperature window (K) for all equilibrium solves and grids.
T_WINDOW = (300.0, 450.0)

#: Margin (K) added around the pure-component boiling points to bracket the
#: bubble-point temperature.
BRACKET_MARGIN = 20.0

#: Relative residual tolerance of the bubble-point solve, |g(T)|/P.
BUBBLE_RTOL = 1e-12

#: Default admissible box for the five interaction parameters
#: (a12, a21, b12, b21, c12).  The bounds are wide enough to contain any
#: physically plausible fit for a narrow azeotropic binary; c12 is kept
#: strictly positive.
PARAM_LOWER = np.array([-50.0, -50.0, -10000.0, -10000.0, 0.01])
PARAM_UPPER = np.array([50.0, 50.0, 10000.0, 10000.0, 0.6])

PARAM_NAMES = ("a12", "a21", "b12", "b21", "c12")


@dataclass(frozen=True)
class AntoineParams:
    """Antoine coefficients for log10(P_sat / 1e5 Pa) = A - B / (T + C).

    B must be positive (vapor pressure increases with temperature) and the
    pole temperature -C must lie outside the operating window.
    """

    name: str
    A: float
    B: float
    C: float

    def __post_init__(self):
        if self.B <= 0:
            raise DomainError(f"Antoine B must be positive, got {self.B}")
        pole = -self.C
        if T_WINDOW[0] <= pole <= T_WINDOW[1]:
            raise DomainError(
                f"Antoine pole temperature {pole} K lies inside the operating window"
            )


@dataclass(frozen=True)
class ParamVector:
    """The five NRTL interaction parameters theta = (a12, a21, b12, b21, c12).

    a's and c are dimensionless, b's are in Kelvin.  The non-randomness
    parameter is symmetric (c12 = c21) and temperature independent.
    """

    a12: float
    a21: float
    b12: float
    b21: float
    c12: float

    def __post_init__(self):
        arr = self.as_array()
        if not np.all(np.isfinite(arr)):
            raise DomainError("parameter vector contains non-finite entries")

    def as_array(self) -> np.ndarray:
        return np.array([self.a12, self.a21, self.b12, self.b21, self.c12])

    @classmethod
    def from_array(cls, theta) -> "ParamVector":
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (5,):
            raise DomainError(f"expected 5 parameters, got shape {theta.shape}")
        return cls(*map(float, theta))


@dataclass(frozen=True)
class InputPoint:
    """Experimental condition: liquid mole fraction of component 1 and pressure."""

    l: float
    P: float

    def __post_init__(self):
        if not 0.0 <= self.l <= 1.0:
            raise DomainError(f"mole fraction l={self.l} outside [0, 1]")
        if self.P <= 0:
            raise DomainError(f"pressure P={self.P} must be positive")

    def as_tuple(self) -> tuple[float, float]:
        return (self.l, self.P)


@dataclass(frozen=True)
class Output:
    """Measured or predicted equilibrium state: vapor mole fraction and temperature."""

    v: float
    T: float

    def as_array(self) -> np.ndarray:
        return np.array([self.v, self.T])


def _theta_array(theta) -> np.ndarray:
    if isinstance(theta, ParamVector):
        return theta.as_array()
    arr = np.asarray(theta, dtype=float)
    if arr.shape != (5,):
        raise DomainError(f"expected 5 parameters, got shape {arr.shape}")
    return arr


def _point_tuple(x) -> tuple[float, float]:
    if isinstance(x, InputPoint):
        return x.as_tuple()
    l, P = x
    return float(l), float(P)


def antoine_pressure(T, params: AntoineParams):
    """Saturation pressure (Pa) at temperature T (K); strictly increasing in T."""
    T = np.asarray(T, dtype=float)
    if np.any(T <= 0):
        raise DomainError("temperature must be positive")
    if np.any(np.abs(T + params.C) < 1e-9):
        raise DomainError(f"temperature at the Antoine pole of {params.name}")
    out = 1e5 * 10.0 ** (params.A - params.B / (T + params.C))
    return float(out) if out.ndim == 0 else out


def antoine_pressure_derivative(T, params: AntoineParams):
    """dP_sat/dT (Pa/K)."""
    T = np.asarray(T, dtype=float)
    return antoine_pressure(T, params) * LN10 * params.B / (T + params.C) ** 2


def boiling_temperature(P, params: AntoineParams):
    """Inverse Antoine: temperature (K) at which the pure component boils at P."""
    P = np.asarray(P, dtype=float)
    if np.any(P <= 0):
        raise DomainError("pressure must be positive")
    out = params.B / (params.A - np.log10(P / 1e5)) - params.C
    return float(out) if out.ndim == 0 else out


def _nrtl_terms(l, T, theta, with_derivs: bool):
    """Shared NRTL kernel.

    Returns (gamma1, gamma2) and, when requested, the derivatives of
    ln gamma_i with respect to theta (shape (5, ...) stacked in parameter
    order) and with respect to T.
    """
    a12, a21, b12, b21, c = theta
    x = l
    y = 1.0 - l
    t12 = a12 + b12 / T
    t21 = a21 + b21 / T
    G12 = np.exp(-c * t12)
    G21 = np.exp(-c * t21)
    D1 = x + y * G21
    D2 = y + x * G12
    lng1 = y**2 * (t21 * (G21 / D1) ** 2 + t12 * G12 / D2**2)
    lng2 = x**2 * (t12 * (G12 / D2) ** 2 + t21 * G21 / D1**2)
    g1 = np.exp(lng1)
    g2 = np.exp(lng2)
    if not with_derivs:
        return g1, g2

    # d ln(gamma) / d tau and / d c; the y**2 / x**2 prefactors make all
    # parameter sensitivities vanish identically at the composition bounds.
    d1_t21 = y**2 * (G21 / D1) ** 2 * (1.0 - 2.0 * c * x * t21 / D1)
    d1_t12 = y**2 * (G12 / D2**2) * (1.0 - c * t12 + 2.0 * c * x * t12 * G12 / D2)
    d1_c = y**2 * (
        -2.0 * x * t21**2 * G21**2 / D1**3
        - t12**2 * G12 / D2**2
        + 2.0 * x * t12**2 * G12**2 / D2**3
    )
    d2_t12 = x**2 * (G12 / D2) ** 2 * (1.0 - 2.0 * c * y * t12 / D2)
    d2_t21 = x**2 * (G21 / D1**2) * (1.0 - c * t21 + 2.0 * c * y * t21 * G21 / D1)
    d2_c = x**2 * (
        -2.0 * y * t12**2 * G12**2 / D2**3
        - t21**2 * G21 / D1**2
        + 2.0 * y * t21**2 * G21**2 / D1**3
    )
    dt12_T = -b12 / T**2
    dt21_T = -b21 / T**2
    dlng1_theta = np.stack([d1_t12, d1_t21, d1_t12 / T, d1_t21 / T, d1_c])
    dlng2_theta = np.stack([d2_t12, d2_t21, d2_t12 / T, d2_t21 / T, d2_c])
    dlng1_T = d1_t12 * dt12_T + d1_t21 * dt21_T
    dlng2_T = d2_t12 * dt12_T + d2_t21 * dt21_T
    return g1, g2, dlng1_theta, dlng2_theta, dlng1_T, dlng2_T


def nrtl_gamma(l, T, theta):
    """Activity coefficients (gamma1, gamma2) of the binary NRTL model.

    tau_ij = a_ij + b_ij / T, alpha_ij = c12, G_ij = exp(-alpha_ij tau_ij).
    Pure-component limits: gamma1(l=1) = 1 and gamma2(l=0) = 1 exactly.
    """
    l = np.asarray(l, dtype=float)
    T = np.asarray(T, dtype=float)
    if np.any(l < 0) or np.any(l > 1):
        raise DomainError("mole fraction outside [0, 1]")
    if np.any(T <= 0):
        raise DomainError("temperature must be positive")
    g1, g2 = _nrtl_terms(l, T, _theta_array(theta), with_derivs=False)
    if g1.ndim == 0:
        return float(g1), float(g2)
    return g1, g2


class BinaryVleModel:
    """Implicit bubble-point model of a binary mixture.

    Implements the generic parametric-model surface (``predict``/``jacobian``
    plus the dimension attributes) used by the estimation and design modules,
    together with vectorized batch evaluators for performance-critical loops.
    """

    d_x = 2
    d_theta = 5
    d_y = 2

    def __init__(
        self,
        component1: AntoineParams,
        component2: AntoineParams,
        pressure_range: tuple[float, float] = (1e5, 3e5),
        param_lower: np.ndarray = PARAM_LOWER,
        param_upper: np.ndarray = PARAM_UPPER,
    ):
        self.component1 = component1
        self.component2 = component2
        self.pressure_range = (float(pressure_range[0]), float(pressure_range[1]))
        self.param_lower = np.asarray(param_lower, dtype=float)
        self.param_upper = np.asarray(param_upper, dtype=float)
        self._t_memo: dict = {}

    # -- scalar surface -----------------------------------------------------

    def predict(self, x, theta) -> Output:
        l, P = _point_tuple(x)
        v, T = self.predict_many(np.array([l]), np.array([P]), theta)
        return Output(float(v[0]), float(T[0]))

    def jacobian(self, x, theta) -> np.ndarray:
        """d(v, T)/d theta at the converged bubble point; shape (2, 5)."""
        l, P = _point_tuple(x)
        _, _, dv, dT = self.jacobian_many(np.array([l]), np.array([P]), theta)
        return np.vstack([dv[:, 0], dT[:, 0]])

    def bubble_point(self, x, theta) -> Output:
        return self.predict(x, theta)

    def bubble_point_jacobian(self, x, theta) -> np.ndarray:
        return self.jacobian(x, theta)

    def activity_coefficients(self, l, T, theta):
        return nrtl_gamma(l, T, theta)

    # -- vectorized core ----------------------------------------------------

    def _solve_T(self, l, P, theta, max_iter=200):
        """Safeguarded Newton for the bubble-point temperature, elementwise.

        The iterate starts at the composition-weighted mean of the two pure
        boiling points and stays inside a sign-changing bracket around them.
        Newton runs on the logarithm of the pressure ratio (near-linear in T
        for Antoine-type vapor pressures, so steps rarely leave the bracket);
        any step that still escapes falls back to bisection.
        """
        c1, c2 = self.component1, self.component2
        Tb1 = boiling_temperature(P, c1)
        Tb2 = boiling_temperature(P, c2)
        lo = np.minimum(Tb1, Tb2) - BRACKET_MARGIN
        hi = np.maximum(Tb1, Tb2) + BRACKET_MARGIN

        def pressure_sum(T):
            g1, g2 = _nrtl_terms(l, T, theta, with_derivs=False)
            return antoine_pressure(T, c1) * g1 * l + antoine_pressure(T, c2) * g2 * (1.0 - l)

        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            sum_lo = pressure_sum(lo)
            sum_hi = pressure_sum(hi)
            bracketed = (
                np.isfinite(sum_lo) & np.isfinite(sum_hi) & (sum_lo < P) & (sum_hi > P)
            )
            if not np.all(bracketed):
                idx = int(np.argmin(bracketed))
                raise ConvergenceError(
                    "bubble-point residual has no sign change on the bracketing "
                    f"interval (first failing point index {idx})"
                )
            T = np.clip(l * Tb1 + (1.0 - l) * Tb2, lo, hi)
            for _ in range(max_iter):
                g1, g2, _, _, dlng1_T, dlng2_T = _nrtl_terms(l, T, theta, with_derivs=True)
                P1 = antoine_pressure(T, c1)
                P2 = antoine_pressure(T, c2)
                total = P1 * g1 * l + P2 * g2 * (1.0 - l)
                if np.all(np.abs(total - P) <= BUBBLE_RTOL * P):
                    return T
                dtotal = (
                    (antoine_pressure_derivative(T, c1) * g1 + P1 * g1 * dlng1_T) * l
                    + (antoine_pressure_derivative(T, c2) * g2 + P2 * g2 * dlng2_T)
                    * (1.0 - l)
                )
                lo = np.where(total < P, T, lo)
                hi = np.where(total > P, T, hi)
                T_newton = T - np.log(total / P) * total / dtotal
                reject = ~np.isfinite(T_newton) | (T_newton <= lo) | (T_newton >= hi)
                T = np.where(reject, 0.5 * (lo + hi), T_newton)
        raise ConvergenceError("bubble-point Newton iteration did not converge")

    def _solved_T(self, l, P, theta):
        """Memoized bubble-point temperatures for repeated (theta, points)
        evaluations -- optimizers interleave value and derivative calls at
        identical arguments.  Entries are immutable; a lost race merely
        recomputes, so concurrent readers stay safe."""
        key = (theta.tobytes(), l.tobytes(), P.tobytes())
        hit = self._t_memo.get(key)
        if hit is not None:
            return hit
        T = self._solve_T(l, P, theta)
        if len(self._t_memo) >= 8:
            self._t_memo.pop(next(iter(self._t_memo)), None)
        self._t_memo[key] = T
        return T

    def predict_many(self, l, P, theta):
        """Vectorized bubble-point solve; returns (v, T) arrays."""
        l = np.asarray(l, dtype=float)
        P = np.asarray(P, dtype=float)
        theta = _theta_array(theta)
        if np.any(l < 0.0) or np.any(l > 1.0):
            raise DomainError("mole fraction outside [0, 1]")
        T = self._solved_T(l, P, theta)
        g1, _ = _nrtl_terms(l, T, theta, with_derivs=False)
        v = antoine_pressure(T, self.component1) * g1 * l / P
        return v, T

    def jacobian_many(self, l, P, theta):
        """Vectorized outputs and parameter sensitivities.

        Returns (v, T, dv_dtheta, dT_dtheta) with derivative arrays of shape
        (5, n).  Sensitivities follow from the implicit function theorem:
        dT/dtheta = -(dg/dtheta)/(dg/dT) at the solved temperature.
        """
        l = np.asarray(l, dtype=float)
        P = np.asarray(P, dtype=float)
        theta = _theta_array(theta)
        if np.any(l < 0.0) or np.any(l > 1.0):
            raise DomainError("mole fraction outside [0, 1]")
        T = self._solved_T(l, P, theta)
        c1, c2 = self.component1, self.component2
        g1, g2, dlng1_th, dlng2_th, dlng1_T, dlng2_T = _nrtl_terms(
            l, T, theta, with_derivs=True
        )
        P1 = antoine_pressure(T, c1)
        P2 = antoine_pressure(T, c2)
        dP1 = antoine_pressure_derivative(T, c1)
        dP2 = antoine_pressure_derivative(T, c2)
        v = P1 * g1 * l / P
        dg_T = (dP1 * g1 + P1 * g1 * dlng1_T) * l + (dP2 * g2 + P2 * g2 * dlng2_T) * (
            1.0 - l
        )
        if np.any(np.abs(dg_T) < 1e-300):
            raise SingularMatrixError(
                "state equation has vanishing temperature derivative"
            )
        dg_theta = P1 * l * g1 * dlng1_th + P2 * (1.0 - l) * g2 * dlng2_th
        dT_theta = -dg_theta / dg_T
        dv_T = (dP1 * g1 + P1 * g1 * dlng1_T) * l / P
        dv_theta = P1 * l * g1 * dlng1_th / P + dv_T * dT_theta
        return v, T, dv_theta, dT_theta
