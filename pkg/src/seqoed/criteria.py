"""Design criteria, the two-stage objective, and its sensitivity function.

Supported criteria on positive-definite information matrices M:

    D:  Psi(M) = -log det M        (log-determinant of the covariance)
    A:  Psi(M) = trace(M^-1)

Both extend to +inf on singular PSD matrices, are convex, and decrease when
information is added (antitonic in the PSD order).

The two-stage objective blends a fixed prior design with the design being
optimized:

    Psi_alpha(xi) = Psi( alpha * M_prior + (1 - alpha) * M(xi) ).

Its sensitivity at a candidate point x is the one-sided directional
derivative along the exchange direction m(x) - M(xi); with
A := alpha * M_prior + (1 - alpha) * M(xi),

    D:  psi(x) = -(1 - alpha) * tr( A^-1  (m(x) - M(xi)) )
    A:  psi(x) = -(1 - alpha) * tr( A^-2  (m(x) - M(xi)) )

A design is epsilon-optimal exactly when psi >= -epsilon over the whole
candidate set; points carrying weight sit at psi = 0 at the optimum.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SingularMatrixError
from .modeling import (
    NoiseModel,
    ParametricModel,
    UnweightedDesign,
    WeightedDesign,
    design_info,
    one_point_info,
)


class Criterion(enum.Enum):
    D = "D"
    A = "A"


def _chol_or_none(M: np.ndarray):
    try:
        return np.linalg.cholesky(0.5 * (M + M.T))
    except np.linalg.LinAlgError:
        return None


def criterion_value(criterion: Criterion, M: np.ndarray) -> float:
    """Criterion value; +inf when M is singular (PSD but not PD)."""
    M = np.asarray(M, dtype=float)
    L = _chol_or_none(M)
    if L is None or np.any(np.diag(L) <= 0):
        return np.inf
    if criterion is Criterion.D:
        return float(-2.0 * np.sum(np.log(np.diag(L))))
    inv = np.linalg.inv(M)
    return float(np.trace(inv))


def criterion_gradient(criterion: Criterion, M: np.ndarray) -> np.ndarray:
    """Gradient of Psi at a positive-definite M: -M^-1 (D) or -M^-2 (A)."""
    M = np.asarray(M, dtype=float)
    L = _chol_or_none(M)
    if L is None:
        raise SingularMatrixError("criterion gradient requires a positive-definite matrix")
    inv = np.linalg.inv(M)
    if criterion is Criterion.D:
        return -inv
    return -(inv @ inv)


@dataclass(frozen=True)
class TwoStageContext:
    """Prior design with its importance factor and linearization point.

    ``alpha`` = 0 ignores the prior entirely (one-stage design); alpha < 1 is
    required so the new experiments keep positive influence.  The prior enters
    through the information matrix of its associated weighted design.
    """

    prior_design: UnweightedDesign | None
    alpha: float
    theta_ref: np.ndarray
    criterion: Criterion = Criterion.D

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise DomainError(f"alpha={self.alpha} outside [0, 1)")
        if self.alpha > 0.0 and self.prior_design is None:
            raise DomainError("a prior design is required when alpha > 0")
        theta = self.theta_ref
        object.__setattr__(
            self,
            "theta_ref",
            np.asarray(theta.as_array() if hasattr(theta, "as_array") else theta, float),
        )

    def prior_info(self, model: ParametricModel, noise: NoiseModel) -> np.ndarray:
        """Information matrix of the prior's weighted design (zero if no prior)."""
        if self.prior_design is None or self.alpha == 0.0:
            return np.zeros((model.d_theta, model.d_theta))
        return design_info(
            model, self.prior_design.as_weighted(), self.theta_ref, noise
        ).matrix


def combined_matrix(
    ctx: TwoStageContext,
    xi: WeightedDesign,
    model: ParametricModel,
    noise: NoiseModel,
) -> np.ndarray:
    M_xi = design_info(model, xi, ctx.theta_ref, noise).matrix
    return ctx.alpha * ctx.prior_info(model, noise) + (1.0 - ctx.alpha) * M_xi


def two_stage_value(
    ctx: TwoStageContext,
    xi: WeightedDesign,
    model: ParametricModel,
    noise: NoiseModel,
) -> float:
    """Two-stage criterion of a candidate weighted design (+inf if singular)."""
    return criterion_value(ctx.criterion, combined_matrix(ctx, xi, model, noise))


def sensitivity_from_parts(
    criterion: Criterion,
    alpha: float,
    combined: np.ndarray,
    M_xi: np.ndarray,
    m_candidates: np.ndarray,
) -> np.ndarray:
    """Sensitivities of many candidate one-point matrices at once.

    ``m_candidates`` has shape (n, d, d); returns shape (n,).  The inverse is
    taken after a symmetric Jacobi rescaling so badly scaled parameter units
    cannot wash out the traces; the result is exact in the rescaled algebra
    for both criteria.
    """
    L = _chol_or_none(combined)
    if L is None:
        raise SingularMatrixError("combined information matrix is singular")
    s = 1.0 / np.sqrt(np.diag(combined).clip(min=1e-300))
    outer = np.outer(s, s)
    inv_scaled = np.linalg.inv(combined * outer)
    if criterion is Criterion.D:
        G_scaled = inv_scaled
    else:
        G_scaled = inv_scaled @ np.diag(s * s) @ inv_scaled
    trace_m = np.einsum("ij,nji->n", G_scaled, m_candidates * outer[None, :, :])
    trace_M = float(np.einsum("ij,ji->", G_scaled, M_xi * outer))
    return -(1.0 - alpha) * (trace_m - trace_M)


def sensitivity(
    ctx: TwoStageContext,
    xi: WeightedDesign,
    x,
    model: ParametricModel,
    noise: NoiseModel,
) -> float:
    """Directional derivative of the two-stage criterion toward candidate x.

    Negative values flag optimality violations: the design improves by moving
    weight onto x.
    """
    M_xi = design_info(model, xi, ctx.theta_ref, noise).matrix
    combined = ctx.alpha * ctx.prior_info(model, noise) + (1.0 - ctx.alpha) * M_xi
    m_x = one_point_info(model, x, ctx.theta_ref, noise).matrix
    out = sensitivity_from_parts(ctx.criterion, ctx.alpha, combined, M_xi, m_x[None, :, :])
    return float(out[0])
