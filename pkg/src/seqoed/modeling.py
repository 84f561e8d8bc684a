"""Generic parametric-model surface, experimental designs, and information
matrices.

A model exposes ``d_x``, ``d_theta``, ``d_y``, ``predict(x, theta)`` and
``jacobian(x, theta)``; anything with that shape plugs into estimation,
design, and assessment.  Designs come in two flavors: unweighted tuples of
experiment points (replications allowed) and weighted designs assigning
probabilities to candidate points.  The information matrix of a design is the
(weighted) sum of one-point information matrices

    m(x, theta) = J(x, theta)^T  Sigma^-1  J(x, theta),    J = d predict / d theta.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from .errors import DomainError

#: Eigenvalue floor below which a nominally PSD matrix is treated as invalid.
PSD_TOL = 1e-10


@runtime_checkable
class ParametricModel(Protocol):
    """Structural interface every model must satisfy."""

    d_x: int
    d_theta: int
    d_y: int

    def predict(self, x, theta): ...

    def jacobian(self, x, theta) -> np.ndarray: ...


@dataclass(frozen=True)
class NoiseModel:
    """Measurement-error covariance (d_y x d_y, positive definite)."""

    covariance: np.ndarray

    def __post_init__(self):
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        if cov.shape[0] != cov.shape[1]:
            raise DomainError("covariance must be square")
        if not np.allclose(cov, cov.T, atol=1e-12):
            raise DomainError("covariance must be symmetric")
        if np.any(np.linalg.eigvalsh(cov) <= 0):
            raise DomainError("covariance must be positive definite")
        object.__setattr__(self, "covariance", cov)

    @classmethod
    def from_sigmas(cls, *sigmas: float) -> "NoiseModel":
        return cls(np.diag(np.square(np.asarray(sigmas, dtype=float))))

    @property
    def d_y(self) -> int:
        return self.covariance.shape[0]

    @property
    def precision(self) -> np.ndarray:
        return np.linalg.inv(self.covariance)

    @property
    def sigmas(self) -> np.ndarray:
        """Per-output standard deviations (diagonal models only)."""
        off = self.covariance - np.diag(np.diag(self.covariance))
        if np.any(off != 0.0):
            raise DomainError("sigmas only defined for diagonal covariance")
        return np.sqrt(np.diag(self.covariance))


def _points_array(points, d_x: int | None = None) -> np.ndarray:
    raw = [p.as_tuple() if hasattr(p, "as_tuple") else tuple(p) for p in points]
    if not raw:
        return np.empty((0, d_x or 2))
    pts = np.atleast_2d(np.asarray(raw, dtype=float))
    if d_x is not None and pts.shape[1] != d_x:
        raise DomainError(f"design points have dimension {pts.shape[1]}, expected {d_x}")
    return pts


@dataclass(frozen=True)
class UnweightedDesign:
    """Ordered tuple of experiment points; duplicates mean replications."""

    points: np.ndarray

    def __post_init__(self):
        pts = _points_array(self.points)
        if pts.shape[0] < 1:
            raise DomainError("a design needs at least one point")
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def concat(self, other: "UnweightedDesign") -> "UnweightedDesign":
        return UnweightedDesign(np.vstack([self.points, other.points]))

    def __and__(self, other: "UnweightedDesign") -> "UnweightedDesign":
        return self.concat(other)

    def as_weighted(self) -> "WeightedDesign":
        """Aggregate replications into weights r_x / n on the distinct points."""
        uniq, counts = np.unique(self.points, axis=0, return_counts=True)
        return WeightedDesign(uniq, counts / self.size)


@dataclass(frozen=True)
class WeightedDesign:
    """Probability-weighted design on a finite candidate set."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = _points_array(self.points)
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (pts.shape[0],):
            raise DomainError("one weight per design point required")
        if np.any(w < 0):
            raise DomainError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise DomainError(f"weights sum to {w.sum()}, expected 1")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def support_mask(self) -> np.ndarray:
        return self.weights > 0.0

    @property
    def support_points(self) -> np.ndarray:
        return self.points[self.support_mask]

    @property
    def support_weights(self) -> np.ndarray:
        return self.weights[self.support_mask]

    def restricted_to_support(self) -> "WeightedDesign":
        return WeightedDesign(self.support_points, self.support_weights)


@dataclass(frozen=True)
class InfoMatrix:
    """A d_theta x d_theta information matrix with its linearization point."""

    matrix: np.ndarray
    theta_ref: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if not np.allclose(m, m.T, atol=1e-12 * max(1.0, float(np.abs(m).max()))):
            raise DomainError("information matrix must be symmetric")
        if np.min(np.linalg.eigvalsh(0.5 * (m + m.T))) < -PSD_TOL * max(
            1.0, float(np.abs(m).max())
        ):
            raise DomainError("information matrix is not positive semidefinite")
        object.__setattr__(self, "matrix", 0.5 * (m + m.T))
        object.__setattr__(self, "theta_ref", np.asarray(self.theta_ref, dtype=float))


def model_jacobians(model: ParametricModel, points: np.ndarray, theta) -> np.ndarray:
    """Stack of output-by-parameter Jacobians, shape (n, d_y, d_theta).

    Uses the model's vectorized ``jacobian_many`` fast path when present.
    """
    pts = _points_array(points, model.d_x)
    n = pts.shape[0]
    if hasattr(model, "jacobian_many"):
        _, _, dv, dT = model.jacobian_many(pts[:, 0], pts[:, 1], theta)
        out = np.empty((n, model.d_y, model.d_theta))
        out[:, 0, :] = dv.T
        out[:, 1, :] = dT.T
        return out
    return np.stack([np.atleast_2d(model.jacobian(p, theta)) for p in pts])


def one_point_info(model: ParametricModel, x, theta, noise: NoiseModel) -> InfoMatrix:
    """One-point information matrix m(x, theta) = J^T Sigma^-1 J."""
    J = np.atleast_2d(model.jacobian(x, theta))
    m = J.T @ noise.precision @ J
    theta_arr = theta.as_array() if hasattr(theta, "as_array") else np.asarray(theta, float)
    return InfoMatrix(0.5 * (m + m.T), theta_arr)


def design_info(model: ParametricModel, design, theta, noise: NoiseModel) -> InfoMatrix:
    """Information matrix of a design.

    Unweighted designs sum the one-point matrices over all experiments;
    weighted designs take the weight-averaged sum, so the weighted design
    associated with an n-point unweighted design carries matrix M/n.
    """
    theta_arr = theta.as_array() if hasattr(theta, "as_array") else np.asarray(theta, float)
    if isinstance(design, UnweightedDesign):
        pts, w = design.points, np.ones(design.size)
    elif isinstance(design, WeightedDesign):
        pts, w = design.points, design.weights
    else:
        raise DomainError(f"unsupported design type {type(design)!r}")
    bank = one_point_info_bank(model, pts, theta_arr, noise)
    m = np.einsum("i,ijk->jk", w, bank)
    return InfoMatrix(0.5 * (m + m.T), theta_arr)


def one_point_info_bank(
    model: ParametricModel, points, theta, noise: NoiseModel
) -> np.ndarray:
    """All one-point information matrices of a candidate set, shape (n, d, d).

    This is the cache unit of the design solver: the adaptive-discretization
    loop re-reads every grid point's matrix each iteration, so they are
    computed once per (candidate set, theta) pair and reused.
    """
    J = model_jacobians(model, points, theta)  # (n, d_y, d_theta)
    prec = noise.precision
    bank = np.einsum("nyi,yz,nzj->nij", J, prec, J)
    return 0.5 * (bank + np.transpose(bank, (0, 2, 1)))


class InfoBankCache:
    """Memoized one-point info banks keyed by the linearization point.

    The candidate set is fixed at construction; banks are invalidated simply
    by keying on the (hashed) theta bytes, so a new estimate never reuses
    stale matrices.
    """

    def __init__(self, model: ParametricModel, points, noise: NoiseModel, max_entries: int = 8):
        self.model = model
        self.points = _points_array(points, model.d_x)
        self.noise = noise
        self.max_entries = max_entries
        self._store: dict[bytes, np.ndarray] = {}

    def bank(self, theta) -> np.ndarray:
        theta_arr = theta.as_array() if hasattr(theta, "as_array") else np.asarray(theta, float)
        key = theta_arr.tobytes()
        if key not in self._store:
            if len(self._store) >= self.max_entries:
                self._store.pop(next(iter(self._store)))
            self._store[key] = one_point_info_bank(self.model, self.points, theta_arr, self.noise)
        return self._store[key]
