"""Weighted nonlinear least-squares estimation with multistart.

The estimator minimizes

    S(theta) = sum_i (f(x_i, theta) - y_i)^T  Sigma^-1  (f(x_i, theta) - y_i)

over the admissible parameter box.  Local solves use a bounded trust-region
least-squares method on the whitened residuals; candidate starts are the
supplied warm starts, the box center, and uniform draws over the box, with a
cheap SSE filter discarding hopeless candidates before any local solve.
Everything is deterministic for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .errors import (
    DomainError,
    EstimationError,
    EvaluationError,
    SeqoedError,
    SingularMatrixError,
)
from .modeling import NoiseModel, ParametricModel, UnweightedDesign, WeightedDesign, design_info


@dataclass(frozen=True)
class Dataset:
    """Measured records: inputs actually realized, observed outputs, and the
    originally planned inputs when they differ.

    Estimation always uses the realized inputs; the planned ones are kept for
    bookkeeping and design replay.
    """

    x_actual: np.ndarray
    y: np.ndarray
    x_planned: np.ndarray | None = None
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        xa = np.atleast_2d(np.asarray(self.x_actual, dtype=float))
        y = np.atleast_2d(np.asarray(self.y, dtype=float))
        if xa.shape[0] == 0:
            raise DomainError("dataset must be nonempty")
        if y.shape[0] != xa.shape[0]:
            raise DomainError("one output row per input row required")
        if not np.all(np.isfinite(y)):
            raise DomainError("outputs contain non-finite values")
        object.__setattr__(self, "x_actual", xa)
        object.__setattr__(self, "y", y)
        if self.x_planned is not None:
            xp = np.atleast_2d(np.asarray(self.x_planned, dtype=float))
            if xp.shape != xa.shape:
                raise DomainError("planned inputs must match actual inputs in shape")
            object.__setattr__(self, "x_planned", xp)

    @property
    def size(self) -> int:
        return self.x_actual.shape[0]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=int)
        return Dataset(
            self.x_actual[idx],
            self.y[idx],
            None if self.x_planned is None else self.x_planned[idx],
            None if self.labels is None else tuple(self.labels[i] for i in idx),
        )


@dataclass(frozen=True)
class EstimateResult:
    theta: np.ndarray
    sse: float
    converged: bool
    start_index: int
    n_starts_run: int

    def serialize(self) -> str:
        return ",".join(repr(float(t)) for t in self.theta)


@dataclass(frozen=True)
class LinearModel:
    """Explicit linear model f(x, theta) = c(x) + J(x) theta."""

    intercept: object  # callable x -> (d_y,)
    design_matrix: object  # callable x -> (d_y, d_theta)
    d_x: int
    d_theta: int
    d_y: int

    def predict(self, x, theta):
        return np.asarray(self.intercept(x), float) + np.atleast_2d(
            self.design_matrix(x)
        ) @ np.asarray(theta, float)

    def jacobian(self, x, theta=None):
        return np.atleast_2d(np.asarray(self.design_matrix(x), dtype=float))


def _whitener(noise: NoiseModel) -> np.ndarray:
    """Matrix W with W Sigma W^T = I; diagonal noise gives diag(1/sigma)."""
    return np.linalg.inv(np.linalg.cholesky(noise.covariance))


def _predict_all(model: ParametricModel, x: np.ndarray, theta) -> np.ndarray:
    if hasattr(model, "predict_many"):
        v, T = model.predict_many(x[:, 0], x[:, 1], theta)
        return np.column_stack([v, T])
    out = []
    for p in x:
        y = model.predict(p, theta)
        out.append(y.as_array() if hasattr(y, "as_array") else np.asarray(y, float))
    return np.vstack(out)


def _jacobian_all(model: ParametricModel, x: np.ndarray, theta) -> np.ndarray:
    if hasattr(model, "jacobian_many"):
        _, _, dv, dT = model.jacobian_many(x[:, 0], x[:, 1], theta)
        J = np.empty((x.shape[0], model.d_y, model.d_theta))
        J[:, 0, :] = dv.T
        J[:, 1, :] = dT.T
        return J
    return np.stack([np.atleast_2d(model.jacobian(p, theta)) for p in x])


def whitened_residuals(model, theta, data: Dataset, noise: NoiseModel) -> np.ndarray:
    """Residual vector r with S(theta) = ||r||^2, stacked record-major."""
    W = _whitener(noise)
    try:
        pred = _predict_all(model, data.x_actual, theta)
    except SeqoedError:
        pred = None
    if pred is None:
        # locate the first failing record for the error message
        for i, p in enumerate(data.x_actual):
            try:
                _predict_all(model, p[None, :], theta)
            except SeqoedError as exc:
                raise EvaluationError(f"model evaluation failed: {exc}", index=i) from exc
        raise EvaluationError("model evaluation failed for the batch as a whole")
    return ((pred - data.y) @ W.T).ravel()


def weighted_sse(model, theta, data: Dataset, noise: NoiseModel) -> float:
    """Weighted sum of squared prediction errors over the dataset."""
    r = whitened_residuals(model, theta, data, noise)
    return float(r @ r)


def sse_gradient(model, theta, data: Dataset, noise: NoiseModel) -> np.ndarray:
    """Analytic gradient 2 J^T Sigma^-1 r of the weighted SSE."""
    W = _whitener(noise)
    pred = _predict_all(model, data.x_actual, theta)
    J = _jacobian_all(model, data.x_actual, theta)
    rw = (pred - data.y) @ W.T
    Jw = np.einsum("yz,nzj->nyj", W, J)
    return 2.0 * np.einsum("ny,nyj->j", rw, Jw)


@dataclass(frozen=True)
class LinearEstimate:
    theta: np.ndarray
    rank: int
    minimal_norm: bool

    @property
    def rank_deficient(self) -> bool:
        return self.minimal_norm


def linear_lse(model: LinearModel, data: Dataset, noise: NoiseModel) -> LinearEstimate:
    """Closed-form weighted least squares for linear models.

    Solves the stacked whitened system; if the stacked design matrix is rank
    deficient the unique minimal-norm solution is returned and flagged.
    """
    W = _whitener(noise)
    rows_J = []
    rows_r = []
    for i in range(data.size):
        x = data.x_actual[i]
        Ji = np.atleast_2d(model.jacobian(x))
        ci = np.asarray(model.intercept(x), dtype=float)
        rows_J.append(W @ Ji)
        rows_r.append(W @ (data.y[i] - ci))
    A = np.vstack(rows_J)
    b = np.concatenate(rows_r)
    theta, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
    return LinearEstimate(theta, int(rank), minimal_norm=rank < model.d_theta)


def gauss_newton_step(model, theta_ref, data: Dataset, noise: NoiseModel) -> np.ndarray:
    """One full linearize-and-solve update from theta_ref.

    For a linear model this lands exactly on the closed-form estimate.
    """
    theta_ref = np.asarray(
        theta_ref.as_array() if hasattr(theta_ref, "as_array") else theta_ref, dtype=float
    )
    W = _whitener(noise)
    pred = _predict_all(model, data.x_actual, theta_ref)
    J = _jacobian_all(model, data.x_actual, theta_ref)
    Jw = np.einsum("yz,nzj->nyj", W, J).reshape(-1, model.d_theta)
    rw = ((data.y - pred) @ W.T).ravel()
    step, _, _, _ = np.linalg.lstsq(Jw, rw, rcond=None)
    return theta_ref + step


@dataclass(frozen=True)
class EstimateConfig:
    """Multistart and local-solver settings for ``wls_estimate``."""

    n_starts: int = 32
    seed: int = 0
    warm_starts: tuple = ()
    include_center_start: bool = True
    sse_filter: float = 100.0
    max_draw_factor: int = 16
    max_nfev: int = 2000
    xtol: float = 1e-14
    ftol: float = 1e-14
    gtol: float = 1e-12
    bounds: tuple | None = None


def _resolve_bounds(model, config: EstimateConfig):
    if config.bounds is not None:
        lo, hi = config.bounds
        return np.asarray(lo, float), np.asarray(hi, float)
    if hasattr(model, "param_lower") and hasattr(model, "param_upper"):
        return np.asarray(model.param_lower, float), np.asarray(model.param_upper, float)
    raise DomainError("no parameter box: provide config.bounds or a bounded model")


def wls_estimate(
    model, data: Dataset, noise: NoiseModel, config: EstimateConfig = EstimateConfig()
) -> EstimateResult:
    """Multistart weighted least squares over the parameter box.

    Candidate starts are tried in order (warm starts, box center, uniform
    draws); a candidate whose raw SSE exceeds ``sse_filter`` times the best
    raw SSE seen so far is rejected without a local solve.  Draws that break
    the model (non-finite SSE) are replaced until ``n_starts`` usable draws
    were made or the draw budget runs out.  The reported estimate is the
    converged local solution with the smallest SSE, ties broken by start
    order.
    """
    lo, hi = _resolve_bounds(model, config)

    def raw_sse(theta):
        try:
            return weighted_sse(model, theta, data, noise)
        except SeqoedError:
            return np.inf

    starts: list[np.ndarray] = []
    for w in config.warm_starts:
        arr = np.asarray(w.as_array() if hasattr(w, "as_array") else w, dtype=float)
        starts.append(np.clip(arr, lo, hi))
    if config.include_center_start:
        starts.append(0.5 * (lo + hi))
    rng = np.random.default_rng(config.seed)
    n_drawn = 0
    budget = config.n_starts * config.max_draw_factor
    for _ in range(budget):
        if n_drawn >= config.n_starts:
            break
        cand = lo + rng.random(len(lo)) * (hi - lo)
        if np.isfinite(raw_sse(cand)):
            starts.append(cand)
            n_drawn += 1

    W = _whitener(noise)
    n_res = data.size * noise.d_y
    big = 1e10

    def fun(theta):
        try:
            pred = _predict_all(model, data.x_actual, theta)
        except SeqoedError:
            return np.full(n_res, big)
        return ((pred - data.y) @ W.T).ravel()

    def jac(theta):
        try:
            J = _jacobian_all(model, data.x_actual, theta)
        except SeqoedError:
            return np.zeros((n_res, model.d_theta))
        return np.einsum("yz,nzj->nyj", W, J).reshape(n_res, model.d_theta)

    x_scale = np.where(np.isfinite(hi - lo), (hi - lo) / 10.0, 1.0)
    best: EstimateResult | None = None
    best_raw = np.inf
    n_run = 0
    failures: list[str] = []
    for idx, start in enumerate(starts):
        s0 = raw_sse(start)
        if not np.isfinite(s0) or s0 > config.sse_filter * best_raw:
            continue
        best_raw = min(best_raw, s0)
        try:
            res = least_squares(
                fun,
                start,
                jac=jac,
                bounds=(lo, hi),
                x_scale=x_scale,
                xtol=config.xtol,
                ftol=config.ftol,
                gtol=config.gtol,
                max_nfev=config.max_nfev,
            )
        except Exception as exc:  # scipy raises on pathological inputs
            failures.append(f"start {idx}: {exc}")
            continue
        n_run += 1
        sse = 2.0 * float(res.cost)
        if not res.success or not np.isfinite(sse):
            failures.append(f"start {idx}: status {res.status}")
            continue
        if best is None or sse < best.sse:
            best = EstimateResult(res.x, sse, True, idx, 0)
    if best is None:
        raise EstimationError(
            "no multistart run converged",
            diagnostics={"n_candidates": len(starts), "n_solved": n_run, "failures": failures},
        )
    return EstimateResult(best.theta, best.sse, True, best.start_index, n_run)


def covariance_estimate(model, design, theta, noise: NoiseModel) -> np.ndarray:
    """Linearization-based covariance of the estimate: inverse information matrix.

    Inversion happens after a symmetric unit rescaling so that the
    singularity test reflects actual rank deficiency rather than disparate
    parameter units; directions the design carries no information about are
    reported through the attached null-space basis.
    """
    if isinstance(design, (UnweightedDesign, WeightedDesign)):
        M = design_info(model, design, theta, noise).matrix
    else:
        M = design_info(model, UnweightedDesign(design), theta, noise).matrix
    d = np.sqrt(np.diag(M).clip(min=0.0))
    zero_rows = d <= 0.0
    scale = np.where(zero_rows, 1.0, d)
    M_scaled = M / np.outer(scale, scale)
    eigval, eigvec = np.linalg.eigh(M_scaled)
    tol = 1e-12 * max(1.0, float(eigval.max(initial=0.0)))
    deficient = eigval <= tol
    if zero_rows.any() or deficient.any():
        null = eigvec[:, deficient]
        raise SingularMatrixError(
            f"information matrix is singular in {max(null.shape[1], int(zero_rows.sum()))} "
            "direction(s)",
            null_basis=null,
        )
    inv_scaled = eigvec @ np.diag(1.0 / eigval) @ eigvec.T
    cov = inv_scaled / np.outer(scale, scale)
    return 0.5 * (cov + cov.T)
