"""Design-quality metrics: prediction RMSE and prediction-uncertainty maps.

Three measures, all judged against a reference dataset or evaluation grid:

* component-wise root mean squared prediction error of a fitted model on the
  reference data;
* linearization-based prediction uncertainty, the quadratic form of the model
  gradient with the inverted design information matrix; and
* sampling-based prediction uncertainty, the spread of predictions across
  refits on synthetic noisy replicates of the design's measurements.

The linearized variant supports two normalizations of the information
matrix.  ``per_experiment=True`` uses the weighted design matrix M/n, the
convention behind the published uncertainty tables this package reproduces;
``per_experiment=False`` uses the plain sum, i.e. the actual covariance of
the estimate, which is the right choice when comparing against sampling-based
values or Monte-Carlo covariances.  Both variants vanish identically at the
pure-component boundaries, where the model does not depend on the parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EstimationError, EvaluationError, SeqoedError
from .estimation import Dataset, EstimateConfig, wls_estimate, _predict_all
from .modeling import (
    NoiseModel,
    ParametricModel,
    UnweightedDesign,
    design_info,
    model_jacobians,
)

#: Multistart budget of each synthetic refit (on top of the warm start).
REFIT_STARTS = 8

#: How often a failed synthetic sample is redrawn before giving up.
REFIT_RETRY_CAP = 5


def rmse(model: ParametricModel, theta, reference: Dataset) -> np.ndarray:
    """Per-output root mean squared prediction error on the reference data."""
    try:
        pred = _predict_all(model, reference.x_actual, theta)
    except SeqoedError:
        for i, p in enumerate(reference.x_actual):
            try:
                _predict_all(model, p[None, :], theta)
            except SeqoedError as exc:
                raise EvaluationError(f"prediction failed: {exc}", index=i) from exc
        raise
    return np.sqrt(np.mean((pred - reference.y) ** 2, axis=0))


def _design_points(design) -> np.ndarray:
    if isinstance(design, UnweightedDesign):
        return design.points
    return UnweightedDesign(design).points


def _normalized_precision(
    model: ParametricModel, design, theta_ref, noise: NoiseModel, per_experiment: bool
) -> np.ndarray:
    design = design if isinstance(design, UnweightedDesign) else UnweightedDesign(design)
    M = design_info(model, design, theta_ref, noise).matrix
    if per_experiment:
        M = M / design.size
    return np.linalg.inv(M)


def lin_prediction_sigma(
    model: ParametricModel,
    x,
    design,
    theta_ref,
    noise: NoiseModel,
    per_experiment: bool = True,
) -> np.ndarray:
    """Linearization-based prediction uncertainty of each output at x."""
    Minv = _normalized_precision(model, design, theta_ref, noise, per_experiment)
    pts = np.atleast_2d(np.asarray(x.as_tuple() if hasattr(x, "as_tuple") else x, float))
    J = model_jacobians(model, pts, theta_ref)[0]  # (d_y, d_theta)
    var = np.einsum("yi,ij,yj->y", J, Minv, J)
    return np.sqrt(np.maximum(var, 0.0))


def refit_samples(
    model: ParametricModel,
    design,
    theta_ref,
    noise: NoiseModel,
    n_sam: int,
    seed: int = 0,
    n_starts: int = REFIT_STARTS,
) -> np.ndarray:
    """Parameter estimates from synthetic replicates of the design's data.

    Sample s draws measurements y = f(design, theta_ref) + noise from its own
    RNG stream (seed, s) -- so parallel evaluation cannot change results --
    and refits starting from theta_ref plus ``n_starts`` uniform draws.
    Failed samples are redrawn a bounded number of times.
    """
    pts = _design_points(design)
    theta_arr = np.asarray(
        theta_ref.as_array() if hasattr(theta_ref, "as_array") else theta_ref, float
    )
    clean = _predict_all(model, pts, theta_arr)
    chol = np.linalg.cholesky(noise.covariance)
    out = np.empty((n_sam, model.d_theta))
    for s in range(n_sam):
        rng = np.random.default_rng((seed, s))
        for attempt in range(REFIT_RETRY_CAP):
            y = clean + rng.standard_normal(clean.shape) @ chol.T
            data = Dataset(x_actual=pts, y=y)
            seed_s = int(rng.integers(2**31))
            try:
                # the warm start lands in the right basin, so it runs alone
                # with the full effort budget; the multistarts are insurance
                # drawn only when the warm solve fails, with a tight effort
                # cap so stray near-feasible draws cannot burn the sampling
                # budget
                try:
                    est = wls_estimate(
                        model,
                        data,
                        noise,
                        EstimateConfig(
                            n_starts=0,
                            seed=seed_s,
                            warm_starts=(theta_arr,),
                            include_center_start=False,
                        ),
                    )
                except EstimationError:
                    est = wls_estimate(
                        model,
                        data,
                        noise,
                        EstimateConfig(
                            n_starts=n_starts,
                            seed=seed_s,
                            warm_starts=(theta_arr,),
                            include_center_start=False,
                            max_nfev=300,
                            max_draw_factor=1,
                        ),
                    )
                out[s] = est.theta
                break
            except EstimationError:
                if attempt == REFIT_RETRY_CAP - 1:
                    raise EstimationError(
                        f"synthetic refit failed {REFIT_RETRY_CAP} times for sample {s}"
                    )
    return out


def sam_prediction_sigma(
    model: ParametricModel,
    x,
    design,
    theta_ref,
    noise: NoiseModel,
    n_sam: int,
    seed: int = 0,
    thetas: np.ndarray | None = None,
) -> np.ndarray:
    """Sampling-based prediction uncertainty of each output at x.

    The spread is the population standard deviation (divide by n_sam) of the
    predictions across refits; precomputed refit parameters can be passed in
    to amortize them over many evaluation points.
    """
    if thetas is None:
        thetas = refit_samples(model, design, theta_ref, noise, n_sam, seed)
    pts = np.atleast_2d(np.asarray(x.as_tuple() if hasattr(x, "as_tuple") else x, float))
    preds = np.stack([_predict_all(model, pts, th)[0] for th in thetas])
    return np.sqrt(np.mean((preds - preds.mean(axis=0)) ** 2, axis=0))


@dataclass(frozen=True)
class WorstCaseReport:
    """Worst-case uncertainties plus the per-composition curves behind them."""

    kind: str
    worst: np.ndarray  # (d_y,)
    l_values: np.ndarray  # (n_l,)
    curves: np.ndarray  # (d_y, n_l): max over pressure at each composition
    design_size: int
    per_experiment: bool | None = None
    n_sam: int | None = None
    seed: int | None = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "worst": self.worst.tolist(),
            "l_values": self.l_values.tolist(),
            "curves": self.curves.tolist(),
            "design_size": self.design_size,
            "per_experiment": self.per_experiment,
            "n_sam": self.n_sam,
            "seed": self.seed,
        }


def _evaluation_grid(model, l_values, P_values):
    if l_values is None:
        l_values = np.linspace(0.0, 1.0, 201)
    if P_values is None:
        lo, hi = getattr(model, "pressure_range", (1e5, 3e5))
        P_values = np.linspace(lo, hi, 21)
    l_values = np.asarray(l_values, dtype=float)
    P_values = np.asarray(P_values, dtype=float)
    Lg, Pg = np.meshgrid(l_values, P_values, indexing="ij")
    return l_values, P_values, np.column_stack([Lg.ravel(), Pg.ravel()])


def worst_case_sigma(
    kind: str,
    model: ParametricModel,
    design,
    theta_ref,
    noise: NoiseModel,
    l_values: np.ndarray | None = None,
    P_values: np.ndarray | None = None,
    per_experiment: bool = True,
    n_sam: int = 1000,
    seed: int = 0,
) -> WorstCaseReport:
    """Maximize the prediction uncertainty over an evaluation grid.

    Returns both the overall worst case per output and the worst-over-pressure
    curve as a function of composition (the diagnostic used to compare design
    stages).  ``kind`` selects the linearized ("lin") or sampling ("sam")
    variant.
    """
    design = design if isinstance(design, UnweightedDesign) else UnweightedDesign(design)
    l_values, P_values, grid = _evaluation_grid(model, l_values, P_values)
    n_l, n_P = len(l_values), len(P_values)

    if kind == "lin":
        Minv = _normalized_precision(model, design, theta_ref, noise, per_experiment)
        J = model_jacobians(model, grid, theta_ref)  # (n, d_y, d_theta)
        var = np.einsum("nyi,ij,nyj->ny", J, Minv, J)
        sig = np.sqrt(np.maximum(var, 0.0)).reshape(n_l, n_P, model.d_y)
        curves = sig.max(axis=1).T  # (d_y, n_l)
        return WorstCaseReport(
            kind="lin",
            worst=curves.max(axis=1),
            l_values=l_values,
            curves=curves,
            design_size=design.size,
            per_experiment=per_experiment,
        )
    if kind != "sam":
        raise ValueError(f"unknown uncertainty kind {kind!r}")

    thetas = refit_samples(model, design, theta_ref, noise, n_sam, seed)
    # streaming mean/second-moment over samples keeps memory flat
    mean = np.zeros((grid.shape[0], model.d_y))
    m2 = np.zeros_like(mean)
    for k, th in enumerate(thetas, start=1):
        pred = _predict_all(model, grid, th)
        delta = pred - mean
        mean += delta / k
        m2 += delta * (pred - mean)
    sig = np.sqrt(m2 / n_sam).reshape(n_l, n_P, model.d_y)
    curves = sig.max(axis=1).T
    return WorstCaseReport(
        kind="sam",
        worst=curves.max(axis=1),
        l_values=l_values,
        curves=curves,
        design_size=design.size,
        n_sam=n_sam,
        seed=seed,
    )
