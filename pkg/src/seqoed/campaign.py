"""Sequential campaign loop: measure, re-estimate, design the next batch.

Each iteration appends the measurements of the previously proposed batch,
re-fits the parameters on all data collected so far, and computes a new batch
of at most ``max_batch_size`` experiments by solving the two-stage design
problem with the already-performed experiments as the prior stage.  The loop
stops when the budget would be exceeded (the unaffordable batch is recorded
but not performed) or when every newly proposed point lies within the
progress tolerance of an already performed experiment (those near-duplicate
measurements are still performed, matching how a final confirmation batch is
handled in practice).

States are immutable snapshots; every transition returns a new state with the
full history embedded, so persistence is just serialization of the latest
state.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, replace
from typing import Protocol, runtime_checkable

import numpy as np

from .batching import select_batch, sieve
from .criteria import Criterion, TwoStageContext
from .errors import DomainError
from .estimation import Dataset, EstimateConfig, wls_estimate
from .modeling import NoiseModel, ParametricModel, UnweightedDesign
from .solver import DesignSpace, solve_weighted


class CampaignStatus(str, enum.Enum):
    AWAITING_MEASUREMENTS = "awaiting_measurements"
    READY_TO_PROPOSE = "ready_to_propose"
    TERMINATED_BUDGET = "terminated_budget"
    TERMINATED_PROGRESS = "terminated_progress"


@dataclass(frozen=True)
class CampaignConfig:
    """All knobs of the sequential loop; validated on construction."""

    space: DesignSpace
    noise: NoiseModel
    alpha: float = 0.5
    epsilon: float = 5e-5
    min_batch_weight: float = 0.95
    max_batch_size: int = 3
    budget: int = 27
    progress_tol: float = 0.1
    criterion: Criterion = Criterion.D
    seed: int = 0
    n_sam: int = 1000
    n_starts: int = 32

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise DomainError(f"alpha={self.alpha} outside [0, 1)")
        if self.epsilon <= 0:
            raise DomainError("epsilon must be positive")
        if not 0.0 < self.min_batch_weight <= 1.0:
            raise DomainError("minimal batch weight must lie in (0, 1]")
        if self.max_batch_size < 1:
            raise DomainError("maximal batch size must be at least 1")
        if self.budget < 1:
            raise DomainError("experiment budget must be at least 1")
        if self.progress_tol <= 0:
            raise DomainError("progress tolerance must be positive")
        if self.n_sam < 2:
            raise DomainError("n_sam must be at least 2")


@dataclass(frozen=True)
class ExperimentRecord:
    """One performed experiment: planned and realized inputs plus outputs."""

    x_planned: tuple[float, float]
    x_actual: tuple[float, float]
    y: tuple[float, float]
    iteration: int
    label: str = ""


@dataclass(frozen=True)
class CampaignState:
    """Immutable snapshot of a campaign; history is append-only."""

    iteration: int = 0
    records: tuple[ExperimentRecord, ...] = ()
    pending: tuple[tuple[float, float], ...] = ()
    estimates: tuple[dict, ...] = ()
    reports: tuple[dict, ...] = ()
    status: CampaignStatus = CampaignStatus.AWAITING_MEASUREMENTS
    unfunded_batch: tuple[tuple[float, float], ...] = ()

    @property
    def n_measured(self) -> int:
        return len(self.records)

    @property
    def terminated(self) -> bool:
        return self.status in (
            CampaignStatus.TERMINATED_BUDGET,
            CampaignStatus.TERMINATED_PROGRESS,
        )

    def planned_points(self) -> np.ndarray:
        return np.array([r.x_planned for r in self.records], dtype=float).reshape(-1, 2)

    def actual_points(self) -> np.ndarray:
        return np.array([r.x_actual for r in self.records], dtype=float).reshape(-1, 2)

    def dataset(self) -> Dataset:
        if not self.records:
            raise DomainError("campaign has no measurements yet")
        return Dataset(
            x_actual=self.actual_points(),
            y=np.array([r.y for r in self.records], dtype=float),
            x_planned=self.planned_points(),
            labels=tuple(r.label for r in self.records),
        )

    @property
    def current_estimate(self) -> np.ndarray | None:
        if not self.estimates:
            return None
        return np.asarray(self.estimates[-1]["theta"], dtype=float)


@runtime_checkable
class ExperimentSource(Protocol):
    """Provider of measurements for a batch of planned points."""

    def measure(self, points: np.ndarray) -> list[tuple[tuple[float, float], tuple[float, float]]]:
        """Return one (x_actual, y) pair per requested point, in order."""
        ...


class SimulatedSource:
    """Synthetic lab: evaluates a hidden truth and adds seeded Gaussian noise."""

    def __init__(self, model: ParametricModel, theta_star, noise: NoiseModel, seed: int = 0):
        self.model = model
        self.theta_star = np.asarray(
            theta_star.as_array() if hasattr(theta_star, "as_array") else theta_star, float
        )
        self.noise = noise
        self._rng = np.random.default_rng(seed)

    def measure(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        out = []
        chol = np.linalg.cholesky(self.noise.covariance)
        for p in points:
            y = self.model.predict(tuple(p), self.theta_star)
            y_arr = y.as_array() if hasattr(y, "as_array") else np.asarray(y, float)
            noisy = y_arr + chol @ self._rng.standard_normal(len(y_arr))
            out.append((tuple(map(float, p)), tuple(map(float, noisy))))
        return out


class ScriptedSource:
    """Replays a fixed measurement table, matching requests to the nearest
    unconsumed planned point.  Duplicate table rows serve replicated requests."""

    def __init__(self, data: Dataset):
        if data.x_planned is None:
            raise DomainError("scripted source needs planned coordinates")
        self.data = data
        self._used = np.zeros(data.size, dtype=bool)

    def measure(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        out = []
        for p in points:
            open_idx = np.where(~self._used)[0]
            if open_idx.size == 0:
                raise DomainError("scripted source exhausted")
            d = np.max(
                np.abs(self.data.x_planned[open_idx] - p)
                / np.maximum(np.abs(self.data.x_planned).max(axis=0), 1e-300),
                axis=1,
            )
            pick = int(open_idx[np.argmin(d)])
            self._used[pick] = True
            out.append(
                (tuple(map(float, self.data.x_actual[pick])), tuple(map(float, self.data.y[pick])))
            )
        return out


def scaled_distance(x, x_prime, space: DesignSpace) -> float:
    """Max-norm distance scaled by the side lengths of the grid's bounding box."""
    x = np.asarray(x, dtype=float)
    x_prime = np.asarray(x_prime, dtype=float)
    lengths = space.box_lengths
    usable = lengths > 0.0
    if not np.all(usable):
        warnings.warn(
            "design space is degenerate along some coordinate; excluding it from distances",
            stacklevel=2,
        )
    if not np.any(usable):
        raise DomainError("design space box has no extent in any coordinate")
    return float(np.max(np.abs(x - x_prime)[usable] / lengths[usable]))


def record_measurements(state: CampaignState, measured) -> CampaignState:
    """Append the measurements of the pending batch, one record per point."""
    if not state.pending:
        raise DomainError("no pending batch to record measurements for")
    if len(measured) != len(state.pending):
        raise DomainError(
            f"expected {len(state.pending)} measurements, got {len(measured)}"
        )
    new_records = []
    for planned, (x_actual, y) in zip(state.pending, measured):
        new_records.append(
            ExperimentRecord(
                x_planned=tuple(map(float, planned)),
                x_actual=tuple(map(float, x_actual)),
                y=tuple(map(float, y)),
                iteration=state.iteration,
                label=f"iteration-{state.iteration}",
            )
        )
    # completing the final near-duplicate batch keeps a progress-terminated
    # campaign terminated; only live campaigns move on to the propose step
    next_status = state.status if state.terminated else CampaignStatus.READY_TO_PROPOSE
    return replace(
        state,
        records=state.records + tuple(new_records),
        pending=(),
        status=next_status,
    )


def propose_next(
    state: CampaignState, config: CampaignConfig, model: ParametricModel
) -> CampaignState:
    """Re-estimate on all data and compute the next batch with termination checks."""
    if state.status is not CampaignStatus.READY_TO_PROPOSE:
        raise DomainError(f"cannot propose from status {state.status.value}")
    data = state.dataset()
    warm = () if state.current_estimate is None else (state.current_estimate,)
    est = wls_estimate(
        model,
        data,
        config.noise,
        EstimateConfig(n_starts=config.n_starts, seed=config.seed, warm_starts=warm),
    )
    ctx = TwoStageContext(
        prior_design=UnweightedDesign(state.actual_points()),
        alpha=config.alpha,
        theta_ref=est.theta,
        criterion=config.criterion,
    )
    report = solve_weighted(ctx, config.space, model, config.noise, config.epsilon)
    survivors = sieve(report.design, config.min_batch_weight)
    batch = select_batch(ctx, survivors, config.max_batch_size, model, config.noise)
    batch_points = tuple(tuple(map(float, p)) for p in batch.points)

    next_iteration = state.iteration + 1
    estimates = state.estimates + (
        {
            "iteration": state.iteration,
            "theta": [float(t) for t in est.theta],
            "sse": est.sse,
            "start_index": est.start_index,
        },
    )
    reports = state.reports + (
        {"iteration": state.iteration, "batch": [list(p) for p in batch_points], **report.to_dict()},
    )

    existing = state.planned_points()
    all_near = all(
        min(scaled_distance(p, q, config.space) for q in existing) < config.progress_tol
        for p in batch_points
    )
    over_budget = state.n_measured + len(batch_points) > config.budget
    if over_budget:
        return replace(
            state,
            iteration=next_iteration,
            estimates=estimates,
            reports=reports,
            pending=(),
            unfunded_batch=batch_points,
            status=CampaignStatus.TERMINATED_BUDGET,
        )
    if all_near:
        return replace(
            state,
            iteration=next_iteration,
            estimates=estimates,
            reports=reports,
            pending=batch_points,
            status=CampaignStatus.TERMINATED_PROGRESS,
        )
    return replace(
        state,
        iteration=next_iteration,
        estimates=estimates,
        reports=reports,
        pending=batch_points,
        status=CampaignStatus.AWAITING_MEASUREMENTS,
    )


def campaign_step(
    state: CampaignState,
    config: CampaignConfig,
    source: ExperimentSource,
    model: ParametricModel,
) -> CampaignState:
    """One full measure -> estimate -> design iteration.

    When the proposal terminates the campaign by the progress rule, the final
    near-duplicate batch is still measured and included; a budget stop leaves
    its batch unperformed in ``unfunded_batch``.
    """
    if state.terminated:
        raise DomainError("campaign already terminated")
    if state.status is CampaignStatus.AWAITING_MEASUREMENTS:
        state = record_measurements(state, source.measure(np.array(state.pending)))
    state = propose_next(state, config, model)
    if state.status is CampaignStatus.TERMINATED_PROGRESS and state.pending:
        state = record_measurements(state, source.measure(np.array(state.pending)))
    return state


def new_campaign(initial_design: UnweightedDesign, config: CampaignConfig) -> CampaignState:
    """Fresh state with the initial design as the first pending batch."""
    if initial_design.size > config.budget:
        raise DomainError(
            f"initial design ({initial_design.size}) exceeds the budget ({config.budget})"
        )
    return CampaignState(
        pending=tuple(tuple(map(float, p)) for p in initial_design.points),
        status=CampaignStatus.AWAITING_MEASUREMENTS,
    )


def run_campaign(
    initial_design: UnweightedDesign,
    config: CampaignConfig,
    source: ExperimentSource,
    model: ParametricModel,
    on_step=None,
) -> CampaignState:
    """Run the loop to termination; ``on_step`` sees every intermediate state."""
    state = new_campaign(initial_design, config)
    while not state.terminated:
        state = campaign_step(state, config, source, model)
        if on_step is not None:
            on_step(state)
    return state
