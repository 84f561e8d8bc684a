"""Bindings for the propanol / propyl-acetate study: model constants,
candidate grids, bundled data stages, and the published campaign settings.

Propanol is component 1 throughout; inputs are (liquid mole fraction of
propanol, pressure in Pa), outputs are (vapor mole fraction of propanol,
temperature in K).
"""

from __future__ import annotations

import numpy as np

from .campaign import CampaignConfig
from .criteria import Criterion
from .modeling import NoiseModel, UnweightedDesign
from .solver import DesignSpace
from .storage import STAGES, load_antoine_components, load_measurements, load_stage_records
from .vle import BinaryVleModel, ParamVector

#: Instrument accuracies: vapor mole fraction (mol/mol) and temperature (K).
SIGMA_V = 0.0015
SIGMA_T = 0.03

#: Pressure range of interest (Pa).
PRESSURE_RANGE = (1e5, 3e5)

#: All-data least-squares estimate of the five interaction parameters,
#: the reference linearization point for the design-quality tables.
THETA_TOT = ParamVector(9.396525, -10.305843, -786.446701, 1510.352034, 0.010000)


def case_study_model() -> BinaryVleModel:
    c1, c2 = load_antoine_components()
    return BinaryVleModel(c1, c2, pressure_range=PRESSURE_RANGE)


def measurement_noise() -> NoiseModel:
    return NoiseModel.from_sigmas(SIGMA_V, SIGMA_T)


def fed_grid() -> DesignSpace:
    """9 x 3 factorial candidate grid on [0.05, 0.95] x [1e5, 3e5]."""
    return DesignSpace.from_grid(
        np.linspace(0.05, 0.95, 9), np.linspace(PRESSURE_RANGE[0], PRESSURE_RANGE[1], 3)
    )


def oed_grid() -> DesignSpace:
    """10 x 10 equidistant candidate grid on [0, 1] x [1e5, 3e5]."""
    return DesignSpace.from_grid(
        np.linspace(0.0, 1.0, 10), np.linspace(PRESSURE_RANGE[0], PRESSURE_RANGE[1], 10)
    )


def study_campaign_config(seed: int = 0, n_sam: int = 1000) -> CampaignConfig:
    """The sequential-design settings used for the bundled study."""
    return CampaignConfig(
        space=oed_grid(),
        noise=measurement_noise(),
        alpha=0.5,
        epsilon=5e-5,
        min_batch_weight=0.95,
        max_batch_size=3,
        budget=27,
        progress_tol=0.1,
        criterion=Criterion.D,
        seed=seed,
        n_sam=n_sam,
    )


def stage_dataset(stage: str):
    """Measured dataset of a bundled design stage (see ``storage.STAGES``)."""
    return load_measurements(stage)


def stage_design(stage: str, actual: bool = True) -> UnweightedDesign:
    """The experiment points of a bundled stage, realized or planned."""
    records = load_stage_records(stage)
    if actual:
        return UnweightedDesign(np.array([[r.l_actual, r.P_actual] for r in records]))
    return UnweightedDesign(np.array([[r.l_planned, r.P_planned] for r in records]))


__all__ = [
    "SIGMA_V",
    "SIGMA_T",
    "PRESSURE_RANGE",
    "THETA_TOT",
    "STAGES",
    "case_study_model",
    "measurement_noise",
    "fed_grid",
    "oed_grid",
    "study_campaign_config",
    "stage_dataset",
    "stage_design",
]
