"""Sequential locally optimal experimental design for nonlinear parametric
models, with a binary vapor-liquid-equilibrium case study.

The package splits into a generic toolkit -- parametric-model surface,
weighted least squares, design criteria, the adaptive-discretization design
solver, batch conversion, the sequential campaign loop, and design-quality
metrics -- and the concrete propanol / propyl-acetate bubble-point model with
its bundled measurement data in :mod:`seqoed.casestudy`.
"""

from .assess import (
    WorstCaseReport,
    lin_prediction_sigma,
    refit_samples,
    rmse,
    sam_prediction_sigma,
    worst_case_sigma,
)
from .batching import select_batch, sieve
from .campaign import (
    CampaignConfig,
    CampaignState,
    CampaignStatus,
    ExperimentRecord,
    ScriptedSource,
    SimulatedSource,
    campaign_step,
    new_campaign,
    propose_next,
    record_measurements,
    run_campaign,
    scaled_distance,
)
from .criteria import Criterion, TwoStageContext, criterion_value, sensitivity, two_stage_value
from .errors import (
    ConvergenceError,
    DomainError,
    EstimationError,
    EvaluationError,
    InfeasibleDesignError,
    ParseError,
    SchemaVersionError,
    SeqoedError,
    SingularMatrixError,
)
from .estimation import (
    Dataset,
    EstimateConfig,
    EstimateResult,
    LinearModel,
    covariance_estimate,
    gauss_newton_step,
    linear_lse,
    sse_gradient,
    weighted_sse,
    wls_estimate,
)
from .modeling import (
    InfoMatrix,
    NoiseModel,
    UnweightedDesign,
    WeightedDesign,
    design_info,
    one_point_info,
)
from .solver import DesignSpace, SolveReport, inner_weight_solve, solve_weighted
from .vle import AntoineParams, BinaryVleModel, InputPoint, Output, ParamVector, antoine_pressure, boiling_temperature, nrtl_gamma

__version__ = "0.1.0"
