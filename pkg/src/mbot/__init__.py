"""Mini-batch optimal transport toolkit.

Couples large point clouds through small batch-to-batch OT problems, either
by uniform averaging or by an outer transport problem over the batches, with
particle gradient flow, color transfer and ABC drivers built on top.
"""

from .errors import (
    ConfigurationError,
    ConsistencyError,
    InvalidInputError,
    NoAcceptanceError,
)
from .measures import (
    CostMatrix,
    DiscreteMeasure,
    MiniBatchIndex,
    PlanCheck,
    PointCloud,
    TransportPlan,
    batch_measure,
    empirical_measure,
    read_point_cloud,
    validate_plan,
    write_plan_csv,
    write_point_cloud,
)
from .solvers import (
    EntropicW,
    ExactW,
    Sliced,
    SolverReport,
    exact_ot_uniform,
    inner_distance,
    pairwise_cost,
    sinkhorn,
    sliced_wasserstein,
    wasserstein_1d,
)
from .schemes import (
    Average,
    EntropicOuter,
    ExactOuter,
    MbResult,
    SchemeConfig,
    aggregate_plan,
    batch_cost_matrix,
    bomb_loss,
    ebomb_loss,
    exhaustive_mb_distance,
    mb_distance,
    mot_loss,
    sample_batches,
)
from .flow import (
    FlowConfig,
    FlowTrace,
    exact_w2,
    flow_gradient,
    flow_step,
    run_flow,
)
from .color import (
    Image,
    Palette,
    apply_palette,
    color_transfer,
    kmeans,
    read_ppm,
    transfer_palette,
    write_ppm,
)
from .abc import (
    AbcConfig,
    PosteriorSample,
    abc_distance,
    pilot_epsilon,
    posterior_w2,
    rejection_abc,
    simulate,
    true_posterior_params,
)

__version__ = "0.1.0"

__all__ = [
    "AbcConfig",
    "Average",
    "ConfigurationError",
    "ConsistencyError",
    "CostMatrix",
    "DiscreteMeasure",
    "EntropicOuter",
    "EntropicW",
    "ExactOuter",
    "ExactW",
    "FlowConfig",
    "FlowTrace",
    "Image",
    "InvalidInputError",
    "MbResult",
    "MiniBatchIndex",
    "NoAcceptanceError",
    "Palette",
    "PlanCheck",
    "PointCloud",
    "PosteriorSample",
    "SchemeConfig",
    "Sliced",
    "SolverReport",
    "TransportPlan",
    "abc_distance",
    "aggregate_plan",
    "apply_palette",
    "batch_cost_matrix",
    "batch_measure",
    "bomb_loss",
    "color_transfer",
    "ebomb_loss",
    "empirical_measure",
    "exact_ot_uniform",
    "exact_w2",
    "exhaustive_mb_distance",
    "flow_gradient",
    "flow_step",
    "inner_distance",
    "kmeans",
    "mb_distance",
    "mot_loss",
    "pairwise_cost",
    "pilot_epsilon",
    "posterior_w2",
    "read_point_cloud",
    "read_ppm",
    "rejection_abc",
    "run_flow",
    "sample_batches",
    "simulate",
    "sinkhorn",
    "sliced_wasserstein",
    "transfer_palette",
    "true_posterior_params",
    "validate_plan",
    "wasserstein_1d",
    "write_plan_csv",
    "write_point_cloud",
    "write_ppm",
]
