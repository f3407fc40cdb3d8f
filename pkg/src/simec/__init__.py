"""Level sets and interval preimages of smooth MLPs via the singular pullback metric."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    DegenerateMetricError,
    InputShapeError,
    NumericalError,
    SimecError,
    TrainingDivergedError,
)
from .explorer import ExploreConfig, FoliationResult, preimage_interval, simexp_step  # noqa: E402
from .metric import (  # noqa: E402
    AnalyticMetric,
    MetricTensor,
    PullbackMetric,
    SpectralDecomposition,
    pullback_metric,
    select_direction,
    spectral_decompose,
)
from .nn import (  # noqa: E402
    Activation,
    Layer,
    MlpModel,
    check_full_rank,
    forward,
    layer_jacobian,
    load_model,
    network_jacobian,
    save_model,
)
from .tracer import Polygonal, TraceConfig, simec_trace  # noqa: E402

__all__ = [
    "Activation", "AnalyticMetric", "ConfigError", "DegenerateMetricError", "ExploreConfig",
    "FoliationResult", "InputShapeError", "Layer", "MetricTensor", "MlpModel", "NumericalError",
    "Polygonal", "PullbackMetric", "SimecError", "SpectralDecomposition", "TraceConfig",
    "TrainingDivergedError", "check_full_rank", "forward", "layer_jacobian", "load_model",
    "network_jacobian", "preimage_interval", "pullback_metric", "save_model", "select_direction",
    "simec_trace", "simexp_step", "spectral_decompose",
]
