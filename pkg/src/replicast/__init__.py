"""replicast: steady-state prediction for metric-based autoscaling.

Fits a Gaussian metric model and a response-time curve from a short
profiling trace, builds the Markov chain of the autoscaler's
(ordered, ready) replica counts, and reports average response time,
replica count and per-container concurrency at any arrival rate.
A built-in discrete-event simulator provides ground truth and traces.
"""

from ._jit import JIT_ENABLED
from .bundle import ModelBundle, fit_bundle, load_bundle, save_bundle
from .cluster import (ClusterChain, StationaryDistribution, build_chain,
                      build_rate_matrix, horizontal_transition_probs,
                      solve_stationary, stationary_distribution,
                      transient_distribution, vertical_transition_probs)
from .config import (METRIC_CONCURRENCY, METRIC_KINDS, METRIC_RPS,
                     AutoscalerConfig, PredictionRequest, ProfilingTrace,
                     TraceRow, load_autoscaler_config, parse_trace,
                     save_autoscaler_config, trace_from_arrays, write_trace)
from .errors import (ChainStructureWarning, ConfigMismatchError,
                     FitRejectedError, InsufficientDataError, NonErgodicError,
                     NumericalError, ReplicastError, TraceParseError,
                     ValidationError)
from .evaluator import OrderDistribution, order_probabilities
from .metric_model import (STD_FLOOR, GaussianDist, MetricModel,
                           fit_metric_model, mean_of_positive_part,
                           observed_value_distribution)
from .output import (ResponseTimeFunction, StateContribution,
                     SteadyStateReport, fit_rtf, steady_state_report)
from .simulator import (WORKLOAD_INFINITE_SERVER, WORKLOAD_PROCESSOR_SHARING,
                        SimulationConfig, SimulationReport, WorkloadModel,
                        emit_profiling_trace, profile_trace, simulate)

__version__ = "0.1.0"

__all__ = [
    "JIT_ENABLED",
    "ModelBundle", "fit_bundle", "load_bundle", "save_bundle",
    "ClusterChain", "StationaryDistribution", "build_chain",
    "build_rate_matrix", "horizontal_transition_probs", "solve_stationary",
    "stationary_distribution", "transient_distribution",
    "vertical_transition_probs",
    "METRIC_CONCURRENCY", "METRIC_KINDS", "METRIC_RPS",
    "AutoscalerConfig", "PredictionRequest", "ProfilingTrace", "TraceRow",
    "load_autoscaler_config", "parse_trace", "save_autoscaler_config",
    "trace_from_arrays", "write_trace",
    "ChainStructureWarning", "ConfigMismatchError", "FitRejectedError",
    "InsufficientDataError", "NonErgodicError", "NumericalError",
    "ReplicastError", "TraceParseError", "ValidationError",
    "OrderDistribution", "order_probabilities",
    "STD_FLOOR", "GaussianDist", "MetricModel", "fit_metric_model",
    "mean_of_positive_part", "observed_value_distribution",
    "ResponseTimeFunction", "StateContribution", "SteadyStateReport",
    "fit_rtf", "steady_state_report",
    "WORKLOAD_INFINITE_SERVER", "WORKLOAD_PROCESSOR_SHARING",
    "SimulationConfig", "SimulationReport", "WorkloadModel",
    "emit_profiling_trace", "profile_trace", "simulate",
    "__version__",
]
