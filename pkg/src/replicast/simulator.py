"""Discrete-event simulator of the autoscaled deployment.

Ground truth for validating the analytical pipeline, and the generator
of profiling traces.  The event loop itself lives in ``_kernels``; this
module owns configuration, result packaging and trace emission.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from . import _kernels
from ._rng import make_streams
from .config import (METRIC_CONCURRENCY, METRIC_KINDS, AutoscalerConfig,
                     ProfilingTrace, trace_from_arrays, write_trace)
from .errors import ValidationError

WORKLOAD_INFINITE_SERVER = "infinite_server"
WORKLOAD_PROCESSOR_SHARING = "processor_sharing"
_WORKLOAD_KINDS = (WORKLOAD_INFINITE_SERVER, WORKLOAD_PROCESSOR_SHARING)

_DIST_EXPONENTIAL = "exponential"
_DIST_DETERMINISTIC = "deterministic"


@dataclass(frozen=True)
class WorkloadModel:
    """Service model of one container.

    infinite_server: every in-flight request is served independently, no
    interference; exponential or deterministic service times.
    processor_sharing: the container's unit capacity is split evenly over
    in-flight jobs; exponential total demand only, where the memoryless
    property keeps the event loop exact without tracking remaining work.
    """

    kind: str
    mean_s: float
    distribution: str = _DIST_EXPONENTIAL

    def __post_init__(self):
        if self.kind not in _WORKLOAD_KINDS:
            raise ValidationError(f"workload kind must be one of {_WORKLOAD_KINDS}, got {self.kind!r}")
        if not (isinstance(self.mean_s, (int, float)) and not isinstance(self.mean_s, bool)
                and math.isfinite(self.mean_s) and self.mean_s > 0):
            raise ValidationError(f"workload mean must be a finite number > 0, got {self.mean_s!r}")
        object.__setattr__(self, "mean_s", float(self.mean_s))
        if self.kind == WORKLOAD_INFINITE_SERVER:
            if self.distribution not in (_DIST_EXPONENTIAL, _DIST_DETERMINISTIC):
                raise ValidationError(
                    f"infinite_server distribution must be exponential or deterministic, "
                    f"got {self.distribution!r}")
        else:
            if self.distribution != _DIST_EXPONENTIAL:
                raise ValidationError(
                    f"processor_sharing supports only exponential demand, got {self.distribution!r}")

    @property
    def _kernel_kind(self) -> int:
        if self.kind == WORKLOAD_PROCESSOR_SHARING:
            return _kernels.WL_SHARING_EXP
        if self.distribution == _DIST_DETERMINISTIC:
            return _kernels.WL_INFINITE_DET
        return _kernels.WL_INFINITE_EXP

    def to_dict(self) -> dict:
        mean_key = ("mean_service_s" if self.kind == WORKLOAD_INFINITE_SERVER
                    else "mean_demand_s")
        return {"kind": self.kind, mean_key: self.mean_s, "distribution": self.distribution}

    @classmethod
    def from_dict(cls, data: dict) -> "WorkloadModel":
        if not isinstance(data, dict):
            raise ValidationError(f"workload must be a JSON object, got {type(data).__name__}")
        kind = data.get("kind")
        if kind not in _WORKLOAD_KINDS:
            raise ValidationError(f"workload kind must be one of {_WORKLOAD_KINDS}, got {kind!r}")
        mean_key = "mean_service_s" if kind == WORKLOAD_INFINITE_SERVER else "mean_demand_s"
        allowed = {"kind", mean_key, "distribution"}
        unknown = sorted(set(data) - allowed)
        if unknown:
            raise ValidationError(f"unknown workload keys: {', '.join(unknown)}")
        if mean_key not in data:
            raise ValidationError(f"workload is missing {mean_key!r}")
        return cls(kind=kind, mean_s=data[mean_key],
                   distribution=data.get("distribution", _DIST_EXPONENTIAL))


@dataclass(frozen=True)
class SimulationConfig:
    autoscaler: AutoscalerConfig
    workload: WorkloadModel
    arrival_rate: float
    duration_s: float
    warmup_s: float = 300.0
    seed: int = 1
    initial_replicas: int = 1

    def __post_init__(self):
        if not isinstance(self.autoscaler, AutoscalerConfig):
            raise ValidationError("autoscaler must be an AutoscalerConfig")
        if not isinstance(self.workload, WorkloadModel):
            raise ValidationError("workload must be a WorkloadModel")
        for name in ("arrival_rate", "duration_s", "warmup_s"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ValidationError(f"{name} must be a finite number, got {v!r}")
            object.__setattr__(self, name, float(v))
        if self.arrival_rate <= 0:
            raise ValidationError(f"arrival_rate must be > 0, got {self.arrival_rate}")
        if self.warmup_s < 0:
            raise ValidationError(f"warmup_s must be >= 0, got {self.warmup_s}")
        if self.duration_s <= self.warmup_s:
            raise ValidationError(
                f"duration_s ({self.duration_s}) must exceed warmup_s ({self.warmup_s})")
        # The monitor samples at whole seconds, so the run must contain
        # at least one sample after warmup to report anything.
        if math.floor(self.duration_s) < self.warmup_s + 1:
            raise ValidationError(
                "duration_s must cover at least one post-warmup monitoring second")
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)):
            raise ValidationError(f"seed must be an integer, got {self.seed!r}")
        object.__setattr__(self, "seed", int(self.seed))
        if isinstance(self.initial_replicas, bool) or not isinstance(self.initial_replicas, (int, np.integer)):
            raise ValidationError(f"initial_replicas must be an integer, got {self.initial_replicas!r}")
        object.__setattr__(self, "initial_replicas", int(self.initial_replicas))
        if not 1 <= self.initial_replicas <= self.autoscaler.n_max:
            raise ValidationError(
                f"initial_replicas must be in [1, {self.autoscaler.n_max}], "
                f"got {self.initial_replicas}")

    def to_dict(self) -> dict:
        return {
            "autoscaler": self.autoscaler.to_dict(),
            "workload": self.workload.to_dict(),
            "arrival_rate": self.arrival_rate,
            "duration_s": self.duration_s,
            "warmup_s": self.warmup_s,
            "seed": self.seed,
            "initial_replicas": self.initial_replicas,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SimulationConfig":
        if not isinstance(data, dict):
            raise ValidationError(f"simulation config must be a JSON object, got {type(data).__name__}")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValidationError(f"unknown simulation config keys: {', '.join(unknown)}")
        missing = sorted(k for k in ("autoscaler", "workload", "arrival_rate", "duration_s")
                         if k not in data)
        if missing:
            raise ValidationError(f"missing simulation config keys: {', '.join(missing)}")
        kwargs = dict(data)
        kwargs["autoscaler"] = AutoscalerConfig.from_dict(data["autoscaler"])
        kwargs["workload"] = WorkloadModel.from_dict(data["workload"])
        return cls(**kwargs)


@dataclass(frozen=True)
class SimulationReport:
    """Post-warmup averages plus the per-second series and trace."""

    config: SimulationConfig
    avg_replica_count: float
    avg_concurrency: float
    avg_response_time_s: float
    completed_requests: int
    arrivals_total: int
    completions_total: int
    in_flight_end: int
    times: np.ndarray
    ready_counts: np.ndarray
    observed_values: np.ndarray
    mean_rts: np.ndarray
    carried: np.ndarray
    trace: ProfilingTrace

    def __post_init__(self):
        for name in ("times", "ready_counts", "observed_values", "mean_rts", "carried"):
            arr = np.asarray(getattr(self, name))
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def to_dict(self, include_series: bool = False) -> dict:
        out = {
            "arrival_rate": self.config.arrival_rate,
            "duration_s": self.config.duration_s,
            "warmup_s": self.config.warmup_s,
            "seed": self.config.seed,
            "workload": self.config.workload.to_dict(),
            "autoscaler": self.config.autoscaler.to_dict(),
            "avg_replica_count": self.avg_replica_count,
            "avg_concurrency": self.avg_concurrency,
            "avg_response_time_s": self.avg_response_time_s,
            "completed_requests": self.completed_requests,
            "conservation": {
                "arrivals_total": self.arrivals_total,
                "completions_total": self.completions_total,
                "in_flight_end": self.in_flight_end,
            },
        }
        if include_series:
            out["series"] = {
                "t": self.times.tolist(),
                "ready_count": self.ready_counts.tolist(),
                "observed_value": self.observed_values.tolist(),
                "mean_rt_s": self.mean_rts.tolist(),
                "carried": self.carried.tolist(),
            }
        return out


def simulate(sim_cfg: SimulationConfig) -> SimulationReport:
    """Run one deterministic simulation.

    Identical config and seed produce identical reports on either
    backend; events at equal timestamps fire departure first, then
    monitor, evaluation, provisioning, arrival.
    """
    cfg = sim_cfg.autoscaler
    streams = make_streams(sim_cfg.seed)
    metric_code = (_kernels.MT_RPS if cfg.metric_kind != METRIC_CONCURRENCY
                   else _kernels.MT_CONCURRENCY)
    with np.errstate(over="ignore"):
        (n_ticks, tick_ready, tick_ov, tick_rt, tick_carried,
         area_replica, rt_sum_pw, completions_pw,
         arrivals, completions, in_flight) = _kernels.run_simulation(
            metric_code, cfg.target_value, cfg.n_max, cfg.t_eva_s,
            cfg.window_length, cfg.mu_pro, cfg.mu_dep,
            sim_cfg.workload._kernel_kind, sim_cfg.workload.mean_s,
            sim_cfg.arrival_rate, sim_cfg.duration_s, sim_cfg.warmup_s,
            sim_cfg.initial_replicas, streams)

    times = np.arange(1, n_ticks + 1, dtype=np.float64)
    mask = times > sim_cfg.warmup_s
    times = times[mask]
    ready = tick_ready[:n_ticks][mask]
    ov = tick_ov[:n_ticks][mask]
    rts = tick_rt[:n_ticks][mask]
    carried = tick_carried[:n_ticks][mask]

    span = sim_cfg.duration_s - sim_cfg.warmup_s
    avg_replicas = area_replica / span
    avg_conc = float(ov.mean())
    avg_rt = rt_sum_pw / completions_pw if completions_pw > 0 else 0.0

    trace = trace_from_arrays(sim_cfg.arrival_rate / ready, ov, rts)
    return SimulationReport(
        config=sim_cfg,
        avg_replica_count=float(avg_replicas),
        avg_concurrency=avg_conc,
        avg_response_time_s=float(avg_rt),
        completed_requests=int(completions_pw),
        arrivals_total=int(arrivals),
        completions_total=int(completions),
        in_flight_end=int(in_flight),
        times=times,
        ready_counts=ready,
        observed_values=ov,
        mean_rts=rts,
        carried=carried,
        trace=trace,
    )


def emit_profiling_trace(report: SimulationReport, path) -> None:
    """Write the report's post-warmup per-second rows as a trace CSV."""
    write_trace(report.trace, path)


def profile_trace(workload: WorkloadModel, arrival_rates, metric_kind: str = METRIC_CONCURRENCY,
                  duration_s: float = 900.0, warmup_s: float = 300.0,
                  seed: int = 20_000) -> ProfilingTrace:
    """Collect a fitting trace by sweeping single-container runs.

    Pinning n_max=1 makes the per-container rate equal each run's
    arrival rate, so a grid of arrival rates covers exactly the rho
    range the fits need.  Runs use consecutive seeds off the given base.
    """
    if metric_kind not in METRIC_KINDS:
        raise ValidationError(f"metric_kind must be one of {METRIC_KINDS}, got {metric_kind!r}")
    rates = [float(r) for r in arrival_rates]
    if not rates:
        raise ValidationError("arrival_rates must be non-empty")
    combined = ProfilingTrace()
    for idx, lam in enumerate(rates):
        cfg = AutoscalerConfig(metric_kind=metric_kind, target_value=1.0, n_max=1)
        sim_cfg = SimulationConfig(
            autoscaler=cfg, workload=workload, arrival_rate=lam,
            duration_s=duration_s, warmup_s=warmup_s, seed=seed + idx)
        combined = combined.extend(simulate(sim_cfg).trace)
    return combined
