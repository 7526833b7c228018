"""Steady-state deliverables: response time, replica count, concurrency.

The stationary distribution weights a per-state table: in state (i, j)
the deployment serves the full arrival rate with j containers, so each
container sees rate lambda/j, responds in RTF(lambda/j) on average, and
carries the positive part of the fitted metric Gaussian at that rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import AutoscalerConfig, ProfilingTrace
from .cluster import ClusterChain, StationaryDistribution
from .errors import FitRejectedError, InsufficientDataError, ValidationError
from .metric_model import (MetricModel, fit_polynomial_terms,
                           mean_of_positive_part, observed_value_distribution)


@dataclass(frozen=True)
class ResponseTimeFunction:
    """Quadratic map from per-container rate to mean response time."""

    intercept: float
    linear: float
    quadratic: float
    rho_max: float
    fit_mse: float
    fit_r2: float

    def __post_init__(self):
        if not (math.isfinite(self.intercept) and self.intercept > 0):
            raise ValidationError(
                f"response-time intercept must be > 0 (base service time), got {self.intercept!r}")

    def at(self, rho: float) -> float:
        return self.intercept + self.linear * rho + self.quadratic * rho * rho

    def to_dict(self) -> dict:
        return {
            "coefficients": {"intercept": self.intercept, "linear": self.linear,
                             "quadratic": self.quadratic},
            "rho_max": self.rho_max,
            "diagnostics": {"mse": self.fit_mse, "r2": self.fit_r2},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ResponseTimeFunction":
        try:
            return cls(
                intercept=float(data["coefficients"]["intercept"]),
                linear=float(data["coefficients"]["linear"]),
                quadratic=float(data["coefficients"]["quadratic"]),
                rho_max=float(data["rho_max"]),
                fit_mse=float(data["diagnostics"]["mse"]),
                fit_r2=float(data["diagnostics"]["r2"]),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed response-time payload: {exc!r}") from exc


def _quadratic_min_on_interval(c0: float, c1: float, c2: float, hi: float) -> tuple:
    candidates = [(0.0, c0), (hi, c0 + c1 * hi + c2 * hi * hi)]
    if c2 > 0:
        vertex = -c1 / (2.0 * c2)
        if 0.0 < vertex < hi:
            candidates.append((vertex, c0 + c1 * vertex + c2 * vertex * vertex))
    return min(candidates, key=lambda c: c[1])


def fit_rtf(trace: ProfilingTrace) -> ResponseTimeFunction:
    """Least-squares quadratic (with intercept) for mean response time.

    Needs three distinct per-container rates to identify three
    coefficients.  A fit that dips to zero or below anywhere on
    [0, rho_max] is rejected: response times are positive quantities and
    such a fit would poison every downstream average.
    """
    if trace.n_distinct_rates < 3:
        raise InsufficientDataError(
            f"trace has {trace.n_distinct_rates} distinct per-container rate(s); "
            "need >= 3 for a quadratic with intercept")
    rates = trace.rates
    y = trace.response_times
    rho_max = float(rates.max())
    if rho_max <= 0:
        raise InsufficientDataError("all per-container rates are zero; nothing to fit")
    u = rates / rho_max
    design = np.column_stack([np.ones_like(u), u, u * u])
    coef = fit_polynomial_terms(design, y, n_forced=1)
    residuals = y - design @ coef
    mse = float(np.mean(residuals ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(residuals ** 2))
    if ss_tot > 0:
        r2 = 1.0 - ss_res / ss_tot
    else:
        r2 = 1.0 if ss_res <= 1e-12 * max(1.0, float(np.sum(y ** 2))) else 0.0
    c0 = float(coef[0])
    c1 = float(coef[1]) / rho_max
    c2 = float(coef[2]) / (rho_max * rho_max)
    worst_rho, worst_val = _quadratic_min_on_interval(c0, c1, c2, rho_max)
    tol = 1e-12 * max(1.0, float(np.max(np.abs(y))))
    if worst_val <= tol:
        raise FitRejectedError(
            f"fitted response time is non-positive at rho={worst_rho:.6g} "
            f"(value {worst_val:.6g}); trace does not support a physical fit")
    return ResponseTimeFunction(intercept=c0, linear=c1, quadratic=c2,
                                rho_max=rho_max, fit_mse=mse, fit_r2=r2)


@dataclass(frozen=True)
class StateContribution:
    """One chain state's slice of the steady-state averages."""

    order: int
    ready: int
    probability: float
    per_container_rate: float
    concurrency: float
    response_time_s: float
    extrapolated: bool

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "ready": self.ready,
            "probability": self.probability,
            "per_container_rate": self.per_container_rate,
            "concurrency": self.concurrency,
            "response_time_s": self.response_time_s,
            "extrapolated": self.extrapolated,
        }


@dataclass(frozen=True)
class SteadyStateReport:
    """The three headline predictions plus their per-state decomposition."""

    arrival_rate: float
    avg_response_time_s: float
    avg_replica_count: float
    avg_concurrency: float
    per_state: tuple
    marginal_ready: np.ndarray
    extrapolated_mass: float
    window_s: float
    requests_in_window: float

    def __post_init__(self):
        arr = np.asarray(self.marginal_ready, dtype=np.float64).copy()
        arr.flags.writeable = False
        object.__setattr__(self, "marginal_ready", arr)

    def to_dict(self, include_states: bool = True) -> dict:
        out = {
            "arrival_rate": self.arrival_rate,
            "avg_response_time_s": self.avg_response_time_s,
            "avg_replica_count": self.avg_replica_count,
            "avg_concurrency": self.avg_concurrency,
            "marginal_ready": self.marginal_ready.tolist(),
            "diagnostics": {
                "extrapolated_mass": self.extrapolated_mass,
            },
            "window_s": self.window_s,
            "requests_in_window": self.requests_in_window,
        }
        if include_states:
            out["per_state"] = [s.to_dict() for s in self.per_state]
        return out


def steady_state_report(stationary: StationaryDistribution, chain: ClusterChain,
                        model: MetricModel, rtf: ResponseTimeFunction,
                        cfg: AutoscalerConfig, window_s: float = 3600.0) -> SteadyStateReport:
    """Weight the per-state table by the stationary distribution.

    States whose per-container rate exceeds either fitted range are still
    evaluated (the fitted maps are smooth) but their combined stationary
    mass is reported so callers can judge how far the prediction leans on
    extrapolation.
    """
    lam = chain.arrival_rate
    if model.metric_kind != cfg.metric_kind:
        raise ValidationError(
            f"metric model is for {model.metric_kind!r} but config declares "
            f"{cfg.metric_kind!r}")
    if not (math.isfinite(window_s) and window_s > 0):
        raise ValidationError(f"window_s must be > 0, got {window_s!r}")
    fitted_reach = min(model.rho_max, rtf.rho_max)
    states = []
    rt_sum = 0.0
    n_sum = 0.0
    c_sum = 0.0
    extrapolated_mass = 0.0
    for s in range(chain.n_states):
        i, j = chain.state_of(s)
        prob = float(stationary.pi[s])
        rho = lam / j
        rt = rtf.at(rho)
        conc = mean_of_positive_part(observed_value_distribution(model, rho))
        extrapolated = rho > fitted_reach * (1.0 + 1e-12)
        rt_sum += prob * rt
        n_sum += prob * j
        c_sum += prob * conc
        if extrapolated:
            extrapolated_mass += prob
        states.append(StateContribution(
            order=i, ready=j, probability=prob, per_container_rate=rho,
            concurrency=conc, response_time_s=rt, extrapolated=extrapolated))
    return SteadyStateReport(
        arrival_rate=lam,
        avg_response_time_s=rt_sum,
        avg_replica_count=n_sum,
        avg_concurrency=c_sum,
        per_state=tuple(states),
        marginal_ready=stationary.marginal_ready,
        extrapolated_mass=extrapolated_mass,
        window_s=float(window_s),
        requests_in_window=lam * float(window_s),
    )
