"""Serialized pairing of the two fitted models.

`fit` writes one JSON bundle holding the metric model and the
response-time function so `predict`, `sweep` and `compare` can run in
separate processes without refitting.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .config import ProfilingTrace
from .errors import ValidationError
from .metric_model import MetricModel, fit_metric_model
from .output import ResponseTimeFunction, fit_rtf

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ModelBundle:
    metric: MetricModel
    response_time: ResponseTimeFunction

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "metric_model": self.metric.to_dict(),
            "response_time": self.response_time.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelBundle":
        if not isinstance(data, dict):
            raise ValidationError(f"model bundle must be a JSON object, got {type(data).__name__}")
        version = data.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ValidationError(
                f"unsupported bundle schema_version {version!r}, expected {SCHEMA_VERSION}")
        unknown = sorted(set(data) - {"schema_version", "metric_model", "response_time"})
        if unknown:
            raise ValidationError(f"unknown bundle keys: {', '.join(unknown)}")
        if "metric_model" not in data or "response_time" not in data:
            raise ValidationError("bundle needs metric_model and response_time sections")
        return cls(metric=MetricModel.from_dict(data["metric_model"]),
                   response_time=ResponseTimeFunction.from_dict(data["response_time"]))


def fit_bundle(trace: ProfilingTrace, metric_kind: str) -> ModelBundle:
    return ModelBundle(metric=fit_metric_model(trace, metric_kind),
                       response_time=fit_rtf(trace))


def save_bundle(bundle: ModelBundle, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(bundle.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_bundle(path) -> ModelBundle:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON: {exc}") from exc
    return ModelBundle.from_dict(data)
