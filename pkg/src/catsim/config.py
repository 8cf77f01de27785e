"""Experiment configuration: one JSON document describing a full sweep.

Every section is optional; omitted sections fall back to the reference
scenario (1 Hz sensor with 50 kByte readings, decision period 1 s, t_min in
{10, 30} s, t_max 120 s, the built-in metric set, periodic plus all
single-metric and generic multi-metric policies, and one synthetic suburban
plus one highway trace of an hour each).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO, Any

from . import predictor
from .metrics import MetricDefinition, TimingConfig, default_metric_definitions
from .simulator import PolicyConfig, SensorConfig
from .trace import (
    DEFAULT_CAP_MAX_MBPS,
    PROFILES,
    ChannelTrace,
    generate_synthetic_trace,
    parse_trace_csv,
)

# Seed layout: run r of a sweep uses base_seed + r; synthetic trace i is
# generated from base_seed + TRACE_SEED_OFFSET + i.
TRACE_SEED_OFFSET = 100_000

DEFAULT_DEADLINES = (30.0, 60.0, 120.0, 180.0)
DEFAULT_RUNS_PER_PAIR = 5
DEFAULT_TRACE_DURATION = 3600.0

INDICATOR_METRICS = ("rsrp", "rsrq", "snr", "cqi")


class ConfigError(ValueError):
    """Configuration problem, carrying the offending field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _expect(section: Any, path: str, typ: type) -> Any:
    if not isinstance(section, typ):
        raise ConfigError(path, f"expected {typ.__name__}, got {type(section).__name__}")
    return section


def _number(obj: dict, key: str, path: str, default: float | None = None) -> float:
    if key not in obj:
        if default is None:
            raise ConfigError(f"{path}.{key}", "missing required value")
        return default
    value = obj[key]
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigError(f"{path}.{key}", f"expected a number, got {value!r}")
    return float(value)


@dataclass
class TraceSpec:
    source: str  # "synthetic" | "file"
    profile: str = "suburban"
    duration: float = DEFAULT_TRACE_DURATION
    sample_period: float = 1.0
    cap_max: float = DEFAULT_CAP_MAX_MBPS
    path: str = ""


@dataclass
class PolicySpec:
    kind: str
    metric_names: tuple[str, ...] = ()
    weights: tuple[float, ...] | None = None
    model_path: str = ""
    phi_max: float = 18.0
    name: str | None = None


@dataclass
class ExperimentConfig:
    experiment: str
    sensor: SensorConfig
    t_min_values: tuple[float, ...]
    t_max: float
    t_decision: float
    metric_defs: dict[str, MetricDefinition]
    policy_specs: list[PolicySpec]
    trace_specs: list[TraceSpec]
    runs_per_pair: int
    base_seed: int
    deadlines: tuple[float, ...]
    output_dir: str
    jobs: int = 1

    def timings(self) -> list[TimingConfig]:
        return [
            TimingConfig(t_min=t, t_max=self.t_max, t_decision=self.t_decision)
            for t in self.t_min_values
        ]

    def build_policies(self) -> list[PolicyConfig]:
        policies = []
        for spec in self.policy_specs:
            for timing in self.timings():
                policies.append(self._build_policy(spec, timing))
        return policies

    def _build_policy(self, spec: PolicySpec, timing: TimingConfig) -> PolicyConfig:
        if spec.kind == "periodic":
            return PolicyConfig(kind="periodic", timing=timing, name=spec.name)
        if spec.kind == "predicted_rate":
            model = predictor.load_model(spec.model_path)
            rate_metric = MetricDefinition(
                "predicted_rate", 0.0, spec.phi_max, 8.0, "conducive"
            )
            return PolicyConfig(
                kind="predicted_rate",
                timing=timing,
                metrics=(rate_metric,),
                model=model,
                name=spec.name,
            )
        names = spec.metric_names or INDICATOR_METRICS
        if spec.kind == "single_metric":
            names = spec.metric_names  # validated non-empty at parse time
        try:
            metric_defs = tuple(self.metric_defs[n] for n in names)
        except KeyError as exc:
            raise ConfigError("policies", f"unknown metric {exc.args[0]!r}") from None
        weights = spec.weights
        if spec.kind == "weighted_mean" and weights is None:
            weights = tuple(1.0 for _ in metric_defs)
        return PolicyConfig(
            kind=spec.kind, timing=timing, metrics=metric_defs, weights=weights, name=spec.name
        )

    def build_traces(self) -> list[ChannelTrace]:
        traces = []
        for i, spec in enumerate(self.trace_specs):
            if spec.source == "file":
                traces.append(parse_trace_csv(spec.path, name=spec.path))
            else:
                profile = PROFILES[spec.profile]
                traces.append(
                    generate_synthetic_trace(
                        profile,
                        duration=spec.duration,
                        sample_period=spec.sample_period,
                        seed=self.base_seed + TRACE_SEED_OFFSET + i,
                        cap_max=spec.cap_max,
                    )
                )
        return traces


def _parse_sensor(obj: dict) -> SensorConfig:
    _expect(obj, "sensor", dict)
    try:
        return SensorConfig(
            frequency=_number(obj, "frequency_hz", "sensor", 1.0),
            payload_size=int(_number(obj, "payload_bytes", "sensor", 50_000)),
        )
    except ValueError as exc:
        raise ConfigError("sensor", str(exc)) from None


def _parse_metrics(obj: dict) -> dict[str, MetricDefinition]:
    _expect(obj, "metrics", dict)
    defs = default_metric_definitions()
    for name, spec in obj.items():
        _expect(spec, f"metrics.{name}", dict)
        try:
            defs[name] = MetricDefinition(
                name=name,
                phi_min=_number(spec, "phi_min", f"metrics.{name}"),
                phi_max=_number(spec, "phi_max", f"metrics.{name}"),
                alpha=_number(spec, "alpha", f"metrics.{name}", 1.0),
                polarity=spec.get("polarity", "conducive"),
            )
        except ValueError as exc:
            raise ConfigError(f"metrics.{name}", str(exc)) from None
    return defs


def _parse_policy(spec: dict, path: str) -> PolicySpec:
    _expect(spec, path, dict)
    kind = spec.get("kind")
    known = ("periodic", "single_metric", "optimistic", "pessimistic",
             "weighted_mean", "predicted_rate")
    if kind not in known:
        raise ConfigError(f"{path}.kind", f"unknown policy kind {kind!r}")
    names: tuple[str, ...] = ()
    if "metric" in spec:
        names = (str(spec["metric"]),)
    elif "metrics" in spec:
        names = tuple(str(m) for m in _expect(spec["metrics"], f"{path}.metrics", list))
    if kind == "single_metric" and len(names) != 1:
        raise ConfigError(f"{path}.metric", "single_metric needs exactly one metric name")
    weights = None
    if "weights" in spec:
        weights = tuple(float(w) for w in _expect(spec["weights"], f"{path}.weights", list))
    phi_max = _number(spec, "phi_max", path, 18.0)
    model_path = str(spec.get("model_path", ""))
    if kind == "predicted_rate" and not model_path:
        raise ConfigError(f"{path}.model_path", "predicted_rate needs a model file")
    return PolicySpec(
        kind=kind,
        metric_names=names,
        weights=weights,
        model_path=model_path,
        phi_max=phi_max,
        name=spec.get("name"),
    )


def _parse_trace(spec: dict, path: str) -> TraceSpec:
    _expect(spec, path, dict)
    source = spec.get("source", "synthetic")
    if source == "file":
        if not spec.get("path"):
            raise ConfigError(f"{path}.path", "file trace needs a path")
        return TraceSpec(source="file", path=str(spec["path"]))
    if source != "synthetic":
        raise ConfigError(f"{path}.source", f"unknown trace source {source!r}")
    profile = spec.get("profile", "suburban")
    if profile not in PROFILES:
        raise ConfigError(
            f"{path}.profile", f"unknown profile {profile!r}, expected one of {sorted(PROFILES)}"
        )
    return TraceSpec(
        source="synthetic",
        profile=profile,
        duration=_number(spec, "duration_s", path, DEFAULT_TRACE_DURATION),
        sample_period=_number(spec, "sample_period_s", path, 1.0),
        cap_max=_number(spec, "cap_max_mbps", path, DEFAULT_CAP_MAX_MBPS),
    )


def _default_policy_specs() -> list[PolicySpec]:
    specs = [PolicySpec(kind="periodic")]
    specs += [PolicySpec(kind="single_metric", metric_names=(m,)) for m in INDICATOR_METRICS]
    specs += [
        PolicySpec(kind="optimistic"),
        PolicySpec(kind="pessimistic"),
        PolicySpec(kind="weighted_mean"),
    ]
    return specs


def load_config(source: IO[str] | str | dict) -> ExperimentConfig:
    """Parse and validate an experiment configuration document."""
    if isinstance(source, str):
        with open(source, "r") as fh:
            return load_config(fh)
    if isinstance(source, dict):
        doc = source
    else:
        try:
            doc = json.load(source)
        except json.JSONDecodeError as exc:
            raise ConfigError("<document>", f"invalid JSON: {exc}") from None
    _expect(doc, "<document>", dict)

    timing = _expect(doc.get("timing", {}), "timing", dict)
    t_min_raw = timing.get("t_min_s", [10.0, 30.0])
    if isinstance(t_min_raw, (int, float)) and not isinstance(t_min_raw, bool):
        t_min_values: tuple[float, ...] = (float(t_min_raw),)
    elif isinstance(t_min_raw, list) and t_min_raw:
        t_min_values = tuple(float(v) for v in t_min_raw)
    else:
        raise ConfigError("timing.t_min_s", f"expected a number or list, got {t_min_raw!r}")
    t_max = _number(timing, "t_max_s", "timing", 120.0)
    t_decision = _number(timing, "t_decision_s", "timing", 1.0)
    for t_min in t_min_values:
        try:
            TimingConfig(t_min=t_min, t_max=t_max, t_decision=t_decision)
        except ValueError as exc:
            raise ConfigError("timing", str(exc)) from None

    policies_raw = doc.get("policies")
    if policies_raw is None:
        policy_specs = _default_policy_specs()
    else:
        _expect(policies_raw, "policies", list)
        if not policies_raw:
            raise ConfigError("policies", "policy list must not be empty")
        policy_specs = [
            _parse_policy(p, f"policies[{i}]") for i, p in enumerate(policies_raw)
        ]

    traces_raw = doc.get("traces")
    if traces_raw is None:
        trace_specs = [
            TraceSpec(source="synthetic", profile="suburban"),
            TraceSpec(source="synthetic", profile="highway"),
        ]
    else:
        if isinstance(traces_raw, dict):
            traces_raw = [traces_raw]
        _expect(traces_raw, "traces", list)
        if not traces_raw:
            raise ConfigError("traces", "trace list must not be empty")
        trace_specs = [_parse_trace(t, f"traces[{i}]") for i, t in enumerate(traces_raw)]

    evaluation = _expect(doc.get("evaluation", {}), "evaluation", dict)
    deadlines_raw = evaluation.get("deadlines_s", list(DEFAULT_DEADLINES))
    _expect(deadlines_raw, "evaluation.deadlines_s", list)
    deadlines = tuple(float(d) for d in deadlines_raw)
    if any(b <= a for a, b in zip(deadlines, deadlines[1:])):
        raise ConfigError("evaluation.deadlines_s", "deadlines must be strictly increasing")

    return ExperimentConfig(
        experiment=str(doc.get("experiment", "experiment")),
        sensor=_parse_sensor(doc.get("sensor", {})),
        t_min_values=t_min_values,
        t_max=t_max,
        t_decision=t_decision,
        metric_defs=_parse_metrics(doc.get("metrics", {})),
        policy_specs=policy_specs,
        trace_specs=trace_specs,
        runs_per_pair=int(_number(evaluation, "runs_per_pair", "evaluation",
                                  DEFAULT_RUNS_PER_PAIR)),
        base_seed=int(_number(evaluation, "base_seed", "evaluation", 1)),
        deadlines=deadlines,
        output_dir=str(evaluation.get("output_dir", "out")),
        jobs=int(_number(evaluation, "jobs", "evaluation", 1)),
    )
