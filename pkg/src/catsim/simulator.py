"""Discrete-time execution of buffered sensor uploads over a channel trace.

A virtual sensor fills a buffer at fixed frequency; every decision tick an
idle device evaluates its transmission policy and, on a positive decision,
uploads the whole buffer in one transfer timed against the trace's latent
capacity.  Goodput, per-packet data age and deadline misses are collected.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .metrics import (
    MetricDefinition,
    TimingConfig,
    bernoulli_decide,
    combine_optimistic,
    combine_pessimistic,
    combine_weighted_mean,
    transmission_probability,
)
from .predictor import FeatureVector, LinearModel, ModelTree
from .predictor import predict as predict_rate
from .trace import ChannelSample, ChannelTrace

# Fixed per-transfer protocol overhead; drives the payload-size efficiency
# knee at a couple of MBytes.
OVERHEAD_BYTES = 250_000.0

INDICATOR_FIELDS = ("rsrp", "rsrq", "snr", "cqi")

PolicyKind = Literal[
    "periodic", "single_metric", "optimistic", "pessimistic", "weighted_mean", "predicted_rate"
]
Trigger = Literal["probabilistic", "forced_t_max", "periodic"]

PREDICTED_RATE_PHI_MAX = (15.0, 18.0)


@dataclass(frozen=True)
class SensorConfig:
    frequency: float  # readings per second
    payload_size: int  # bytes per reading

    def __post_init__(self) -> None:
        if self.frequency <= 0:
            raise ValueError(f"sensor frequency must be > 0, got {self.frequency}")
        if self.payload_size <= 0:
            raise ValueError(f"sensor payload_size must be > 0, got {self.payload_size}")


@dataclass(frozen=True)
class PolicyConfig:
    """One transmission strategy instance, bound to its timing parameters."""

    kind: PolicyKind
    timing: TimingConfig
    metrics: tuple[MetricDefinition, ...] = ()
    weights: tuple[float, ...] | None = None
    model: ModelTree | LinearModel | None = None
    name: str | None = None

    def __post_init__(self) -> None:
        if self.kind == "single_metric":
            if len(self.metrics) != 1:
                raise ValueError("single_metric policy needs exactly one metric")
        elif self.kind in ("optimistic", "pessimistic", "weighted_mean"):
            if not self.metrics:
                raise ValueError(f"{self.kind} policy needs at least one metric")
            if self.kind == "weighted_mean":
                if self.weights is None or len(self.weights) != len(self.metrics):
                    raise ValueError("weighted_mean needs one weight per metric")
                if any(w < 0 for w in self.weights) or math.fsum(self.weights) <= 0:
                    raise ValueError("weights must be >= 0 with a positive sum")
        elif self.kind == "predicted_rate":
            if self.model is None:
                raise ValueError("predicted_rate policy needs a trained model")
            if len(self.metrics) != 1:
                raise ValueError("predicted_rate policy needs one rate metric definition")
            if self.metrics[0].phi_max not in PREDICTED_RATE_PHI_MAX:
                raise ValueError(
                    f"predicted-rate metric phi_max must be one of {PREDICTED_RATE_PHI_MAX}, "
                    f"got {self.metrics[0].phi_max}"
                )
        elif self.kind != "periodic":
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.kind in ("single_metric", "optimistic", "pessimistic", "weighted_mean"):
            for m in self.metrics:
                if m.name not in INDICATOR_FIELDS:
                    raise ValueError(
                        f"metric {m.name!r} does not match a trace indicator "
                        f"{INDICATOR_FIELDS}"
                    )

    @property
    def base_name(self) -> str:
        if self.name:
            return self.name
        if self.kind == "single_metric":
            return self.metrics[0].name
        return self.kind

    @property
    def label(self) -> str:
        """Unique report label; includes t_min so sweeps over it stay distinct."""
        return f"{self.base_name}-t{self.timing.t_min:g}"


@dataclass(frozen=True)
class TransmissionRecord:
    start: float
    end: float
    bytes: int
    goodput: float  # MBit/s
    packet_generation_times: tuple[float, ...]
    trigger: Trigger
    rsrp: float
    rsrq: float
    snr: float
    cqi: int

    def __post_init__(self) -> None:
        if not self.end > self.start:
            raise ValueError("transfer must have end > start")
        if any(g > self.start for g in self.packet_generation_times):
            raise ValueError("all packets must be generated before the transfer starts")


@dataclass
class RunReport:
    policy: str
    t_min: float
    seed: int
    trace: str
    records: list[TransmissionRecord]
    ages: list[float]
    undelivered: list[float] = field(default_factory=list)
    truncated: bool = False

    @property
    def goodputs(self) -> list[float]:
        return [r.goodput for r in self.records]

    @property
    def mean_goodput(self) -> float:
        return float(np.mean(self.goodputs)) if self.records else math.nan

    @property
    def median_goodput(self) -> float:
        return float(np.median(self.goodputs)) if self.records else math.nan

    def dmr_map(self, deadlines: Sequence[float]) -> dict[float, float]:
        return {d: compute_dmr(self, d) for d in deadlines}


def effective_goodput(capacity: float, n_bytes: float) -> float:
    """Application-layer rate after protocol overhead, in [0, capacity]."""
    if capacity < 0:
        raise ValueError(f"capacity must be >= 0, got {capacity}")
    if n_bytes <= 0:
        raise ValueError(f"bytes must be > 0, got {n_bytes}")
    return capacity * n_bytes / (n_bytes + OVERHEAD_BYTES)


def compute_dmr(report: RunReport, deadline: float) -> float:
    """Fraction of delivered packets whose age exceeds the deadline."""
    if not report.ages:
        raise ValueError("run delivered no packets; deadline miss ratio undefined")
    missed = sum(1 for a in report.ages if a > deadline)
    return missed / len(report.ages)


def _indicator(sample: ChannelSample, name: str) -> float:
    if name == "rsrp":
        return sample.rsrp
    if name == "rsrq":
        return sample.rsrq
    if name == "snr":
        return sample.snr
    if name == "cqi":
        return float(sample.cqi)
    raise ValueError(f"unknown indicator {name!r}")


def _policy_probability(
    policy: PolicyConfig,
    sample: ChannelSample,
    delta_t: float,
    buffer_bytes: float,
) -> float:
    timing = policy.timing
    if policy.kind == "single_metric":
        d = policy.metrics[0]
        return transmission_probability(d, _indicator(sample, d.name), delta_t, timing)
    if policy.kind == "predicted_rate":
        fv = FeatureVector(
            rsrp=sample.rsrp,
            rsrq=sample.rsrq,
            snr=sample.snr,
            cqi=sample.cqi,
            payload_bytes=buffer_bytes,
        )
        rate = predict_rate(policy.model, fv)
        return transmission_probability(policy.metrics[0], rate, delta_t, timing)
    probs = [
        transmission_probability(d, _indicator(sample, d.name), delta_t, timing)
        for d in policy.metrics
    ]
    if policy.kind == "optimistic":
        return combine_optimistic(probs)
    if policy.kind == "pessimistic":
        return combine_pessimistic(probs)
    return combine_weighted_mean(probs, policy.weights)


def run_simulation(
    policy: PolicyConfig,
    sensor: SensorConfig,
    trace: ChannelTrace,
    seed: int = 0,
) -> RunReport:
    """Execute one run of a policy over a trace; deterministic per seed.

    The decision loop runs at ``t_decision`` granularity.  Elapsed time is
    measured from the end of the previous transfer, the whole buffer goes out
    in one transfer at the capacity frozen at its start, and packets arriving
    mid-transfer wait for the next decision.  A transfer that would outlive
    the trace truncates the run.
    """
    if trace.capacity is None:
        raise ValueError("trace has no capacity column; simulation needs latent capacity")
    timing = policy.timing
    if trace.duration < 2 * timing.t_max:
        raise ValueError(
            f"trace duration {trace.duration} s is below 2*t_max = {2 * timing.t_max} s"
        )
    rng = np.random.default_rng(seed)
    gen_period = 1.0 / sensor.frequency
    horizon = trace.duration
    n_ticks = int(math.floor(horizon / timing.t_decision))

    buffer: list[float] = []  # generation times of buffered readings
    next_k = 1  # readings are generated at k * gen_period
    last_end = 0.0
    busy_until = 0.0
    records: list[TransmissionRecord] = []
    ages: list[float] = []
    truncated = False

    for i in range(1, n_ticks + 1):
        t = i * timing.t_decision
        while next_k * gen_period <= t:
            buffer.append(next_k * gen_period)
            next_k += 1
        if t < busy_until or not buffer:
            continue
        delta_t = t - last_end
        buffer_bytes = len(buffer) * sensor.payload_size
        if policy.kind == "periodic":
            if delta_t < timing.t_min:
                continue
            trigger: Trigger = "periodic"
            sample = trace.sample_at(t)
        else:
            sample = trace.sample_at(t)
            p = _policy_probability(policy, sample, delta_t, buffer_bytes)
            if not bernoulli_decide(p, rng):
                continue
            trigger = "forced_t_max" if delta_t > timing.t_max else "probabilistic"

        goodput = effective_goodput(sample.capacity, buffer_bytes)
        if goodput <= 0.0:
            truncated = True  # zero capacity: the transfer can never finish
            break
        duration = buffer_bytes * 8.0 / (goodput * 1e6)
        end = t + duration
        if end > horizon:
            truncated = True
            break
        records.append(
            TransmissionRecord(
                start=t,
                end=end,
                bytes=int(buffer_bytes),
                goodput=goodput,
                packet_generation_times=tuple(buffer),
                trigger=trigger,
                rsrp=sample.rsrp,
                rsrq=sample.rsrq,
                snr=sample.snr,
                cqi=sample.cqi,
            )
        )
        ages.extend(end - g for g in buffer)
        buffer = []
        last_end = end
        busy_until = end

    # Undelivered readings (still buffered, or generated after the loop left
    # off) are kept for packet conservation accounting.
    while next_k * gen_period <= horizon:
        buffer.append(next_k * gen_period)
        next_k += 1

    return RunReport(
        policy=policy.label,
        t_min=timing.t_min,
        seed=seed,
        trace=trace.name,
        records=records,
        ages=ages,
        undelivered=buffer,
        truncated=truncated,
    )


def _run_spec(args: tuple[PolicyConfig, SensorConfig, ChannelTrace, int]) -> RunReport:
    policy, sensor, trace, seed = args
    return run_simulation(policy, sensor, trace, seed)


def sweep(
    policies: Sequence[PolicyConfig],
    traces: Sequence[ChannelTrace],
    sensor: SensorConfig,
    runs_per_pair: int,
    base_seed: int = 0,
    jobs: int = 1,
) -> list[RunReport]:
    """One run per (policy, trace, run index); run index r uses seed base+r.

    Runs are independent, so ``jobs > 1`` executes them in worker processes;
    the report order is by construction independent of scheduling.
    """
    if not policies or not traces:
        raise ValueError("sweep needs at least one policy and one trace")
    if runs_per_pair < 1:
        raise ValueError(f"runs_per_pair must be >= 1, got {runs_per_pair}")
    specs = [
        (policy, sensor, trace, base_seed + r)
        for policy in policies
        for trace in traces
        for r in range(runs_per_pair)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_spec, specs))
    return [_run_spec(s) for s in specs]
