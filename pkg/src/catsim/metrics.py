"""Transmission probability model and multi-metric combinators.

A channel quality metric (RSRP, RSRQ, SNR, CQI or a predicted data rate) is
normalized into [0, 1], sharpened with a weighting exponent and gated by the
elapsed time since the last transfer.  Several metrics can be fused with an
optimistic (max), pessimistic (min) or weighted-mean rule before the final
Bernoulli decision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

Polarity = Literal["conducive", "harmful"]


@dataclass(frozen=True)
class MetricDefinition:
    """One abstract channel-quality metric.

    Attributes:
        name: Identifier, e.g. ``"rsrp"``; bound to a trace indicator column
            by the simulator.
        phi_min: Lower bound of the useful metric range (metric units).
        phi_max: Upper bound of the useful metric range (metric units).
        alpha: Weighting exponent >= 1; larger values require the metric to
            be closer to ``phi_max`` before the transmission probability
            becomes noticeable.
        polarity: ``"conducive"`` if larger values mean better channel
            quality, ``"harmful"`` if they mean worse.
    """

    name: str
    phi_min: float
    phi_max: float
    alpha: float = 1.0
    polarity: Polarity = "conducive"

    def __post_init__(self) -> None:
        if not self.phi_min < self.phi_max:
            raise ValueError(
                f"metric {self.name!r}: phi_min ({self.phi_min}) must be "
                f"strictly below phi_max ({self.phi_max})"
            )
        if self.alpha < 1.0:
            raise ValueError(f"metric {self.name!r}: alpha must be >= 1, got {self.alpha}")
        if self.polarity not in ("conducive", "harmful"):
            raise ValueError(f"metric {self.name!r}: unknown polarity {self.polarity!r}")


@dataclass(frozen=True)
class TimingConfig:
    """Timing gates of the transmission scheme.

    ``t_min`` suppresses transfers that would follow the previous one too
    closely, ``t_max`` forces a transfer once the buffer has waited too long,
    and ``t_decision`` is the period of the decision loop.
    """

    t_min: float
    t_max: float
    t_decision: float = 1.0

    def __post_init__(self) -> None:
        if self.t_min < 0:
            raise ValueError(f"t_min must be >= 0, got {self.t_min}")
        if not self.t_min < self.t_max:
            raise ValueError(f"t_min ({self.t_min}) must be strictly below t_max ({self.t_max})")
        if self.t_decision <= 0:
            raise ValueError(f"t_decision must be > 0, got {self.t_decision}")
        if self.t_decision > self.t_min:
            raise ValueError(
                f"t_decision ({self.t_decision}) must not exceed t_min ({self.t_min}); "
                "decisions must be at least as frequent as the minimum spacing"
            )


CombinerStrategy = Literal["optimistic", "pessimistic", "weighted_mean"]


@dataclass(frozen=True)
class CombinerConfig:
    """Fusion rule for multi-metric policies."""

    strategy: CombinerStrategy
    weights: tuple[float, ...] = field(default_factory=tuple)

    def validate_for(self, n_metrics: int) -> None:
        if self.strategy == "weighted_mean":
            if len(self.weights) != n_metrics:
                raise ValueError(
                    f"weighted_mean needs {n_metrics} weights, got {len(self.weights)}"
                )
            if any(w < 0 for w in self.weights):
                raise ValueError("weights must be >= 0")
            if math.fsum(self.weights) <= 0:
                raise ValueError("weight sum must be > 0")


def normalize_theta(definition: MetricDefinition, phi: float) -> float:
    """Normalize a raw metric value into [0, 1].

    Conducive metrics map linearly from ``phi_min`` -> 0 to ``phi_max`` -> 1;
    harmful metrics use the complement so that 1 always means "good channel".
    Values outside the configured bounds are clamped, not rejected, because
    real indicator reports can exceed them.
    """
    span = definition.phi_max - definition.phi_min
    theta = (phi - definition.phi_min) / span
    if definition.polarity == "harmful":
        theta = 1.0 - theta
    return min(1.0, max(0.0, theta))


def transmission_probability(
    definition: MetricDefinition,
    phi: float,
    delta_t: float,
    timing: TimingConfig,
) -> float:
    """Single-metric transmission probability.

    Returns 0 while ``delta_t <= t_min``, 1 once ``delta_t > t_max`` and the
    sharpened normalized metric value in between.
    """
    if delta_t < 0:
        raise ValueError(f"delta_t must be >= 0, got {delta_t}")
    if delta_t <= timing.t_min:
        return 0.0
    if delta_t > timing.t_max:
        return 1.0
    return normalize_theta(definition, phi) ** definition.alpha


def combine_optimistic(probabilities: Sequence[float]) -> float:
    """Maximum of the per-metric probabilities (leverage hotspots)."""
    if not probabilities:
        raise ValueError("combine_optimistic: empty probability list (no metrics configured)")
    return max(probabilities)


def combine_pessimistic(probabilities: Sequence[float]) -> float:
    """Minimum of the per-metric probabilities (avoid connectivity valleys)."""
    if not probabilities:
        raise ValueError("combine_pessimistic: empty probability list (no metrics configured)")
    return min(probabilities)


def combine_weighted_mean(probabilities: Sequence[float], weights: Sequence[float]) -> float:
    """Weighted arithmetic mean of the per-metric probabilities.

    The result is clamped into ``[min(probabilities), max(probabilities)]``
    so the bracketing contract holds exactly under floating point.  Sums use
    ``math.fsum``, which makes the result independent of metric order.
    """
    if not probabilities:
        raise ValueError("combine_weighted_mean: empty probability list")
    if len(probabilities) != len(weights):
        raise ValueError(
            f"combine_weighted_mean: {len(probabilities)} probabilities "
            f"vs {len(weights)} weights"
        )
    if any(w < 0 for w in weights):
        raise ValueError("combine_weighted_mean: weights must be >= 0")
    total = math.fsum(weights)
    if total <= 0:
        raise ValueError("combine_weighted_mean: weight sum must be > 0")
    mean = math.fsum(p * w for p, w in zip(probabilities, weights)) / total
    return min(max(mean, min(probabilities)), max(probabilities))


def bernoulli_decide(p: float, rng: np.random.Generator) -> bool:
    """Draw one transmission decision with probability ``p``.

    Always consumes exactly one uniform variate so the stream position is a
    function of the number of decisions, not of their outcomes.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability must lie in [0, 1], got {p}")
    return rng.random() < p


def export_analytic_curve(
    definition: MetricDefinition, samples: int
) -> list[tuple[float, float]]:
    """Sample the steady-state probability curve over the metric range.

    Returns ``samples`` evenly spaced ``(phi, probability)`` points covering
    ``[phi_min, phi_max]`` with the timeout branches ignored, i.e. the pure
    ``theta**alpha`` response used for plotting.
    """
    if samples < 2:
        raise ValueError(f"need at least 2 samples, got {samples}")
    step = (definition.phi_max - definition.phi_min) / (samples - 1)
    curve = []
    for i in range(samples):
        phi = definition.phi_min + i * step
        curve.append((phi, normalize_theta(definition, phi) ** definition.alpha))
    return curve


def default_metric_definitions(predicted_rate_max: float = 18.0) -> dict[str, MetricDefinition]:
    """Built-in metric parametrization for the reference scenario.

    ``predicted_rate_max`` selects the saturation point of the predicted-rate
    metric (15 or 18 MBit/s in the reference setup).
    """
    return {
        "rsrp": MetricDefinition("rsrp", -120.0, -80.0, 8.0, "conducive"),
        "rsrq": MetricDefinition("rsrq", -11.0, -4.0, 6.0, "conducive"),
        "snr": MetricDefinition("snr", 0.0, 30.0, 8.0, "conducive"),
        "cqi": MetricDefinition("cqi", 2.0, 16.0, 6.0, "conducive"),
        "predicted_rate": MetricDefinition(
            "predicted_rate", 0.0, predicted_rate_max, 8.0, "conducive"
        ),
    }
