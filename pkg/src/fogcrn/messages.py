"""Value types exchanged between fog nodes and the cloud."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .learning.classify import Engine
from .sensing import FEATURE_SCHEMA_VERSION, Detector, FeatureVector, Hypothesis
from .signalgen import SignalFrame


class DecisionEngine(enum.Enum):
    """What actually produced a decision at a node."""

    ENERGY = "energy"
    WAVEFORM = "waveform"
    CYCLOSTATIONARY = "cyclostationary"
    REGRESSION = "regression"
    SVM = "svm"


class AnomalyReason(enum.Enum):
    FEATURE_OUTLIER = "feature_outlier"
    ENGINE_UNAVAILABLE = "engine_unavailable"


@dataclass(frozen=True)
class ChannelThresholds:
    rho_energy: float
    rho_waveform: float
    rho_cyclic: float

    def get(self, detector: Detector) -> float:
        return {Detector.ENERGY: self.rho_energy, Detector.WAVEFORM: self.rho_waveform,
                Detector.CYCLOSTATIONARY: self.rho_cyclic}[Detector(detector)]

    def with_value(self, detector: Detector, value: float) -> "ChannelThresholds":
        name = {Detector.ENERGY: "rho_energy", Detector.WAVEFORM: "rho_waveform",
                Detector.CYCLOSTATIONARY: "rho_cyclic"}[Detector(detector)]
        return replace(self, **{name: float(value)})


@dataclass(frozen=True)
class RuleSet:
    """Cloud-versioned decision parameters held by a fog node.

    ``detector`` picks which calibrated threshold the threshold_only engine
    uses; ``model_text`` carries a serialized regression/SVM model.
    """

    version: int
    thresholds: dict
    pfa_target: float = 0.1
    anomaly_bound: float = 10.0
    active_engine: Engine = Engine.THRESHOLD_ONLY
    detector: Detector = Detector.ENERGY
    model_text: Optional[str] = None
    schema_version: int = FEATURE_SCHEMA_VERSION

    def __post_init__(self):
        object.__setattr__(self, "active_engine", Engine(self.active_engine))
        object.__setattr__(self, "detector", Detector(self.detector))
        object.__setattr__(self, "thresholds", {int(k): v for k, v in self.thresholds.items()})

    def problems(self) -> list:
        """Every validation problem found; empty when the rules are well formed."""
        out = []
        if not isinstance(self.version, int) or self.version < 0:
            out.append(f"version must be a non-negative integer, got {self.version!r}")
        if not 0.0 < self.pfa_target < 1.0:
            out.append(f"pfa_target {self.pfa_target} outside (0, 1)")
        if not (self.anomaly_bound > 0.0 and math.isfinite(self.anomaly_bound)):
            out.append(f"anomaly_bound {self.anomaly_bound} must be finite and > 0")
        if not self.thresholds:
            out.append("no per-channel thresholds")
        for ch, th in sorted(self.thresholds.items()):
            for name in ("rho_energy", "rho_waveform", "rho_cyclic"):
                v = getattr(th, name)
                if not (math.isfinite(v) and v > 0.0):
                    out.append(f"channel {ch}: {name}={v} must be finite and > 0")
        if self.active_engine is not Engine.THRESHOLD_ONLY and not self.model_text:
            out.append(f"engine {self.active_engine.value} needs a serialized model")
        return out

    def bumped(self, **changes) -> "RuleSet":
        return replace(self, version=self.version + 1, **changes)


@dataclass(frozen=True)
class SensingDecision:
    channel_id: int
    hypothesis: Hypothesis
    metric: float
    threshold: float
    engine_used: DecisionEngine
    rules_version: int
    tick: int

    @property
    def margin(self) -> float:
        """How far the metric sits below its threshold (positive = idle side)."""
        return self.threshold - self.metric


@dataclass(frozen=True)
class ChannelSummary:
    channel_id: int
    frames: int
    h1_decisions: int
    collisions_observed: int
    # metric statistics are None when the channel saw no frames
    metric_mean: Optional[float] = None
    metric_var: Optional[float] = None
    metric_min: Optional[float] = None
    metric_max: Optional[float] = None

    @property
    def h1_rate(self) -> float:
        return self.h1_decisions / self.frames if self.frames else 0.0


@dataclass(frozen=True, eq=False)
class Summary:
    node_id: int
    epoch: int
    channels: tuple
    feature_mean: Optional[np.ndarray]
    anomaly_count: int
    rules_version_used: int
    schema_version: int = FEATURE_SCHEMA_VERSION

    @property
    def frames(self) -> int:
        return sum(c.frames for c in self.channels)

    def channel(self, channel_id: int) -> Optional[ChannelSummary]:
        for c in self.channels:
            if c.channel_id == channel_id:
                return c
        return None

    def __eq__(self, other):
        if not isinstance(other, Summary):
            return NotImplemented
        fm_eq = (self.feature_mean is None and other.feature_mean is None) or (
            self.feature_mean is not None and other.feature_mean is not None
            and np.array_equal(self.feature_mean, other.feature_mean))
        return (fm_eq and self.node_id == other.node_id and self.epoch == other.epoch
                and self.channels == other.channels and self.anomaly_count == other.anomaly_count
                and self.rules_version_used == other.rules_version_used
                and self.schema_version == other.schema_version)


@dataclass(frozen=True)
class AnomalyReport:
    node_id: int
    epoch: int
    channel_id: int
    feature: FeatureVector
    raw_frame: Optional[SignalFrame]
    score: float
    reason: AnomalyReason
    tick: int = 0


@dataclass(frozen=True)
class Allocation:
    """Cloud-assigned channel for one node in one allocation round."""

    round: int
    node_id: int
    channel_id: Optional[int]
