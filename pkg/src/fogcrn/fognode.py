"""Edge-node pipeline: sense, extract features, check for anomalies, decide.

A node holds one RuleSet at a time, swapped only between frames. What it can
run depends on its capability tier:

======  ==========================================  ===========================
tier    features computed                           decision engines
======  ==========================================  ===========================
T0      normalized energy                           energy threshold
T1      + waveform correlation                      + waveform threshold, regression
T2      + cyclic peak/alpha, flatness, bandwidth    + cyclostationary threshold, SVM
======  ==========================================  ===========================
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import FogCRNError, SummaryOverflowError
from .learning.classify import Engine, engine_score
from .learning.serialize import loads_model
from .messages import (AnomalyReason, AnomalyReport, ChannelSummary, DecisionEngine, RuleSet,
                       SensingDecision, Summary)
from .sensing import (FEATURE_SCHEMA_VERSION, N_FEATURES, Detector, FeatureConfig,
                      FeatureVector, Hypothesis, decide, energy_metric, extract_features,
                      waveform_metric)
from .signalgen import SignalFrame
from .wire import encode_summary

log = logging.getLogger(__name__)

WARMUP_FRAMES = 30
VARIANCE_FLOOR = 1e-9
SUMMARY_BUDGET = 0.05
BYTES_PER_SAMPLE = 16


class CapabilityTier(enum.IntEnum):
    T0_ENERGY = 0
    T1_WAVEFORM_REGRESSION = 1
    T2_FULL = 2

    @classmethod
    def parse(cls, text) -> "CapabilityTier":
        if isinstance(text, (int, CapabilityTier)):
            return cls(int(text))
        key = str(text).strip().upper()
        for t in cls:
            if t.name == key or t.name.split("_")[0] == key:
                return t
        raise ValueError(f"unknown tier {text!r}")


TIER_ENGINES = {
    CapabilityTier.T0_ENERGY: frozenset({DecisionEngine.ENERGY}),
    CapabilityTier.T1_WAVEFORM_REGRESSION: frozenset(
        {DecisionEngine.ENERGY, DecisionEngine.WAVEFORM, DecisionEngine.REGRESSION}),
    CapabilityTier.T2_FULL: frozenset(DecisionEngine),
}


def tier_feature_config(tier: CapabilityTier, base: FeatureConfig = FeatureConfig()) -> FeatureConfig:
    tier = CapabilityTier(tier)
    return replace(base, waveform=tier >= CapabilityTier.T1_WAVEFORM_REGRESSION,
                   cyclic=tier >= CapabilityTier.T2_FULL, spectral=tier >= CapabilityTier.T2_FULL)


def select_channel(beliefs: dict) -> Optional[int]:
    """Greedy pick: the H0 channel whose metric sits deepest below its threshold.

    ``beliefs`` maps channel_id to a SensingDecision or to a
    (hypothesis, metric, threshold) tuple. Ties go to the lowest channel id;
    None when every channel is H1.
    """
    best = None
    for ch in sorted(beliefs):
        b = beliefs[ch]
        if isinstance(b, SensingDecision):
            hyp, metric, thr = b.hypothesis, b.metric, b.threshold
        else:
            hyp, metric, thr = (tuple(b) + (0.0,))[:3]
        if hyp != Hypothesis.H0:
            continue
        key = metric - thr
        if best is None or key < best[0]:
            best = (key, ch)
    return None if best is None else best[1]


@dataclass
class _ChannelEpoch:
    frames: int = 0
    h1: int = 0
    collisions: int = 0
    metrics: list = field(default_factory=list)


class FogNode:
    """One edge node. Not thread-safe: a node is a single sequential actor."""

    def __init__(self, node_id: int, tier, rules: RuleSet, channels, patterns=None,
                 feature_base: FeatureConfig = FeatureConfig(), warmup: int = WARMUP_FRAMES,
                 raw_frames_per_channel: int = 1, summary_budget: Optional[float] = SUMMARY_BUDGET,
                 keep_log: bool = True):
        self.node_id = int(node_id)
        self.tier = CapabilityTier.parse(tier)
        self.channels = tuple(int(c) for c in channels)
        self.patterns = dict(patterns or {})
        self.feature_cfg = tier_feature_config(self.tier, feature_base)
        self.warmup = warmup
        self.raw_frames_per_channel = raw_frames_per_channel
        self.summary_budget = summary_budget
        self.keep_log = keep_log
        problems = self._rule_problems(rules)
        if problems:
            raise FogCRNError("initial rules rejected: " + "; ".join(problems))
        self.rules = rules
        self._model = self._parse_model(rules)
        self.last_rejection: list = []
        self.decision_log: list = []
        # running moments for the anomaly detector
        self._n_seen = 0
        self._mean = np.zeros(N_FEATURES)
        self._m2 = np.zeros(N_FEATURES)
        self.epoch = 0
        self._reset_epoch()

    # ------------------------------------------------------------ rules --

    def _rule_problems(self, rules: RuleSet) -> list:
        problems = rules.problems()
        missing = [c for c in self.channels if c not in rules.thresholds]
        if missing:
            problems.append(f"no thresholds for channels {missing}")
        if rules.model_text:
            try:
                loads_model(rules.model_text)
            except (ValueError, KeyError, TypeError) as exc:
                problems.append(f"model does not decode: {exc}")
        return problems

    @staticmethod
    def _parse_model(rules: RuleSet):
        if not rules.model_text:
            return None
        model, schema = loads_model(rules.model_text)
        return model, schema

    def apply_rules(self, rules: RuleSet) -> bool:
        """Swap in ``rules`` iff its version is newer and it validates.

        Rejections leave the node untouched; reasons land in ``last_rejection``.
        """
        if rules.version <= self.rules.version:
            self.last_rejection = [f"stale version {rules.version} <= {self.rules.version}"]
            return False
        problems = self._rule_problems(rules)
        if problems:
            self.last_rejection = problems
            log.warning("node %d rejected rules v%d: %s", self.node_id, rules.version, problems)
            return False
        self.rules = rules
        self._model = self._parse_model(rules)
        self.last_rejection = []
        return True

    # ---------------------------------------------------------- anomaly --

    def anomaly_score(self, feature: FeatureVector) -> float:
        var = np.maximum(self._m2 / max(self._n_seen, 1), VARIANCE_FLOOR)
        d = feature.values - self._mean
        return float(np.sqrt(np.sum(d * d / var)))

    def detect_anomaly(self, feature: FeatureVector):
        """Diagonal Mahalanobis distance from the running feature mean.

        Returns (score, FEATURE_OUTLIER) when the score exceeds the rules'
        anomaly bound, else None. Never reports during warm-up. The running
        moments absorb ``feature`` after it is scored.
        """
        result = None
        if self._n_seen >= self.warmup:
            score = self.anomaly_score(feature)
            if score > self.rules.anomaly_bound:
                result = (score, AnomalyReason.FEATURE_OUTLIER)
        self._n_seen += 1
        delta = feature.values - self._mean
        self._mean = self._mean + delta / self._n_seen
        self._m2 = self._m2 + delta * (feature.values - self._mean)
        return result

    # ------------------------------------------------------- processing --

    def _select_engine(self) -> Optional[DecisionEngine]:
        rules = self.rules
        if rules.schema_version != FEATURE_SCHEMA_VERSION:
            return None
        if rules.active_engine is Engine.THRESHOLD_ONLY:
            wanted = DecisionEngine(rules.detector.value)
        elif rules.active_engine is Engine.REGRESSION:
            wanted = DecisionEngine.REGRESSION
        else:
            wanted = DecisionEngine.SVM
        if wanted not in TIER_ENGINES[self.tier]:
            return None
        if wanted is DecisionEngine.WAVEFORM and not self.patterns:
            return None
        if wanted in (DecisionEngine.REGRESSION, DecisionEngine.SVM):
            if self._model is None or self._model[1] != FEATURE_SCHEMA_VERSION:
                return None
        return wanted

    def features(self, frame: SignalFrame) -> FeatureVector:
        return extract_features(frame, self.patterns.get(frame.channel_id), self.feature_cfg)

    def process_frame(self, frame: SignalFrame, tick: int = 0):
        """Run the tier's pipeline on one frame -> (SensingDecision, AnomalyReport | None).

        A decision is always produced. If the configured engine cannot run
        here, the node falls back to the energy detector and reports an
        engine_unavailable anomaly.
        """
        ch = frame.channel_id
        th = self.rules.thresholds[ch]
        feature = self.features(frame)
        engine = self._select_engine()
        outlier = self.detect_anomaly(feature)

        if engine is None or engine is DecisionEngine.ENERGY:
            used = DecisionEngine.ENERGY
            metric, thr = energy_metric(frame).value, th.rho_energy
            hyp = decide(metric, thr)
        elif engine is DecisionEngine.WAVEFORM:
            used = engine
            metric, thr = waveform_metric(frame, self.patterns[ch]), th.rho_waveform
            hyp = decide(metric, thr)
        elif engine is DecisionEngine.CYCLOSTATIONARY:
            used = engine
            metric, thr = float(feature.values[2]), th.rho_cyclic
            hyp = decide(metric, thr)
        else:
            used = engine
            eng = Engine.REGRESSION if engine is DecisionEngine.REGRESSION else Engine.SVM
            metric, thr = engine_score(eng, self._model[0], feature, self.rules.schema_version)
            if eng is Engine.SVM:
                hyp = Hypothesis.H1 if metric >= thr else Hypothesis.H0
            else:
                hyp = decide(metric, thr)

        decision = SensingDecision(ch, hyp, float(metric), float(thr), used,
                                   self.rules.version, tick)
        report = None
        if outlier is not None or engine is None:
            score, reason = outlier if outlier is not None else (0.0, AnomalyReason.ENGINE_UNAVAILABLE)
            raw = None
            if self._raw_sent.get(ch, 0) < self.raw_frames_per_channel:
                raw = frame
                self._raw_sent[ch] = self._raw_sent.get(ch, 0) + 1
            report = AnomalyReport(self.node_id, self.epoch, ch, feature, raw, score, reason, tick)
            self._anomalies += 1

        acc = self._acc.setdefault(ch, _ChannelEpoch())
        acc.frames += 1
        acc.h1 += int(hyp)
        acc.metrics.append(decision.metric)
        self._feature_sum += feature.values
        self._raw_bytes += BYTES_PER_SAMPLE * frame.n
        if self.keep_log:
            self.decision_log.append(decision)
        return decision, report

    def record_collision(self, channel_id: int) -> None:
        self._acc.setdefault(int(channel_id), _ChannelEpoch()).collisions += 1

    # --------------------------------------------------------- summaries --

    def _reset_epoch(self):
        self._acc = {}
        self._feature_sum = np.zeros(N_FEATURES)
        self._anomalies = 0
        self._raw_sent = {}
        self._raw_bytes = 0

    @property
    def epoch_raw_bytes(self) -> int:
        return self._raw_bytes

    def make_summary(self, epoch: Optional[int] = None) -> Summary:
        """Close the current epoch and return its summary.

        Raises SummaryOverflowError when the encoded summary exceeds
        ``summary_budget`` times the raw bytes sensed in the epoch.
        """
        epoch = self.epoch if epoch is None else int(epoch)
        chans = []
        total = 0
        for ch in sorted(set(self.channels) | set(self._acc)):
            acc = self._acc.get(ch, _ChannelEpoch())
            total += acc.frames
            if acc.frames:
                m = np.asarray(acc.metrics)
                chans.append(ChannelSummary(ch, acc.frames, acc.h1, acc.collisions,
                                            float(m.mean()), float(m.var()),
                                            float(m.min()), float(m.max())))
            else:
                chans.append(ChannelSummary(ch, 0, 0, acc.collisions))
        fmean = self._feature_sum / total if total else None
        summary = Summary(self.node_id, epoch, tuple(chans), fmean, self._anomalies,
                          self.rules.version)
        if self.summary_budget is not None and self._raw_bytes > 0:
            size = len(encode_summary(summary))
            if size > self.summary_budget * self._raw_bytes:
                raise SummaryOverflowError(
                    f"summary of {size} bytes exceeds {self.summary_budget:.0%} of "
                    f"{self._raw_bytes} raw bytes")
        self.epoch = epoch + 1
        self._reset_epoch()
        return summary
