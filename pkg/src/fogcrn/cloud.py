"""Central aggregator: summaries in, recalibrated rules and allocations out."""
from __future__ import annotations

import enum
import itertools
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import FogCRNError
from .learning.classify import Engine, classify
from .learning.svm import SvmModel
from .messages import AnomalyReport, RuleSet, Summary
from .sensing import (Detector, FeatureConfig, Hypothesis, default_alpha_grid,
                      detect_cyclostationary, extract_features)

log = logging.getLogger(__name__)


class Verdict(enum.Enum):
    PU_SIGNAL = "pu_signal"
    NOISE = "noise"
    UNKNOWN = "unknown"


class NoDataError(FogCRNError):
    """Recalibration was requested for a node that has not reported yet."""


@dataclass(frozen=True)
class CloudConfig:
    belief_weight: float = 0.3     # EWMA weight of the newest h1 rate
    busy_cutoff: float = 0.5       # never allocate a channel at or above this belief
    eta: float = 0.5               # threshold controller gain, in (0, 1]
    idle_cutoff: float = 0.2       # only channels believed below this feed the Pfa estimate
    rho_clamp: float = 4.0         # rho stays within [rho0 / clamp, rho0 * clamp]
    history_depth: int = 16
    alpha_grid: tuple = tuple(default_alpha_grid())
    tau_set: tuple = (0, 1, 2, 3)


@dataclass
class _NodeRecord:
    rules: RuleSet
    initial: RuleSet
    history: deque
    last_epoch: int = -1
    ewma: dict = field(default_factory=dict)   # channel -> smoothed h1 rate


class Cloud:
    """Single logical actor; handles one message at a time in arrival order."""

    def __init__(self, channels, config: CloudConfig = CloudConfig(),
                 analysis_rho_cyc: float = float("inf"), svm_model: Optional[SvmModel] = None,
                 patterns=None):
        self.channels = tuple(int(c) for c in channels)
        self.config = config
        self.analysis_rho_cyc = analysis_rho_cyc
        self.svm_model = svm_model
        self.patterns = dict(patterns or {})
        self.nodes: dict = {}
        self.anomaly_log: list = []
        self.allocation: dict = {}
        self.allocation_round = 0
        self.rejected: list = []

    def register_node(self, node_id: int, rules: RuleSet) -> None:
        self.nodes[int(node_id)] = _NodeRecord(rules, rules, deque(maxlen=self.config.history_depth))

    # ---------------------------------------------------------- beliefs --

    def beliefs(self) -> dict:
        """Occupancy belief per channel: mean over reporting nodes of their
        EWMA-smoothed h1 rates (0 for channels nobody reported yet)."""
        out = {}
        for ch in self.channels:
            vals = [rec.ewma[ch] for _, rec in sorted(self.nodes.items()) if ch in rec.ewma]
            out[ch] = float(np.mean(vals)) if vals else 0.0
        return out

    def ingest_summary(self, s: Summary) -> bool:
        rec = self.nodes.get(s.node_id)
        if rec is None:
            log.warning("summary from unknown node %d rejected", s.node_id)
            self.rejected.append(("unknown_node", s.node_id, s.epoch))
            return False
        if s.epoch <= rec.last_epoch:
            self.rejected.append(("stale_epoch", s.node_id, s.epoch))
            return False
        rec.last_epoch = s.epoch
        rec.history.append(s)
        w = self.config.belief_weight
        for cs in s.channels:
            if cs.frames == 0:
                continue
            prev = rec.ewma.get(cs.channel_id)
            rate = cs.h1_rate
            rec.ewma[cs.channel_id] = rate if prev is None else (1.0 - w) * prev + w * rate
        return True

    # ------------------------------------------------------- thresholds --

    def estimate_pfa(self, node_id: int) -> dict:
        """Per-channel false-alarm estimate from the node's latest summary.

        A channel contributes when its belief is below ``idle_cutoff`` and its
        epoch h1 rate stays below the larger of ``idle_cutoff`` and the target
        plus 3 binomial standard deviations. The second gate drops
        epochs in which a PU switched on, which would otherwise inflate the
        estimate and ratchet thresholds upward.
        """
        rec = self.nodes[node_id]
        if not rec.history:
            return {}
        latest = rec.history[-1]
        p = rec.rules.pfa_target
        belief = self.beliefs()
        out = {}
        for cs in latest.channels:
            if not cs.frames or belief.get(cs.channel_id, 1.0) >= self.config.idle_cutoff:
                continue
            gate = max(self.config.idle_cutoff, p + 3.0 * math.sqrt(p * (1.0 - p) / cs.frames))
            if cs.h1_rate < gate:
                out[cs.channel_id] = cs.h1_rate
        return out

    def recalibrate_rules(self, node_id: int) -> RuleSet:
        """Multiplicative update rho <- rho (1 + eta (pfa_hat - pfa_target)), clamped.

        Only the threshold of the detector the node currently decides with is
        adjusted; ML engines keep their thresholds. The version always bumps.
        """
        rec = self.nodes.get(node_id)
        if rec is None or not rec.history:
            raise NoDataError(f"no summaries from node {node_id}")
        rules = rec.rules
        cfg = self.config
        new_th = dict(rules.thresholds)
        if rules.active_engine is Engine.THRESHOLD_ONLY:
            det = rules.detector
            for ch, pfa_hat in self.estimate_pfa(node_id).items():
                if ch not in new_th:
                    continue
                rho = new_th[ch].get(det)
                rho0 = rec.initial.thresholds[ch].get(det)
                lo, hi = rho0 / cfg.rho_clamp, rho0 * cfg.rho_clamp
                updated = rho * (1.0 + cfg.eta * (pfa_hat - rules.pfa_target))
                new_th[ch] = new_th[ch].with_value(det, min(max(updated, lo), hi))
        rec.rules = rules.bumped(thresholds=new_th)
        return rec.rules

    # -------------------------------------------------------- anomalies --

    def analyze_anomaly(self, report: AnomalyReport) -> Verdict:
        """Re-run the full detector stack on the attached raw frame."""
        frame = report.raw_frame
        if frame is None or frame.n == 0:
            verdict = Verdict.UNKNOWN
        else:
            taus = [t for t in self.config.tau_set if 2 * abs(t) < frame.n]
            fired = False
            if taus:
                res = detect_cyclostationary(frame, self.config.alpha_grid, taus,
                                             self.analysis_rho_cyc)
                fired = res.hypothesis is Hypothesis.H1
            if not fired and self.svm_model is not None:
                cfg = FeatureConfig(alpha_grid=self.config.alpha_grid, tau_set=self.config.tau_set)
                feat = extract_features(frame, self.patterns.get(frame.channel_id), cfg)
                fired = classify(Engine.SVM, self.svm_model, feat) is Hypothesis.H1
            verdict = Verdict.PU_SIGNAL if fired else Verdict.NOISE
        self.anomaly_log.append((report.node_id, report.epoch, report.channel_id,
                                 report.reason.value, verdict))
        return verdict

    # ------------------------------------------------------- allocation --

    def allocate_spectrum(self, requests, beliefs: Optional[dict] = None) -> dict:
        """Greedy allocation: nodes in id order take the lowest-belief free channel
        whose belief is below ``busy_cutoff``; leftovers get None."""
        beliefs = self.beliefs() if beliefs is None else beliefs
        table = greedy_allocation(requests, beliefs, self.config.busy_cutoff)
        self.allocation = table
        self.allocation_round += 1
        return table

    def allocate_random(self, requests, rng) -> dict:
        """Uniform random distinct channels, ignoring beliefs (comparison baseline)."""
        nodes = sorted(int(n) for n in requests)
        chans = list(rng.permutation(self.channels))
        table = {n: (int(chans[i]) if i < len(chans) else None) for i, n in enumerate(nodes)}
        self.allocation = table
        self.allocation_round += 1
        return table

    # ----------------------------------------------------------- report --

    def dump(self) -> str:
        """Human-readable structured text snapshot of the cloud state."""
        lines = ["[cloud]", f"channels = {','.join(map(str, self.channels))}",
                 f"allocation_round = {self.allocation_round}", "", "[beliefs]"]
        for ch, b in self.beliefs().items():
            lines.append(f"channel.{ch} = {b!r}")
        lines += ["", "[allocation]"]
        for n, ch in sorted(self.allocation.items()):
            lines.append(f"node.{n} = {'none' if ch is None else ch}")
        for n, rec in sorted(self.nodes.items()):
            r = rec.rules
            lines += ["", f"[node.{n}]", f"rules_version = {r.version}",
                      f"last_epoch = {rec.last_epoch}", f"summaries_kept = {len(rec.history)}",
                      f"engine = {r.active_engine.value}", f"detector = {r.detector.value}"]
            for ch, th in sorted(r.thresholds.items()):
                lines.append(f"rho.{ch} = {th.rho_energy!r},{th.rho_waveform!r},{th.rho_cyclic!r}")
        counts = {}
        for *_, v in self.anomaly_log:
            counts[v.value] = counts.get(v.value, 0) + 1
        lines += ["", "[anomalies]", f"total = {len(self.anomaly_log)}"]
        lines += [f"{k} = {counts[k]}" for k in sorted(counts)]
        return "\n".join(lines) + "\n"


def greedy_allocation(requests, beliefs: dict, busy_cutoff: float = 0.5) -> dict:
    order = sorted((b, ch) for ch, b in beliefs.items() if b < busy_cutoff)
    table = {}
    it = iter(order)
    for n in sorted(int(r) for r in requests):
        nxt = next(it, None)
        table[n] = None if nxt is None else nxt[1]
    return table


def exhaustive_min_allocation(requests, beliefs: dict, busy_cutoff: float = 0.5) -> float:
    """Minimum summed belief over every maximum-cardinality feasible assignment."""
    nodes = sorted(requests)
    feasible = [ch for ch, b in beliefs.items() if b < busy_cutoff]
    m = min(len(nodes), len(feasible))
    best = float("inf")
    for chosen in itertools.permutations(feasible, m):
        for who in itertools.combinations(nodes, m):
            best = min(best, sum(beliefs[c] for c in chosen))
    return best if m else 0.0
