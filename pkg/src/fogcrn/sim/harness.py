"""Deterministic tick-loop simulation of PUs, fog nodes, transport and cloud.

Randomness comes from labeled streams of the master seed: ``pu`` (occupancy
chains), ``noise`` (one per node and channel), ``pilot`` (PU waveforms),
``transport`` (drops), ``allocation`` (random policy) and ``calibration``.
Changing one subsystem's parameters therefore never shifts another's draws.
"""
from __future__ import annotations

import dataclasses
import functools
from dataclasses import dataclass

import numpy as np

from .. import wire
from ..cloud import Cloud, CloudConfig
from ..errors import InvalidArgumentError
from ..fognode import BYTES_PER_SAMPLE, CapabilityTier, FogNode, select_channel
from ..learning.classify import Engine
from ..messages import (Allocation, AnomalyReport, ChannelThresholds, RuleSet, Summary)
from ..rng import child_seed, stream
from ..sensing import (Detector, FeatureConfig, Hypothesis, calibrate_cyclic_threshold,
                       calibrate_energy_threshold, calibrate_waveform_threshold)
from ..signalgen import (ChannelModel, PuProfile, SignalFrame, apply_channel, gen_pu_signal,
                         noise_var_for_snr)
from .report import MetricsReport, NodeCounters, NodeMetrics
from .scenario import Scenario
from .transport import Transport

SWEEPABLE = ("snr_db", "pfa_target", "drop_prob", "eta", "mode", "allocation")


# ------------------------------------------------------------ PU activity --

@dataclass
class PuActivityModel:
    """Independent two-state Markov chain per channel (True = PU transmitting)."""

    p_on_to_off: float
    p_off_to_on: float
    state: list

    def __post_init__(self):
        for name in ("p_on_to_off", "p_off_to_on"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InvalidArgumentError(f"{name} must lie in [0, 1]")
        self.state = [bool(s) for s in self.state]

    @classmethod
    def initial(cls, p_on_to_off, p_off_to_on, n_channels, how, rng) -> "PuActivityModel":
        if how == "on":
            state = [True] * n_channels
        elif how == "off":
            state = [False] * n_channels
        else:
            total = p_on_to_off + p_off_to_on
            p_on = p_off_to_on / total if total > 0 else 0.5
            state = list(rng.random(n_channels) < p_on)
        return cls(p_on_to_off, p_off_to_on, state)

    @property
    def stationary_on(self) -> float:
        total = self.p_on_to_off + self.p_off_to_on
        return self.p_off_to_on / total if total > 0 else float("nan")


def pu_step(model: PuActivityModel, channel: int, rng) -> bool:
    """Advance one channel's chain by one tick. Exactly one uniform draw."""
    u = rng.random()
    if model.state[channel]:
        model.state[channel] = not (u < model.p_on_to_off)
    else:
        model.state[channel] = bool(u < model.p_off_to_on)
    return model.state[channel]


# ------------------------------------------------------------ calibration --

@functools.lru_cache(maxsize=32)
def _calibrate(pfa, noise_var, n, trials, carrier, symbol_len, n_channels, seed):
    # cached: sweeps and repeated runs reuse identical Monte Carlo thresholds
    rho_e = calibrate_energy_threshold(pfa, noise_var, n, trials, child_seed(seed, "calibration", 0))
    patterns = _patterns(carrier, symbol_len, n, n_channels, seed)
    rho_w = tuple(calibrate_waveform_threshold(pfa, noise_var, patterns[ch], trials,
                                               child_seed(seed, "calibration", 1, ch))
                  for ch in range(n_channels))
    cfg = FeatureConfig()
    rho_c = calibrate_cyclic_threshold(pfa, noise_var, n, trials,
                                       child_seed(seed, "calibration", 2), cfg.alpha_grid,
                                       cfg.tau_set)
    return rho_e, rho_w, rho_c


def _patterns(carrier, symbol_len, n, n_channels, seed) -> dict:
    """Known PU pilot waveform per channel (what matched-filter sensing correlates with)."""
    profile = PuProfile(carrier_freq=carrier, symbol_len=symbol_len)
    return {ch: gen_pu_signal(profile, n, stream(seed, "pilot", ch), channel_id=ch).samples
            for ch in range(n_channels)}


def initial_rules(sc: Scenario) -> tuple[RuleSet, dict, float]:
    """Calibrated version-1 rules, pilot patterns and the cloud's cyclic threshold."""
    nv = noise_var_for_snr(sc.snr_db)
    rho_e, rho_w, rho_c = _calibrate(sc.pfa_target, nv, sc.frame_len, sc.calibration_trials,
                                     sc.carrier_freq,
                                     sc.symbol_len, sc.n_channels, sc.master_seed)
    s = sc.initial_rho_scale
    th = {ch: ChannelThresholds(rho_e * s, rho_w[ch] * s, rho_c * s)
          for ch in range(sc.n_channels)}
    rules = RuleSet(1, th, sc.pfa_target, sc.anomaly_bound, Engine.THRESHOLD_ONLY,
                    Detector(sc.detector))
    patterns = _patterns(sc.carrier_freq, sc.symbol_len, sc.frame_len, sc.n_channels,
                         sc.master_seed)
    return rules, patterns, rho_c


# -------------------------------------------------------------------- run --

class Simulation:
    """One scenario run. ``run()`` is the usual entry point."""

    def __init__(self, sc: Scenario):
        self.sc = sc.validate()
        self.centralized = sc.mode == "centralized"
        self.channels = list(range(sc.n_channels))
        self.noise_var = noise_var_for_snr(sc.snr_db)
        rules, self.patterns, rho_c = initial_rules(sc)
        self.tiers = sc.tiers()
        # centralized mode: the cloud runs the full pipeline on every raw frame
        pipeline = [CapabilityTier.T2_FULL if self.centralized else t for t in self.tiers]
        self.nodes = [FogNode(i, pipeline[i], rules, self.channels, self.patterns,
                              summary_budget=None if self.centralized else 0.05,
                              keep_log=False)
                      for i in range(sc.n_nodes)]
        cfg = CloudConfig(belief_weight=sc.belief_weight, busy_cutoff=sc.busy_cutoff,
                          eta=sc.eta, idle_cutoff=sc.idle_cutoff, rho_clamp=sc.rho_clamp)
        self.cloud = Cloud(self.channels, cfg, analysis_rho_cyc=rho_c, patterns=self.patterns)
        for n in self.nodes:
            self.cloud.register_node(n.node_id, rules)
        seed = sc.master_seed
        self.transport = Transport(sc.latency_ticks, sc.drop_prob, stream(seed, "transport"))
        self.pu_rng = stream(seed, "pu")
        self.pu = PuActivityModel.initial(sc.p_on_to_off, sc.p_off_to_on, sc.n_channels,
                                          sc.pu_initial, self.pu_rng)
        self.noise_rngs = {(i, ch): stream(seed, "noise", i, ch)
                           for i in range(sc.n_nodes) for ch in self.channels}
        self.alloc_rng = stream(seed, "allocation")
        self.channel_model = ChannelModel(1.0, self.noise_var)
        self.counters = [NodeCounters() for _ in self.nodes]
        self.allocation = {}
        self.idle_channel_ticks = 0
        self.idle_ticks_used = 0
        self.pu_trace = []          # ground-truth occupancy, one tuple per tick
        self._summary_tick = {}     # node -> tick its latest summary was sent
        self._report_bytes = [0] * sc.n_nodes

    # ----------------------------------------------------------- cloud --

    def _allocate(self, tick):
        requests = [n.node_id for n in self.nodes]
        if self.sc.allocation == "random":
            table = self.cloud.allocate_random(requests, self.alloc_rng)
        else:
            table = self.cloud.allocate_spectrum(requests)
        return [Allocation(self.cloud.allocation_round, n, ch) for n, ch in sorted(table.items())]

    def _node_receive(self, node_id, msg, tick):
        node = self.nodes[node_id]
        if isinstance(msg, RuleSet):
            if node.apply_rules(msg):
                c = self.counters[node_id]
                c.rule_updates += 1
                c.rtt_sum += tick - self._summary_tick.get(node_id, tick)
        elif isinstance(msg, Allocation):
            self.allocation[node_id] = msg.channel_id

    def _cloud_ingest(self, s: Summary, tick):
        """Returns the rules to push back to the node, or None."""
        if not self.cloud.ingest_summary(s):
            return None
        return self.cloud.recalibrate_rules(s.node_id)

    def _deliver(self, tick):
        got_summary = False
        for env in self.transport.deliver(tick):
            msg = wire.decode(env.payload)
            if env.dst == "cloud":
                if isinstance(msg, Summary):
                    rules = self._cloud_ingest(msg, tick)
                    if rules is not None:
                        got_summary = True
                        self.transport.send("cloud", f"node.{msg.node_id}", wire.encode(rules), tick)
                elif isinstance(msg, AnomalyReport):
                    self.cloud.analyze_anomaly(msg)
            else:
                self._node_receive(int(env.dst.split(".")[1]), msg, tick)
        if got_summary and self.sc.allocation != "local":
            for a in self._allocate(tick):
                self.transport.send("cloud", f"node.{a.node_id}", wire.encode(a), tick)

    # ------------------------------------------------------------ nodes --

    def _send_report(self, i, report: AnomalyReport, tick):
        node, c = self.nodes[i], self.counters[i]
        if self.centralized:
            self.cloud.analyze_anomaly(report)
            c.anomaly_reports += 1
            return
        budget = self.sc.report_budget * node.epoch_raw_bytes
        payload = wire.encode(report)
        if self._report_bytes[i] + len(payload) > budget and report.raw_frame is not None:
            payload = wire.encode(dataclasses.replace(report, raw_frame=None))
        if self._report_bytes[i] + len(payload) > budget:
            return      # counted in the summary's anomaly_count, not uplinked
        self._report_bytes[i] += len(payload)
        c.uplink_bytes += len(payload)
        c.anomaly_reports += 1
        self.transport.send(f"node.{i}", "cloud", payload, tick)

    def _sense(self, tick, truth):
        sc = self.sc
        n = sc.frame_len
        latest = []
        for i, node in enumerate(self.nodes):
            c = self.counters[i]
            last = {}
            for ch in self.channels:
                on = truth[ch]
                rng = self.noise_rngs[(i, ch)]
                for f in range(sc.frames_per_tick):
                    origin = (tick * sc.frames_per_tick + f) * n
                    clean = self.patterns[ch] if on else np.zeros(n, dtype=complex)
                    frame = apply_channel(SignalFrame(clean, origin, ch), self.channel_model, rng)
                    decision, report = node.process_frame(frame, tick)
                    h1 = decision.hypothesis is Hypothesis.H1
                    c.frames += 1
                    c.h1_decisions += h1
                    c.raw_bytes += BYTES_PER_SAMPLE * n
                    if self.centralized:
                        c.uplink_bytes += BYTES_PER_SAMPLE * n
                    if on:
                        c.on_frames += 1
                        c.detections += h1
                    else:
                        c.off_frames += 1
                        c.false_alarms += h1
                    if report is not None:
                        self._send_report(i, report, tick)
                    last[ch] = decision
            latest.append(last)
        return latest

    def _transmit(self, latest, truth):
        used = set()
        for i, last in enumerate(latest):
            if self.sc.allocation == "local":
                ch = select_channel(last)
            else:
                ch = self.allocation.get(i)
                # never transmit on a channel sensed busy this tick
                if ch is not None and last[ch].hypothesis is not Hypothesis.H0:
                    ch = None
            if ch is None:
                continue
            c = self.counters[i]
            c.transmissions += 1
            if truth[ch]:
                c.collisions += 1
                self.nodes[i].record_collision(ch)
            else:
                c.idle_ticks_used += 1
                used.add(ch)
        self.idle_channel_ticks += sum(not s for s in truth)
        self.idle_ticks_used += len(used)

    def _close_epoch(self, tick):
        if self.centralized:
            for node in self.nodes:
                s = node.make_summary()
                self._summary_tick[node.node_id] = tick
                rules = self._cloud_ingest(s, tick)
                if rules is not None:
                    self._node_receive(node.node_id, rules, tick)
            if self.sc.allocation != "local":
                for a in self._allocate(tick):
                    self._node_receive(a.node_id, a, tick)
            return
        for i, node in enumerate(self.nodes):
            payload = wire.encode(node.make_summary())
            self.counters[i].uplink_bytes += len(payload)
            self._summary_tick[i] = tick
            self._report_bytes[i] = 0
            self.transport.send(f"node.{i}", "cloud", payload, tick)

    def step(self, tick):
        self._deliver(tick)
        if tick > 0:
            for ch in self.channels:
                pu_step(self.pu, ch, self.pu_rng)
        truth = tuple(self.pu.state)
        self.pu_trace.append(truth)
        latest = self._sense(tick, truth)
        self._transmit(latest, truth)
        if (tick + 1) % self.sc.epoch_len_ticks == 0:
            self._close_epoch(tick)

    def run(self) -> MetricsReport:
        sc = self.sc
        if sc.allocation != "local":
            # bootstrap allocation from the prior beliefs, configured before start
            for a in self._allocate(0):
                self._node_receive(a.node_id, a, 0)
        for tick in range(sc.duration_ticks):
            self.step(tick)
        return self.report()

    def report(self) -> MetricsReport:
        rows = [NodeMetrics.from_counters(i, self.tiers[i].name.split("_")[0], c,
                                          self.idle_channel_ticks)
                for i, c in enumerate(self.counters)]
        total = NodeCounters()
        for c in self.counters:
            total = total.add(c)
        rows.append(NodeMetrics.from_counters("all", "-", total, self.idle_channel_ticks,
                                              idle_used=self.idle_ticks_used))
        t = self.transport
        transport = dict(sent=t.sent, delivered=t.delivered, dropped=t.dropped,
                         in_flight=t.in_flight, bytes_sent=t.bytes_sent)
        return MetricsReport(rows, self.sc.duration_ticks, transport, self.sc.mode,
                             self.sc.master_seed)


def run(sc: Scenario) -> MetricsReport:
    return Simulation(sc).run()


def sweep(sc: Scenario, param: str, values) -> list:
    """One run per value with seed ``master_seed + index``; reports are tagged."""
    if param not in SWEEPABLE:
        raise InvalidArgumentError(f"cannot sweep {param!r}; sweepable: {', '.join(SWEEPABLE)}")
    out = []
    for i, v in enumerate(values):
        s = sc.with_overrides({param: v, "master_seed": sc.master_seed + i})
        rep = run(s)
        rep.tag = (param, getattr(s, param))
        out.append(rep)
    return out
