import itertools

import numpy as np
import pytest

from fogcrn.cloud import (Cloud, CloudConfig, NoDataError, Verdict, exhaustive_min_allocation,
                          greedy_allocation)
from fogcrn.learning import Engine
from fogcrn.messages import (AnomalyReason, AnomalyReport, ChannelSummary, ChannelThresholds,
                             RuleSet, Summary)
from fogcrn.rng import stream
from fogcrn.sensing import (Detector, FeatureVector, calibrate_cyclic_threshold,
                            default_alpha_grid)
from fogcrn.signalgen import (ChannelModel, Modulation, PuProfile, SignalFrame, apply_channel,
                              gen_noise, gen_pu_signal, noise_var_for_snr)


def _rules(rho=100.0, channels=(0, 1), version=1):
    return RuleSet(version, {c: ChannelThresholds(rho, 5.0, 0.5) for c in channels}, pfa_target=0.1)


def _summary(node, epoch, rates, frames=100):
    chans = tuple(ChannelSummary(ch, frames, int(round(r * frames)), 0, 1.0, 0.1, 0.5, 1.5)
                  for ch, r in rates.items())
    return Summary(node, epoch, chans, np.zeros(6), 0, 1)


def _cloud(n_nodes=1, channels=(0, 1), **cfg):
    c = Cloud(channels, CloudConfig(**cfg))
    for n in range(n_nodes):
        c.register_node(n, _rules(channels=channels))
    return c


# -------------------------------------------------------------- ingest --

def test_first_summary_sets_belief():
    c = _cloud()
    assert c.ingest_summary(_summary(0, 0, {0: 0.25, 1: 0.6}))
    assert c.beliefs() == {0: 0.25, 1: 0.6}


def test_ewma_update():
    c = _cloud(belief_weight=0.3)
    c.ingest_summary(_summary(0, 0, {0: 0.5, 1: 0.0}))
    c.ingest_summary(_summary(0, 1, {0: 0.0, 1: 1.0}))
    b = c.beliefs()
    assert b[0] == pytest.approx(0.35) and b[1] == pytest.approx(0.3)


def test_duplicate_and_stale_epoch_ignored():
    c = _cloud()
    c.ingest_summary(_summary(0, 3, {0: 0.2, 1: 0.2}))
    before = c.beliefs()
    assert not c.ingest_summary(_summary(0, 3, {0: 0.9, 1: 0.9}))
    assert not c.ingest_summary(_summary(0, 1, {0: 0.9, 1: 0.9}))
    assert c.beliefs() == before and len(c.nodes[0].history) == 1
    assert [r[0] for r in c.rejected] == ["stale_epoch", "stale_epoch"]


def test_unknown_node_rejected():
    c = _cloud()
    assert not c.ingest_summary(_summary(9, 0, {0: 0.1}))
    assert c.rejected == [("unknown_node", 9, 0)]


def test_two_nodes_average():
    c = _cloud(n_nodes=2)
    c.ingest_summary(_summary(0, 0, {0: 0.2, 1: 0.0}))
    c.ingest_summary(_summary(1, 0, {0: 0.4, 1: 0.0}))
    assert c.beliefs()[0] == pytest.approx(0.3)


def test_history_ring_depth():
    c = _cloud(history_depth=3)
    for e in range(6):
        c.ingest_summary(_summary(0, e, {0: 0.1, 1: 0.1}))
    assert [s.epoch for s in c.nodes[0].history] == [3, 4, 5]


# --------------------------------------------------------- recalibrate --

def test_recalibrate_without_data():
    c = _cloud()
    with pytest.raises(NoDataError):
        c.recalibrate_rules(0)
    with pytest.raises(NoDataError):
        c.recalibrate_rules(5)


def test_fixed_point_still_bumps_version():
    c = _cloud()
    c.ingest_summary(_summary(0, 0, {0: 0.1, 1: 0.1}))
    r = c.recalibrate_rules(0)
    assert r.version == 2
    assert r.thresholds[0].rho_energy == pytest.approx(100.0, rel=1e-12)


def test_controller_direction_and_law():
    c = _cloud(eta=0.5)
    c.ingest_summary(_summary(0, 0, {0: 0.15, 1: 0.05}))
    r = c.recalibrate_rules(0)
    assert r.thresholds[0].rho_energy == pytest.approx(100.0 * (1 + 0.5 * 0.05))
    assert r.thresholds[1].rho_energy == pytest.approx(100.0 * (1 - 0.5 * 0.05))
    # non-active thresholds untouched
    assert r.thresholds[0].rho_waveform == 5.0


@pytest.mark.parametrize("seed", range(5))
def test_controller_sign_property(seed):
    rng = np.random.default_rng(seed)
    c = _cloud(idle_cutoff=1.0)
    rate = rng.uniform(0, 0.3)
    c.ingest_summary(_summary(0, 0, {0: rate, 1: 0.1}, frames=1000))
    new = c.recalibrate_rules(0).thresholds[0].rho_energy
    pfa_hat = round(rate * 1000) / 1000
    assert np.sign(new - 100.0) == np.sign(pfa_hat - 0.1)


def test_busy_channels_excluded_and_clamp():
    c = _cloud(rho_clamp=2.0, eta=1.0)
    c.ingest_summary(_summary(0, 0, {0: 0.9, 1: 0.19}))
    r = c.recalibrate_rules(0)
    assert r.thresholds[0].rho_energy == 100.0   # believed busy: no estimate
    assert r.thresholds[1].rho_energy == pytest.approx(109.0)
    for e in range(1, 40):
        c.ingest_summary(_summary(0, e, {0: 0.9, 1: 0.0}))
        r = c.recalibrate_rules(0)
    assert r.thresholds[1].rho_energy == pytest.approx(50.0)
    assert r.version == 41


def test_ml_engine_thresholds_not_adjusted():
    c = Cloud((0,))
    rules = RuleSet(1, {0: ChannelThresholds(100.0, 5.0, 0.5)}, active_engine=Engine.SVM,
                    model_text="x")
    c.register_node(0, rules)
    c.ingest_summary(_summary(0, 0, {0: 0.15}))
    r = c.recalibrate_rules(0)
    assert r.version == 2 and r.thresholds == rules.thresholds


def test_estimate_pfa_gate():
    c = _cloud(idle_cutoff=0.2)
    c.ingest_summary(_summary(0, 0, {0: 0.1, 1: 0.1}))
    # channel 1 jumps to 0.3: belief 0.16 still idle, epoch rate over the 3-sigma gate
    c.ingest_summary(_summary(0, 1, {0: 0.12, 1: 0.3}))
    est = c.estimate_pfa(0)
    assert est == {0: 0.12}


def test_versions_strictly_increase():
    c = _cloud()
    versions = []
    for e in range(5):
        c.ingest_summary(_summary(0, e, {0: 0.08, 1: 0.12}))
        versions.append(c.recalibrate_rules(0).version)
    assert versions == [2, 3, 4, 5, 6]


# ------------------------------------------------------------ anomaly --

@pytest.fixture(scope="module")
def cyc_rho():
    return calibrate_cyclic_threshold(0.1, 1.0, 1024, 2000, 5, default_alpha_grid(), (0, 1, 2, 3))


def _report(frame):
    return AnomalyReport(0, 0, 0, FeatureVector(np.zeros(6)), frame, 20.0,
                         AnomalyReason.FEATURE_OUTLIER)


def test_anomaly_noise_frames_mostly_noise(cyc_rho):
    c = Cloud((0,), analysis_rho_cyc=cyc_rho)
    verdicts = [c.analyze_anomaly(_report(gen_noise(1024, 1.0, stream(1, "n", i))))
                for i in range(200)]
    rate = np.mean([v is Verdict.PU_SIGNAL for v in verdicts])
    # Pfa-level error: 0.1 +- 3 sigma of a 200-trial binomial
    assert rate <= 0.1 + 3 * np.sqrt(0.09 / 200)
    assert len(c.anomaly_log) == 200


def test_anomaly_strong_bpsk_is_signal():
    rho = calibrate_cyclic_threshold(0.1, 1.0, 10_000, 200, 5, default_alpha_grid(), (0, 1, 2, 3))
    c = Cloud((0,), analysis_rho_cyc=rho)
    prof = PuProfile(Modulation.BPSK, carrier_freq=0.1, symbol_len=8)
    x = gen_pu_signal(prof, 10_000, 3)
    y = apply_channel(x, ChannelModel(1.0, noise_var_for_snr(10.0)), 4)
    assert c.analyze_anomaly(_report(y)) is Verdict.PU_SIGNAL


def test_anomaly_without_frame_is_unknown():
    c = Cloud((0,))
    assert c.analyze_anomaly(_report(None)) is Verdict.UNKNOWN
    assert c.anomaly_log[-1][-1] is Verdict.UNKNOWN


# ---------------------------------------------------------- allocation --

def test_allocation_examples():
    assert greedy_allocation([0], {1: 0.9, 2: 0.0}, 0.5) == {0: 2}
    t = greedy_allocation([2, 0, 1], {0: 0.1, 1: 0.2, 2: 0.7}, 0.5)
    assert t == {0: 0, 1: 1, 2: None}


def test_cloud_allocation_uses_beliefs():
    c = _cloud(channels=(0, 1, 2))
    c.ingest_summary(_summary(0, 0, {0: 0.6, 1: 0.3, 2: 0.1}))
    assert c.allocate_spectrum([0, 1, 2]) == {0: 2, 1: 1, 2: None}
    assert c.allocation_round == 1


def test_random_allocation_exclusive():
    c = _cloud(channels=(0, 1, 2))
    rng = np.random.default_rng(0)
    for _ in range(20):
        t = c.allocate_random([0, 1, 2, 3], rng)
        got = [ch for ch in t.values() if ch is not None]
        assert len(got) == len(set(got)) == 3


def _brute_force(nodes, beliefs, cutoff):
    # independent oracle: every injective partial assignment of nodes to feasible channels
    feas = [ch for ch, b in beliefs.items() if b < cutoff]
    best_card, best_cost = 0, 0.0
    for m in range(len(nodes) + 1):
        for chans in itertools.permutations(feas, m):
            cost = sum(beliefs[c] for c in chans)
            if m > best_card or (m == best_card and cost < best_cost):
                best_card, best_cost = m, cost
    return best_card, best_cost


def test_greedy_matches_exhaustive_small_instances():
    rng = np.random.default_rng(42)
    checked = 0
    for n_nodes in range(1, 5):
        for n_ch in range(1, 5):
            for _ in range(40):
                beliefs = {c: float(rng.choice([rng.uniform(), 0.25, 0.5])) for c in range(n_ch)}
                nodes = list(range(n_nodes))
                t = greedy_allocation(nodes, beliefs, 0.5)
                used = [ch for ch in t.values() if ch is not None]
                assert len(used) == len(set(used))
                assert all(beliefs[ch] < 0.5 for ch in used)
                card, cost = _brute_force(nodes, beliefs, 0.5)
                assert len(used) == card
                assert sum(beliefs[c] for c in used) == pytest.approx(cost, abs=1e-12)
                assert cost == pytest.approx(exhaustive_min_allocation(nodes, beliefs, 0.5), abs=1e-12)
                checked += 1
    assert checked == 640


def test_dump_sections():
    c = _cloud(channels=(0, 1))
    c.ingest_summary(_summary(0, 0, {0: 0.1, 1: 0.7}))
    c.recalibrate_rules(0)
    c.allocate_spectrum([0])
    c.analyze_anomaly(_report(None))
    text = c.dump()
    for section in ("[cloud]", "[beliefs]", "[allocation]", "[node.0]", "[anomalies]"):
        assert section in text
    assert "rules_version = 2" in text and "node.0 = 0" in text and "unknown = 1" in text
