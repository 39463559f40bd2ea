import math

import numpy as np
import pytest

from fogcrn.errors import FogCRNError, SummaryOverflowError
from fogcrn.fognode import (BYTES_PER_SAMPLE, CapabilityTier, FogNode, select_channel,
                            tier_feature_config)
from fogcrn.learning import Engine, RegressionModel, dumps_model, svm_train, Dataset, Kernel
from fogcrn.messages import (AnomalyReason, ChannelThresholds, DecisionEngine, RuleSet,
                             SensingDecision)
from fogcrn.rng import stream
from fogcrn.sensing import (FEATURE_SCHEMA_VERSION, Detector, FeatureConfig, FeatureVector,
                            Hypothesis, calibrate_energy_threshold, decide, energy_metric,
                            extract_features, waveform_metric)
from fogcrn.signalgen import (ChannelModel, PuProfile, SignalFrame, apply_channel, gen_noise,
                              gen_pu_signal, silent_frame)
from fogcrn.wire import encode_summary

N = 128


@pytest.fixture(scope="module")
def rho():
    return calibrate_energy_threshold(0.1, 1.0, N, 20_000, 99)


def _rules(rho_e=100.0, version=1, channels=(0, 1), **kw):
    th = {c: ChannelThresholds(rho_e, 5.0, 0.5) for c in channels}
    return RuleSet(version, th, **kw)


def _mixed_frames(count, seed, channels=(0, 1)):
    """Frames alternating between noise and a PU burst at assorted SNRs."""
    rng = stream(seed, "frames")
    prof = PuProfile()
    out = []
    for i in range(count):
        ch = channels[i % len(channels)]
        x = gen_pu_signal(prof, N, rng, sample_index_origin=i * N, channel_id=ch)
        if rng.random() < 0.5:
            x = x.replace(samples=np.zeros(N, complex))
        nv = 10 ** (-rng.uniform(-10, 5) / 10)
        out.append((apply_channel(x, ChannelModel(1.0, nv), rng), x))
    return out


# ---------------------------------------------------------------- tiers --

def test_tier_parse():
    assert CapabilityTier.parse("T1") is CapabilityTier.T1_WAVEFORM_REGRESSION
    assert CapabilityTier.parse("t2_full") is CapabilityTier.T2_FULL
    assert CapabilityTier.parse(0) is CapabilityTier.T0_ENERGY
    with pytest.raises(ValueError):
        CapabilityTier.parse("T9")


def test_tier_feature_monotonicity():
    y = apply_channel(gen_pu_signal(PuProfile(), N, 1), ChannelModel(1.0, 0.5), 2)
    x = gen_pu_signal(PuProfile(), N, 1)
    feats = [extract_features(y, x, tier_feature_config(t)).values for t in CapabilityTier]
    masks = [tier_feature_config(t).mask() for t in CapabilityTier]
    for lo in range(2):
        assert np.all(masks[lo] <= masks[lo + 1])
        np.testing.assert_array_equal(feats[lo][masks[lo]], feats[lo + 1][masks[lo]])
        assert not np.any(feats[lo][~masks[lo]])
    assert list(np.flatnonzero(masks[0])) == [0] and list(np.flatnonzero(masks[1])) == [0, 1]


# ------------------------------------------------------------ pipeline --

def test_t0_zero_frame_is_h0_without_anomaly():
    node = FogNode(0, "T0", _rules(), (0, 1))
    dec, rep = node.process_frame(silent_frame(N))
    assert dec.hypothesis is Hypothesis.H0 and rep is None
    assert dec.engine_used is DecisionEngine.ENERGY and dec.metric == 0.0


def test_composition_oracle_t2_energy():
    frames = _mixed_frames(100, 3)
    patterns = {0: frames[0][1], 1: frames[1][1]}
    node = FogNode(0, "T2", _rules(N * 1.3, anomaly_bound=6.0), (0, 1), patterns=patterns)
    cfg = FeatureConfig()
    seen = []
    for i, (y, _) in enumerate(frames):
        dec, rep = node.process_frame(y, tick=i)
        f = extract_features(y, patterns[y.channel_id], cfg)
        # energy threshold decision by hand
        m = energy_metric(y).value
        assert dec.metric == m and dec.hypothesis is decide(m, N * 1.3)
        # anomaly score by hand from the batch moments of earlier features
        expect_report = False
        if len(seen) >= 30:
            F = np.array(seen)
            var = np.maximum(F.var(axis=0), 1e-9)
            score = math.sqrt(np.sum((f.values - F.mean(axis=0)) ** 2 / var))
            expect_report = score > 6.0
            if rep is not None:
                assert rep.score == pytest.approx(score, rel=1e-9)
                assert rep.feature == f
        assert (rep is not None) == expect_report
        seen.append(f.values)
    assert len(node.decision_log) == 100


def test_composition_oracle_t1_waveform():
    frames = _mixed_frames(60, 4)
    patterns = {0: frames[0][1], 1: frames[1][1]}
    node = FogNode(1, "T1", _rules(detector=Detector.WAVEFORM), (0, 1), patterns=patterns)
    for y, _ in frames:
        dec, _ = node.process_frame(y)
        m = waveform_metric(y, patterns[y.channel_id])
        assert dec.engine_used is DecisionEngine.WAVEFORM
        assert dec.metric == m and dec.hypothesis is decide(m, 5.0)


def test_composition_oracle_regression():
    w = np.array([0.01, 0.8, 0.0, 0.0, 0.0, 0.0])
    model = RegressionModel(w, 0.0, -0.1)
    frames = _mixed_frames(40, 5)
    patterns = {0: frames[0][1], 1: frames[1][1]}
    rules = _rules(active_engine=Engine.REGRESSION, model_text=dumps_model(model))
    node = FogNode(1, "T1", rules, (0, 1), patterns=patterns)
    for y, _ in frames:
        dec, _ = node.process_frame(y)
        f = extract_features(y, patterns[y.channel_id], tier_feature_config(CapabilityTier.T1_WAVEFORM_REGRESSION))
        score = float(f.values @ w - 0.1)
        assert dec.engine_used is DecisionEngine.REGRESSION
        assert dec.metric == pytest.approx(score, abs=1e-12)
        assert dec.hypothesis is (Hypothesis.H1 if score > 0.5 else Hypothesis.H0)


def test_engine_unavailable_falls_back_to_energy():
    X = np.vstack([np.eye(6)[0], -np.eye(6)[0]])
    svm = svm_train(Dataset(X, [1.0, -1.0]), C=1.0, kernel=Kernel())
    rules = _rules(active_engine=Engine.SVM, model_text=dumps_model(svm))
    node = FogNode(0, "T0", rules, (0, 1))
    dec, rep = node.process_frame(silent_frame(N))
    assert dec.engine_used is DecisionEngine.ENERGY
    assert rep.reason is AnomalyReason.ENGINE_UNAVAILABLE and rep.raw_frame is not None


def test_schema_mismatch_falls_back():
    node = FogNode(0, "T2", _rules(schema_version=FEATURE_SCHEMA_VERSION + 1), (0, 1))
    dec, rep = node.process_frame(silent_frame(N))
    assert dec.engine_used is DecisionEngine.ENERGY
    assert rep.reason is AnomalyReason.ENGINE_UNAVAILABLE


def test_t2_outlier_report_carries_raw_frame():
    node = FogNode(0, "T2", _rules(), (0, 1))
    for i in range(40):
        node.process_frame(gen_noise(N, 1.0, i))
    loud = gen_pu_signal(PuProfile(amplitude=10.0), N, 1)
    dec, rep = node.process_frame(loud)
    assert dec.hypothesis is Hypothesis.H1
    assert rep is not None and rep.reason is AnomalyReason.FEATURE_OUTLIER
    assert rep.score > node.rules.anomaly_bound
    np.testing.assert_array_equal(rep.raw_frame.samples, loud.samples)
    # one raw frame per channel per epoch
    # the first outlier widened the running variance, so probe far louder
    _, rep2 = node.process_frame(loud.replace(samples=loud.samples * 1e4))
    assert rep2 is not None and rep2.raw_frame is None


def test_raw_frame_cap_resets_each_epoch():
    node = FogNode(0, "T0", _rules(), (0,), summary_budget=None)
    loud = gen_pu_signal(PuProfile(amplitude=10.0), N, 1)
    for i in range(35):
        node.process_frame(gen_noise(N, 1.0, i))
    assert node.process_frame(loud)[1].raw_frame is not None
    node.make_summary()
    assert node.process_frame(loud.replace(samples=loud.samples * 1e4))[1].raw_frame is not None


# ------------------------------------------------------------- anomaly --

def test_anomaly_warmup_and_mean():
    node = FogNode(0, "T2", _rules(anomaly_bound=5.0), (0,))
    f = FeatureVector([1.0, 0.5, 0.2, 0.1, 0.9, 0.3])
    far = FeatureVector(np.full(6, 1e6))
    for _ in range(29):
        assert node.detect_anomaly(far if _ % 2 else f) is None
    node2 = FogNode(0, "T2", _rules(anomaly_bound=5.0), (0,))
    for _ in range(30):
        node2.detect_anomaly(f)
    assert node2.anomaly_score(f) == 0.0
    assert node2.detect_anomaly(f) is None


def test_anomaly_ten_sigma_outlier():
    node = FogNode(0, "T2", _rules(anomaly_bound=5.0), (0,))
    base = np.array([1.0, 0.5, 0.2, 0.1, 0.9, 0.3])
    for _ in range(30):
        node.detect_anomaly(FeatureVector(base))
    out = node.detect_anomaly(FeatureVector(base + 10 * math.sqrt(1e-9)))
    assert out is not None
    score, reason = out
    assert score == pytest.approx(math.sqrt(600), rel=1e-6)
    assert reason is AnomalyReason.FEATURE_OUTLIER


# ------------------------------------------------------------- summary --

def test_empty_epoch_summary():
    node = FogNode(2, "T0", _rules(), (0, 1))
    s = node.make_summary()
    assert s.frames == 0 and s.feature_mean is None and s.anomaly_count == 0
    assert all(c.frames == 0 and c.metric_mean is None for c in s.channels)
    assert node.epoch == 1


def test_noise_epoch_h1_count_binomial(rho):
    node = FogNode(0, "T0", _rules(rho), (0,))
    for i in range(100):
        node.process_frame(gen_noise(N, 1.0, stream(7, "noise", i)))
    s = node.make_summary()
    assert 1 <= s.channels[0].h1_decisions <= 22
    assert s.frames == 100


def test_summary_replay_oracle_and_reset():
    frames = _mixed_frames(90, 8, channels=(0, 1, 2))
    node = FogNode(0, "T0", _rules(channels=(0, 1, 2)), (0, 1, 2))
    for y, _ in frames:
        node.process_frame(y)
    node.record_collision(1)
    s = node.make_summary()
    assert s.frames == 90
    for cs in s.channels:
        metrics = [d.metric for d in node.decision_log if d.channel_id == cs.channel_id]
        assert cs.frames == len(metrics)
        assert cs.h1_decisions == sum(d.hypothesis is Hypothesis.H1 for d in node.decision_log
                                      if d.channel_id == cs.channel_id)
        assert cs.metric_mean == pytest.approx(sum(metrics) / len(metrics), rel=1e-12)
        assert cs.metric_min == min(metrics) and cs.metric_max == max(metrics)
    assert s.channel(1).collisions_observed == 1
    assert len(encode_summary(s)) <= 0.05 * 90 * N * BYTES_PER_SAMPLE
    assert node.make_summary().frames == 0


def test_summary_overflow_raises():
    node = FogNode(0, "T0", _rules(), (0, 1))
    node.process_frame(silent_frame(16))
    with pytest.raises(SummaryOverflowError):
        node.make_summary()


# --------------------------------------------------------------- rules --

def test_apply_rules_versioning():
    node = FogNode(0, "T0", _rules(version=5), (0, 1))
    assert not node.apply_rules(_rules(version=5, rho_e=1.0))
    assert node.rules.thresholds[0].rho_energy == 100.0
    assert node.apply_rules(_rules(version=7))
    assert not node.apply_rules(_rules(version=6))
    assert node.rules.version == 7
    assert node.process_frame(silent_frame(N))[0].rules_version == 7


def test_apply_rules_rejects_malformed():
    node = FogNode(0, "T0", _rules(), (0, 1))
    bad = RuleSet(2, {0: ChannelThresholds(-1.0, 1.0, 1.0)})
    assert not node.apply_rules(bad)
    assert any("rho_energy" in p for p in node.last_rejection)
    assert any("channels [1]" in p for p in node.last_rejection)
    assert not node.apply_rules(_rules(version=3, active_engine=Engine.SVM))
    assert not node.apply_rules(_rules(version=4, model_text="garbage"))
    assert node.rules.version == 1
    with pytest.raises(FogCRNError):
        FogNode(0, "T0", bad, (0, 1))


def test_rule_versions_non_decreasing_in_log():
    node = FogNode(0, "T0", _rules(), (0, 1))
    for i in range(20):
        if i % 5 == 0:
            node.apply_rules(_rules(version=node.rules.version + (1 if i % 10 else -1)))
        node.process_frame(gen_noise(N, 1.0, i, channel_id=i % 2))
    v = [d.rules_version for d in node.decision_log]
    assert v == sorted(v) and v[-1] > 1


def test_node_determinism():
    def run():
        node = FogNode(0, "T2", _rules(), (0, 1))
        return [node.process_frame(y)[0] for y, _ in _mixed_frames(40, 11)]
    assert run() == run()


# -------------------------------------------------------------- select --

def test_select_channel_examples():
    assert select_channel({1: (Hypothesis.H1, 3.0), 2: (Hypothesis.H0, 0.1)}) == 2
    assert select_channel({1: (Hypothesis.H1, 3.0), 2: (Hypothesis.H1, 2.0)}) is None
    assert select_channel({1: (Hypothesis.H0, 0.4, 1.0), 2: (Hypothesis.H0, 0.2, 1.0)}) == 2
    assert select_channel({3: (Hypothesis.H0, 0.2, 1.0), 1: (Hypothesis.H0, 0.2, 1.0)}) == 1
    d = SensingDecision(4, Hypothesis.H0, 90.0, 100.0, DecisionEngine.ENERGY, 1, 0)
    e = SensingDecision(5, Hypothesis.H0, 50.0, 55.0, DecisionEngine.ENERGY, 1, 0)
    assert select_channel({4: d, 5: e}) == 4


def test_never_selects_channel_decided_h1():
    rng = np.random.default_rng(0)
    for _ in range(200):
        beliefs = {c: (Hypothesis(int(rng.integers(2))), rng.uniform(0, 2), 1.0) for c in range(5)}
        ch = select_channel(beliefs)
        if ch is not None:
            assert beliefs[ch][0] is Hypothesis.H0
        else:
            assert all(b[0] is Hypothesis.H1 for b in beliefs.values())
