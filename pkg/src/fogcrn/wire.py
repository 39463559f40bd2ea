"""Length-prefixed, field-tagged binary encoding of node/cloud messages.

Envelope (little-endian)::

    magic b"FGCR" | wire_version u8 | msg_type u8 | payload_len u32 | payload

The payload is a sequence of fields ``tag u16 | type u8 | len u32 | value``.
Field types: INT (int64), FLOAT (float64), BYTES, STR (UTF-8), F64S (packed
float64 array) and REC (a nested field sequence). A tag may repeat, which is
how per-channel records are carried. Decoders skip unknown tags.

Message tags are listed in the ``*_TAGS`` tables below.
"""
from __future__ import annotations

import struct
from collections import defaultdict

import numpy as np

from .errors import WireFormatError
from .frameio import decode_frame, encode_frame
from .learning.classify import Engine
from .messages import (Allocation, AnomalyReason, AnomalyReport, ChannelSummary,
                       ChannelThresholds, RuleSet, Summary)
from .sensing import Detector, FeatureVector

MAGIC = b"FGCR"
WIRE_VERSION = 1
_ENV = struct.Struct("<4sBBI")
_FIELD = struct.Struct("<HBI")

INT, FLOAT, BYTES, STR, F64S, REC = range(1, 7)

MSG_SUMMARY, MSG_ANOMALY, MSG_RULES, MSG_ALLOCATION = 1, 2, 3, 4

SUMMARY_TAGS = dict(node_id=1, epoch=2, rules_version_used=3, anomaly_count=4,
                    feature_mean=5, channel=6, schema_version=7)
CHANNEL_TAGS = dict(channel_id=1, frames=2, h1_decisions=3, collisions_observed=4,
                    metric_stats=5)
ANOMALY_TAGS = dict(node_id=1, epoch=2, channel_id=3, features=4, schema_version=5,
                    score=6, reason=7, raw_frame=8, sample_index_origin=9, tick=10)
RULES_TAGS = dict(version=1, pfa_target=2, anomaly_bound=3, active_engine=4, detector=5,
                  model=6, schema_version=7, channel=8)
THRESH_TAGS = dict(channel_id=1, rho_energy=2, rho_waveform=3, rho_cyclic=4)
ALLOC_TAGS = dict(round=1, node_id=2, channel_id=3)


class _Writer:
    def __init__(self):
        self.parts = []

    def _put(self, tag, typ, raw: bytes):
        self.parts.append(_FIELD.pack(tag, typ, len(raw)))
        self.parts.append(raw)
        return self

    def int(self, tag, v):
        return self._put(tag, INT, struct.pack("<q", int(v)))

    def float(self, tag, v):
        return self._put(tag, FLOAT, struct.pack("<d", float(v)))

    def bytes(self, tag, v: bytes):
        return self._put(tag, BYTES, bytes(v))

    def str(self, tag, v: str):
        return self._put(tag, STR, v.encode("utf-8"))

    def f64s(self, tag, v):
        return self._put(tag, F64S, np.asarray(v, dtype="<f8").tobytes())

    def rec(self, tag, w: "_Writer"):
        return self._put(tag, REC, w.payload())

    def payload(self) -> bytes:
        return b"".join(self.parts)


def _parse_fields(buf: bytes) -> dict:
    """tag -> list of decoded values, in order of appearance."""
    out = defaultdict(list)
    pos = 0
    view = memoryview(buf)
    while pos < len(buf):
        if pos + _FIELD.size > len(buf):
            raise WireFormatError("truncated field header")
        tag, typ, ln = _FIELD.unpack_from(buf, pos)
        pos += _FIELD.size
        if pos + ln > len(buf):
            raise WireFormatError(f"field {tag} overruns payload")
        raw = bytes(view[pos:pos + ln])
        pos += ln
        if typ == INT:
            val = struct.unpack("<q", raw)[0]
        elif typ == FLOAT:
            val = struct.unpack("<d", raw)[0]
        elif typ == BYTES:
            val = raw
        elif typ == STR:
            val = raw.decode("utf-8")
        elif typ == F64S:
            if ln % 8:
                raise WireFormatError(f"field {tag}: float array length {ln} not a multiple of 8")
            val = np.frombuffer(raw, dtype="<f8").astype(float)
        elif typ == REC:
            val = _parse_fields(raw)
        else:
            continue  # unknown type: skip for forward compatibility
        out[tag].append(val)
    return out


def _one(fields: dict, tag: int, name: str, default=...):
    vals = fields.get(tag)
    if not vals:
        if default is ...:
            raise WireFormatError(f"missing field {name!r}")
        return default
    return vals[0]


def _envelope(msg_type: int, payload: bytes) -> bytes:
    return _ENV.pack(MAGIC, WIRE_VERSION, msg_type, len(payload)) + payload


def decode_envelope(buf: bytes) -> tuple[int, bytes]:
    if len(buf) < _ENV.size:
        raise WireFormatError("truncated envelope")
    magic, version, msg_type, ln = _ENV.unpack_from(buf, 0)
    if magic != MAGIC:
        raise WireFormatError(f"bad magic {magic!r}")
    if version != WIRE_VERSION:
        raise WireFormatError(f"unsupported wire version {version}")
    payload = buf[_ENV.size:]
    if len(payload) != ln:
        raise WireFormatError(f"payload length {len(payload)} != declared {ln}")
    return msg_type, payload


# ------------------------------------------------------------- summaries ----

def encode_summary(s: Summary) -> bytes:
    t = SUMMARY_TAGS
    w = (_Writer().int(t["node_id"], s.node_id).int(t["epoch"], s.epoch)
         .int(t["rules_version_used"], s.rules_version_used)
         .int(t["anomaly_count"], s.anomaly_count)
         .int(t["schema_version"], s.schema_version))
    if s.feature_mean is not None:
        w.f64s(t["feature_mean"], s.feature_mean)
    c = CHANNEL_TAGS
    for ch in s.channels:
        r = (_Writer().int(c["channel_id"], ch.channel_id).int(c["frames"], ch.frames)
             .int(c["h1_decisions"], ch.h1_decisions)
             .int(c["collisions_observed"], ch.collisions_observed))
        if ch.metric_mean is not None:
            r.f64s(c["metric_stats"], [ch.metric_mean, ch.metric_var, ch.metric_min, ch.metric_max])
        w.rec(t["channel"], r)
    return _envelope(MSG_SUMMARY, w.payload())


def _decode_summary(f: dict) -> Summary:
    t, c = SUMMARY_TAGS, CHANNEL_TAGS
    chans = []
    for r in f.get(t["channel"], []):
        stats = _one(r, c["metric_stats"], "metric_stats", None)
        if stats is not None and stats.size != 4:
            raise WireFormatError("metric_stats must hold 4 values")
        mean, var, lo, hi = (None,) * 4 if stats is None else map(float, stats)
        chans.append(ChannelSummary(
            _one(r, c["channel_id"], "channel_id"), _one(r, c["frames"], "frames"),
            _one(r, c["h1_decisions"], "h1_decisions"),
            _one(r, c["collisions_observed"], "collisions_observed"), mean, var, lo, hi))
    return Summary(_one(f, t["node_id"], "node_id"), _one(f, t["epoch"], "epoch"), tuple(chans),
                   _one(f, t["feature_mean"], "feature_mean", None),
                   _one(f, t["anomaly_count"], "anomaly_count"),
                   _one(f, t["rules_version_used"], "rules_version_used"),
                   _one(f, t["schema_version"], "schema_version"))


# ------------------------------------------------------ anomaly reports ----

def encode_anomaly(a: AnomalyReport) -> bytes:
    t = ANOMALY_TAGS
    w = (_Writer().int(t["node_id"], a.node_id).int(t["epoch"], a.epoch)
         .int(t["channel_id"], a.channel_id).f64s(t["features"], a.feature.values)
         .int(t["schema_version"], a.feature.schema_version).float(t["score"], a.score)
         .str(t["reason"], a.reason.value).int(t["tick"], a.tick))
    if a.raw_frame is not None:
        w.bytes(t["raw_frame"], encode_frame(a.raw_frame))
        w.int(t["sample_index_origin"], a.raw_frame.sample_index_origin)
    return _envelope(MSG_ANOMALY, w.payload())


def _decode_anomaly(f: dict) -> AnomalyReport:
    t = ANOMALY_TAGS
    raw = _one(f, t["raw_frame"], "raw_frame", None)
    frame = None
    if raw is not None:
        frame = decode_frame(raw, _one(f, t["sample_index_origin"], "sample_index_origin", 0))
    feature = FeatureVector(_one(f, t["features"], "features"),
                            _one(f, t["schema_version"], "schema_version"))
    return AnomalyReport(_one(f, t["node_id"], "node_id"), _one(f, t["epoch"], "epoch"),
                         _one(f, t["channel_id"], "channel_id"), feature, frame,
                         _one(f, t["score"], "score"),
                         AnomalyReason(_one(f, t["reason"], "reason")), _one(f, t["tick"], "tick", 0))


# -------------------------------------------------------------- rulesets ----

def encode_rules(r: RuleSet) -> bytes:
    t, c = RULES_TAGS, THRESH_TAGS
    w = (_Writer().int(t["version"], r.version).float(t["pfa_target"], r.pfa_target)
         .float(t["anomaly_bound"], r.anomaly_bound).str(t["active_engine"], r.active_engine.value)
         .str(t["detector"], r.detector.value).int(t["schema_version"], r.schema_version))
    if r.model_text is not None:
        w.str(t["model"], r.model_text)
    for ch, th in sorted(r.thresholds.items()):
        w.rec(t["channel"], _Writer().int(c["channel_id"], ch).float(c["rho_energy"], th.rho_energy)
              .float(c["rho_waveform"], th.rho_waveform).float(c["rho_cyclic"], th.rho_cyclic))
    return _envelope(MSG_RULES, w.payload())


def _decode_rules(f: dict) -> RuleSet:
    t, c = RULES_TAGS, THRESH_TAGS
    thresholds = {}
    for r in f.get(t["channel"], []):
        thresholds[_one(r, c["channel_id"], "channel_id")] = ChannelThresholds(
            _one(r, c["rho_energy"], "rho_energy"), _one(r, c["rho_waveform"], "rho_waveform"),
            _one(r, c["rho_cyclic"], "rho_cyclic"))
    try:
        return RuleSet(_one(f, t["version"], "version"), thresholds,
                       _one(f, t["pfa_target"], "pfa_target"),
                       _one(f, t["anomaly_bound"], "anomaly_bound"),
                       Engine(_one(f, t["active_engine"], "active_engine")),
                       Detector(_one(f, t["detector"], "detector")),
                       _one(f, t["model"], "model", None), _one(f, t["schema_version"], "schema_version"))
    except ValueError as exc:
        raise WireFormatError(str(exc)) from exc


# ----------------------------------------------------------- allocations ----

def encode_allocation(a: Allocation) -> bytes:
    t = ALLOC_TAGS
    ch = -1 if a.channel_id is None else a.channel_id
    w = _Writer().int(t["round"], a.round).int(t["node_id"], a.node_id).int(t["channel_id"], ch)
    return _envelope(MSG_ALLOCATION, w.payload())


def _decode_allocation(f: dict) -> Allocation:
    t = ALLOC_TAGS
    ch = _one(f, t["channel_id"], "channel_id")
    return Allocation(_one(f, t["round"], "round"), _one(f, t["node_id"], "node_id"),
                      None if ch < 0 else ch)


_ENCODERS = {Summary: encode_summary, AnomalyReport: encode_anomaly, RuleSet: encode_rules,
             Allocation: encode_allocation}
_DECODERS = {MSG_SUMMARY: _decode_summary, MSG_ANOMALY: _decode_anomaly,
             MSG_RULES: _decode_rules, MSG_ALLOCATION: _decode_allocation}


def encode(msg) -> bytes:
    try:
        return _ENCODERS[type(msg)](msg)
    except KeyError:
        raise TypeError(f"no wire encoding for {type(msg).__name__}") from None


def decode(buf: bytes):
    msg_type, payload = decode_envelope(buf)
    if msg_type not in _DECODERS:
        raise WireFormatError(f"unknown message type {msg_type}")
    return _DECODERS[msg_type](_parse_fields(payload))
