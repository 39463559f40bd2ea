"""End-of-run metrics and their CSV / structured-text renderings.

CSV column order (one row per node, then an aggregate row with node ``all``)::

    node, tier, frames, h1_decisions, pd, pfa, miss_rate, transmissions,
    collisions, su_pu_collision_rate, spectrum_utilization, uplink_bytes,
    raw_bytes, compression_ratio, rule_update_count, anomaly_reports,
    rule_rtt_ticks

Rates with an empty denominator are written as ``nan``. Floats use ``repr``
so a CSV round-trips exactly. Sweep outputs prepend ``sweep_param`` and
``sweep_value`` columns.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, fields
from typing import Optional

CSV_COLUMNS = ("node", "tier", "frames", "h1_decisions", "pd", "pfa", "miss_rate",
               "transmissions", "collisions", "su_pu_collision_rate", "spectrum_utilization",
               "uplink_bytes", "raw_bytes", "compression_ratio", "rule_update_count",
               "anomaly_reports", "rule_rtt_ticks")

NAN = float("nan")


def ratio(num, den) -> float:
    return num / den if den else NAN


@dataclass
class NodeCounters:
    """Raw tallies; every rate in the report is derived from these."""

    frames: int = 0
    h1_decisions: int = 0
    on_frames: int = 0       # frames sensed while the PU was transmitting
    detections: int = 0
    off_frames: int = 0
    false_alarms: int = 0
    transmissions: int = 0
    collisions: int = 0
    idle_ticks_used: int = 0
    uplink_bytes: int = 0
    raw_bytes: int = 0
    rule_updates: int = 0
    anomaly_reports: int = 0
    rtt_sum: int = 0

    def add(self, other: "NodeCounters") -> "NodeCounters":
        return NodeCounters(*(getattr(self, f.name) + getattr(other, f.name)
                              for f in fields(self)))


@dataclass(frozen=True)
class NodeMetrics:
    node: str
    tier: str
    frames: int
    h1_decisions: int
    pd: float
    pfa: float
    miss_rate: float
    transmissions: int
    collisions: int
    su_pu_collision_rate: float
    spectrum_utilization: float
    uplink_bytes: int
    raw_bytes: int
    compression_ratio: float
    rule_update_count: int
    anomaly_reports: int
    rule_rtt_ticks: float

    @classmethod
    def from_counters(cls, node, tier, c: NodeCounters, idle_channel_ticks: int,
                      idle_used: Optional[int] = None) -> "NodeMetrics":
        pd = ratio(c.detections, c.on_frames)
        used = c.idle_ticks_used if idle_used is None else idle_used
        return cls(
            str(node), tier, c.frames, c.h1_decisions, pd, ratio(c.false_alarms, c.off_frames),
            1.0 - pd, c.transmissions, c.collisions,
            # no transmissions means no interference was caused
            c.collisions / c.transmissions if c.transmissions else 0.0,
            # with no idle channel-ticks there was nothing to use
            used / idle_channel_ticks if idle_channel_ticks else 0.0, c.uplink_bytes, c.raw_bytes,
            ratio(c.uplink_bytes, c.raw_bytes), c.rule_updates, c.anomaly_reports,
            ratio(c.rtt_sum, c.rule_updates))

    def csv_cells(self) -> list:
        out = []
        for name in CSV_COLUMNS:
            v = getattr(self, name)
            out.append(repr(float(v)) if isinstance(v, float) else str(v))
        return out


@dataclass
class MetricsReport:
    rows: list                       # NodeMetrics per node, aggregate last
    ticks: int = 0
    transport: dict = field(default_factory=dict)
    mode: str = "fog"
    master_seed: int = 0
    tag: Optional[tuple] = None      # (param, value) when produced by a sweep

    @property
    def aggregate(self) -> NodeMetrics:
        return self.rows[-1]

    @property
    def nodes(self) -> list:
        return self.rows[:-1]

    def node(self, node_id) -> NodeMetrics:
        for r in self.nodes:
            if r.node == str(node_id):
                return r
        raise KeyError(node_id)

    def to_csv(self, header: bool = True) -> str:
        buf = io.StringIO()
        prefix_cols = ("sweep_param", "sweep_value") if self.tag else ()
        prefix = [str(self.tag[0]), str(self.tag[1])] if self.tag else []
        if header:
            buf.write(",".join(prefix_cols + CSV_COLUMNS) + "\n")
        for r in self.rows:
            buf.write(",".join(prefix + r.csv_cells()) + "\n")
        return buf.getvalue()

    def to_text(self) -> str:
        lines = ["[run]", f"mode = {self.mode}", f"master_seed = {self.master_seed}",
                 f"ticks = {self.ticks}"]
        if self.tag:
            lines += [f"sweep_param = {self.tag[0]}", f"sweep_value = {self.tag[1]}"]
        lines += ["", "[transport]"]
        lines += [f"{k} = {v}" for k, v in self.transport.items()]
        for r in self.rows:
            lines += ["", f"[node.{r.node}]"]
            for name, cell in zip(CSV_COLUMNS[1:], r.csv_cells()[1:]):
                lines.append(f"{name} = {cell}")
        return "\n".join(lines) + "\n"


def sweep_csv(reports) -> str:
    if not reports:
        return ""
    return "".join(r.to_csv(header=(i == 0)) for i, r in enumerate(reports))


def is_rate(v) -> bool:
    return math.isnan(v) or 0.0 <= v <= 1.0
