"""Scenario definition and its flat ``key = value`` file format.

Example file::

    # two T2 nodes watching four channels
    n_channels = 4
    n_nodes = 2
    node_tiers = T2,T2
    snr_db = -5
    mode = fog

Blank lines and ``#`` comments are ignored. Keys are exactly the field names
of :class:`Scenario`; omitted keys keep their defaults. ``node_tiers`` takes
either one tier for every node or a comma list with one tier per node.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields
from pathlib import Path

from ..errors import InvalidArgumentError, ScenarioError
from ..fognode import CapabilityTier
from ..sensing import Detector

MODES = ("fog", "centralized")
ALLOCATIONS = ("greedy", "random", "local")
PU_INITIAL = ("off", "on", "random")


@dataclass(frozen=True)
class Scenario:
    n_channels: int = 4
    n_nodes: int = 2
    node_tiers: tuple = ("T2",)
    epoch_len_ticks: int = 100
    frames_per_tick: int = 1
    frame_len: int = 128
    snr_db: float = 0.0
    # primary-user Markov chain, one per channel
    p_on_to_off: float = 0.1
    p_off_to_on: float = 0.1
    pu_initial: str = "random"
    # PU waveform
    carrier_freq: float = 0.1
    symbol_len: int = 8
    # transport
    latency_ticks: int = 1
    drop_prob: float = 0.0
    # sensing and control
    pfa_target: float = 0.1
    detector: str = "energy"
    calibration_trials: int = 10_000
    initial_rho_scale: float = 1.0
    anomaly_bound: float = 10.0
    eta: float = 0.5
    belief_weight: float = 0.3
    busy_cutoff: float = 0.5
    idle_cutoff: float = 0.2
    rho_clamp: float = 4.0
    report_budget: float = 0.03
    allocation: str = "greedy"
    duration_ticks: int = 1000
    mode: str = "fog"
    master_seed: int = 0

    def __post_init__(self):
        tiers = self.node_tiers
        if isinstance(tiers, str):
            tiers = tuple(t.strip() for t in tiers.split(",") if t.strip())
        object.__setattr__(self, "node_tiers", tuple(str(t).strip() for t in tiers))

    def tiers(self) -> list:
        """One CapabilityTier per node (a single listed tier applies to all)."""
        names = self.node_tiers * self.n_nodes if len(self.node_tiers) == 1 else self.node_tiers
        return [CapabilityTier.parse(t) for t in names]

    def violations(self) -> list:
        """Every validation problem, so a user can fix a file in one pass."""
        v = []
        for name in ("n_channels", "n_nodes", "epoch_len_ticks", "frames_per_tick",
                     "symbol_len"):
            if getattr(self, name) < 1:
                v.append(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.calibration_trials < 1000:
            v.append(f"calibration_trials must be >= 1000, got {self.calibration_trials}")
        if self.frame_len < 8:
            v.append(f"frame_len must be >= 8, got {self.frame_len}")
        for name in ("latency_ticks", "duration_ticks", "master_seed"):
            if getattr(self, name) < 0:
                v.append(f"{name} must be >= 0, got {getattr(self, name)}")
        for name in ("p_on_to_off", "p_off_to_on", "busy_cutoff", "idle_cutoff",
                     "belief_weight", "report_budget"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                v.append(f"{name} must lie in [0, 1], got {getattr(self, name)}")
        if not 0.0 <= self.drop_prob < 1.0:
            v.append(f"drop_prob must lie in [0, 1), got {self.drop_prob}")
        if not 0.0 < self.pfa_target < 1.0:
            v.append(f"pfa_target must lie in (0, 1), got {self.pfa_target}")
        if not 0.0 < self.eta <= 1.0:
            v.append(f"eta must lie in (0, 1], got {self.eta}")
        for name in ("initial_rho_scale", "anomaly_bound"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0.0):
                v.append(f"{name} must be finite and > 0, got {val}")
        if not self.rho_clamp >= 1.0:
            v.append(f"rho_clamp must be >= 1, got {self.rho_clamp}")
        if not math.isfinite(self.snr_db):
            v.append("snr_db must be finite")
        if not 0.0 < self.carrier_freq < 0.5:
            v.append(f"carrier_freq must lie in (0, 0.5), got {self.carrier_freq}")
        if self.mode not in MODES:
            v.append(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.allocation not in ALLOCATIONS:
            v.append(f"allocation must be one of {ALLOCATIONS}, got {self.allocation!r}")
        if self.pu_initial not in PU_INITIAL:
            v.append(f"pu_initial must be one of {PU_INITIAL}, got {self.pu_initial!r}")
        if self.detector not in {d.value for d in Detector}:
            v.append(f"unknown detector {self.detector!r}")
        if len(self.node_tiers) not in (1, self.n_nodes):
            v.append(f"node_tiers lists {len(self.node_tiers)} tiers for {self.n_nodes} nodes")
        for t in self.node_tiers:
            try:
                CapabilityTier.parse(t)
            except ValueError:
                v.append(f"unknown tier {t!r}")
        return v

    def validate(self) -> "Scenario":
        problems = self.violations()
        if problems:
            raise ScenarioError(problems)
        return self

    def with_overrides(self, overrides: dict) -> "Scenario":
        return dataclasses.replace(self, **_coerce_all(overrides))

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            val = getattr(self, f.name)
            lines.append(f"{f.name} = {','.join(val) if isinstance(val, tuple) else val}")
        return "\n".join(lines) + "\n"


SCENARIO_KEYS = tuple(f.name for f in fields(Scenario))
_TYPES = {f.name: type(f.default) for f in fields(Scenario)}


def _coerce(key: str, text):
    if key not in _TYPES:
        raise ScenarioError([f"unknown scenario key {key!r}"])
    kind = _TYPES[key]
    if not isinstance(text, str):
        return text
    text = text.strip()
    try:
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
    except ValueError:
        raise ScenarioError([f"{key}: cannot parse {text!r} as {kind.__name__}"]) from None
    return text


def _coerce_all(pairs: dict) -> dict:
    out, problems = {}, []
    for k, v in pairs.items():
        try:
            out[k] = _coerce(k, v)
        except ScenarioError as exc:
            problems.extend(exc.violations)
    if problems:
        raise ScenarioError(problems)
    return out


def parse_pairs(lines) -> dict:
    pairs, problems = {}, []
    for no, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"line {no}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        if key in pairs:
            problems.append(f"line {no}: duplicate key {key!r}")
        pairs[key] = value
    if problems:
        raise ScenarioError(problems)
    return pairs


def parse_scenario(text: str, overrides: dict | None = None) -> Scenario:
    """Parse a scenario file body, apply overrides, and validate."""
    pairs = parse_pairs(text.splitlines())
    pairs.update(overrides or {})
    return Scenario(**_coerce_all(pairs)).validate()


def load_scenario(path, overrides: dict | None = None) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InvalidArgumentError(f"cannot read scenario {path}: {exc}") from exc
    return parse_scenario(text, overrides)
