"""Discrete-time simulation harness."""
from .harness import SWEEPABLE, PuActivityModel, Simulation, initial_rules, pu_step, run, sweep
from .report import CSV_COLUMNS, MetricsReport, NodeMetrics, sweep_csv
from .scenario import SCENARIO_KEYS, Scenario, load_scenario, parse_scenario
from .transport import Transport
