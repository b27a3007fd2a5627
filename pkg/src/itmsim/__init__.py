"""Discrete-event simulator of botnet floods against an ITM-monitored network.

Defense is two-phase: threshold detection over monitor logs blocks the
attacked range, then honeypots capture the C&C configuration so the server
can be infiltrated and taken down.
"""
from importlib import resources

from .engine import HOUR, MINUTE, MS, SECOND, Engine, EventKind, SimEvent, Trace
from .runner import RunResult, build_world, run_scenario
from .scenario import ScenarioConfig, ScenarioError, load_scenario, parse_scenario, to_text

CANONICAL = ("single_victim_centralized", "single_victim_distributed", "multi_victim_k3")


def scenario_text(name: str) -> str:
    """Text of a bundled scenario, e.g. ``scenario_text("multi_victim_k3")``."""
    return resources.files(__name__).joinpath("scenarios", f"{name}.yaml").read_text()


def canonical_scenario(name: str) -> ScenarioConfig:
    return parse_scenario(scenario_text(name))


__all__ = ["Engine", "EventKind", "SimEvent", "Trace", "ScenarioConfig", "ScenarioError",
           "parse_scenario", "load_scenario", "to_text", "run_scenario", "build_world",
           "RunResult", "scenario_text", "canonical_scenario", "CANONICAL",
           "MS", "SECOND", "MINUTE", "HOUR"]
