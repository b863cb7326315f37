"""Leader-follower swarm simulator with gap-aware reshaping into a queue and
registration-based return to the original V formation."""
from .config import ScenarioConfig, ScenarioError, SimMode, load_reference, load_scenario
from .engine import Event, EventKind, SimulationResult, run, tick

__all__ = [
    "Event",
    "EventKind",
    "ScenarioConfig",
    "ScenarioError",
    "SimMode",
    "SimulationResult",
    "load_reference",
    "load_scenario",
    "run",
    "tick",
]
