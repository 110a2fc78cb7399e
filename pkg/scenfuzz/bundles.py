"""
Checks for the bundled scenario corpus
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from .behaviors import BEHAVIORS
from .config import AutopilotConfig, MonitorConfig, SimulationConfig
from .engine import RolloutTask, execute_rollout, load_scenario
from .exceptions import ConfigError, InfeasibleSample, MapError, ScenarioParseError, ScenfuzzError
from .features import check_against_map, extract_feature_space, instantiate, midpoint
from .maps import load_map
from .scenario import ScenarioProgram
from .validators import Diagnostic, DiagnosticKind

logger = logging.getLogger(__name__)

SMOKE_HORIZON = 5.0


@dataclass(frozen=True)
class ScenarioBundle:
    """One manifest entry"""

    id: str
    scenario_path: str
    map: Optional[str] = None
    continuous_dims: Optional[int] = None
    discrete_dims: Optional[int] = None
    infrastructure: Optional[str] = None
    kinds: Dict[str, int] = field(default_factory=dict)
    behaviors: Tuple[str, ...] = ()
    notes: str = ""

    @classmethod
    def from_entry(cls, entry: Dict[str, Any]) -> "ScenarioBundle":
        return cls(
            id=str(entry["id"]),
            scenario_path=entry["scenario_path"],
            map=entry.get("map"),
            continuous_dims=entry.get("continuous_dims"),
            discrete_dims=entry.get("discrete_dims"),
            infrastructure=entry.get("infrastructure"),
            kinds=dict(entry.get("kinds", {})),
            behaviors=tuple(entry.get("behaviors", ())),
            notes=entry.get("notes", ""),
        )


def agent_kinds(prog: ScenarioProgram) -> Dict[str, int]:
    """Declared agent counts per kind, subscenarios included"""
    counts: Dict[str, int] = {}
    for agent in prog.agents:
        counts[agent.kind] = counts.get(agent.kind, 0) + 1
    for sub in prog.subscenarios:
        for kind, n in agent_kinds(sub).items():
            counts[kind] = counts.get(kind, 0) + n
    return counts


def behavior_names(prog: ScenarioProgram) -> List[str]:
    names = {a.behavior.name for a in prog.agents if a.behavior is not None}
    for sub in prog.subscenarios:
        names.update(behavior_names(sub))
    return sorted(names)


def _bundle_error(bundle: ScenarioBundle, message: str) -> Diagnostic:
    return Diagnostic(DiagnosticKind.BUNDLE, message, source=bundle.id)


def _check_manifest(bundle: ScenarioBundle, prog: ScenarioProgram) -> List[Diagnostic]:
    problems: List[Diagnostic] = []
    space = extract_feature_space(prog)
    if bundle.continuous_dims is not None and len(space.continuous) != bundle.continuous_dims:
        problems.append(
            _bundle_error(
                bundle,
                f"expected {bundle.continuous_dims} continuous dimensions, found {len(space.continuous)}",
            )
        )
    if bundle.discrete_dims is not None and len(space.discrete) != bundle.discrete_dims:
        problems.append(
            _bundle_error(
                bundle, f"expected {bundle.discrete_dims} discrete dimensions, found {len(space.discrete)}"
            )
        )
    if bundle.kinds and agent_kinds(prog) != bundle.kinds:
        problems.append(_bundle_error(bundle, f"agent kinds {agent_kinds(prog)} differ from {bundle.kinds}"))
    if bundle.behaviors and sorted(bundle.behaviors) != behavior_names(prog):
        problems.append(
            _bundle_error(bundle, f"behaviors {behavior_names(prog)} differ from {sorted(bundle.behaviors)}")
        )
    unknown = [name for name in bundle.behaviors if name not in BEHAVIORS]
    if unknown:
        problems.append(_bundle_error(bundle, f"unknown behaviors in manifest: {', '.join(unknown)}"))
    return problems


def validate_bundle(
    bundle: ScenarioBundle,
    simulation: Optional[SimulationConfig] = None,
    autopilot: Optional[AutopilotConfig] = None,
    monitors: Optional[MonitorConfig] = None,
    smoke_horizon: float = SMOKE_HORIZON,
) -> List[Diagnostic]:
    """
    Parse, instantiate at the feature-space midpoint and run a short builtin rollout

    Returns:
        Diagnostics; empty when the bundle is healthy
    """
    if not Path(bundle.scenario_path).exists():
        return [_bundle_error(bundle, f"scenario file {bundle.scenario_path} is missing")]
    try:
        prog, map_path = load_scenario(bundle.scenario_path, bundle.map)
    except ScenarioParseError as e:
        return [
            Diagnostic(d.kind, d.message, d.line, d.column, d.severity, source=bundle.id) for d in e.diagnostics
        ]
    except ConfigError as e:
        return [_bundle_error(bundle, str(e))]

    try:
        map_model = load_map(map_path)
    except MapError as e:
        return [Diagnostic(DiagnosticKind.MAP, str(e), source=bundle.id)]
    problems = [
        Diagnostic(d.kind, d.message, d.line, d.column, d.severity, source=bundle.id)
        for d in check_against_map(prog, map_model)
    ]
    problems.extend(_check_manifest(bundle, prog))
    if problems:
        return problems

    point = midpoint(extract_feature_space(prog))
    try:
        instantiate(prog, point, map_model)
    except InfeasibleSample as e:
        return [_bundle_error(bundle, f"midpoint is infeasible: {e}")]

    simulation = simulation or SimulationConfig()
    task = RolloutTask(
        index=0,
        program=prog,
        map_path=map_path,
        point=point,
        rollout_seed=0,
        dt=simulation.dt,
        horizon=smoke_horizon,
        simulation=simulation,
        autopilot=autopilot or AutopilotConfig(),
        monitors=monitors or MonitorConfig(),
    )
    try:
        result = execute_rollout(task)
    except ScenfuzzError as e:
        return [_bundle_error(bundle, f"smoke rollout failed: {e}")]
    if not result.feasible:
        return [_bundle_error(bundle, f"smoke rollout infeasible: {result.reason}")]
    logger.debug(f"Bundle {bundle.id} smoke rollout: {result.termination}, rho {result.rho}")
    return []


def validate_bundles(bundles: Sequence[ScenarioBundle], **kwargs) -> Dict[str, List[Diagnostic]]:
    return {bundle.id: validate_bundle(bundle, **kwargs) for bundle in bundles}
