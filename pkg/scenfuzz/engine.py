"""
Falsification campaigns

The Campaign coordinator owns the sampler state and the error table.
Rollouts are pure tasks (``execute_rollout``) that may run in worker
processes; their results are applied in row order, so a campaign's
``rows.jsonl`` does not depend on scheduling.
"""

import logging
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from .config import AutopilotConfig, CampaignConfig, MonitorConfig, SimulationConfig
from .exceptions import (
    ConfigError,
    ErrorTableError,
    HashMismatch,
    InfeasibleSample,
    MapError,
    ReplayMismatch,
)
from .error_table import CampaignRecord, ErrorTable, ErrorTableRow
from .features import FeatureSpace, SamplePoint, check_against_map, extract_feature_space, instantiate
from .helpers import HashGenerator
from .maps import MapModel, load_map, resolve_map_path
from .monitors import METRICS, RhoVector, evaluate
from .parser import parse_file
from .profiler import RolloutProfiler
from .samplers import Feedback, SamplerState, draw_batch, initial_state, observe
from .scenario import ScenarioProgram
from .simulator import Trace, run_rollout
from .sut import make_sut, validate_handle

logger = logging.getLogger(__name__)


@lru_cache(maxsize=8)
def _cached_map(path: str) -> MapModel:
    return load_map(path)


@dataclass(frozen=True)
class RolloutTask:
    """Everything one rollout needs; picklable for worker processes"""

    index: int
    program: ScenarioProgram
    map_path: str
    point: SamplePoint
    rollout_seed: int
    dt: float
    horizon: float
    sut: str = "builtin"
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    autopilot: AutopilotConfig = field(default_factory=AutopilotConfig)
    monitors: MonitorConfig = field(default_factory=MonitorConfig)


@dataclass
class RolloutResult:
    index: int
    feasible: bool
    rho: Optional[RhoVector] = None
    termination: Optional[str] = None
    reason: Optional[str] = None
    trace: Optional[Trace] = None
    timings: Dict[str, float] = field(default_factory=dict)


def execute_rollout(task: RolloutTask) -> RolloutResult:
    """Instantiate, simulate and monitor one sample point"""
    map_model = _cached_map(task.map_path)
    timings: Dict[str, float] = {}

    start = time.perf_counter()
    try:
        scene = instantiate(task.program, task.point, map_model)
    except InfeasibleSample as e:
        timings["instantiate"] = time.perf_counter() - start
        return RolloutResult(task.index, feasible=False, reason=str(e), timings=timings)
    timings["instantiate"] = time.perf_counter() - start

    start = time.perf_counter()
    with make_sut(
        task.sut, map_model, scene.route, task.autopilot, task.simulation, scene.cruise_speed
    ) as sut:
        sut.start(
            {"dt": task.dt, "horizon": task.horizon, "route": list(scene.route), "map_ref": map_model.name}
        )
        trace = run_rollout(
            scene, sut, map_model, task.dt, task.horizon, task.simulation, seed=task.rollout_seed
        )
    timings["rollout"] = time.perf_counter() - start

    start = time.perf_counter()
    rho = evaluate(trace, map_model, task.monitors)
    timings["evaluate"] = time.perf_counter() - start
    return RolloutResult(
        task.index,
        feasible=True,
        rho=rho,
        termination=trace.termination.value,
        trace=trace,
        timings=timings,
    )


def campaign_id_for(scenario_hash: str, config: CampaignConfig) -> str:
    return HashGenerator.generate_record_hash(
        {
            "scenario": scenario_hash,
            "sampler": config.sampler.kind,
            "bins": config.sampler.bins,
            "exploration": config.sampler.exploration,
            "batch_size": config.sampler.batch_size,
            "seed": config.seed,
            "dt": config.dt,
            "horizon": config.horizon,
        }
    )


def load_scenario(scenario_path: str, map_override: Optional[str] = None) -> Tuple[ScenarioProgram, str]:
    """
    Parse a scenario and resolve its map

    Raises:
        ScenarioParseError: the program does not parse
        ConfigError: no map is given or the program has no ego
    """
    program = parse_file(scenario_path)
    if program.ego is None:
        raise ConfigError(f"{scenario_path}: scenario declares no ego")
    map_ref = map_override or program.map_ref
    if not map_ref:
        raise ConfigError(f"{scenario_path}: no map given (use a map statement or --map)")
    return program, str(resolve_map_path(map_ref, scenario_path))


class Campaign:
    """
    Falsification loop: sample, instantiate, roll out, monitor, record, observe
    """

    def __init__(self, config: CampaignConfig):
        self.config = config
        self.errors: List[str] = []
        self.warnings: List[str] = []
        self.stats: Dict[str, int] = defaultdict(int)
        self.logger = logging.getLogger(f"scenfuzz.engine.{self.__class__.__name__}")
        self.profiler = RolloutProfiler(config.enable_profiling)
        self.start_time: Optional[float] = None
        self.table: Optional[ErrorTable] = None

        self.program: Optional[ScenarioProgram] = None
        self.map_path: Optional[str] = None
        self.map: Optional[MapModel] = None
        self.space: Optional[FeatureSpace] = None
        self.scenario_hash: Optional[str] = None
        self.campaign_id: Optional[str] = None

    # Logging methods
    def log_info(self, message):
        self.logger.info(message)

    def log_warning(self, message):
        self.logger.warning(message)
        self.warnings.append(message)

    def log_error(self, message):
        self.logger.error(message)
        self.errors.append(message)

    def prepare(self) -> None:
        """
        Load the scenario and map and check them against each other

        Raises:
            ConfigError: unusable scenario, map or SUT handle
            ScenarioParseError: the scenario does not parse
        """
        cfg = self.config
        validate_handle(cfg.sut)
        self.program, self.map_path = load_scenario(cfg.scenario, cfg.map)
        try:
            self.map = _cached_map(self.map_path)
        except MapError as e:
            raise ConfigError(str(e))
        problems = check_against_map(self.program, self.map)
        if problems:
            raise ConfigError("; ".join(str(p) for p in problems))
        self.space = extract_feature_space(self.program)
        self.scenario_hash = HashGenerator.file_hash(cfg.scenario)
        self.campaign_id = campaign_id_for(self.scenario_hash, cfg)
        self.log_info(
            f"Campaign {self.campaign_id}: {self.program.name} on {self.map.name}, "
            f"{len(self.space.continuous)} continuous and {len(self.space.discrete)} discrete dims, "
            f"sampler {cfg.sampler.kind}, seed {cfg.seed}"
        )

    def _record(self) -> CampaignRecord:
        cfg = self.config
        return CampaignRecord(
            campaign_id=self.campaign_id,
            scenario_path=str(Path(cfg.scenario).resolve()),
            scenario_hash=self.scenario_hash,
            scenario_name=self.program.name,
            map_path=str(Path(self.map_path).resolve()),
            sampler=asdict(cfg.sampler),
            seed=cfg.seed,
            dt=cfg.dt,
            horizon=cfg.horizon,
            thresholds=asdict(cfg.monitors),
            space=self.space,
            simulation=asdict(cfg.simulation),
            autopilot=asdict(cfg.autopilot),
            sut=cfg.sut,
            keep_all_traces=cfg.storage.keep_all_traces,
            started=datetime.now(timezone.utc).isoformat(),
        )

    def _open_table(self) -> Tuple[ErrorTable, SamplerState, List[SamplePoint], int, Dict[str, Any]]:
        """
        Table, sampler state, points still owed from an interrupted batch,
        the offset of the first owed point, and the state recorded for that batch
        """
        cfg = self.config
        fresh = initial_state(cfg.sampler, self.space, cfg.seed, self.campaign_id)
        if not (cfg.resume and ErrorTable.exists(cfg.out)):
            return ErrorTable.create(cfg.out, self._record()), fresh, [], 0, {}

        table = ErrorTable.open(cfg.out)
        if table.record.campaign_id != self.campaign_id:
            raise ConfigError(
                f"{cfg.out} holds campaign {table.record.campaign_id}, not {self.campaign_id}; "
                "scenario or sampler settings changed"
            )
        if not table.rows:
            return table, fresh, [], 0, {}
        last = table.rows[-1]
        first = table.rows[last.index - last.batch_offset]
        state = SamplerState.from_dict(first.sampler_state)
        points, state = draw_batch(state, self.space, last.batch_size)
        for offset, row in enumerate(table.rows[first.index:]):
            if row.point.to_dict() != points[offset].to_dict():
                raise ErrorTableError(f"row {row.index} does not match the resumed sampler sequence")
            state = observe(state, self._feedback(row))
        self.log_info(f"Resuming campaign {self.campaign_id} after {len(table)} rows")
        return table, state, points[last.batch_offset + 1:], last.batch_offset + 1, first.sampler_state

    @staticmethod
    def _feedback(row: ErrorTableRow) -> Feedback:
        rho = row.rho.values() if row.rho else ()
        return Feedback(row.point, rho, row.feasible)

    def _task(self, index: int, point: SamplePoint) -> RolloutTask:
        cfg = self.config
        return RolloutTask(
            index=index,
            program=self.program,
            map_path=self.map_path,
            point=point,
            rollout_seed=HashGenerator.rollout_seed(cfg.seed, index),
            dt=cfg.dt,
            horizon=cfg.horizon,
            sut=cfg.sut,
            simulation=cfg.simulation,
            autopilot=cfg.autopilot,
            monitors=cfg.monitors,
        )

    def _budget_left(self) -> Optional[int]:
        if self.config.budget.max_samples is None:
            return None
        return max(0, self.config.budget.max_samples - len(self.table))

    def _out_of_time(self) -> bool:
        limit = self.config.budget.max_seconds
        return limit is not None and time.monotonic() - self.start_time >= limit

    def _window(self) -> int:
        """Points drawn together: the MAB batch, or one per worker for passive samplers"""
        if self.config.sampler.kind == "mab":
            return self.config.sampler.batch_size
        return max(1, self.config.workers)

    def _apply(self, result: RolloutResult, row_state: Dict[str, Any], offset: int, size: int, point: SamplePoint) -> ErrorTableRow:
        for phase, duration in result.timings.items():
            self.profiler.record(phase, duration)
        trace_ref = None
        if result.feasible and (result.rho.violated or self.config.storage.keep_all_traces):
            trace_ref = self.table.write_trace(result.index, result.trace)
        row = ErrorTableRow(
            index=result.index,
            point=point,
            feasible=result.feasible,
            values=point.values(self.space),
            rho=result.rho,
            termination=result.termination,
            rollout_seed=HashGenerator.rollout_seed(self.config.seed, result.index),
            trace=trace_ref,
            reason=result.reason,
            sampler_state=row_state,
            batch_offset=offset,
            batch_size=size,
        )
        with self.profiler.profile_operation("append"):
            self.table.append(row)

        self.stats["samples"] += 1
        if not result.feasible:
            self.stats["infeasible"] += 1
            self.logger.debug(f"Row {row.index} infeasible: {result.reason}")
        else:
            for metric, flag in zip(METRICS, result.rho.flags()):
                self.stats[f"{metric}_violations"] += int(flag)
            if result.rho.violated:
                self.stats["violating_samples"] += 1
            if result.termination == "sut_disconnect":
                self.stats["sut_disconnects"] += 1
        return row

    def run(self) -> ErrorTable:
        cfg = self.config
        if self.start_time is None:
            self.start_time = time.monotonic()
        if self.program is None:
            self.prepare()
        self.table, state, owed, owed_offset, owed_state = self._open_table()

        executor = ProcessPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else None
        try:
            batches: List[Tuple[List[SamplePoint], List[Dict[str, Any]], List[int], int]] = []
            if owed:
                size = owed_offset + len(owed)
                batches.append((owed, [owed_state] * len(owed), list(range(owed_offset, size)), size))
            while True:
                if not batches:
                    left = self._budget_left()
                    if left == 0 or self._out_of_time():
                        break
                    size = self._window() if left is None else min(self._window(), left)
                    if cfg.sampler.kind == "mab":
                        before = state.to_dict()
                        points, state = draw_batch(state, self.space, size)
                        batches.append((points, [before] * size, list(range(size)), size))
                    else:
                        points, states = [], []
                        for _ in range(size):
                            states.append(state.to_dict())
                            batch, state = draw_batch(state, self.space, 1)
                            points.extend(batch)
                        batches.append((points, states, [0] * size, 1))
                points, states, offsets, size = batches.pop(0)
                left = self._budget_left()
                if left is not None:
                    points = points[:left]
                base = len(self.table)
                tasks = [self._task(base + i, p) for i, p in enumerate(points)]
                if executor is not None:
                    results = list(executor.map(execute_rollout, tasks))
                else:
                    results = [execute_rollout(t) for t in tasks]
                for result, point, row_state, offset in zip(results, points, states, offsets):
                    row = self._apply(result, row_state, offset, size, point)
                    state = observe(state, self._feedback(row))
                if self._out_of_time():
                    break
        finally:
            if executor is not None:
                executor.shutdown()
        return self.table

    def safe_run(self) -> ErrorTable:
        """
        Run the campaign with completion logging; errors are logged and re-raised
        """
        self.start_time = time.monotonic()
        try:
            with self.profiler.profile_operation("total_campaign"):
                table = self.run()
            table.update_record(
                finished=datetime.now(timezone.utc).isoformat(),
                performance=self.profiler.get_performance_report() if self.profiler.enabled else None,
            )
            self._log_completion_stats()
            return table
        except Exception as e:
            self.errors.append(str(e))
            self.logger.error(f"Error during campaign: {e}", exc_info=not isinstance(e, ConfigError))
            raise

    def _log_completion_stats(self):
        duration = time.monotonic() - self.start_time if self.start_time else 0
        if self.errors:
            self.log_warning(f"Completed with {len(self.errors)} errors: {self.errors[:3]}...")
        if self.warnings:
            self.log_info(f"Completed with {len(self.warnings)} warnings")
        if self.stats:
            stats_msg = ", ".join(f"{k}: {v}" for k, v in sorted(self.stats.items()))
            self.log_info(f"Statistics - {stats_msg}")
        self.log_info(f"Campaign completed in {duration:.2f}s")

    @property
    def found_violation(self) -> bool:
        return self.table is not None and any(row.violated for row in self.table.rows)


def falsify(config: CampaignConfig) -> ErrorTable:
    """Run a whole campaign and return its error table"""
    return Campaign(config).safe_run()


@dataclass
class ReplayOutcome:
    row: ErrorTableRow
    result: RolloutResult

    @property
    def feasible(self) -> bool:
        return self.result.feasible


def replay(directory: str, index: int) -> ReplayOutcome:
    """
    Re-simulate one stored row and check it reproduces the stored robustness

    Raises:
        RowNotFound: no such row
        HashMismatch: the scenario file changed since the campaign ran
        ReplayMismatch: the replayed outcome differs from the stored one
    """
    table = ErrorTable.open(directory)
    row = table.row(index)
    record = table.record
    current = HashGenerator.file_hash(record.scenario_path) if Path(record.scenario_path).exists() else None
    if current != record.scenario_hash:
        raise HashMismatch(f"{record.scenario_path} changed since campaign {record.campaign_id} ran")
    program = parse_file(record.scenario_path)
    task = RolloutTask(
        index=row.index,
        program=program,
        map_path=record.map_path,
        point=row.point,
        rollout_seed=row.rollout_seed,
        dt=record.dt,
        horizon=record.horizon,
        sut=record.sut,
        simulation=SimulationConfig(**record.simulation),
        autopilot=AutopilotConfig(**record.autopilot),
        monitors=MonitorConfig(**record.thresholds),
    )
    result = execute_rollout(task)
    if result.feasible != row.feasible:
        raise ReplayMismatch(f"row {index}: feasibility changed on replay")
    if result.feasible and result.rho != row.rho:
        raise ReplayMismatch(f"row {index}: stored rho {row.rho} but replay gave {result.rho}")
    logger.info(f"Row {index} replayed identically")
    return ReplayOutcome(row, result)
