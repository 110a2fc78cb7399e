"""
scenfuzz Configuration Management
Dataclass views over the SCENFUZZ_CONFIG Django setting and campaign YAML files
"""

import logging
import math
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml
from django.conf import settings
from django.core.exceptions import ImproperlyConfigured

from .exceptions import ConfigError
from .settings import DEFAULT_SCENFUZZ_CONFIG
from .validators import CommonValidationRules, RuleValidator

logger = logging.getLogger(__name__)

WORKERS_ENV_VAR = "SCENFUZZ_WORKERS"
SAMPLER_KINDS = ("random", "halton", "mab")


@dataclass(frozen=True)
class SamplerConfig:
    """Sampler choice and hyperparameters"""

    kind: str = "halton"
    bins: int = 5
    exploration: float = 1.0
    batch_size: int = 1


@dataclass(frozen=True)
class BudgetConfig:
    max_samples: Optional[int] = None
    max_seconds: Optional[float] = 1800.0


@dataclass(frozen=True)
class SimulationConfig:
    """Kinematic envelope and rollout plumbing"""

    dt: float = 0.1
    horizon: float = 30.0
    v_max: float = 30.0
    accel_min: float = -8.0
    accel_max: float = 4.0
    max_yaw_rate: float = 1.2
    pedestrian_v_max: float = 3.0
    spawn_clearance: float = 1.0
    sut_deadline: float = 1.0


@dataclass(frozen=True)
class AutopilotConfig:
    """Gains of the baseline autopilot"""

    cruise_speed: float = 10.0
    k_speed: float = 1.0
    k_rel_speed: float = 0.8
    k_gap: float = 0.3
    time_gap: float = 1.2
    standstill_gap: float = 7.0
    stop_line_gap: float = 1.0
    lookahead_min: float = 4.0
    lookahead_gain: float = 0.3
    yield_to_pedestrians: bool = False
    stop_at_stop_lines: bool = True


@dataclass(frozen=True)
class MonitorConfig:
    """Safety metric thresholds"""

    distance: float = 5.0
    ttc: float = 2.0
    progress: float = 11.0
    lane: float = 0.5
    cap: float = 100.0
    include_pedestrians: bool = False


@dataclass(frozen=True)
class CoverageConfig:
    tolerance: float = 0.05
    mesh_budget: int = 10_000_000


@dataclass(frozen=True)
class StorageConfig:
    keep_all_traces: bool = False


@dataclass(frozen=True)
class LoggingConfig:
    """Logging configuration from Django settings"""

    level: str = "INFO"
    format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    file_path: Optional[str] = None
    console_output: bool = True


@dataclass(frozen=True)
class MonitoringConfig:
    enable_profiling: bool = True


@dataclass(frozen=True)
class CampaignConfig:
    """Everything a falsification campaign needs"""

    scenario: str
    out: str
    map: Optional[str] = None
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    budget: BudgetConfig = field(default_factory=BudgetConfig)
    seed: int = 0
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    autopilot: AutopilotConfig = field(default_factory=AutopilotConfig)
    monitors: MonitorConfig = field(default_factory=MonitorConfig)
    storage: StorageConfig = field(default_factory=StorageConfig)
    sut: str = "builtin"
    workers: int = 1
    resume: bool = False
    enable_profiling: bool = True

    @property
    def dt(self) -> float:
        return self.simulation.dt

    @property
    def horizon(self) -> float:
        return self.simulation.horizon

    def validate(self) -> "CampaignConfig":
        """
        Check the campaign invariants

        Returns:
            The config, with workers forced to 1 for serial MAB campaigns

        Raises:
            ConfigError: on the first group of failed checks
        """
        rules = CommonValidationRules
        validator = (
            RuleValidator()
            .add_rule("kind", rules.choices_validator(list(SAMPLER_KINDS)), message="unknown sampler")
            .add_rule("bins", rules.integer_range(1), message="must be an integer >= 1")
            .add_rule("exploration", rules.numeric_range(0.0), message="must be >= 0")
            .add_rule("batch_size", rules.integer_range(1), message="must be an integer >= 1")
            .add_rule(
                "max_samples",
                rules.optional(rules.integer_range(1)),
                message="must be an integer >= 1",
            )
            .add_rule(
                "max_seconds",
                rules.optional(rules.numeric_range(0.0, exclusive_min=True)),
                message="must be > 0",
            )
            .add_rule("dt", rules.numeric_range(0.0, exclusive_min=True), message="must be > 0")
            .add_rule("workers", rules.integer_range(1), message="must be an integer >= 1")
        )
        for name in ("distance", "ttc", "progress", "lane", "cap"):
            validator.add_rule(name, rules.finite, message="threshold must be finite")

        record = {
            **asdict(self.sampler),
            **asdict(self.budget),
            **asdict(self.monitors),
            "dt": self.simulation.dt,
            "workers": self.workers,
        }
        issues = validator.issues(record)
        if self.budget.max_samples is None and self.budget.max_seconds is None:
            issues.append("at least one budget bound (max samples or max seconds) is required")
        if not issues and self.simulation.horizon < self.simulation.dt:
            issues.append("horizon must be >= dt")
        if not self.scenario:
            issues.append("scenario path is required")
        if issues:
            raise ConfigError("; ".join(issues))

        if self.sampler.kind == "mab" and self.sampler.batch_size == 1 and self.workers != 1:
            logger.warning("MAB with batch size 1 runs serially; forcing workers=1")
            return replace(self, workers=1)
        return self


def _section(raw: Dict[str, Any], cls, keymap: Optional[Dict[str, str]] = None):
    """Build a config dataclass from an UPPERCASE settings section"""
    keymap = keymap or {}
    kwargs = {}
    for f in fields(cls):
        key = keymap.get(f.name, f.name.upper())
        if key in raw:
            kwargs[f.name] = raw[key]
    return cls(**kwargs)


class ScenfuzzConfigManager:
    """Django-native configuration manager that uses Django settings"""

    def __init__(self, overrides: Optional[Dict[str, Any]] = None):
        user = getattr(settings, "SCENFUZZ_CONFIG", {}) if settings.configured else {}
        if not isinstance(user, dict):
            raise ImproperlyConfigured("SCENFUZZ_CONFIG must be a dict")
        self._settings = _merge(DEFAULT_SCENFUZZ_CONFIG, user)
        if overrides:
            self._settings = _merge(self._settings, overrides)
        self._validate_django_config()

    def _validate_django_config(self) -> None:
        for section in ("SAMPLER", "BUDGET", "SIMULATION", "AUTOPILOT", "MONITORS", "COVERAGE"):
            if not isinstance(self._settings.get(section), dict):
                raise ImproperlyConfigured(f"SCENFUZZ_CONFIG['{section}'] must be a dict")

    def get_sampler_config(self) -> SamplerConfig:
        return _section(
            self._settings["SAMPLER"],
            SamplerConfig,
            {"bins": "MAB_BINS", "exploration": "MAB_EXPLORATION"},
        )

    def get_budget_config(self) -> BudgetConfig:
        return _section(self._settings["BUDGET"], BudgetConfig)

    def get_simulation_config(self) -> SimulationConfig:
        return _section(self._settings["SIMULATION"], SimulationConfig)

    def get_autopilot_config(self) -> AutopilotConfig:
        return _section(self._settings["AUTOPILOT"], AutopilotConfig)

    def get_monitor_config(self) -> MonitorConfig:
        return _section(self._settings["MONITORS"], MonitorConfig)

    def get_coverage_config(self) -> CoverageConfig:
        return _section(self._settings["COVERAGE"], CoverageConfig)

    def get_storage_config(self) -> StorageConfig:
        return _section(self._settings.get("STORAGE", {}), StorageConfig)

    def get_logging_config(self) -> LoggingConfig:
        return _section(self._settings.get("LOGGING", {}), LoggingConfig)

    def get_monitoring_config(self) -> MonitoringConfig:
        return _section(self._settings.get("MONITORING", {}), MonitoringConfig)

    @property
    def project_name(self) -> str:
        return self._settings.get("PROJECT_NAME", "scenfuzz")

    @property
    def workers(self) -> int:
        """Worker count, with the SCENFUZZ_WORKERS env var taking precedence"""
        env = os.environ.get(WORKERS_ENV_VAR)
        if env:
            try:
                return int(env)
            except ValueError:
                raise ConfigError(f"{WORKERS_ENV_VAR} must be an integer, got {env!r}")
        return int(self._settings.get("WORKERS", 1))

    def get_scenario_directories(self) -> List[str]:
        return list(self._settings.get("SCENARIO_DIRECTORIES", []))

    def build_campaign_config(
        self,
        options: Dict[str, Any],
        config_file: Optional[str] = None,
    ) -> CampaignConfig:
        """
        Merge CLI options over a YAML campaign file over Django settings

        Args:
            options: CLI values; ``None`` means "not given"
            config_file: Optional YAML campaign file

        Returns:
            A validated CampaignConfig
        """
        file_values = load_campaign_file(config_file) if config_file else {}

        def pick(key, default=None):
            value = options.get(key)
            if value is not None:
                return value
            if key in file_values:
                return file_values[key]
            return default

        sampler = self.get_sampler_config()
        sampler = replace(
            sampler,
            kind=pick("sampler", sampler.kind),
            bins=pick("bins", sampler.bins),
            exploration=pick("exploration", sampler.exploration),
            batch_size=pick("batch_size", sampler.batch_size),
        )
        budget = self.get_budget_config()
        max_samples = pick("max_samples", budget.max_samples)
        max_seconds = pick("max_seconds", budget.max_seconds)
        budget = BudgetConfig(max_samples=max_samples, max_seconds=max_seconds)

        simulation = self.get_simulation_config()
        simulation = replace(
            simulation,
            dt=pick("dt", simulation.dt),
            horizon=pick("horizon", simulation.horizon),
        )
        autopilot = self._apply_mapping(self.get_autopilot_config(), file_values.get("autopilot"))
        monitors = self._apply_mapping(self.get_monitor_config(), file_values.get("monitors"))
        storage = StorageConfig(
            keep_all_traces=bool(pick("keep_all_traces", self.get_storage_config().keep_all_traces))
        )

        workers = pick("workers", int(self._settings.get("WORKERS", 1)))
        if os.environ.get(WORKERS_ENV_VAR):
            workers = self.workers

        scenario = pick("scenario")
        out = pick("out")
        if not scenario:
            raise ConfigError("--scenario is required")
        if not out:
            raise ConfigError("--out is required")

        cfg = CampaignConfig(
            scenario=str(scenario),
            out=str(out),
            map=pick("map"),
            sampler=sampler,
            budget=budget,
            seed=int(pick("seed", 0)),
            simulation=simulation,
            autopilot=autopilot,
            monitors=monitors,
            storage=storage,
            sut=str(pick("sut", "builtin")),
            workers=workers,
            resume=bool(options.get("resume", False)),
            enable_profiling=self.get_monitoring_config().enable_profiling,
        )
        return cfg.validate()

    @staticmethod
    def _apply_mapping(base, values: Optional[Dict[str, Any]]):
        if not values:
            return base
        known = {f.name for f in fields(base)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(
                f"unknown {type(base).__name__} keys: {', '.join(sorted(unknown))}"
            )
        return replace(base, **values)

    def validate_config(self) -> List[str]:
        """Validate configuration and return any issues"""
        issues = []
        sampler = self.get_sampler_config()
        if sampler.kind not in SAMPLER_KINDS:
            issues.append(f"Unknown sampler kind '{sampler.kind}'")
        sim = self.get_simulation_config()
        if sim.dt <= 0:
            issues.append("SIMULATION.DT must be > 0")
        if sim.accel_min >= 0 or sim.accel_max <= 0:
            issues.append("SIMULATION acceleration envelope must straddle 0")
        coverage = self.get_coverage_config()
        if coverage.tolerance <= 0:
            issues.append("COVERAGE.TOLERANCE must be > 0")
        for directory in self.get_scenario_directories():
            if not os.path.isdir(directory):
                issues.append(f"Scenario directory '{directory}' does not exist")
        return issues


def _merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_campaign_file(path: str) -> Dict[str, Any]:
    """Read a YAML campaign file into a flat option dict"""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read campaign file {path}: {e}")
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"invalid YAML in {path}: {e}")
    if not isinstance(data, dict):
        raise ConfigError(f"campaign file {path} must contain a mapping")
    base = Path(path).resolve().parent
    for key in ("scenario", "map", "out"):
        value = data.get(key)
        if isinstance(value, str) and not os.path.isabs(value):
            data[key] = str(base / value)
    return data
