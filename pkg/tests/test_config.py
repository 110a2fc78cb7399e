import math

import pytest
from django.core.exceptions import ImproperlyConfigured

from scenfuzz.config import (
    BudgetConfig,
    CampaignConfig,
    MonitorConfig,
    SamplerConfig,
    ScenfuzzConfigManager,
    SimulationConfig,
    load_campaign_file,
)
from scenfuzz.exceptions import ConfigError


@pytest.fixture
def manager():
    return ScenfuzzConfigManager()


@pytest.fixture
def campaign_file(tmp_path):
    def _write(text):
        path = tmp_path / "campaign.yaml"
        path.write_text(text, encoding="utf-8")
        return path

    return _write


def options(**values):
    base = dict.fromkeys(("sampler", "seed", "max_samples", "max_seconds", "workers", "dt", "horizon"))
    base.update(values)
    return base


class TestManager:
    def test_test_settings_are_merged_over_defaults(self, manager):
        assert manager.get_budget_config() == BudgetConfig(max_samples=5, max_seconds=None)
        assert manager.get_simulation_config() == SimulationConfig(horizon=10.0)
        assert manager.get_sampler_config() == SamplerConfig()
        assert manager.get_monitoring_config().enable_profiling

    def test_overrides(self):
        sampler = ScenfuzzConfigManager({"SAMPLER": {"KIND": "mab", "MAB_BINS": 3}}).get_sampler_config()
        assert sampler == SamplerConfig(kind="mab", bins=3)

    def test_overrides_merge_into_sections(self):
        simulation = ScenfuzzConfigManager({"SIMULATION": {"DT": 0.05}}).get_simulation_config()
        assert simulation == SimulationConfig(dt=0.05, horizon=10.0)

    def test_section_must_be_a_dict(self):
        with pytest.raises(ImproperlyConfigured):
            ScenfuzzConfigManager({"SAMPLER": 5})

    def test_workers_env_var(self, manager, monkeypatch):
        monkeypatch.delenv("SCENFUZZ_WORKERS", raising=False)
        assert manager.workers == 1
        monkeypatch.setenv("SCENFUZZ_WORKERS", "3")
        assert manager.workers == 3
        monkeypatch.setenv("SCENFUZZ_WORKERS", "lots")
        with pytest.raises(ConfigError):
            manager.workers

    def test_validate_config(self, manager, tmp_path):
        assert manager.validate_config() == []
        broken = ScenfuzzConfigManager(
            {"SIMULATION": {"DT": 0}, "SCENARIO_DIRECTORIES": [str(tmp_path / "missing")]}
        )
        issues = broken.validate_config()
        assert "SIMULATION.DT must be > 0" in issues
        assert any("does not exist" in issue for issue in issues)


class TestBuildCampaignConfig:
    def test_cli_over_file_over_settings(self, manager, campaign_file, tmp_path):
        path = campaign_file("scenario: s.scn\nout: runs/a\nsampler: random\nseed: 3\nmax_samples: 9\n")
        cfg = manager.build_campaign_config(options(seed=7), str(path))
        assert cfg.seed == 7
        assert cfg.sampler.kind == "random"
        assert cfg.budget.max_samples == 9
        assert cfg.simulation.horizon == 10.0
        assert cfg.scenario == str(tmp_path.resolve() / "s.scn")
        assert cfg.out == str(tmp_path.resolve() / "runs" / "a")

    def test_settings_fill_the_gaps(self, manager):
        cfg = manager.build_campaign_config(options(scenario="s.scn", out="o"))
        assert cfg.budget == BudgetConfig(max_samples=5, max_seconds=None)
        assert cfg.sut == "builtin"
        assert cfg.sampler.kind == "halton"

    def test_scenario_and_out_are_required(self, manager):
        with pytest.raises(ConfigError, match="--scenario"):
            manager.build_campaign_config(options(out="o"))
        with pytest.raises(ConfigError, match="--out"):
            manager.build_campaign_config(options(scenario="s.scn"))

    def test_autopilot_and_monitor_sections(self, manager, campaign_file):
        path = campaign_file("autopilot:\n  cruise_speed: 8\nmonitors:\n  ttc: 3\n")
        cfg = manager.build_campaign_config(options(scenario="s.scn", out="o"), str(path))
        assert cfg.autopilot.cruise_speed == 8
        assert cfg.monitors.ttc == 3

    def test_unknown_autopilot_key(self, manager, campaign_file):
        path = campaign_file("autopilot:\n  turbo: true\n")
        with pytest.raises(ConfigError, match="turbo"):
            manager.build_campaign_config(options(scenario="s.scn", out="o"), str(path))

    def test_env_workers(self, manager, monkeypatch):
        monkeypatch.setenv("SCENFUZZ_WORKERS", "4")
        assert manager.build_campaign_config(options(scenario="s.scn", out="o")).workers == 4


class TestCampaignFile:
    def test_missing(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_campaign_file(str(tmp_path / "nope.yaml"))

    def test_invalid_yaml(self, campaign_file):
        with pytest.raises(ConfigError, match="invalid YAML"):
            load_campaign_file(str(campaign_file("a: [1, 2\n")))

    def test_not_a_mapping(self, campaign_file):
        with pytest.raises(ConfigError, match="mapping"):
            load_campaign_file(str(campaign_file("- 1\n- 2\n")))

    def test_absolute_paths_kept(self, campaign_file):
        assert load_campaign_file(str(campaign_file("map: /maps/x.map\n")))["map"] == "/maps/x.map"


class TestValidate:
    def config(self, **changes):
        return CampaignConfig(scenario="s.scn", out="o", **changes)

    def test_defaults_are_valid(self):
        assert self.config().validate() == self.config()

    def test_needs_a_budget_bound(self):
        with pytest.raises(ConfigError, match="budget bound"):
            self.config(budget=BudgetConfig(max_samples=None, max_seconds=None)).validate()

    def test_horizon_shorter_than_dt(self):
        with pytest.raises(ConfigError, match="horizon"):
            self.config(simulation=SimulationConfig(dt=0.5, horizon=0.2)).validate()

    @pytest.mark.parametrize(
        "changes",
        [
            {"sampler": SamplerConfig(kind="sobol")},
            {"sampler": SamplerConfig(bins=0)},
            {"sampler": SamplerConfig(exploration=-1.0)},
            {"budget": BudgetConfig(max_samples=0)},
            {"budget": BudgetConfig(max_seconds=0)},
            {"simulation": SimulationConfig(dt=0)},
            {"workers": 0},
            {"monitors": MonitorConfig(ttc=math.inf)},
        ],
    )
    def test_rejected(self, changes):
        with pytest.raises(ConfigError):
            self.config(**changes).validate()

    def test_serial_mab_forces_one_worker(self):
        assert self.config(sampler=SamplerConfig(kind="mab"), workers=4).validate().workers == 1
        batched = self.config(sampler=SamplerConfig(kind="mab", batch_size=2), workers=4)
        assert batched.validate().workers == 4
