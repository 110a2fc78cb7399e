"""
Run a falsification campaign against a scenario program
"""

from django.core.exceptions import ImproperlyConfigured

from scenfuzz.config import SAMPLER_KINDS, ScenfuzzConfigManager
from scenfuzz.engine import Campaign
from scenfuzz.exceptions import ConfigError, MapError, ScenarioParseError, SutUnreachable
from scenfuzz.management.base import EXIT_NO_VIOLATION, EXIT_USAGE, ScenfuzzCommand
from scenfuzz.monitors import count_violations


class Command(ScenfuzzCommand):
    help = "Search a scenario's feature space for parameters that make the SUT violate a safety metric"

    def add_arguments(self, parser):
        parser.add_argument("--scenario", type=str, help="Scenario program (.scn)")
        parser.add_argument("--map", type=str, help="Map file; defaults to the scenario's map statement")
        parser.add_argument("--config", type=str, help="YAML campaign file")
        parser.add_argument("--sampler", choices=list(SAMPLER_KINDS), help="Sampler kind")
        parser.add_argument("--bins", type=int, help="MAB bins per continuous dimension")
        parser.add_argument("--exploration", type=float, help="MAB exploration constant")
        parser.add_argument("--batch-size", type=int, help="MAB batch size")
        parser.add_argument("--seed", type=int, help="Campaign seed")
        parser.add_argument("--max-samples", type=int, help="Sample budget")
        parser.add_argument("--max-seconds", type=float, help="Wall-clock budget in seconds")
        parser.add_argument("--dt", type=float, help="Simulation step in seconds")
        parser.add_argument("--horizon", type=float, help="Rollout horizon in seconds")
        parser.add_argument(
            "--sut",
            type=str,
            help="builtin, null, tcp://host:port or stdio:<command> (default: builtin)",
        )
        parser.add_argument("--workers", type=int, help="Parallel rollout workers")
        parser.add_argument("--out", type=str, help="Campaign directory")
        parser.add_argument(
            "--keep-all-traces",
            action="store_true",
            default=None,
            help="Store traces of non-violating rows too",
        )
        parser.add_argument(
            "--resume",
            action="store_true",
            help="Continue the campaign already stored in --out",
        )
        self.add_logging_arguments(parser)

    def handle(self, *args, **options):
        logger = self.setup_logging(options["log_file"], options["log_level"])

        try:
            cfg = ScenfuzzConfigManager().build_campaign_config(options, options.get("config"))
            campaign = Campaign(cfg)
            campaign.prepare()
        except (ConfigError, ScenarioParseError, MapError, ImproperlyConfigured) as e:
            logger.error(f"Configuration error: {e}")
            self.fail(str(e), EXIT_USAGE)
        except SutUnreachable as e:
            self.fail(f"SUT unreachable: {e}", EXIT_USAGE)

        try:
            table = campaign.safe_run()
        except SutUnreachable as e:
            self.fail(f"SUT unreachable: {e}", EXIT_USAGE)
        counts = count_violations(row.rho for row in table.rows if row.feasible)
        infeasible = sum(1 for row in table.rows if not row.feasible)
        listing = ", ".join(f"{metric}={count}" for metric, count in counts.items())
        message = (
            f"{len(table)} samples ({infeasible} infeasible); violations: {listing}; "
            f"table in {cfg.out}"
        )
        if not campaign.found_violation:
            self.stdout.write(self.style.WARNING(message))
            self.fail("no violation found", EXIT_NO_VIOLATION)
        self.stdout.write(self.style.SUCCESS(message))
