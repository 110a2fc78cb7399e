"""
Summarize campaigns into a markdown table plus scatter exports
"""

from scenfuzz.config import ScenfuzzConfigManager
from scenfuzz.exceptions import ConfigError, ErrorTableError, UnknownDimension
from scenfuzz.management.base import EXIT_USAGE, ScenfuzzCommand
from scenfuzz.report import build_report


class Command(ScenfuzzCommand):
    help = "Write report.md (samples and violations per scenario and sampler) and scatter.csv files"

    def add_arguments(self, parser):
        parser.add_argument("directories", nargs="*", help="Campaign directories")
        parser.add_argument("--out", type=str, help="Report path (default: <first dir>/report.md)")
        parser.add_argument(
            "--coverage",
            action="store_true",
            help="Compute epsilon-coverage (otherwise the column shows --)",
        )
        parser.add_argument(
            "--raw-units",
            action="store_true",
            help="Measure coverage in raw parameter units instead of the unit cube",
        )
        parser.add_argument(
            "--dims",
            type=str,
            help="Comma-separated dimensions to export to scatter.csv (default: all continuous)",
        )
        self.add_logging_arguments(parser)

    def handle(self, *args, **options):
        logger = self.setup_logging(options["log_file"], options["log_level"])
        directories = options["directories"]
        if not directories:
            self.fail("report needs at least one campaign directory", EXIT_USAGE)
        dims = [d.strip() for d in options["dims"].split(",")] if options.get("dims") else []

        try:
            path = build_report(
                directories,
                out=options.get("out"),
                coverage=ScenfuzzConfigManager().get_coverage_config(),
                compute_coverage=options["coverage"],
                raw_units=options["raw_units"],
                scatter_dims=dims,
            )
        except (ConfigError, ErrorTableError, UnknownDimension) as e:
            logger.error(f"Report failed: {e}")
            self.fail(str(e), EXIT_USAGE)
        self.stdout.write(self.style.SUCCESS(f"Report written to {path}"))
