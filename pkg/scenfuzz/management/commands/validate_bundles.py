"""
Validate the bundled scenario corpus
"""

from scenfuzz.bundles import ScenarioBundle, validate_bundle
from scenfuzz.config import ScenfuzzConfigManager
from scenfuzz.discovery import discover_bundles
from scenfuzz.management.base import EXIT_USAGE, ScenfuzzCommand


class Command(ScenfuzzCommand):
    help = "Parse, instantiate and smoke-run every bundled scenario"

    def add_arguments(self, parser):
        parser.add_argument(
            "--only",
            type=str,
            help="Comma-separated list of bundle ids to check (e.g., 02,06)",
        )
        self.add_logging_arguments(parser)

    def handle(self, *args, **options):
        logger = self.setup_logging(options["log_file"], options["log_level"])
        config_manager = ScenfuzzConfigManager()
        entries = discover_bundles(config_manager.get_scenario_directories())
        if options.get("only"):
            keys = {key.strip() for key in options["only"].split(",")}
            entries = [e for e in entries if str(e["id"]) in keys]
        if not entries:
            self.fail("No bundles found", EXIT_USAGE)

        failed = 0
        for entry in entries:
            bundle = ScenarioBundle.from_entry(entry)
            diagnostics = validate_bundle(
                bundle,
                simulation=config_manager.get_simulation_config(),
                autopilot=config_manager.get_autopilot_config(),
                monitors=config_manager.get_monitor_config(),
            )
            if diagnostics:
                failed += 1
                for diagnostic in diagnostics:
                    self.stderr.write(self.style.ERROR(str(diagnostic)))
            else:
                self.stdout.write(self.style.SUCCESS(f"{bundle.id}: ok"))

        summary = f"{len(entries) - failed} of {len(entries)} bundles valid"
        logger.info(summary)
        if failed:
            self.fail(summary, EXIT_USAGE)
        self.stdout.write(self.style.SUCCESS(summary))
