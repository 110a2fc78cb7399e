"""
Re-simulate one error table row and check it reproduces
"""

import json

from scenfuzz.engine import replay
from scenfuzz.exceptions import ErrorTableError, ReplayMismatch, ScenarioParseError
from scenfuzz.management.base import EXIT_USAGE, ScenfuzzCommand


class Command(ScenfuzzCommand):
    help = "Replay a stored sample deterministically and compare its robustness vector"

    def add_arguments(self, parser):
        parser.add_argument("directory", type=str, help="Campaign directory")
        parser.add_argument("row", type=int, help="Row index")
        parser.add_argument("--trace-out", type=str, help="Write the replayed trace to this JSON-lines file")
        self.add_logging_arguments(parser)

    def handle(self, *args, **options):
        logger = self.setup_logging(options["log_file"], options["log_level"])
        directory, index = options["directory"], options["row"]

        try:
            outcome = replay(directory, index)
        except (ErrorTableError, ReplayMismatch, ScenarioParseError) as e:
            logger.error(f"Replay of row {index} failed: {e}")
            self.fail(f"{type(e).__name__}: {e}", EXIT_USAGE)

        if not outcome.feasible:
            self.stdout.write(f"InfeasibleSample: {outcome.result.reason}")
            return

        result = outcome.result
        if options.get("trace_out"):
            result.trace.write(options["trace_out"])
            self.stdout.write(f"Trace written to {options['trace_out']}")
        self.stdout.write(json.dumps({"row": index, "termination": result.termination, "rho": result.rho.to_dict()}))
        self.stdout.write(self.style.SUCCESS(f"Row {index} replayed with identical robustness"))
