"""
Markdown campaign report

One row per (scenario, sampler) campaign in the column order
Total Samples / Progress / Distance / TTC / Lane / eps, grouped by scenario.
"""

import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

from .config import CoverageConfig
from .error_table import REPORT_FILE, ErrorTable, ReportStats
from .exceptions import ConfigError

logger = logging.getLogger(__name__)

HEADER = ("Scenario", "Sampler", "Total Samples", "Progress", "Distance", "TTC", "Lane", "ε")
SAMPLER_ORDER = {"halton": 0, "mab": 1, "random": 2}
SAMPLER_LABELS = {"halton": "Halton", "mab": "MAB", "random": "Random"}
MISSING = "--"


def format_epsilon(epsilon: Optional[float]) -> str:
    return MISSING if epsilon is None else f"{epsilon:.3f}"


def _order(stats: ReportStats):
    return SAMPLER_ORDER.get(stats.sampler, len(SAMPLER_ORDER)), stats.sampler


def render_table(stats: Iterable[ReportStats]) -> str:
    """Markdown table; the scenario name is printed on its group's first row only"""
    grouped: Dict[str, List[ReportStats]] = {}
    for item in stats:
        grouped.setdefault(item.scenario, []).append(item)

    lines = [
        "| " + " | ".join(HEADER) + " |",
        "|" + "|".join("---" for _ in HEADER) + "|",
    ]
    for scenario, items in grouped.items():
        for position, item in enumerate(sorted(items, key=_order)):
            cells = [
                scenario if position == 0 else "",
                SAMPLER_LABELS.get(item.sampler, item.sampler),
                str(item.total),
                *(str(item.counts[m]) for m in ("progress", "distance", "ttc", "lane")),
                format_epsilon(item.epsilon),
            ]
            lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def render_notes(stats: Sequence[ReportStats], raw_units: bool) -> str:
    infeasible = sum(s.infeasible for s in stats)
    units = "raw parameter units" if raw_units else "unit-cube coordinates"
    return (
        "\n"
        f"Total Samples counts every sampled point, including {infeasible} infeasible "
        "sample(s) whose requirements failed; those have no robustness values and count "
        "toward no violation column.\n"
        f"ε is computed over feasible samples in {units}; {MISSING} marks campaigns "
        "without continuous dimensions or without feasible samples.\n"
    )


def build_report(
    directories: Sequence[Union[str, Path]],
    out: Optional[Union[str, Path]] = None,
    coverage: Optional[CoverageConfig] = None,
    compute_coverage: bool = True,
    raw_units: bool = False,
    scatter_dims: Sequence[str] = (),
) -> Path:
    """
    Summarize campaigns into report.md and write each campaign's scatter.csv

    Raises:
        ConfigError: no campaign directories given
        ErrorTableError: a directory is not a readable campaign
    """
    if not directories:
        raise ConfigError("report needs at least one campaign directory")
    coverage = coverage or CoverageConfig()
    stats: List[ReportStats] = []
    for directory in directories:
        table = ErrorTable.open(directory)
        summary = table.summarize(
            coverage.tolerance,
            raw_units=raw_units,
            coverage=compute_coverage,
            budget=int(coverage.mesh_budget),
        )
        stats.append(summary)
        scatter = table.export_scatter(scatter_dims)
        logger.info(f"{directory}: {summary.total} samples, scatter written to {scatter}")

    text = "# Falsification report\n\n" + render_table(stats) + render_notes(stats, raw_units)
    path = Path(out) if out else Path(directories[0]) / REPORT_FILE
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path
