"""
Error table: the persistent record of a falsification campaign

Layout of a campaign directory:

    campaign.json        CampaignRecord
    rows.jsonl           one ErrorTableRow per line, appended and fsync'd
    traces/NNNN.jsonl    one WorldState per line
    report.md, scatter.csv
"""

import errno
import json
import logging
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import pandas as pd

from .coverage import DEFAULT_MESH_BUDGET, CoverageQuery, epsilon_coverage
from .exceptions import (
    EmptySampleSet,
    ErrorTableError,
    IndexGap,
    MeshTooFine,
    RowNotFound,
    StorageFull,
)
from .features import FeatureSpace, SamplePoint
from .helpers import dumps_line
from .monitors import METRICS, RhoVector
from .simulator import Trace

logger = logging.getLogger(__name__)

CAMPAIGN_FILE = "campaign.json"
ROWS_FILE = "rows.jsonl"
TRACES_DIR = "traces"
REPORT_FILE = "report.md"
SCATTER_FILE = "scatter.csv"


@dataclass
class CampaignRecord:
    campaign_id: str
    scenario_path: str
    scenario_hash: str
    scenario_name: str
    map_path: str
    sampler: Dict[str, Any]
    seed: int
    dt: float
    horizon: float
    thresholds: Dict[str, Any]
    space: FeatureSpace
    simulation: Dict[str, Any] = field(default_factory=dict)
    autopilot: Dict[str, Any] = field(default_factory=dict)
    sut: str = "builtin"
    keep_all_traces: bool = False
    started: Optional[str] = None
    finished: Optional[str] = None
    performance: Optional[Dict[str, Any]] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "campaign_id": self.campaign_id,
            "scenario_path": self.scenario_path,
            "scenario_hash": self.scenario_hash,
            "scenario_name": self.scenario_name,
            "map_path": self.map_path,
            "sampler": self.sampler,
            "seed": self.seed,
            "dt": self.dt,
            "horizon": self.horizon,
            "thresholds": self.thresholds,
            "space": self.space.to_dict(),
            "simulation": self.simulation,
            "autopilot": self.autopilot,
            "sut": self.sut,
            "keep_all_traces": self.keep_all_traces,
            "started": self.started,
            "finished": self.finished,
            "performance": self.performance,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CampaignRecord":
        data = dict(data)
        data["space"] = FeatureSpace.from_dict(data.get("space", {}))
        return cls(**data)


@dataclass
class ErrorTableRow:
    index: int
    point: SamplePoint
    feasible: bool
    values: Dict[str, Any] = field(default_factory=dict)
    rho: Optional[RhoVector] = None
    termination: Optional[str] = None
    rollout_seed: int = 0
    trace: Optional[str] = None
    reason: Optional[str] = None
    sampler_state: Dict[str, Any] = field(default_factory=dict)
    batch_offset: int = 0
    batch_size: int = 1

    def __post_init__(self):
        if self.feasible != (self.rho is not None):
            raise ErrorTableError(f"row {self.index}: rho must be present iff the sample is feasible")

    @property
    def violated(self) -> bool:
        return self.rho is not None and self.rho.violated

    def to_dict(self) -> Dict[str, Any]:
        return {
            "index": self.index,
            "point": self.point.to_dict(),
            "values": self.values,
            "feasible": self.feasible,
            "rho": self.rho.to_dict() if self.rho else None,
            "violations": dict(zip(METRICS, self.rho.flags())) if self.rho else None,
            "termination": self.termination,
            "rollout_seed": self.rollout_seed,
            "trace": self.trace,
            "reason": self.reason,
            "sampler_state": self.sampler_state,
            "batch_offset": self.batch_offset,
            "batch_size": self.batch_size,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ErrorTableRow":
        return cls(
            index=int(data["index"]),
            point=SamplePoint.from_dict(data["point"]),
            feasible=bool(data["feasible"]),
            values=data.get("values", {}),
            rho=RhoVector.from_dict(data["rho"]) if data.get("rho") else None,
            termination=data.get("termination"),
            rollout_seed=int(data.get("rollout_seed", 0)),
            trace=data.get("trace"),
            reason=data.get("reason"),
            sampler_state=data.get("sampler_state", {}),
            batch_offset=int(data.get("batch_offset", 0)),
            batch_size=int(data.get("batch_size", 1)),
        )


@dataclass(frozen=True)
class ReportStats:
    scenario: str
    sampler: str
    total: int
    infeasible: int
    counts: Dict[str, int]
    epsilon: Optional[float] = None
    continuous_dims: int = 0

    def row(self) -> List[Any]:
        return [self.total] + [self.counts[m] for m in METRICS] + [self.epsilon]


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as f:
        f.write(text)
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)


class ErrorTable:
    """Single-writer, append-only table of campaign rows"""

    def __init__(self, directory: Union[str, Path], record: CampaignRecord, rows: List[ErrorTableRow]):
        self.directory = Path(directory)
        self.record = record
        self.rows = rows

    @property
    def rows_path(self) -> Path:
        return self.directory / ROWS_FILE

    @property
    def traces_dir(self) -> Path:
        return self.directory / TRACES_DIR

    def __len__(self) -> int:
        return len(self.rows)

    @classmethod
    def exists(cls, directory: Union[str, Path]) -> bool:
        return (Path(directory) / CAMPAIGN_FILE).exists()

    @classmethod
    def create(cls, directory: Union[str, Path], record: CampaignRecord) -> "ErrorTable":
        """
        Start a fresh table, replacing any rows and traces already in ``directory``
        """
        directory = Path(directory)
        (directory / TRACES_DIR).mkdir(parents=True, exist_ok=True)
        for stale in (directory / TRACES_DIR).glob("*.jsonl"):
            stale.unlink()
        _write_atomic(directory / CAMPAIGN_FILE, json.dumps(record.to_dict(), indent=2, sort_keys=True))
        (directory / ROWS_FILE).write_text("", encoding="utf-8")
        logger.info(f"Created error table {directory} for campaign {record.campaign_id}")
        return cls(directory, record, [])

    @classmethod
    def open(cls, directory: Union[str, Path]) -> "ErrorTable":
        """
        Open an existing table, truncating a partially written last row

        Raises:
            ErrorTableError: missing or corrupt campaign files
        """
        directory = Path(directory)
        try:
            record = CampaignRecord.from_dict(
                json.loads((directory / CAMPAIGN_FILE).read_text(encoding="utf-8"))
            )
        except (OSError, ValueError, TypeError) as e:
            raise ErrorTableError(f"cannot read {directory / CAMPAIGN_FILE}: {e}")
        rows_path = directory / ROWS_FILE
        raw = rows_path.read_bytes() if rows_path.exists() else b""
        rows: List[ErrorTableRow] = []
        good = 0
        for line in raw.splitlines(keepends=True):
            if not line.endswith(b"\n"):
                break
            try:
                row = ErrorTableRow.from_dict(json.loads(line.decode("utf-8")))
            except (ValueError, KeyError, TypeError, ErrorTableError):
                break
            if row.index != len(rows):
                raise ErrorTableError(f"{rows_path}: row {row.index} found where {len(rows)} was expected")
            rows.append(row)
            good += len(line)
        if good < len(raw):
            logger.warning(f"Truncating {len(raw) - good} bytes of incomplete rows in {rows_path}")
            with open(rows_path, "r+b") as f:
                f.truncate(good)
                f.flush()
                os.fsync(f.fileno())
        return cls(directory, record, rows)

    def append(self, row: ErrorTableRow) -> None:
        """
        Durably append ``row``

        Raises:
            IndexGap: the row index is not the current row count
            StorageFull: the disk refused the write
        """
        if row.index != len(self.rows):
            raise IndexGap(f"row index {row.index} appended to a table of {len(self.rows)} rows")
        line = (dumps_line(row.to_dict()) + "\n").encode("utf-8")
        try:
            with open(self.rows_path, "ab") as f:
                f.write(line)
                f.flush()
                os.fsync(f.fileno())
        except OSError as e:
            if e.errno in (errno.ENOSPC, getattr(errno, "EDQUOT", errno.ENOSPC)):
                raise StorageFull(f"no space left for {self.rows_path}: {e}")
            raise
        self.rows.append(row)

    def trace_name(self, index: int) -> str:
        return f"{TRACES_DIR}/{index:04d}.jsonl"

    def write_trace(self, index: int, trace: Trace) -> str:
        name = self.trace_name(index)
        self.traces_dir.mkdir(parents=True, exist_ok=True)
        trace.write(self.directory / name)
        return name

    def read_trace(self, row: ErrorTableRow) -> Trace:
        if not row.trace:
            raise RowNotFound(f"row {row.index} has no stored trace")
        return Trace.read(self.directory / row.trace, self.record.dt, row.termination or "time_limit")

    def row(self, index: int) -> ErrorTableRow:
        if not 0 <= index < len(self.rows):
            raise RowNotFound(f"row {index} not found ({len(self.rows)} rows)")
        return self.rows[index]

    def update_record(self, **changes) -> None:
        self.record = replace(self.record, **changes)
        _write_atomic(self.directory / CAMPAIGN_FILE, json.dumps(self.record.to_dict(), indent=2, sort_keys=True))

    # Reporting

    def summarize(
        self,
        tolerance: float = 0.05,
        raw_units: bool = False,
        coverage: bool = True,
        budget: int = DEFAULT_MESH_BUDGET,
    ) -> ReportStats:
        """Sample and violation counts plus epsilon-coverage of the feasible samples"""
        counts = {m: 0 for m in METRICS}
        infeasible = 0
        for row in self.rows:
            if row.rho is None:
                infeasible += 1
                continue
            for metric, flag in zip(METRICS, row.rho.flags()):
                counts[metric] += int(flag)
        space = self.record.space
        epsilon = None
        if coverage and space.continuous:
            units = [row.point.unit for row in self.rows if row.feasible]
            ranges = [d.width for d in space.continuous] if raw_units else None
            try:
                epsilon = epsilon_coverage(CoverageQuery.from_unit(units, tolerance, ranges, budget)).epsilon
            except EmptySampleSet:
                epsilon = None
            except MeshTooFine as e:
                logger.warning(f"Coverage skipped for {self.directory}: {e}")
        return ReportStats(
            scenario=self.record.scenario_name,
            sampler=str(self.record.sampler.get("kind", "")),
            total=len(self.rows),
            infeasible=infeasible,
            counts=counts,
            epsilon=epsilon,
            continuous_dims=len(space.continuous),
        )

    def scatter_frame(self, dims: Sequence[str] = ()) -> pd.DataFrame:
        """
        One record per feasible sample with the selected coordinates and violation flags

        Raises:
            UnknownDimension: a requested dimension is not in the feature space
        """
        space = self.record.space
        names = list(dims) or [d.name for d in space.continuous]
        for name in names:
            space.dimension(name)
        records = []
        for row in self.rows:
            if not row.feasible:
                continue
            values = row.point.values(space)
            record = {"row": row.index}
            record.update({name: values[name] for name in names})
            record.update({metric: flag for metric, flag in zip(METRICS, row.rho.flags())})
            records.append(record)
        return pd.DataFrame(records, columns=["row", *names, *METRICS])

    def export_scatter(self, dims: Sequence[str] = (), path: Optional[Union[str, Path]] = None) -> Path:
        path = Path(path) if path else self.directory / SCATTER_FILE
        self.scatter_frame(dims).to_csv(path, index=False)
        return path


__all__ = [
    "CampaignRecord",
    "ErrorTable",
    "ErrorTableRow",
    "ReportStats",
]
