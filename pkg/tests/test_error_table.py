import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scenfuzz.error_table import (
    CAMPAIGN_FILE,
    ROWS_FILE,
    SCATTER_FILE,
    CampaignRecord,
    ErrorTable,
    ErrorTableRow,
)
from scenfuzz.exceptions import ErrorTableError, IndexGap, RowNotFound, UnknownDimension
from scenfuzz.features import ContinuousDim, DiscreteDim, FeatureSpace, SamplePoint
from scenfuzz.monitors import METRICS, RhoVector
from scenfuzz.simulator import Trace
from scenfuzz.state import AgentState, WorldState

SPACE = FeatureSpace(
    continuous=(ContinuousDim("gap", 10.0, 30.0),),
    discrete=(DiscreteDim("side", ("a", "b")),),
)
SAFE = RhoVector(progress=1.0, distance=1.0, ttc=1.0, lane=1.0)
CRASH = RhoVector(progress=1.0, distance=-1.0, ttc=-0.5, lane=1.0)


def record(**changes):
    values = dict(
        campaign_id="c1",
        scenario_path="scenario.scn",
        scenario_hash="sha256:00",
        scenario_name="scenario",
        map_path="straight.map",
        sampler={"kind": "halton", "bins": 5, "exploration": 1.0, "batch_size": 1},
        seed=0,
        dt=0.1,
        horizon=10.0,
        thresholds={"distance": 5.0},
        space=SPACE,
    )
    values.update(changes)
    return CampaignRecord(**values)


def row(index, unit=0.5, side=0, rho=SAFE):
    point = SamplePoint((10.0 + 20.0 * unit,), (side,), (unit,), campaign_id="c1")
    return ErrorTableRow(
        index=index,
        point=point,
        feasible=rho is not None,
        rho=rho,
        reason=None if rho is not None else "requirement on line 3 is false",
    )


@pytest.fixture
def table(tmp_path):
    return ErrorTable.create(tmp_path / "campaign", record())


class TestRows:
    def test_rho_iff_feasible(self):
        with pytest.raises(ErrorTableError):
            ErrorTableRow(index=0, point=SamplePoint(), feasible=True)
        with pytest.raises(ErrorTableError):
            ErrorTableRow(index=0, point=SamplePoint(), feasible=False, rho=SAFE)

    def test_violated(self):
        assert row(0, rho=CRASH).violated
        assert not row(0).violated
        assert not row(0, rho=None).violated

    def test_dict_carries_violation_flags(self):
        data = row(0, rho=CRASH).to_dict()
        assert data["violations"] == {"progress": False, "distance": True, "ttc": True, "lane": False}
        assert ErrorTableRow.from_dict(data) == row(0, rho=CRASH)


class TestTable:
    def test_create_writes_files(self, table):
        assert (table.directory / CAMPAIGN_FILE).exists()
        assert (table.directory / ROWS_FILE).read_text() == ""
        assert ErrorTable.exists(table.directory)

    def test_append_and_reopen(self, table):
        table.append(row(0))
        table.append(row(1, rho=None))
        again = ErrorTable.open(table.directory)
        assert len(again) == 2
        assert again.record == table.record
        assert again.row(1).reason == "requirement on line 3 is false"

    def test_index_gap(self, table):
        table.append(row(0))
        with pytest.raises(IndexGap):
            table.append(row(2))

    def test_row_not_found(self, table):
        with pytest.raises(RowNotFound):
            table.row(0)

    def test_partial_last_line_is_truncated(self, table, caplog):
        table.append(row(0))
        table.append(row(1))
        with open(table.rows_path, "ab") as f:
            f.write(b'{"index": 2, "poi')
        again = ErrorTable.open(table.directory)
        assert len(again) == 2
        assert table.rows_path.read_bytes().endswith(b"\n")
        assert "Truncating" in caplog.text

    def test_out_of_order_rows_are_corrupt(self, table):
        table.append(row(0))
        text = table.rows_path.read_text()
        table.rows_path.write_text(text + text)
        with pytest.raises(ErrorTableError):
            ErrorTable.open(table.directory)

    def test_open_missing_directory(self, tmp_path):
        with pytest.raises(ErrorTableError):
            ErrorTable.open(tmp_path / "nothing")

    def test_create_clears_old_campaign(self, table):
        table.append(row(0))
        trace = Trace(dt=0.1, steps=[WorldState(0.0, (AgentState("ego", "car", 0.0, 0.0, 0.0),))])
        table.write_trace(0, trace)
        fresh = ErrorTable.create(table.directory, record(campaign_id="c2"))
        assert len(fresh) == 0
        assert not list(fresh.traces_dir.glob("*.jsonl"))

    def test_trace_storage(self, table):
        trace = Trace(dt=0.1, steps=[WorldState(0.0, (AgentState("ego", "car", 0.0, 0.0, 0.0),))])
        name = table.write_trace(0, trace)
        assert name == "traces/0000.jsonl"
        stored = ErrorTableRow(0, SamplePoint(), True, rho=SAFE, trace=name, termination="predicate")
        loaded = table.read_trace(stored)
        assert loaded.steps == trace.steps
        assert loaded.termination.value == "predicate"
        with pytest.raises(RowNotFound):
            table.read_trace(row(0))

    def test_update_record(self, table):
        table.update_record(finished="2024-01-01T00:00:00")
        assert ErrorTable.open(table.directory).record.finished == "2024-01-01T00:00:00"


class TestSummaries:
    def test_summarize_counts(self, table):
        table.append(row(0, unit=0.25, rho=CRASH))
        table.append(row(1, unit=0.5, rho=None))
        table.append(row(2, unit=0.75))
        stats = table.summarize(tolerance=0.05)
        assert stats.total == 3
        assert stats.infeasible == 1
        assert stats.counts == {"progress": 0, "distance": 1, "ttc": 1, "lane": 0}
        assert stats.sampler == "halton"
        assert 0.25 - 1e-9 <= stats.epsilon <= 0.30

    def test_raw_units_scale_epsilon(self, table):
        table.append(row(0, unit=0.5))
        stats = table.summarize(tolerance=0.5, raw_units=True)
        assert 10.0 - 1e-9 <= stats.epsilon <= 10.5

    def test_no_feasible_rows_has_no_epsilon(self, table):
        table.append(row(0, rho=None))
        assert table.summarize().epsilon is None

    def test_coverage_can_be_skipped(self, table):
        table.append(row(0))
        assert table.summarize(coverage=False).epsilon is None

    def test_scatter(self, table):
        table.append(row(0, unit=0.25, side=1, rho=CRASH))
        table.append(row(1, rho=None))
        frame = table.scatter_frame(["gap", "side"])
        assert list(frame.columns) == ["row", "gap", "side", "progress", "distance", "ttc", "lane"]
        assert frame.to_dict("records") == [
            {"row": 0, "gap": 15.0, "side": "b", "progress": False, "distance": True, "ttc": True, "lane": False}
        ]

    def test_scatter_unknown_dimension(self, table):
        with pytest.raises(UnknownDimension):
            table.scatter_frame(["speed"])

    def test_export_scatter(self, table):
        table.append(row(0))
        path = table.export_scatter()
        assert path.name == SCATTER_FILE
        assert path.read_text().splitlines()[0] == "row,gap,progress,distance,ttc,lane"


rho_values = st.floats(-5.0, 5.0)
rho_vectors = st.builds(RhoVector, rho_values, rho_values, rho_values, rho_values)


@settings(max_examples=50, deadline=None)
@given(outcomes=st.lists(st.one_of(st.none(), rho_vectors), max_size=30))
def test_summary_counts_match_a_full_rescan(tmp_path_factory, outcomes):
    table = ErrorTable.create(tmp_path_factory.mktemp("campaign"), record())
    for index, rho in enumerate(outcomes):
        table.append(row(index, unit=(index % 10) / 10, rho=rho))
    stats = ErrorTable.open(table.directory).summarize(coverage=False)

    lines = [json.loads(line) for line in (table.directory / ROWS_FILE).read_text().splitlines()]
    expected = {metric: 0 for metric in METRICS}
    for data in lines:
        for metric, value in (data["rho"] or {}).items():
            expected[metric] += int(value < 0)
    assert stats.total == len(lines) == len(outcomes)
    assert stats.infeasible == sum(1 for data in lines if not data["feasible"])
    assert stats.counts == expected
