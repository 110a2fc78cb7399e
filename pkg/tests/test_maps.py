import math

import pytest

from scenfuzz.exceptions import MapError, UnknownLane
from scenfuzz.maps import (
    BUNDLED_MAPS_DIR,
    Polyline,
    RegionRef,
    load_map,
    parse_map,
    resolve_map_path,
)


class TestPolyline:
    def test_project_left_is_positive(self):
        line = Polyline([[0, 0], [10, 0], [10, 10]])
        s, lateral, dist = line.project(5, 2)
        assert (s, lateral, dist) == pytest.approx((5.0, 2.0, 2.0))
        s, lateral, _ = line.project(12, 5)
        assert s == pytest.approx(15.0)
        assert lateral == pytest.approx(-2.0)

    def test_project_extrapolates_past_ends(self):
        s, _, dist = Polyline([[0, 0], [10, 0]]).project(-3, 0)
        assert s == pytest.approx(-3.0)
        assert dist == pytest.approx(3.0)

    def test_point_at_second_segment(self):
        x, y, heading = Polyline([[0, 0], [10, 0], [10, 10]]).point_at(15, lateral=1.0)
        assert (x, y) == pytest.approx((9.0, 5.0))
        assert heading == pytest.approx(math.pi / 2)

    def test_rejects_degenerate(self):
        with pytest.raises(MapError):
            Polyline([[0, 0]])
        with pytest.raises(MapError):
            Polyline([[0, 0], [0, 0], [1, 1]])


class TestParseMap:
    def test_straight_map(self, straight_map):
        assert straight_map.name == "straight"
        assert straight_map.lane("a").length == pytest.approx(200.0)
        assert straight_map.successor_chain("a") == ("a", "b")

    def test_unknown_lane(self, straight_map):
        with pytest.raises(UnknownLane):
            straight_map.lane("z")

    def test_asymmetric_adjacency(self, straight_doc):
        straight_doc["lanes"][2]["right"] = None
        with pytest.raises(MapError, match="not symmetric"):
            parse_map(straight_doc)

    def test_missing_successor(self, straight_doc):
        straight_doc["lanes"][1]["successors"] = ["nowhere"]
        with pytest.raises(MapError, match="nowhere"):
            parse_map(straight_doc)

    def test_duplicate_lane(self, straight_doc):
        straight_doc["lanes"].append(dict(straight_doc["lanes"][1]))
        with pytest.raises(MapError, match="duplicate"):
            parse_map(straight_doc)

    def test_no_lanes(self):
        with pytest.raises(MapError):
            parse_map({"lanes": []})

    def test_malformed_document(self):
        with pytest.raises(MapError, match="malformed"):
            parse_map({"lanes": [{"centerline": [[0, 0], [1, 0]]}]})

    def test_unknown_region_type(self, straight_doc):
        straight_doc["regions"]["blob"] = {"type": "polygon"}
        with pytest.raises(MapError):
            parse_map(straight_doc)

    def test_stop_line_off_lane(self, straight_doc):
        straight_doc["intersections"] = [{"id": "x", "lanes": ["b"], "stop_lines": [["a", 500]]}]
        with pytest.raises(MapError, match="off the lane"):
            parse_map(straight_doc)

    def test_to_dict_reparses(self, straight_map):
        again = parse_map(straight_map.to_dict())
        assert again.to_dict() == straight_map.to_dict()


class TestQueries:
    def test_nearest_lane(self, straight_map):
        assert straight_map.nearest_lane(50, 3.0)[0] == "a_left"
        assert straight_map.nearest_lane(300, 0.5)[0] == "b"

    def test_successor_chain_via(self, straight_map):
        assert straight_map.successor_chain("a", via="b") == ("a", "b")
        assert straight_map.successor_chain("b") == ("b",)

    def test_path_joins_lanes(self, straight_map):
        path = straight_map.path(["a", "b"])
        assert path.length == pytest.approx(400.0)
        assert len(path.points) == 3

    def test_regions(self, straight_map):
        zone = RegionRef("region", "zone")
        strip = RegionRef("region", "strip")
        assert straight_map.in_region(zone, 155, 0)
        assert not straight_map.in_region(zone, 100, 0)
        assert straight_map.in_region(strip, 55, 1.0)
        assert not straight_map.in_region(strip, 65, 0)
        assert straight_map.in_region(RegionRef("lane", "a_left"), 10, 3.0)
        assert straight_map.in_region(RegionRef("circle", center=(0.0, 0.0), radius=2.0), 1, 1)

    def test_has_region(self, straight_map):
        assert straight_map.has_region(RegionRef("region", "zone"))
        assert not straight_map.has_region(RegionRef("intersection", "center"))


class TestFiles:
    def test_load_map(self, map_file):
        assert load_map(map_file).source == str(map_file)

    def test_load_invalid_json(self, tmp_path):
        path = tmp_path / "bad.map"
        path.write_text("{", encoding="utf-8")
        with pytest.raises(MapError, match="not valid JSON"):
            load_map(path)

    def test_load_missing(self, tmp_path):
        with pytest.raises(MapError):
            load_map(tmp_path / "absent.map")

    def test_resolve_next_to_scenario(self, map_file):
        assert resolve_map_path("straight.map", map_file.parent / "x.scn") == map_file.resolve()

    def test_resolve_falls_back_to_bundled(self, tmp_path):
        assert resolve_map_path("twoway.map", tmp_path / "x.scn") == BUNDLED_MAPS_DIR / "twoway.map"

    @pytest.mark.parametrize("name", ["oneway.map", "twoway.map", "fourway.map"])
    def test_bundled_maps_load(self, name):
        model = load_map(BUNDLED_MAPS_DIR / name)
        assert model.lanes
