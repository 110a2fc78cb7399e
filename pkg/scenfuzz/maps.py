"""
Lane-graph road maps
JSON map documents, polyline geometry and region membership
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import MapError, UnknownLane

logger = logging.getLogger(__name__)

BUNDLED_MAPS_DIR = Path(__file__).resolve().parent / "maps"


class Polyline:
    """Piecewise-linear curve with arc-length parametrisation"""

    def __init__(self, points: Sequence[Sequence[float]]):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
            raise MapError("polyline needs at least 2 two-dimensional points")
        seg = np.diff(pts, axis=0)
        seg_len = np.hypot(seg[:, 0], seg[:, 1])
        if np.any(seg_len <= 0.0):
            raise MapError("polyline has repeated consecutive points")
        self.points = pts
        self._start = pts[:-1]
        self._seg = seg
        self._seg_len = seg_len
        self._unit = seg / seg_len[:, None]
        self._cum = np.concatenate(([0.0], np.cumsum(seg_len)))
        self.length = float(self._cum[-1])

    def project(self, x: float, y: float) -> Tuple[float, float, float]:
        """
        Closest-point projection

        Returns:
            (s, lateral, distance): arc length (extrapolated past either
            end), signed offset with left positive, and true distance to the
            polyline
        """
        d = np.array([x, y]) - self._start
        t_raw = np.einsum("ij,ij->i", d, self._seg) / (self._seg_len ** 2)
        t = np.clip(t_raw, 0.0, 1.0)
        diff = d - t[:, None] * self._seg
        dist = np.hypot(diff[:, 0], diff[:, 1])
        i = int(np.argmin(dist))
        last = len(self._seg_len) - 1
        ti = float(t[i])
        if (i == 0 and t_raw[i] < 0.0) or (i == last and t_raw[i] > 1.0):
            ti = float(t_raw[i])
        s = float(self._cum[i] + ti * self._seg_len[i])
        ux, uy = self._unit[i]
        lateral = float(ux * d[i, 1] - uy * d[i, 0])
        return s, lateral, float(dist[i])

    def distance(self, x: float, y: float) -> float:
        return self.project(x, y)[2]

    def point_at(self, s: float, lateral: float = 0.0) -> Tuple[float, float, float]:
        """Pose (x, y, heading) at arc length ``s``, extrapolating linearly past the ends"""
        i = int(np.searchsorted(self._cum, s, side="right")) - 1
        i = min(max(i, 0), len(self._seg_len) - 1)
        ux, uy = self._unit[i]
        along = s - self._cum[i]
        x = self._start[i, 0] + along * ux - lateral * uy
        y = self._start[i, 1] + along * uy + lateral * ux
        return float(x), float(y), math.atan2(uy, ux)

    def heading_at(self, s: float) -> float:
        return self.point_at(s)[2]


@dataclass
class Lane:
    id: str
    centerline: Polyline
    width: float
    successors: Tuple[str, ...] = ()
    left: Optional[str] = None
    right: Optional[str] = None

    @property
    def length(self) -> float:
        return self.centerline.length

    def contains(self, x: float, y: float) -> bool:
        return self.centerline.distance(x, y) <= self.width / 2.0


@dataclass(frozen=True)
class Intersection:
    id: str
    lanes: Tuple[str, ...]
    stop_lines: Tuple[Tuple[str, float], ...] = ()


@dataclass(frozen=True)
class Region:
    """Named map region: a circle or a stretch of one lane"""

    id: str
    kind: str  # "circle" or "lane_segment"
    center: Tuple[float, float] = (0.0, 0.0)
    radius: float = 0.0
    lane: Optional[str] = None
    start: float = 0.0
    end: float = 0.0


@dataclass(frozen=True)
class RegionRef:
    """Trigger region as written in a scenario: lane, intersection, named region or circle"""

    kind: str  # lane, intersection, region, circle
    id: Optional[str] = None
    center: Tuple[float, float] = (0.0, 0.0)
    radius: float = 0.0

    def describe(self) -> str:
        if self.kind == "circle":
            return f"circle(({self.center[0]}, {self.center[1]}), {self.radius})"
        return f'{self.kind} "{self.id}"'


@dataclass
class MapModel:
    name: str
    lanes: Dict[str, Lane]
    intersections: Dict[str, Intersection] = field(default_factory=dict)
    regions: Dict[str, Region] = field(default_factory=dict)
    source: Optional[str] = None
    _paths: Dict[Tuple[str, ...], Polyline] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        problems = self._check()
        if problems:
            raise MapError(f"map '{self.name}' is invalid: " + "; ".join(problems))

    def _check(self) -> List[str]:
        problems = []
        for lane in self.lanes.values():
            if not lane.width > 0:
                problems.append(f"lane {lane.id}: width must be > 0")
            for succ in lane.successors:
                if succ not in self.lanes:
                    problems.append(f"lane {lane.id}: successor '{succ}' does not exist")
            for side in ("left", "right"):
                other_id = getattr(lane, side)
                if other_id is None:
                    continue
                other = self.lanes.get(other_id)
                if other is None:
                    problems.append(f"lane {lane.id}: {side} neighbour '{other_id}' does not exist")
                elif lane.id not in (other.left, other.right):
                    problems.append(
                        f"lane {lane.id}: adjacency with '{other_id}' is not symmetric"
                    )
        for inter in self.intersections.values():
            for lane_id in inter.lanes:
                if lane_id not in self.lanes:
                    problems.append(f"intersection {inter.id}: lane '{lane_id}' does not exist")
            for lane_id, s in inter.stop_lines:
                if lane_id not in self.lanes:
                    problems.append(f"intersection {inter.id}: stop line lane '{lane_id}' does not exist")
                elif not 0.0 <= s <= self.lanes[lane_id].length:
                    problems.append(f"intersection {inter.id}: stop line on '{lane_id}' is off the lane")
        for region in self.regions.values():
            if region.kind == "circle" and not region.radius > 0:
                problems.append(f"region {region.id}: radius must be > 0")
            if region.kind == "lane_segment":
                if region.lane not in self.lanes:
                    problems.append(f"region {region.id}: lane '{region.lane}' does not exist")
                elif not region.start < region.end:
                    problems.append(f"region {region.id}: start must be < end")
        return problems

    # Lookup
    def lane(self, lane_id: str) -> Lane:
        try:
            return self.lanes[lane_id]
        except KeyError:
            raise UnknownLane(f"lane '{lane_id}' is not on map '{self.name}'")

    def has_region(self, ref: RegionRef) -> bool:
        if ref.kind == "circle":
            return ref.radius > 0
        if ref.kind == "lane":
            return ref.id in self.lanes
        if ref.kind == "intersection":
            return ref.id in self.intersections
        return ref.id in self.regions

    # Geometry
    def pose_at(self, lane_id: str, s: float, lateral: float = 0.0) -> Tuple[float, float, float]:
        return self.lane(lane_id).centerline.point_at(s, lateral)

    def path(self, lane_ids: Iterable[str]) -> Polyline:
        """Concatenated centerline of consecutive lanes (cached)"""
        key = tuple(lane_ids)
        cached = self._paths.get(key)
        if cached is not None:
            return cached
        points: List[np.ndarray] = []
        for lane_id in key:
            for pt in self.lane(lane_id).centerline.points:
                if points and np.hypot(*(pt - points[-1])) < 1e-6:
                    continue
                points.append(pt)
        poly = Polyline(points)
        self._paths[key] = poly
        return poly

    def nearest_lane(
        self, x: float, y: float, candidates: Optional[Sequence[str]] = None
    ) -> Tuple[Optional[str], float]:
        """Nearest lane by point-to-centerline distance; ties go to the first candidate"""
        best_id, best = None, math.inf
        for lane_id in candidates if candidates is not None else self.lanes:
            d = self.lane(lane_id).centerline.distance(x, y)
            if d < best - 1e-12:
                best_id, best = lane_id, d
        return best_id, best

    def successor_chain(self, lane_id: str, via: Optional[str] = None, limit: int = 8) -> Tuple[str, ...]:
        """Lane followed by its successors, taking ``via`` when offered, first successor otherwise"""
        chain = [lane_id]
        while len(chain) < limit:
            succ = self.lane(chain[-1]).successors
            if not succ:
                break
            nxt = via if via in succ else succ[0]
            if nxt in chain:
                break
            chain.append(nxt)
        return tuple(chain)

    def in_intersection(self, intersection_id: str, x: float, y: float) -> bool:
        inter = self.intersections[intersection_id]
        return any(self.lanes[lane_id].contains(x, y) for lane_id in inter.lanes)

    def in_region(self, ref: RegionRef, x: float, y: float) -> bool:
        if ref.kind == "circle":
            return math.hypot(x - ref.center[0], y - ref.center[1]) <= ref.radius
        if ref.kind == "lane":
            return self.lane(ref.id).contains(x, y)
        if ref.kind == "intersection":
            return self.in_intersection(ref.id, x, y)
        region = self.regions[ref.id]
        if region.kind == "circle":
            return math.hypot(x - region.center[0], y - region.center[1]) <= region.radius
        lane = self.lane(region.lane)
        s, _, dist = lane.centerline.project(x, y)
        return region.start <= s <= region.end and dist <= lane.width / 2.0

    def to_dict(self) -> Dict:
        return {
            "name": self.name,
            "lanes": [
                {
                    "id": lane.id,
                    "centerline": lane.centerline.points.tolist(),
                    "width": lane.width,
                    "successors": list(lane.successors),
                    "left": lane.left,
                    "right": lane.right,
                }
                for lane in self.lanes.values()
            ],
            "intersections": [
                {
                    "id": inter.id,
                    "lanes": list(inter.lanes),
                    "stop_lines": [[lane_id, s] for lane_id, s in inter.stop_lines],
                }
                for inter in self.intersections.values()
            ],
            "regions": {
                region.id: (
                    {"type": "circle", "center": list(region.center), "radius": region.radius}
                    if region.kind == "circle"
                    else {"type": "lane_segment", "lane": region.lane, "start": region.start, "end": region.end}
                )
                for region in self.regions.values()
            },
        }


def parse_map(doc: Dict, source: Optional[str] = None) -> MapModel:
    """
    Build a MapModel from a decoded map document

    Raises:
        MapError: on schema errors or broken invariants
    """
    if not isinstance(doc, dict):
        raise MapError("map document must be a JSON object")
    try:
        lanes: Dict[str, Lane] = {}
        for raw in doc.get("lanes", []):
            lane_id = str(raw["id"])
            if lane_id in lanes:
                raise MapError(f"duplicate lane id '{lane_id}'")
            try:
                centerline = Polyline(raw["centerline"])
            except MapError as e:
                raise MapError(f"lane {lane_id}: {e}")
            lanes[lane_id] = Lane(
                id=lane_id,
                centerline=centerline,
                width=float(raw.get("width", 3.5)),
                successors=tuple(raw.get("successors", [])),
                left=raw.get("left"),
                right=raw.get("right"),
            )
        if not lanes:
            raise MapError("map has no lanes")
        intersections = {}
        for raw in doc.get("intersections", []):
            inter = Intersection(
                id=str(raw["id"]),
                lanes=tuple(raw.get("lanes", [])),
                stop_lines=tuple((str(l), float(s)) for l, s in raw.get("stop_lines", [])),
            )
            intersections[inter.id] = inter
        regions = {}
        for region_id, raw in (doc.get("regions") or {}).items():
            kind = raw.get("type")
            if kind == "circle":
                cx, cy = raw["center"]
                regions[region_id] = Region(
                    id=region_id, kind="circle", center=(float(cx), float(cy)), radius=float(raw["radius"])
                )
            elif kind == "lane_segment":
                regions[region_id] = Region(
                    id=region_id,
                    kind="lane_segment",
                    lane=str(raw["lane"]),
                    start=float(raw["start"]),
                    end=float(raw["end"]),
                )
            else:
                raise MapError(f"region {region_id}: unknown type {kind!r}")
    except (KeyError, TypeError, ValueError) as e:
        raise MapError(f"malformed map document: {e!r}")
    return MapModel(
        name=str(doc.get("name") or (Path(source).stem if source else "map")),
        lanes=lanes,
        intersections=intersections,
        regions=regions,
        source=source,
    )


def load_map(path: Union[str, Path]) -> MapModel:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise MapError(f"cannot read map {path}: {e}")
    except json.JSONDecodeError as e:
        raise MapError(f"map {path} is not valid JSON: {e}")
    logger.debug(f"Loaded map {path}")
    return parse_map(doc, source=str(path))


def resolve_map_path(map_ref: str, scenario_path: Optional[Union[str, Path]] = None) -> Path:
    """Map path relative to the scenario file, falling back to the bundled maps"""
    candidate = Path(map_ref)
    if candidate.is_absolute():
        return candidate
    if scenario_path is not None:
        local = Path(scenario_path).resolve().parent / candidate
        if local.exists():
            return local
    bundled = BUNDLED_MAPS_DIR / candidate.name
    if bundled.exists():
        return bundled
    return candidate
