"""
Epsilon-coverage of sampled continuous feature vectors

Coverage is the smallest radius eps such that eps-balls around the samples
cover the domain box. It is estimated by binary search over eps', checking
a uniform mesh against a grid spatial index of the samples.
"""

import itertools
import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import CoverageError, EmptySampleSet, MeshTooFine

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 0.05
DEFAULT_MESH_BUDGET = 10_000_000


class GridIndex:
    """Uniform-grid spatial index with cell size equal to the query radius"""

    def __init__(self, points: np.ndarray, cell: float):
        self.points = np.asarray(points, dtype=float)
        self.cell = cell
        self.dim = self.points.shape[1]
        buckets: Dict[Tuple[int, ...], List[int]] = defaultdict(list)
        for i, key in enumerate(np.floor(self.points / cell).astype(np.int64)):
            buckets[tuple(int(k) for k in key)].append(i)
        self.buckets = {key: self.points[idx] for key, idx in buckets.items()}
        self.offsets = list(itertools.product((-1, 0, 1), repeat=self.dim))

    def candidates(self, key: Sequence[int]) -> np.ndarray:
        found = [
            self.buckets[nbr]
            for nbr in (tuple(k + o for k, o in zip(key, off)) for off in self.offsets)
            if nbr in self.buckets
        ]
        if not found:
            return np.empty((0, self.dim))
        return np.concatenate(found)

    def all_within(self, queries: np.ndarray, radius: float) -> bool:
        """True iff every query has a sample within ``radius``"""
        keys = np.floor(queries / self.cell).astype(np.int64)
        unique, inverse = np.unique(keys, axis=0, return_inverse=True)
        inverse = np.asarray(inverse).reshape(-1)
        limit = radius * radius * (1.0 + 1e-12)
        for group, key in enumerate(unique):
            cand = self.candidates(key)
            if len(cand) == 0:
                return False
            q = queries[inverse == group]
            d2 = ((q[:, None, :] - cand[None, :, :]) ** 2).sum(axis=-1).min(axis=1)
            if np.any(d2 > limit):
                return False
        return True


def _as_points(points) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    return arr


def mesh_resolution(extent: Sequence[float], spacing: float) -> Tuple[int, ...]:
    """Intervals per axis so that mesh spacing is at most ``spacing``"""
    return tuple(max(1, int(math.ceil(e / spacing - 1e-9))) for e in extent)


def _check_budget(resolution: Sequence[int], budget: int) -> None:
    size = 1
    for n in resolution:
        size *= n + 1
        if size > budget:
            raise MeshTooFine(f"mesh of {'x'.join(str(n + 1) for n in resolution)} points exceeds budget {budget}")


def _mesh(extent: Sequence[float], resolution: Sequence[int]) -> np.ndarray:
    axes = [np.linspace(0.0, e, n + 1) for e, n in zip(extent, resolution)]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.reshape(-1) for g in grids], axis=1)


def mesh_covered(
    points,
    eps_prime: float,
    extent: Optional[Sequence[float]] = None,
    spacing: Optional[float] = None,
    budget: int = DEFAULT_MESH_BUDGET,
) -> bool:
    """
    Whether every point of a mesh of spacing <= ``spacing`` (default
    ``eps_prime``) over the box lies within ``eps_prime`` of a sample

    Raises:
        MeshTooFine: the mesh would exceed ``budget`` points
    """
    pts = _as_points(points)
    if len(pts) == 0:
        raise EmptySampleSet("no sample points")
    if not eps_prime > 0:
        raise CoverageError("eps' must be > 0")
    extent = tuple(extent) if extent is not None else (1.0,) * pts.shape[1]
    resolution = mesh_resolution(extent, spacing or eps_prime)
    _check_budget(resolution, budget)
    return GridIndex(pts, eps_prime).all_within(_mesh(extent, resolution), eps_prime)


@dataclass(frozen=True)
class CoverageQuery:
    points: Tuple[Tuple[float, ...], ...]
    tolerance: float = DEFAULT_TOLERANCE
    extent: Optional[Tuple[float, ...]] = None
    budget: int = DEFAULT_MESH_BUDGET

    @classmethod
    def from_unit(
        cls,
        unit_points,
        tolerance: float = DEFAULT_TOLERANCE,
        ranges: Optional[Sequence[float]] = None,
        budget: int = DEFAULT_MESH_BUDGET,
    ) -> "CoverageQuery":
        """
        Query over unit coordinates, or over raw units when per-axis ``ranges`` are given

        ``tolerance`` is a unit-cube fraction; raw units scale it by the widest range.
        """
        pts = _as_points(unit_points)
        extent = None
        if ranges is not None:
            extent = tuple(float(r) for r in ranges)
            pts = pts * np.asarray(extent)
            widest = max(extent, default=0.0)
            if widest > 0:
                tolerance = tolerance * widest
        return cls(tuple(tuple(p) for p in pts.tolist()), tolerance, extent, budget)


@dataclass(frozen=True)
class CoverageResult:
    epsilon: float
    resolution: Tuple[int, ...]
    iterations: int
    lower: float = 0.0


def epsilon_coverage(query: CoverageQuery) -> CoverageResult:
    """
    Binary search for the smallest covering radius

    Raises:
        EmptySampleSet: no points
        MeshTooFine: the finest mesh exceeds the budget
    """
    pts = _as_points(query.points)
    if len(pts) == 0:
        raise EmptySampleSet("coverage needs at least one sample")
    if not query.tolerance > 0:
        raise CoverageError("tolerance must be > 0")
    dim = pts.shape[1]
    extent = query.extent or (1.0,) * dim
    if np.any(pts < -1e-12) or np.any(pts > np.asarray(extent) + 1e-12):
        raise CoverageError("points lie outside the domain box")
    lo, hi = 0.0, math.sqrt(sum(e * e for e in extent))
    iterations = 0
    while hi - lo > query.tolerance:
        mid = 0.5 * (lo + hi)
        if mesh_covered(pts, mid, extent, spacing=min(mid, query.tolerance), budget=query.budget):
            hi = mid
        else:
            lo = mid
        iterations += 1
    resolution = mesh_resolution(extent, min(hi, query.tolerance))
    logger.debug(f"epsilon={hi:.4f} after {iterations} iterations over {len(pts)} points")
    return CoverageResult(epsilon=hi, resolution=resolution, iterations=iterations, lower=lo)


def exact_epsilon_bruteforce(points, grid_n: int, budget: int = DEFAULT_MESH_BUDGET, chunk: int = 65536) -> float:
    """Largest nearest-sample distance over a dense grid_n^d grid of the unit cube"""
    pts = _as_points(points)
    if len(pts) == 0:
        raise EmptySampleSet("no sample points")
    resolution = (grid_n - 1,) * pts.shape[1]
    _check_budget(resolution, budget)
    grid = _mesh((1.0,) * pts.shape[1], resolution)
    worst = 0.0
    for start in range(0, len(grid), chunk):
        block = grid[start:start + chunk]
        d2 = ((block[:, None, :] - pts[None, :, :]) ** 2).sum(axis=-1).min(axis=1)
        worst = max(worst, float(d2.max()))
    return math.sqrt(worst)
