"""Achievable rate-quality regions.

Since viewing probabilities are non-negative and sum to one, the expected
(bitrate, quality) of a ladder is a convex combination of its operating
points, so it always lies in their convex hull. Geometry runs on
normalized coordinates (rate / max rate, quality / max |quality|) because
rates and qualities differ by several orders of magnitude.
"""

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional, Sequence

from .errors import EmptyInputError
from .player_model import Ladder
from .rq_model import ChunkRqModel, RateQualityCurve, eval_quality

EPSILON = 1e-12


@dataclass(frozen=True)
class RqPoint:
    """A (rate, quality) operating point."""

    rate: float
    quality: float

    def __post_init__(self):
        if not (math.isfinite(self.rate) and math.isfinite(self.quality)):
            raise ValueError(f"Operating point must be finite, got ({self.rate}, {self.quality})")
        if self.rate <= 0:
            raise ValueError(f"Operating point rate must be positive, got {self.rate}")

    def to_dict(self) -> dict:
        return {"rate": self.rate, "quality": self.quality}


class _Scale(NamedTuple):
    rate: float
    quality: float

    def apply(self, p: RqPoint) -> tuple[float, float]:
        return p.rate / self.rate, p.quality / self.quality


def _scale_for(points: Iterable[RqPoint]) -> _Scale:
    points = list(points)
    rate = max(p.rate for p in points)
    quality = max(abs(p.quality) for p in points) or 1.0
    return _Scale(rate, quality)


def _cross(o: tuple[float, float], a: tuple[float, float], b: tuple[float, float]) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


@dataclass(frozen=True)
class AchievableRegion:
    """Convex hull of operating points, counterclockwise.

    A single vertex or two vertices describe a degenerate point or segment.
    """

    hull_vertices: tuple[RqPoint, ...]

    def __post_init__(self):
        object.__setattr__(self, "hull_vertices", tuple(self.hull_vertices))
        if not self.hull_vertices:
            raise ValueError("Region needs at least one vertex")

    @property
    def scale(self) -> _Scale:
        return _scale_for(self.hull_vertices)

    def to_dict(self) -> dict:
        return {"hull_vertices": [v.to_dict() for v in self.hull_vertices]}


def achievable_region(points: Sequence[RqPoint]) -> AchievableRegion:
    """Convex hull of operating points (monotone chain).

    Raises:
        EmptyInputError: If no points are given
    """
    if not points:
        raise EmptyInputError("Cannot build a region from zero points")
    scale = _scale_for(points)
    unique = sorted(set(points), key=lambda p: (p.rate, p.quality))
    if len(unique) == 1:
        return AchievableRegion(tuple(unique))
    coords = [scale.apply(p) for p in unique]

    def chain(indices):
        hull: list[int] = []
        for i in indices:
            while len(hull) >= 2 and _cross(coords[hull[-2]], coords[hull[-1]], coords[i]) <= EPSILON:
                hull.pop()
            hull.append(i)
        return hull

    lower = chain(range(len(unique)))
    upper = chain(reversed(range(len(unique))))
    vertices = lower[:-1] + upper[:-1]
    return AchievableRegion(tuple(unique[i] for i in vertices))


def _distance_to_segment(p, a, b) -> float:
    dx, dy = b[0] - a[0], b[1] - a[1]
    length2 = dx * dx + dy * dy
    if length2 == 0:
        return math.hypot(p[0] - a[0], p[1] - a[1])
    t = max(0.0, min(1.0, ((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / length2))
    return math.hypot(p[0] - a[0] - t * dx, p[1] - a[1] - t * dy)


def contains(region: AchievableRegion, p: RqPoint, tol: float = 1e-9) -> bool:
    """Whether ``p`` lies inside the region or within ``tol`` of its boundary.

    ``tol`` is a distance in normalized coordinates.
    """
    scale = region.scale
    point = scale.apply(p)
    vertices = [scale.apply(v) for v in region.hull_vertices]
    if len(vertices) >= 3:
        closed = vertices + vertices[:1]
        if all(_cross(a, b, point) >= 0 for a, b in zip(closed, closed[1:])):
            return True
    if len(vertices) == 1:
        return math.hypot(point[0] - vertices[0][0], point[1] - vertices[0][1]) <= tol
    closed = vertices + vertices[:1] if len(vertices) >= 3 else vertices
    return min(_distance_to_segment(point, a, b) for a, b in zip(closed, closed[1:])) <= tol


def operating_points(ladder: Ladder, model: ChunkRqModel) -> list[RqPoint]:
    """(bitrate, quality) of every ladder entry."""
    return [
        RqPoint(e.bitrate, float(eval_quality(model.curve(e.resolution), e.bitrate)))
        for e in ladder.entries
    ]


class HullInterval(NamedTuple):
    resolution: int
    interval: Optional[tuple[float, float]]


def _upper_hull_vertices(curves: dict[int, RateQualityCurve]) -> list[tuple[RqPoint, int]]:
    best: dict[float, tuple[float, int]] = {}
    for resolution in sorted(curves):
        for sample in curves[resolution].samples:
            current = best.get(sample.bitrate)
            if current is None or sample.quality > current[0]:
                best[sample.bitrate] = (sample.quality, resolution)
    tagged = [(RqPoint(rate, q), res) for rate, (q, res) in sorted(best.items())]
    scale = _scale_for(p for p, _ in tagged)
    coords = [scale.apply(p) for p, _ in tagged]

    hull: list[int] = []
    for i in range(len(tagged)):
        while len(hull) >= 2 and _cross(coords[hull[-2]], coords[hull[-1]], coords[i]) >= -EPSILON:
            hull.pop()
        hull.append(i)
    # Vertices past the quality peak are dominated by a cheaper, better point.
    peak = max(range(len(hull)), key=lambda k: (tagged[hull[k]][0].quality, -k))
    return [tagged[i] for i in hull[: peak + 1]]


def upper_hull(curves: dict[int, RateQualityCurve]) -> list[HullInterval]:
    """Bitrate interval over which each resolution supplies upper-hull points.

    The hull is taken over all sample points of all curves. A resolution
    whose hull vertices are interrupted by another resolution keeps only
    its longest run, so intervals never overlap. Resolutions without hull
    vertices get ``None``.
    """
    if not curves:
        raise EmptyInputError("upper_hull needs at least one curve")
    vertices = _upper_hull_vertices(curves)

    runs: list[tuple[int, list[RqPoint]]] = []
    for point, resolution in vertices:
        if runs and runs[-1][0] == resolution:
            runs[-1][1].append(point)
        else:
            runs.append((resolution, [point]))

    chosen: dict[int, list[RqPoint]] = {}
    for resolution, run in runs:
        if len(run) > len(chosen.get(resolution, [])):
            chosen[resolution] = run

    result = []
    for resolution in sorted(curves):
        run = chosen.get(resolution)
        interval = (run[0].rate, run[-1].rate) if run else None
        result.append(HullInterval(resolution, interval))
    return result


def upper_hull_points(curves: dict[int, RateQualityCurve]) -> list[RqPoint]:
    """Vertices of the upper hull, ascending in rate."""
    return [p for p, _ in _upper_hull_vertices(curves)]
