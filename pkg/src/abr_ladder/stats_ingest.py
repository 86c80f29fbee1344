"""Empirical viewport and bandwidth distributions from playback traces.

Viewport heights and estimated bandwidth are modelled as independent
stationary processes. Each trace record is one observation of both; the
bandwidth distribution is kept as an empirical CDF that can be queried
either as an exact step function or as a piecewise-linear interpolant
(which has a density and is what the optimizer differentiates).
"""

import gzip
import json
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Literal, Mapping, Optional

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike

from .errors import EmptyInputError, PreconditionError, TraceFormatError
from .output import save_json

logger = logging.getLogger(__name__)

Smoothing = Literal["step", "piecewise_linear"]
SMOOTHING_MODES: tuple[str, ...] = ("step", "piecewise_linear")

# Standard player viewport heights in pixels.
STANDARD_VIEWPORTS: tuple[int, ...] = (144, 240, 360, 480, 720, 1080, 1440, 2160)

TRACE_COLUMNS = ("estimated_bandwidth_bps", "viewport_height")
JSON_LINE_SUFFIXES = (".jsonl", ".ndjson", ".json")


def snap_viewport(height: ArrayLike):
    """Snap raw viewport heights down to the nearest standard height.

    Heights below the smallest standard height snap up to it.
    """
    table = np.asarray(STANDARD_VIEWPORTS)
    idx = np.searchsorted(table, height, side="right") - 1
    snapped = table[np.clip(idx, 0, len(table) - 1)]
    if np.ndim(height) == 0:
        return int(snapped)
    return snapped


@dataclass(frozen=True)
class TraceRecord:
    """One playback observation.

    Attributes:
        estimated_bandwidth: Player bandwidth estimate in bits/second
        viewport_height: Raw viewport height in pixels (snapped at ingestion)
        session_id: Optional playback session identifier
        timestamp: Optional timestamp in milliseconds
        weight: Relative weight of the record
    """

    estimated_bandwidth: float
    viewport_height: int
    session_id: Optional[str] = None
    timestamp: Optional[float] = None
    weight: float = 1.0

    def __post_init__(self):
        if not (self.estimated_bandwidth > 0 and math.isfinite(self.estimated_bandwidth)):
            raise ValueError(
                f"Estimated bandwidth must be positive, got {self.estimated_bandwidth}"
            )
        if not self.viewport_height > 0:
            raise ValueError(f"Viewport height must be positive, got {self.viewport_height}")
        if not (self.weight > 0 and math.isfinite(self.weight)):
            raise ValueError(f"Weight must be positive, got {self.weight}")

    @classmethod
    def from_mapping(cls, row: Mapping[str, Any]) -> "TraceRecord":
        """Build a record from a CSV/JSON row using the trace file field names."""
        return cls(
            estimated_bandwidth=float(row["estimated_bandwidth_bps"]),
            viewport_height=int(float(row["viewport_height"])),
            session_id=row.get("session_id"),
            timestamp=row.get("timestamp_ms"),
            weight=float(row.get("weight", 1.0)),
        )


@dataclass(frozen=True)
class ViewportDistribution:
    """Probability mass over standard viewport heights.

    Attributes:
        pmf: Probability of each viewport height
    """

    pmf: dict[int, float]

    def __post_init__(self):
        if not self.pmf:
            raise ValueError("Viewport PMF is empty")
        for height, prob in self.pmf.items():
            if height not in STANDARD_VIEWPORTS:
                raise ValueError(f"Viewport height {height} is not a standard height")
            if prob < 0:
                raise ValueError(f"Probability for {height}p is negative: {prob}")
        total = math.fsum(self.pmf.values())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"Viewport probabilities sum to {total}, expected 1")

    @property
    def heights(self) -> list[int]:
        return sorted(self.pmf)

    def items(self) -> list[tuple[int, float]]:
        """(height, probability) pairs in ascending height order."""
        return [(h, self.pmf[h]) for h in self.heights]

    def to_dict(self) -> dict:
        return {str(h): p for h, p in self.items()}


@dataclass(frozen=True, eq=False)
class BandwidthDistribution:
    """Empirical distribution of estimated bandwidth.

    Attributes:
        support: Distinct bandwidth values, strictly ascending
        cdf_at_support: Cumulative probability at each support point, ending at 1
        smoothing: How the CDF is evaluated between support points
    """

    support: np.ndarray
    cdf_at_support: np.ndarray
    smoothing: Smoothing = "step"

    def __post_init__(self):
        support = np.array(self.support, dtype=float)
        cdf = np.array(self.cdf_at_support, dtype=float)
        if support.ndim != 1 or support.size == 0:
            raise ValueError("Bandwidth support must be a non-empty 1-D sequence")
        if support.shape != cdf.shape:
            raise ValueError("Bandwidth support and CDF lengths differ")
        if np.any(np.diff(support) <= 0):
            raise ValueError("Bandwidth support must be strictly ascending")
        if support[0] <= 0:
            raise ValueError("Bandwidth support must be positive")
        if np.any(cdf < 0) or np.any(np.diff(cdf) < 0):
            raise ValueError("Bandwidth CDF must be non-negative and non-decreasing")
        if abs(cdf[-1] - 1.0) > 1e-12:
            raise ValueError(f"Bandwidth CDF ends at {cdf[-1]}, expected 1")
        if self.smoothing not in SMOOTHING_MODES:
            raise ValueError(f"Unknown CDF smoothing {self.smoothing!r}")
        cdf[-1] = 1.0
        support.flags.writeable = False
        cdf.flags.writeable = False
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "cdf_at_support", cdf)

    @classmethod
    def from_samples(
        cls,
        values: ArrayLike,
        weights: Optional[ArrayLike] = None,
        smoothing: Smoothing = "step",
    ) -> "BandwidthDistribution":
        """Empirical distribution of bandwidth samples; repeated values merge."""
        values = np.asarray(values, dtype=float)
        if values.size == 0:
            raise EmptyInputError("No bandwidth samples")
        if weights is None:
            weights = np.ones_like(values)
        support, inverse = np.unique(values, return_inverse=True)
        mass = np.bincount(inverse, weights=np.asarray(weights, dtype=float))
        cdf = np.cumsum(mass) / mass.sum()
        cdf[-1] = 1.0
        return cls(support=support, cdf_at_support=cdf, smoothing=smoothing)

    def with_smoothing(self, smoothing: Smoothing) -> "BandwidthDistribution":
        if smoothing == self.smoothing:
            return self
        return BandwidthDistribution(self.support, self.cdf_at_support, smoothing)

    @property
    def masses(self) -> np.ndarray:
        return np.diff(self.cdf_at_support, prepend=0.0)

    def cdf(self, x: ArrayLike):
        """P[R <= x] under the configured smoothing."""
        x = np.asarray(x, dtype=float)
        support = self.support
        if self.smoothing == "step":
            idx = np.searchsorted(support, x, side="right") - 1
            values = np.where(idx >= 0, self.cdf_at_support[np.maximum(idx, 0)], 0.0)
        else:
            values = np.where(
                x < support[0], 0.0, np.interp(x, support, self.cdf_at_support)
            )
        if values.ndim == 0:
            return float(values)
        return values

    def density(self, x: ArrayLike):
        """Right-hand slope of the piecewise-linear CDF; 0 outside the support.

        Raises:
            PreconditionError: If the distribution uses step smoothing
        """
        if self.smoothing == "step":
            raise PreconditionError("Bandwidth density is undefined for step smoothing")
        support = self.support
        if support.size < 2:
            return 0.0 if np.ndim(x) == 0 else np.zeros(np.shape(x))
        slopes = np.diff(self.cdf_at_support) / np.diff(support)
        idx = np.searchsorted(support, x, side="right") - 1
        inside = (idx >= 0) & (idx < support.size - 1)
        values = np.where(inside, slopes[np.clip(idx, 0, support.size - 2)], 0.0)
        if np.ndim(x) == 0:
            return float(values)
        return values

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw bandwidth values by inverting the CDF."""
        u = rng.random(size)
        if self.smoothing == "step":
            idx = np.searchsorted(self.cdf_at_support, u, side="right")
            return self.support[np.minimum(idx, self.support.size - 1)]
        interpolated = np.interp(u, self.cdf_at_support, self.support)
        return np.where(u < self.cdf_at_support[0], self.support[0], interpolated)

    def mean(self) -> float:
        """Mean of the step distribution."""
        return float(np.dot(self.support, self.masses))

    def to_dict(self) -> dict:
        return {
            "support": self.support.tolist(),
            "cdf": self.cdf_at_support.tolist(),
            "smoothing": self.smoothing,
        }


def prob_viewport_eq(d: ViewportDistribution, v: int) -> float:
    """P[V = v]."""
    return d.pmf.get(v, 0.0)


def prob_viewport_gt(d: ViewportDistribution, v: int) -> float:
    """P[V > v]."""
    return math.fsum(p for h, p in d.pmf.items() if h > v)


def prob_viewport_lt(d: ViewportDistribution, v: int) -> float:
    """P[V < v]."""
    return math.fsum(p for h, p in d.pmf.items() if h < v)


def prob_bw_gt(d: BandwidthDistribution, x: float) -> float:
    """P[R > x]."""
    return 1.0 - d.cdf(x)


def prob_bw_interval(d: BandwidthDistribution, lo: float, hi: float) -> float:
    """P[lo < R <= hi]; ``hi`` may be ``math.inf``.

    Raises:
        PreconditionError: If lo > hi
    """
    if lo > hi:
        raise PreconditionError(f"Interval lower bound {lo} exceeds upper bound {hi}")
    if math.isinf(hi):
        return 1.0 - d.cdf(lo)
    return d.cdf(hi) - d.cdf(lo)


def bw_density(d: BandwidthDistribution, x: float) -> float:
    """Density of the piecewise-linear bandwidth CDF at ``x``."""
    return d.density(x)


@dataclass
class TraceIngest:
    """Distributions built from a trace source, with record accounting.

    Attributes:
        viewport: Viewport distribution
        bandwidth: Bandwidth distribution
        records_read: Number of valid records used
        records_skipped: Number of malformed records skipped
    """

    viewport: ViewportDistribution
    bandwidth: BandwidthDistribution
    records_read: int
    records_skipped: int = 0
    source: Optional[str] = None
    meta: dict[str, Any] = field(default_factory=dict)


def distributions_from_arrays(
    bandwidth: ArrayLike,
    viewport: ArrayLike,
    weights: Optional[ArrayLike] = None,
    smoothing: Smoothing = "step",
    skipped_upstream: int = 0,
) -> TraceIngest:
    """Build both distributions from parallel arrays, skipping malformed rows.

    A row is malformed when its bandwidth is missing, non-finite or not
    positive, its viewport height is missing or not positive, or its weight
    is not positive. ``skipped_upstream`` counts records the caller already
    dropped before building the arrays; it is added to ``records_skipped``.

    Raises:
        EmptyInputError: If no valid rows remain
    """
    bandwidth = np.asarray(bandwidth, dtype=float)
    viewport = np.asarray(viewport, dtype=float)
    valid = np.isfinite(bandwidth) & (bandwidth > 0) & np.isfinite(viewport) & (viewport > 0)
    if weights is not None:
        weights = np.asarray(weights, dtype=float)
        valid &= np.isfinite(weights) & (weights > 0)
    skipped = int(bandwidth.size - valid.sum()) + skipped_upstream
    if not valid.any():
        raise EmptyInputError("No valid trace records")

    bandwidth = bandwidth[valid]
    heights = snap_viewport(viewport[valid].astype(np.int64))
    w = weights[valid] if weights is not None else np.ones(bandwidth.size)

    keys, inverse = np.unique(heights, return_inverse=True)
    mass = np.bincount(inverse, weights=w)
    probs = mass / mass.sum()
    pmf = {int(h): float(p) for h, p in zip(keys, probs)}
    # Push rounding residue onto the largest bucket so the PMF sums to 1.
    top = max(pmf, key=pmf.get)
    pmf[top] += 1.0 - math.fsum(pmf.values())

    if skipped:
        logger.warning("Skipped %d malformed trace record(s)", skipped)
    return TraceIngest(
        viewport=ViewportDistribution(pmf),
        bandwidth=BandwidthDistribution.from_samples(bandwidth, w, smoothing),
        records_read=int(bandwidth.size),
        records_skipped=skipped,
    )


def ingest_traces(
    records: Iterable[TraceRecord | Mapping[str, Any]],
    smoothing: Smoothing = "step",
) -> tuple[ViewportDistribution, BandwidthDistribution]:
    """Build viewport and bandwidth distributions from a stream of records.

    Records may be ``TraceRecord`` objects or mappings with the trace file
    field names; mappings that don't form a valid record are skipped.

    Raises:
        EmptyInputError: If no valid records were seen
    """
    result = _ingest_records(records, smoothing)
    return result.viewport, result.bandwidth


def _ingest_records(
    records: Iterable[TraceRecord | Mapping[str, Any]], smoothing: Smoothing
) -> TraceIngest:
    bandwidth: list[float] = []
    viewport: list[int] = []
    weights: list[float] = []
    skipped = 0
    for record in records:
        if not isinstance(record, TraceRecord):
            try:
                record = TraceRecord.from_mapping(record)
            except (KeyError, TypeError, ValueError):
                skipped += 1
                continue
        bandwidth.append(record.estimated_bandwidth)
        viewport.append(record.viewport_height)
        weights.append(record.weight)
    if not bandwidth:
        raise EmptyInputError("No valid trace records")
    return distributions_from_arrays(bandwidth, viewport, weights, smoothing, skipped_upstream=skipped)


def _open_text(path: Path):
    if path.suffix == ".gz":
        return gzip.open(path, "rt", encoding="utf-8")
    return open(path, "r", encoding="utf-8")


def _read_json_lines(path: Path, smoothing: Smoothing) -> TraceIngest:
    def rows():
        with _open_text(path) as handle:
            for line_number, line in enumerate(handle, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    row = json.loads(line)
                except json.JSONDecodeError:
                    logger.debug("Unparsable JSON on line %d of %s", line_number, path)
                    row = None
                yield row if isinstance(row, dict) else {}

    return _ingest_records(rows(), smoothing)


def _read_csv(path: Path, smoothing: Smoothing) -> TraceIngest:
    try:
        frame = pd.read_csv(path, compression="infer", dtype=str, skipinitialspace=True)
    except pd.errors.EmptyDataError as e:
        raise TraceFormatError("trace file is empty", line=1) from e
    except pd.errors.ParserError as e:
        match = re.search(r"line (\d+)", str(e))
        raise TraceFormatError(str(e), line=int(match.group(1)) if match else None) from e

    missing = [c for c in TRACE_COLUMNS if c not in frame.columns]
    if missing:
        raise TraceFormatError(f"missing required column(s): {', '.join(missing)}", line=1)

    weights = None
    if "weight" in frame.columns:
        weights = pd.to_numeric(frame["weight"], errors="coerce").to_numpy(dtype=float)
    return distributions_from_arrays(
        pd.to_numeric(frame["estimated_bandwidth_bps"], errors="coerce").to_numpy(dtype=float),
        pd.to_numeric(frame["viewport_height"], errors="coerce").to_numpy(dtype=float),
        weights,
        smoothing,
    )


def read_trace_file(file_path: str | Path, smoothing: Smoothing = "step") -> TraceIngest:
    """Read a CSV or JSON-lines trace file (optionally gzip-compressed).

    Raises:
        FileNotFoundError: If the file doesn't exist
        TraceFormatError: If the file structure cannot be parsed
        EmptyInputError: If it contains no valid records
    """
    file_path = Path(file_path)
    if not file_path.exists():
        raise FileNotFoundError(f"File not found: {file_path}")

    suffixes = [s.lower() for s in file_path.suffixes]
    if suffixes and suffixes[-1] == ".gz":
        suffixes = suffixes[:-1]
    if suffixes and suffixes[-1] in JSON_LINE_SUFFIXES:
        result = _read_json_lines(file_path, smoothing)
    else:
        result = _read_csv(file_path, smoothing)
    result.source = str(file_path)
    return result


def distributions_to_dict(vd: ViewportDistribution, bd: BandwidthDistribution) -> dict:
    return {
        "schema_version": 1,
        "viewport_pmf": vd.to_dict(),
        "bandwidth": bd.to_dict(),
    }


def distributions_from_dict(data: dict) -> tuple[ViewportDistribution, BandwidthDistribution]:
    try:
        vd = ViewportDistribution({int(h): float(p) for h, p in data["viewport_pmf"].items()})
        bw = data["bandwidth"]
        bd = BandwidthDistribution(
            support=np.asarray(bw["support"], dtype=float),
            cdf_at_support=np.asarray(bw["cdf"], dtype=float),
            smoothing=bw.get("smoothing", "step"),
        )
    except KeyError as e:
        raise ValueError(f"Distributions file is missing field {e}") from e
    return vd, bd


def save_distributions(
    vd: ViewportDistribution, bd: BandwidthDistribution, output_path: str | Path
) -> None:
    save_json(distributions_to_dict(vd, bd), output_path)


def load_distributions(
    file_path: str | Path,
) -> tuple[ViewportDistribution, BandwidthDistribution]:
    """Read a distributions file written by ``save_distributions``."""
    file_path = Path(file_path)
    if not file_path.exists():
        raise FileNotFoundError(f"File not found: {file_path}")
    return distributions_from_dict(json.loads(file_path.read_text(encoding="utf-8")))
