"""Monte Carlo playback simulation.

Each session draws a viewport height once and a bandwidth estimate per
segment (or once per session), then applies the same selection rule as
the analytic model segment by segment. The resulting frequencies are an
independent check on the viewing probabilities and give per-resolution
watch time and switch rates for comparing ladders.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import MismatchedInputError, PreconditionError
from .player_model import Ladder, _partition, check_ladder_against_model
from .rq_model import ChunkRqModel, eval_quality
from .stats_ingest import BandwidthDistribution, ViewportDistribution

logger = logging.getLogger(__name__)


@dataclass
class SimConfig:
    """Simulation settings.

    Attributes:
        num_sessions: Number of playback sessions
        segments_per_session: Segments downloaded per session
        segment_duration: Seconds of video per segment
        seed: Base seed; session k uses the stream (seed, k)
        resample_bandwidth_per_segment: Draw a new bandwidth for every segment
            instead of once per session
    """

    num_sessions: int = 1000
    segments_per_session: int = 120
    segment_duration: float = 5.0
    seed: int = 0
    resample_bandwidth_per_segment: bool = True

    def __post_init__(self):
        if self.num_sessions < 1:
            raise ValueError(f"Session count must be >= 1, got {self.num_sessions}")
        if self.segments_per_session < 1:
            raise ValueError(
                f"Segments per session must be >= 1, got {self.segments_per_session}"
            )
        if not self.segment_duration > 0:
            raise ValueError(f"Segment duration must be positive, got {self.segment_duration}")
        if self.seed < 0:
            raise ValueError(f"Seed must be non-negative, got {self.seed}")


@dataclass
class SimReport:
    """Aggregated outcome of simulating one ladder.

    Attributes:
        chunk_id: Chunk the ladder belongs to
        ladder: Simulated ladder
        empirical_lambda: Fraction of segments served by each ladder entry
        empirical_avg_bitrate: Mean bitrate over all segments
        empirical_avg_quality: Mean quality over all segments
        watch_time_by_resolution: Fraction of segments per resolution
        switch_rate: Representation switches per session-hour
        fallback_fraction: Fraction of segments whose bitrate was not below the bandwidth
        segment_counts: Segments served by each ladder entry
        watch_hours: Total simulated playback in hours
    """

    chunk_id: str
    ladder: Ladder
    empirical_lambda: np.ndarray
    empirical_avg_bitrate: float
    empirical_avg_quality: float
    watch_time_by_resolution: dict[int, float]
    switch_rate: float
    fallback_fraction: float
    segment_counts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    watch_hours: float = 0.0

    def to_dict(self) -> dict:
        return {
            "chunk_id": self.chunk_id,
            "ladder": self.ladder.to_dict(),
            "empirical_lambda": self.empirical_lambda.tolist(),
            "empirical_avg_bitrate": self.empirical_avg_bitrate,
            "empirical_avg_quality": self.empirical_avg_quality,
            "watch_time_by_resolution": {
                str(r): share for r, share in self.watch_time_by_resolution.items()
            },
            "switch_rate": self.switch_rate,
            "fallback_fraction": self.fallback_fraction,
            "segment_counts": self.segment_counts.tolist(),
            "watch_hours": self.watch_hours,
        }


def simulate(
    ladder: Ladder,
    model: ChunkRqModel,
    vd: ViewportDistribution,
    bd: BandwidthDistribution,
    config: Optional[SimConfig] = None,
) -> SimReport:
    """Play back ``config.num_sessions`` sessions against a ladder.

    Deterministic for a given seed: every session draws from its own
    generator seeded with (seed, session index).

    Raises:
        MismatchedInputError: If the ladder uses a resolution the model lacks
    """
    config = config or SimConfig()
    check_ladder_against_model(ladder, model)
    n = len(ladder)
    rates = ladder.bitrates
    qualities = np.array(
        [eval_quality(model.curves[e.resolution], e.bitrate) for e in ladder.entries],
        dtype=float,
    )
    heights = np.array(vd.heights)
    probs = np.array([vd.pmf[h] for h in vd.heights], dtype=float)
    probs = probs / probs.sum()
    partitions = {int(h): _partition(ladder, int(h)) for h in heights}

    segments = config.segments_per_session
    counts = np.zeros(n, dtype=np.int64)
    switches = 0
    fallbacks = 0
    for session in range(config.num_sessions):
        rng = np.random.default_rng([config.seed, session])
        viewport = int(rng.choice(heights, p=probs))
        if config.resample_bandwidth_per_segment:
            bandwidth = bd.sample(rng, segments)
        else:
            bandwidth = np.repeat(bd.sample(rng, 1), segments)
        winners, cuts = partitions[viewport]
        below = np.searchsorted(cuts, bandwidth, side="left")
        chosen = winners[np.maximum(below - 1, 0)]
        counts += np.bincount(chosen, minlength=n)
        switches += int(np.count_nonzero(np.diff(chosen)))
        fallbacks += int(np.count_nonzero(below == 0))

    total = config.num_sessions * segments
    lam = counts / total
    watch_time: dict[int, float] = {}
    for entry, share in zip(ladder.entries, lam):
        watch_time[entry.resolution] = watch_time.get(entry.resolution, 0.0) + float(share)
    hours = total * config.segment_duration / 3600.0
    logger.debug(
        "Simulated %d segments of chunk %s: %d switches, %d fallbacks",
        total, model.chunk_id, switches, fallbacks,
    )
    return SimReport(
        chunk_id=model.chunk_id,
        ladder=ladder,
        empirical_lambda=lam,
        empirical_avg_bitrate=float(np.dot(lam, rates)),
        empirical_avg_quality=float(np.dot(lam, qualities)),
        watch_time_by_resolution=watch_time,
        switch_rate=switches / hours,
        fallback_fraction=fallbacks / total,
        segment_counts=counts,
        watch_hours=hours,
    )


def per_resolution_change(ladder: Ladder, reference: Ladder) -> dict[int, float]:
    """r/r0 - 1 for every resolution holding exactly one entry in both ladders."""

    def single_entries(l: Ladder) -> dict[int, float]:
        seen: dict[int, list[float]] = {}
        for entry in l.entries:
            seen.setdefault(entry.resolution, []).append(entry.bitrate)
        return {r: b[0] for r, b in seen.items() if len(b) == 1}

    ours, theirs = single_entries(ladder), single_entries(reference)
    return {r: ours[r] / theirs[r] - 1.0 for r in sorted(ours) if r in theirs}


@dataclass
class LadderComparison:
    """One ladder measured against the baseline report.

    Attributes:
        relative_bitrate_change: R / R_base - 1
        normalized_avg_bitrate: R / R_base
        quality_delta: Q - Q_base
        switch_rate_change: Switches per hour minus the baseline's
        watch_time_shift: Watch-time share minus the baseline's, per resolution
        per_resolution_change: r / r0 - 1 per resolution
    """

    relative_bitrate_change: float
    normalized_avg_bitrate: float
    quality_delta: float
    switch_rate_change: float
    watch_time_shift: dict[int, float]
    per_resolution_change: dict[int, float]

    def to_dict(self) -> dict:
        return {
            "relative_bitrate_change": self.relative_bitrate_change,
            "normalized_avg_bitrate": self.normalized_avg_bitrate,
            "quality_delta": self.quality_delta,
            "switch_rate_change": self.switch_rate_change,
            "watch_time_shift": {str(r): v for r, v in self.watch_time_shift.items()},
            "per_resolution_change": {str(r): v for r, v in self.per_resolution_change.items()},
        }


@dataclass
class ComparisonReport:
    """Every simulated ladder of a chunk compared with one baseline."""

    chunk_id: str
    baseline: str
    ladders: dict[str, LadderComparison]

    def to_dict(self) -> dict:
        return {
            "chunk_id": self.chunk_id,
            "baseline": self.baseline,
            "ladders": {name: c.to_dict() for name, c in self.ladders.items()},
        }


def compare(reports: dict[str, SimReport], baseline: Optional[str] = None) -> ComparisonReport:
    """Compare simulated ladders of one chunk against ``baseline``.

    ``baseline`` defaults to the first report.

    Raises:
        PreconditionError: If fewer than two reports are given or the baseline is unknown
        MismatchedInputError: If the reports come from different chunks
    """
    if len(reports) < 2:
        raise PreconditionError("compare needs at least two reports")
    baseline = baseline if baseline is not None else next(iter(reports))
    if baseline not in reports:
        raise PreconditionError(f"No report named {baseline!r}")
    chunk_ids = {r.chunk_id for r in reports.values()}
    if len(chunk_ids) > 1:
        raise MismatchedInputError(f"Reports come from different chunks: {sorted(chunk_ids)}")

    base = reports[baseline]
    result = {}
    for name, report in reports.items():
        if name == baseline:
            continue
        resolutions = sorted(set(base.watch_time_by_resolution) | set(report.watch_time_by_resolution))
        result[name] = LadderComparison(
            relative_bitrate_change=report.empirical_avg_bitrate / base.empirical_avg_bitrate - 1.0,
            normalized_avg_bitrate=report.empirical_avg_bitrate / base.empirical_avg_bitrate,
            quality_delta=report.empirical_avg_quality - base.empirical_avg_quality,
            switch_rate_change=report.switch_rate - base.switch_rate,
            watch_time_shift={
                r: report.watch_time_by_resolution.get(r, 0.0)
                - base.watch_time_by_resolution.get(r, 0.0)
                for r in resolutions
            },
            per_resolution_change=per_resolution_change(report.ladder, base.ladder),
        )
    return ComparisonReport(chunk_id=base.chunk_id, baseline=baseline, ladders=result)
