"""Analytic model of how players pick representations from a ladder.

A player never requests a representation taller than its viewport, and
among those it requests the highest bitrate strictly below its bandwidth
estimate. Bandwidth at or below every eligible bitrate falls back to the
cheapest eligible representation, and a viewport smaller than every
representation relaxes eligibility to the first ladder entry.

Viewing probabilities are computed from that selection rule by splitting
the bandwidth axis at the eligible bitrates for every viewport height, so
they stay exact when the ladder has several representations per resolution.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Optional

import numpy as np

from .errors import CurveRangeError, MismatchedInputError
from .rq_model import ChunkRqModel, bitrate_range, eval_quality, eval_quality_slope
from .stats_ingest import (
    BandwidthDistribution,
    ViewportDistribution,
    prob_bw_gt,
    prob_bw_interval,
    prob_viewport_eq,
    prob_viewport_gt,
)


class LadderEntry(NamedTuple):
    resolution: int
    bitrate: float


@dataclass(frozen=True)
class Ladder:
    """An encoding ladder ordered by bitrate.

    Attributes:
        entries: (resolution, bitrate) pairs, ascending by bitrate then resolution
        chunk_id: Optional chunk the ladder was built for
    """

    entries: tuple[LadderEntry, ...]
    chunk_id: Optional[str] = None

    def __post_init__(self):
        entries = tuple(LadderEntry(int(r), float(b)) for r, b in self.entries)
        object.__setattr__(self, "entries", entries)
        if not entries:
            raise ValueError("Ladder must have at least one entry")
        for entry in entries:
            if not entry.bitrate > 0 or not math.isfinite(entry.bitrate):
                raise ValueError(f"Ladder bitrate must be positive, got {entry.bitrate}")
        for prev, cur in zip(entries, entries[1:]):
            if (cur.bitrate, cur.resolution) < (prev.bitrate, prev.resolution):
                raise ValueError("Ladder entries must be ordered by bitrate, then resolution")
            if cur == prev:
                raise ValueError(
                    f"Duplicate ladder entry {cur.resolution}p at {cur.bitrate} bps"
                )
            if cur.resolution < prev.resolution:
                raise ValueError(
                    f"Resolution decreases along the ladder ({prev.resolution}p at "
                    f"{prev.bitrate} bps, then {cur.resolution}p at {cur.bitrate} bps)"
                )

    @classmethod
    def from_pairs(
        cls, pairs: Iterable[tuple[int, float]], chunk_id: Optional[str] = None
    ) -> "Ladder":
        """Build a ladder from unordered (resolution, bitrate) pairs."""
        entries = sorted((LadderEntry(int(r), float(b)) for r, b in pairs), key=lambda e: (e.bitrate, e.resolution))
        return cls(entries=tuple(entries), chunk_id=chunk_id)

    @classmethod
    def from_bitrates(
        cls, resolutions: Iterable[int], bitrates: Iterable[float], chunk_id: Optional[str] = None
    ) -> "Ladder":
        return cls(entries=tuple(zip(resolutions, bitrates)), chunk_id=chunk_id)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def bitrates(self) -> np.ndarray:
        return np.array([e.bitrate for e in self.entries], dtype=float)

    @property
    def resolutions(self) -> list[int]:
        return [e.resolution for e in self.entries]

    def to_dict(self) -> dict:
        result: dict = {}
        if self.chunk_id is not None:
            result["chunk_id"] = self.chunk_id
        result["entries"] = [
            {"resolution": e.resolution, "bitrate": e.bitrate} for e in self.entries
        ]
        return result


def ladder_from_dict(data: dict) -> Ladder:
    try:
        return Ladder.from_pairs(
            ((e["resolution"], e["bitrate"]) for e in data["entries"]),
            chunk_id=data.get("chunk_id"),
        )
    except KeyError as e:
        raise ValueError(f"Ladder is missing field {e}") from e


def load_ladder(file_path: str | Path) -> Ladder:
    file_path = Path(file_path)
    if not file_path.exists():
        raise FileNotFoundError(f"File not found: {file_path}")
    return ladder_from_dict(json.loads(file_path.read_text(encoding="utf-8")))


def check_ladder_against_model(ladder: Ladder, model: ChunkRqModel) -> None:
    """Raise MismatchedInputError if the ladder uses a resolution the model lacks."""
    missing = sorted({r for r in ladder.resolutions if r not in model.curves})
    if missing:
        raise MismatchedInputError(
            f"Ladder uses resolution(s) {missing} not present in chunk {model.chunk_id!r}"
        )


@dataclass
class ModelEvaluation:
    """Expected streaming behaviour of a ladder.

    Attributes:
        viewing_prob: Probability of each ladder entry being streamed
        avg_bitrate: Expected streaming bitrate
        avg_quality: Expected delivered quality
        grad_bitrate: dR/dr_i
        grad_quality: dQ/dr_i
        qualities: Encoding quality of each entry
        fallback_prob: Probability that bandwidth is at or below every eligible bitrate
    """

    viewing_prob: np.ndarray
    avg_bitrate: float
    avg_quality: float
    grad_bitrate: np.ndarray
    grad_quality: np.ndarray
    qualities: np.ndarray = field(default_factory=lambda: np.zeros(0))
    fallback_prob: float = 0.0

    def to_dict(self) -> dict:
        return {
            "viewing_prob": self.viewing_prob.tolist(),
            "avg_bitrate": self.avg_bitrate,
            "avg_quality": self.avg_quality,
            "grad_bitrate": self.grad_bitrate.tolist(),
            "grad_quality": self.grad_quality.tolist(),
            "qualities": self.qualities.tolist(),
            "fallback_prob": self.fallback_prob,
        }


def _partition(ladder: Ladder, viewport: int) -> tuple[np.ndarray, np.ndarray]:
    """Entries selectable at ``viewport`` and the bitrates splitting the bandwidth axis.

    Returns ``(winners, cuts)``: bandwidth in (cuts[g], cuts[g+1]] selects
    ``winners[g]``, bandwidth at or below cuts[0] falls back to ``winners[0]``.
    Equal bitrates collapse to the highest-resolution entry.
    """
    winners: list[int] = []
    cuts: list[float] = []
    for i, entry in enumerate(ladder.entries):
        if entry.resolution > viewport:
            break
        if cuts and entry.bitrate == cuts[-1]:
            winners[-1] = i
        else:
            winners.append(i)
            cuts.append(entry.bitrate)
    if not winners:
        return np.array([0]), np.array([ladder.entries[0].bitrate])
    return np.array(winners), np.array(cuts)


def _shares(cuts: np.ndarray, bd: BandwidthDistribution) -> tuple[np.ndarray, np.ndarray]:
    cdf = np.atleast_1d(bd.cdf(cuts))
    upper = np.append(cdf[1:], 1.0)
    share = upper - cdf
    share[0] = upper[0]
    return share, cdf


def select_representation(ladder: Ladder, viewport: int, bandwidth: float) -> int:
    """Index of the ladder entry a player with this viewport and bandwidth requests."""
    winners, cuts = _partition(ladder, viewport)
    below = int(np.searchsorted(cuts, bandwidth, side="left"))
    return int(winners[max(below - 1, 0)])


def viewing_probabilities(
    ladder: Ladder, vd: ViewportDistribution, bd: BandwidthDistribution
) -> np.ndarray:
    """Probability that each ladder entry is selected."""
    lam = np.zeros(len(ladder))
    for viewport, prob in vd.items():
        winners, cuts = _partition(ladder, viewport)
        share, _ = _shares(cuts, bd)
        lam[winners] += prob * share
    return lam


def closed_form_viewing_probabilities(
    ladder: Ladder, vd: ViewportDistribution, bd: BandwidthDistribution
) -> np.ndarray:
    """Two-term factorized selection probabilities.

    lambda_i = P[V = v_i] P[R > r_i] + P[V > v_i] P[r_i < R <= r_{i+1}],
    with r_{n+1} = inf. Agrees with ``viewing_probabilities`` only for one
    representation per resolution, viewport mass on ladder resolutions (or
    above the top one), and no bandwidth mass at or below r_1.
    """
    entries = ladder.entries
    lam = np.zeros(len(entries))
    for i, entry in enumerate(entries):
        upper = entries[i + 1].bitrate if i + 1 < len(entries) else math.inf
        lam[i] = prob_viewport_eq(vd, entry.resolution) * prob_bw_gt(bd, entry.bitrate)
        lam[i] += prob_viewport_gt(vd, entry.resolution) * prob_bw_interval(
            bd, entry.bitrate, upper
        )
    return lam


def fallback_probability(
    ladder: Ladder, vd: ViewportDistribution, bd: BandwidthDistribution
) -> float:
    """Probability that the selected entry's bitrate is not below the bandwidth."""
    total = 0.0
    for viewport, prob in vd.items():
        _, cuts = _partition(ladder, viewport)
        total += prob * bd.cdf(cuts[0])
    return float(total)


def evaluate(
    ladder: Ladder,
    model: ChunkRqModel,
    vd: ViewportDistribution,
    bd: BandwidthDistribution,
    clamp: bool = True,
) -> ModelEvaluation:
    """Expected bitrate and quality of a ladder, with analytic gradients.

    Gradients hold the direct terms (each entry's own rate or quality slope
    weighted by its viewing probability) plus, under piecewise-linear CDF
    smoothing, the probability shift at each bitrate boundary. Under step
    smoothing the shift terms vanish almost everywhere and are omitted.

    Raises:
        MismatchedInputError: If a ladder resolution has no curve in the model
        CurveRangeError: If ``clamp`` is off and a bitrate lies outside its curve
    """
    check_ladder_against_model(ladder, model)
    rates = ladder.bitrates
    curves = [model.curves[e.resolution] for e in ladder.entries]
    if not clamp:
        for curve, rate in zip(curves, rates):
            lo, hi = bitrate_range(curve)
            if not lo <= rate <= hi:
                raise CurveRangeError(
                    f"{rate} bps lies outside the {curve.resolution}p curve range [{lo}, {hi}]"
                )
    q = np.array([eval_quality(c, r) for c, r in zip(curves, rates)], dtype=float)
    dq = np.array([eval_quality_slope(c, r) for c, r in zip(curves, rates)], dtype=float)

    n = len(ladder)
    lam = np.zeros(n)
    grad_r = np.zeros(n)
    grad_q = np.zeros(n)
    fallback = 0.0
    smooth = bd.smoothing == "piecewise_linear"
    for viewport, prob in vd.items():
        winners, cuts = _partition(ladder, viewport)
        share, cdf = _shares(cuts, bd)
        fallback += prob * cdf[0]
        lam[winners] += prob * share
        grad_r[winners] += prob * share
        grad_q[winners] += prob * share * dq[winners]
        if smooth and winners.size > 1:
            # Raising cut g moves mass from winner g down to winner g-1.
            density = np.atleast_1d(bd.density(cuts[1:]))
            grad_r[winners[1:]] += prob * density * (rates[winners[:-1]] - rates[winners[1:]])
            grad_q[winners[1:]] += prob * density * (q[winners[:-1]] - q[winners[1:]])

    return ModelEvaluation(
        viewing_prob=lam,
        avg_bitrate=float(np.dot(lam, rates)),
        avg_quality=float(np.dot(lam, q)),
        grad_bitrate=grad_r,
        grad_quality=grad_q,
        qualities=q,
        fallback_prob=float(fallback),
    )
