"""Rate-quality models for video chunks.

Each chunk is described by one piecewise-linear rate-quality curve per
output resolution, built from ingested (bitrate, quality) samples. Quality
units are whatever metric produced the samples; nothing here assumes dB.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike

logger = logging.getLogger(__name__)

# CRF values of the encoder sweep, lowest quality first.
DEFAULT_CRF_SWEEP: tuple[int, ...] = tuple(range(55, 0, -5))


@dataclass(frozen=True)
class RqSample:
    """One sampled point of a rate-quality curve.

    Attributes:
        bitrate: Encoded bitrate in bits/second
        quality: Measured quality in the chunk's metric units
        label: Optional tag for the encoder setting that produced it (e.g. "crf23")
    """

    bitrate: float
    quality: float
    label: Optional[str] = None

    def __post_init__(self):
        if not self.bitrate > 0 or not math.isfinite(self.bitrate):
            raise ValueError(f"Bitrate must be positive and finite, got {self.bitrate}")
        if not math.isfinite(self.quality):
            raise ValueError(f"Quality must be finite, got {self.quality}")

    def to_dict(self) -> dict:
        result = {"bitrate": self.bitrate, "quality": self.quality}
        if self.label is not None:
            result["label"] = self.label
        return result


@dataclass(frozen=True)
class RateQualityCurve:
    """Piecewise-linear quality as a function of bitrate at one resolution.

    Attributes:
        resolution: Output height in pixels
        samples: Samples sorted strictly ascending by bitrate, quality non-decreasing
    """

    resolution: int
    samples: tuple[RqSample, ...]

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        if self.resolution <= 0:
            raise ValueError(f"Resolution must be positive, got {self.resolution}")
        if len(self.samples) < 2:
            raise ValueError(
                f"Curve at {self.resolution}p needs at least 2 samples, "
                f"got {len(self.samples)}"
            )
        for prev, cur in zip(self.samples, self.samples[1:]):
            if cur.bitrate <= prev.bitrate:
                raise ValueError(
                    f"Curve at {self.resolution}p: bitrates must be strictly ascending "
                    f"({prev.bitrate} then {cur.bitrate})"
                )
            if cur.quality < prev.quality:
                raise ValueError(
                    f"Curve at {self.resolution}p: quality decreases between "
                    f"{prev.bitrate} and {cur.bitrate} bps"
                )

    @cached_property
    def rates(self) -> np.ndarray:
        return np.array([s.bitrate for s in self.samples], dtype=float)

    @cached_property
    def qualities(self) -> np.ndarray:
        return np.array([s.quality for s in self.samples], dtype=float)

    @cached_property
    def slopes(self) -> np.ndarray:
        return np.diff(self.qualities) / np.diff(self.rates)

    def sample_with_label(self, label: str) -> Optional[RqSample]:
        for sample in self.samples:
            if sample.label == label:
                return sample
        return None

    def to_dict(self) -> dict:
        return {
            "resolution": self.resolution,
            "samples": [s.to_dict() for s in self.samples],
        }


@dataclass(frozen=True)
class ChunkRqModel:
    """All rate-quality curves of one chunk.

    Attributes:
        chunk_id: Identifier of the chunk
        source_resolution: Height of the source video in pixels
        curves: Curves keyed by resolution
    """

    chunk_id: str
    source_resolution: int
    curves: dict[int, RateQualityCurve] = field(default_factory=dict)

    def __post_init__(self):
        if not self.curves:
            raise ValueError(f"Chunk {self.chunk_id!r} has no curves")
        for resolution, curve in self.curves.items():
            if curve.resolution != resolution:
                raise ValueError(
                    f"Chunk {self.chunk_id!r}: curve keyed {resolution}p "
                    f"reports resolution {curve.resolution}p"
                )
            if resolution > self.source_resolution:
                raise ValueError(
                    f"Chunk {self.chunk_id!r}: {resolution}p exceeds source "
                    f"resolution {self.source_resolution}p"
                )

    @property
    def resolutions(self) -> list[int]:
        return sorted(self.curves)

    def curve(self, resolution: int) -> RateQualityCurve:
        try:
            return self.curves[resolution]
        except KeyError:
            raise KeyError(
                f"Chunk {self.chunk_id!r} has no curve at {resolution}p"
            ) from None

    def to_dict(self) -> dict:
        return {
            "chunk_id": self.chunk_id,
            "source_resolution": self.source_resolution,
            "curves": [self.curves[r].to_dict() for r in self.resolutions],
        }


class CurveParams(NamedTuple):
    """Parameters of the synthetic curve q(r) = a + b*log(1 + r/r_knee)."""

    a: float
    b: float
    r_knee: float


def eval_quality(curve: RateQualityCurve, bitrate: ArrayLike):
    """Quality at ``bitrate``, linearly interpolated and clamped to the sampled range."""
    return np.interp(bitrate, curve.rates, curve.qualities)


def eval_quality_slope(curve: RateQualityCurve, bitrate: ArrayLike):
    """Right-hand slope of the active segment; 0 outside the sampled range."""
    rates = curve.rates
    idx = np.searchsorted(rates, bitrate, side="right") - 1
    inside = (idx >= 0) & (idx < len(rates) - 1)
    slopes = np.where(inside, curve.slopes[np.clip(idx, 0, len(rates) - 2)], 0.0)
    if np.ndim(bitrate) == 0:
        return float(slopes)
    return slopes


def bitrate_range(curve: RateQualityCurve) -> tuple[float, float]:
    """Lowest and highest sampled bitrate."""
    return curve.samples[0].bitrate, curve.samples[-1].bitrate


def curve_from_samples(
    resolution: int, samples: Iterable[RqSample], repair: bool = True
) -> RateQualityCurve:
    """Build a curve from unordered samples.

    Samples are sorted by bitrate. With ``repair`` enabled a quality that
    drops below an earlier one is raised to the running maximum and a
    warning is logged; otherwise the curve constructor rejects it.

    Raises:
        ValueError: On duplicate bitrates, fewer than 2 samples, or (without
            repair) non-monotone quality
    """
    ordered = sorted(samples, key=lambda s: s.bitrate)
    if not repair:
        return RateQualityCurve(resolution=resolution, samples=tuple(ordered))

    repaired = []
    running = -math.inf
    fixed = 0
    for sample in ordered:
        if sample.quality < running:
            fixed += 1
            sample = RqSample(sample.bitrate, running, sample.label)
        running = sample.quality
        repaired.append(sample)
    if fixed:
        logger.warning(
            "Repaired %d non-monotone quality sample(s) at %dp", fixed, resolution
        )
    return RateQualityCurve(resolution=resolution, samples=tuple(repaired))


def synth_curve(
    resolution: int,
    params: CurveParams | Sequence[float],
    crfs: Sequence[int] = DEFAULT_CRF_SWEEP,
) -> RateQualityCurve:
    """Generate a concave synthetic curve q(r) = a + b*log(1 + r/r_knee).

    One sample per CRF value, at bitrate r_knee * 10**(2 - (crf - 5)/10),
    so the default sweep (55 down to 5) spans five decades around the knee
    with log-spaced bitrates. Samples are labelled ``crf<value>``.

    Raises:
        ValueError: If any parameter is not positive
    """
    a, b, r_knee = params
    if a <= 0 or b <= 0 or r_knee <= 0:
        raise ValueError(f"Curve parameters must be positive, got a={a}, b={b}, r_knee={r_knee}")

    samples = []
    for crf in sorted(set(crfs), reverse=True):
        bitrate = r_knee * 10.0 ** (2.0 - (crf - 5) / 10.0)
        quality = a + b * math.log1p(bitrate / r_knee)
        samples.append(RqSample(bitrate=bitrate, quality=quality, label=f"crf{crf}"))
    return RateQualityCurve(resolution=resolution, samples=tuple(samples))


def chunk_model_from_dict(data: dict, repair: bool = True) -> ChunkRqModel:
    """Build a chunk model from its JSON form."""
    try:
        curves = {}
        for entry in data["curves"]:
            resolution = int(entry["resolution"])
            if resolution in curves:
                raise ValueError(f"Duplicate curve for {resolution}p")
            samples = [
                RqSample(
                    bitrate=float(s["bitrate"]),
                    quality=float(s["quality"]),
                    label=s.get("label"),
                )
                for s in entry["samples"]
            ]
            curves[resolution] = curve_from_samples(resolution, samples, repair=repair)
        return ChunkRqModel(
            chunk_id=str(data["chunk_id"]),
            source_resolution=int(data["source_resolution"]),
            curves=curves,
        )
    except KeyError as e:
        raise ValueError(f"RQ model is missing field {e}") from e


def load_chunk_model(file_path: str | Path, repair: bool = True) -> ChunkRqModel:
    """Read one chunk's RQ model file.

    Raises:
        FileNotFoundError: If the file doesn't exist
        ValueError: If the file is not a valid RQ model
    """
    file_path = Path(file_path)
    if not file_path.exists():
        raise FileNotFoundError(f"File not found: {file_path}")
    try:
        data = json.loads(file_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ValueError(f"Failed to parse RQ model {file_path}: {e}") from e
    return chunk_model_from_dict(data, repair=repair)
