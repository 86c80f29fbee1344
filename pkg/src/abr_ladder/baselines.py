"""Comparison ladders: one fixed encoder setting everywhere, or points on the upper hull."""

import logging
import math
from dataclasses import dataclass
from typing import Literal, Optional

from .errors import MissingAnchorError, MissingLabelError, PreconditionError
from .player_model import Ladder
from .region import upper_hull
from .rq_model import ChunkRqModel, bitrate_range

logger = logging.getLogger(__name__)

BaselineKind = Literal["fixed_label", "hull_maximizing"]

DEFAULT_LABEL = "crf23"


@dataclass(frozen=True)
class BaselineSpec:
    """How to build a comparison ladder.

    Attributes:
        kind: "fixed_label" or "hull_maximizing"
        label: Sample label used for every entry (fixed) or for the anchors (hull)
        anchors: (low, high) anchor resolutions for the hull ladder; None pins
            the lowest and highest resolutions of each chunk
    """

    kind: BaselineKind
    label: str = DEFAULT_LABEL
    anchors: Optional[tuple[int, int]] = None

    def __post_init__(self):
        if self.kind not in ("fixed_label", "hull_maximizing"):
            raise ValueError(f"Unknown baseline kind {self.kind!r}")
        if not self.label:
            raise ValueError("Baseline needs a sample label")
        if self.anchors is not None:
            if self.kind != "hull_maximizing":
                raise ValueError("Only the hull baseline takes anchors")
            low, high = self.anchors
            if low >= high:
                raise ValueError(f"Anchors must be (low, high), got {self.anchors}")

    @property
    def name(self) -> str:
        """Short name used in reports and file names."""
        return "fixed" if self.kind == "fixed_label" else "hull"

    def __str__(self) -> str:
        if self.kind == "fixed_label":
            return f"fixed:{self.label}"
        if self.anchors is None:
            return f"hull:{self.label}"
        return f"hull:{self.anchors[0]}:{self.anchors[1]}:{self.label}"


def parse_baseline_spec(text: str) -> BaselineSpec:
    """Parse ``fixed[:LABEL]`` or ``hull[:LOW:HIGH][:LABEL]``.

    Raises:
        ValueError: If the text doesn't follow either form
    """
    parts = text.strip().split(":")
    kind, args = parts[0].lower(), parts[1:]
    if kind == "fixed":
        if len(args) > 1:
            raise ValueError(f"Expected fixed[:LABEL], got {text!r}")
        return BaselineSpec("fixed_label", label=args[0] if args else DEFAULT_LABEL)
    if kind == "hull":
        if len(args) in (0, 1):
            return BaselineSpec("hull_maximizing", label=args[0] if args else DEFAULT_LABEL)
        if len(args) in (2, 3):
            try:
                anchors = (int(args[0]), int(args[1]))
            except ValueError:
                raise ValueError(f"Hull anchors must be integers, got {text!r}") from None
            label = args[2] if len(args) == 3 else DEFAULT_LABEL
            return BaselineSpec("hull_maximizing", label=label, anchors=anchors)
        raise ValueError(f"Expected hull[:LOW:HIGH][:LABEL], got {text!r}")
    raise ValueError(f"Unknown baseline {text!r} (expected fixed:... or hull:...)")


def fixed_label_ladder(model: ChunkRqModel, label: str) -> Ladder:
    """Ladder built from the sample labelled ``label`` at every resolution.

    Raises:
        MissingLabelError: If some curve lacks the label
    """
    pairs = []
    for resolution in model.resolutions:
        sample = model.curves[resolution].sample_with_label(label)
        if sample is None:
            raise MissingLabelError(label, resolution)
        pairs.append((resolution, sample.bitrate))
    return Ladder.from_pairs(pairs, chunk_id=model.chunk_id)


def hull_maximizing_ladder(
    model: ChunkRqModel, anchors: tuple[int, int], anchor_label: str = DEFAULT_LABEL
) -> Ladder:
    """Anchors pinned at their labelled samples, intermediates on the upper hull.

    Each resolution strictly between the anchors takes the log-scale midpoint
    of the bitrate interval over which it supplies upper-hull points. A
    resolution that never reaches the hull takes the bitrate on its own curve
    closest to the geometric mean of its neighbours. Intermediates are then
    moved, within their own curve ranges, so bitrates don't decrease with
    resolution.

    Entries are on the upper boundary of the curves only when no move was
    needed. A moved entry takes its own curve's quality at the new bitrate,
    which can be below what a lower resolution delivers there.

    Raises:
        MissingAnchorError: If an anchor resolution is absent
        MissingLabelError: If an anchor lacks ``anchor_label``
        PreconditionError: If no ordered placement exists
    """
    low, high = anchors
    for resolution in (low, high):
        if resolution not in model.curves:
            raise MissingAnchorError(
                f"Anchor {resolution}p is not in chunk {model.chunk_id!r}"
            )
    resolutions = [r for r in model.resolutions if low <= r <= high]
    pinned: dict[int, float] = {}
    for resolution in (low, high):
        sample = model.curves[resolution].sample_with_label(anchor_label)
        if sample is None:
            raise MissingLabelError(anchor_label, resolution)
        pinned[resolution] = sample.bitrate

    intervals = dict(upper_hull({r: model.curves[r] for r in resolutions}))
    chosen: dict[int, Optional[float]] = {}
    for resolution in resolutions:
        if resolution in pinned:
            chosen[resolution] = pinned[resolution]
        elif intervals[resolution] is not None:
            lo, hi = intervals[resolution]
            chosen[resolution] = math.sqrt(lo * hi)
        else:
            chosen[resolution] = None

    for k, resolution in enumerate(resolutions):
        if chosen[resolution] is not None:
            continue
        below = next(chosen[r] for r in reversed(resolutions[:k]) if chosen[r] is not None)
        above = next(chosen[r] for r in resolutions[k + 1 :] if chosen[r] is not None)
        lo, hi = bitrate_range(model.curves[resolution])
        chosen[resolution] = min(max(math.sqrt(below * above), lo), hi)
        logger.debug("%dp is never on the upper hull; placed at %.1f bps", resolution, chosen[resolution])

    rates = [chosen[r] for r in resolutions]
    for direction in (1, -1):
        indices = range(1, len(rates)) if direction == 1 else range(len(rates) - 2, -1, -1)
        for i in indices:
            resolution = resolutions[i]
            if resolution in pinned:
                continue
            lo, hi = bitrate_range(model.curves[resolution])
            neighbour = rates[i - direction]
            if direction == 1 and rates[i] < neighbour:
                rates[i] = min(neighbour, hi)
            elif direction == -1 and rates[i] > neighbour:
                rates[i] = max(neighbour, lo)
    if any(b < a for a, b in zip(rates, rates[1:])):
        raise PreconditionError(
            f"Chunk {model.chunk_id!r}: curve ranges leave no ordered hull ladder"
        )
    return Ladder.from_bitrates(resolutions, rates, chunk_id=model.chunk_id)


def build_baseline(model: ChunkRqModel, spec: BaselineSpec) -> Ladder:
    """Build the ladder a spec describes for one chunk."""
    if spec.kind == "fixed_label":
        return fixed_label_ladder(model, spec.label)
    anchors = spec.anchors or (model.resolutions[0], model.resolutions[-1])
    return hull_maximizing_ladder(model, anchors, spec.label)
