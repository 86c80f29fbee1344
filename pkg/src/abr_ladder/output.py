"""Output formatting for optimization and simulation results.

This module handles JSON/CSV serialization (all writes are atomic) and
the corpus-level report assembled from per-chunk summaries.
"""

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import pandas as pd

SCHEMA_VERSION = 1


def _json_default(obj):
    """Convert non-serializable types for JSON output."""
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    raise TypeError(f"Object of type {type(obj).__name__} is not JSON serializable")


def format_as_json(payload: Any, indent: Optional[int] = 2, sort_keys: bool = False) -> str:
    """Format a report (or anything with ``to_dict``) as a JSON string.

    Args:
        payload: Dict or report object to format
        indent: Number of spaces for indentation (None for compact)
        sort_keys: Whether to sort keys alphabetically

    Returns:
        JSON string representation
    """
    if hasattr(payload, "to_dict"):
        payload = payload.to_dict()
    return json.dumps(payload, indent=indent, sort_keys=sort_keys, default=_json_default)


def atomic_write_text(output_path: str | Path, text: str) -> None:
    """Write text via a temp file in the same directory, then rename over the target."""
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(
        dir=output_path.parent, prefix=f".{output_path.name}.", suffix=".tmp"
    )
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp_name, output_path)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise


def save_json(payload: Any, output_path: str | Path, indent: Optional[int] = 2) -> None:
    """Save a report or dict to a JSON file.

    Dict payloads without a ``schema_version`` get one added.
    """
    if hasattr(payload, "to_dict"):
        payload = payload.to_dict()
    if isinstance(payload, dict) and "schema_version" not in payload:
        payload = {"schema_version": SCHEMA_VERSION, **payload}
    atomic_write_text(output_path, format_as_json(payload, indent=indent))


def save_csv(frame: pd.DataFrame, output_path: str | Path) -> None:
    atomic_write_text(output_path, frame.to_csv(index=False, lineterminator="\n"))


@dataclass
class BaselineComparison:
    """One baseline and the ladder optimized against it on one chunk.

    Attributes:
        avg_bitrate: Expected bitrate of the baseline ladder
        avg_quality: Expected quality of the baseline ladder
        optimized_avg_bitrate: Expected bitrate of the optimized ladder
        optimized_avg_quality: Expected quality of the optimized ladder
        q0: Quality floor the optimized ladder was held to
        converged: Whether the optimized ladder met the floor
        per_resolution_change: r*/r0 - 1 per resolution
    """

    avg_bitrate: float
    avg_quality: float
    optimized_avg_bitrate: float
    optimized_avg_quality: float
    q0: float
    converged: bool = True
    per_resolution_change: dict[int, float] = field(default_factory=dict)

    @property
    def relative_bitrate_change(self) -> float:
        return self.optimized_avg_bitrate / self.avg_bitrate - 1.0

    @property
    def quality_delta(self) -> float:
        return self.optimized_avg_quality - self.avg_quality

    def to_dict(self) -> dict:
        return {
            "avg_bitrate": self.avg_bitrate,
            "avg_quality": self.avg_quality,
            "optimized_avg_bitrate": self.optimized_avg_bitrate,
            "optimized_avg_quality": self.optimized_avg_quality,
            "q0": self.q0,
            "converged": self.converged,
            "relative_bitrate_change": self.relative_bitrate_change,
            "quality_delta": self.quality_delta,
            "per_resolution_change": {str(k): v for k, v in self.per_resolution_change.items()},
        }


@dataclass
class ChunkSummary:
    """One row of the corpus report: every baseline of a chunk with its optimized pair."""

    chunk_id: str
    baselines: dict[str, BaselineComparison] = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return all(c.converged for c in self.baselines.values())

    def relative_bitrate_change(self, baseline: str) -> float:
        return self.baselines[baseline].relative_bitrate_change

    def quality_delta(self, baseline: str) -> float:
        return self.baselines[baseline].quality_delta

    def to_dict(self) -> dict:
        return {
            "chunk_id": self.chunk_id,
            "converged": self.converged,
            "baselines": {name: comp.to_dict() for name, comp in self.baselines.items()},
        }


def _quartiles(values: list[float]) -> dict[str, float]:
    q = np.percentile(np.asarray(values, dtype=float), [0, 25, 50, 75, 100])
    return {
        "min": float(q[0]),
        "q1": float(q[1]),
        "median": float(q[2]),
        "q3": float(q[3]),
        "max": float(q[4]),
        "count": len(values),
    }


@dataclass
class CorpusReport:
    """Per-chunk results plus aggregates that are always recomputed from the rows.

    Attributes:
        rows: One summary per chunk that produced a result
        failures: Chunks that failed, with the error message
    """

    rows: list[ChunkSummary] = field(default_factory=list)
    failures: list[dict[str, str]] = field(default_factory=list)

    @property
    def baseline_names(self) -> list[str]:
        names: list[str] = []
        for row in self.rows:
            names.extend(n for n in row.baselines if n not in names)
        return names

    def _pairs(self, baseline: str) -> list[BaselineComparison]:
        """Converged comparisons against ``baseline``, one per chunk."""
        pairs = (r.baselines.get(baseline) for r in self.rows)
        return [c for c in pairs if c is not None and c.converged]

    def aggregate_relative_change(self, baseline: str) -> float:
        """Relative change of the summed expected bitrate against ``baseline``."""
        pairs = self._pairs(baseline)
        if not pairs:
            return math.nan
        optimized = math.fsum(c.optimized_avg_bitrate for c in pairs)
        reference = math.fsum(c.avg_bitrate for c in pairs)
        return optimized / reference - 1.0

    def aggregate_quality_delta(self, baseline: str) -> float:
        """Mean quality change against ``baseline``."""
        pairs = self._pairs(baseline)
        if not pairs:
            return math.nan
        return math.fsum(c.quality_delta for c in pairs) / len(pairs)

    def per_resolution_quartiles(self, baseline: str) -> dict[int, dict[str, float]]:
        """Quartiles of r*/r0 - 1 per resolution across chunks."""
        by_resolution: dict[int, list[float]] = {}
        for pair in self._pairs(baseline):
            for resolution, change in pair.per_resolution_change.items():
                by_resolution.setdefault(resolution, []).append(change)
        return {res: _quartiles(vals) for res, vals in sorted(by_resolution.items())}

    def to_frame(self) -> pd.DataFrame:
        records = []
        for row in self.rows:
            record: dict[str, Any] = {"chunk_id": row.chunk_id, "converged": row.converged}
            for name, comp in row.baselines.items():
                record[f"{name}_q0"] = comp.q0
                record[f"{name}_avg_bitrate"] = comp.avg_bitrate
                record[f"{name}_avg_quality"] = comp.avg_quality
                record[f"{name}_optimized_avg_bitrate"] = comp.optimized_avg_bitrate
                record[f"{name}_optimized_avg_quality"] = comp.optimized_avg_quality
                record[f"{name}_relative_change"] = comp.relative_bitrate_change
                record[f"{name}_quality_delta"] = comp.quality_delta
            records.append(record)
        return pd.DataFrame.from_records(records)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "chunks": [r.to_dict() for r in self.rows],
            "aggregate": {
                name: {
                    "relative_bitrate_change": self.aggregate_relative_change(name),
                    "quality_delta": self.aggregate_quality_delta(name),
                    "per_resolution_change": {
                        str(res): q for res, q in self.per_resolution_quartiles(name).items()
                    },
                }
                for name in self.baseline_names
            },
            "failures": self.failures,
        }
