"""Synthetic rate-quality models and playback traces.

Curves follow q(r) = a + b*log(1 + r/r_knee) with the knee scaling with
pixel count and the gain b with resolution**1.5. Low resolutions win at low
bitrates and each resolution saturates below the next one up.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from .output import save_csv, save_json
from .rq_model import ChunkRqModel, CurveParams, synth_curve

SYNTH_RESOLUTIONS: tuple[int, ...] = (144, 240, 360, 480, 720, 1080)

# Twice as dense as the default sweep; includes the crf23 anchor.
SYNTH_CRFS: tuple[int, ...] = tuple(range(55, 4, -2))

# Viewer mix skewed towards 360p-1080p with a few larger screens.
DEFAULT_VIEWPORT_PMF: dict[int, float] = {
    144: 0.02,
    240: 0.05,
    360: 0.18,
    480: 0.15,
    720: 0.25,
    1080: 0.28,
    1440: 0.04,
    2160: 0.03,
}


def synth_chunk_model(
    chunk_id: str,
    rng: np.random.Generator,
    resolutions: Sequence[int] = SYNTH_RESOLUTIONS,
    crfs: Sequence[int] = SYNTH_CRFS,
) -> ChunkRqModel:
    """Random chunk with one curve per resolution.

    The chunk's complexity scales every knee by a common log-normal factor.
    """
    top = max(resolutions)
    knee_top = 2.5e6 * float(np.exp(0.5 * rng.standard_normal()))
    a = 20.0 + float(rng.uniform(0.0, 4.0))
    b_top = 5.0 + float(rng.uniform(0.0, 1.5))
    curves = {}
    for resolution in sorted(resolutions):
        scale = resolution / top
        params = CurveParams(a=a, b=b_top * scale**1.5, r_knee=knee_top * scale**2)
        curves[resolution] = synth_curve(resolution, params, crfs)
    return ChunkRqModel(chunk_id=chunk_id, source_resolution=top, curves=curves)


def synth_traces(
    n: int,
    rng: np.random.Generator,
    median_bps: float = 4e6,
    sigma: float = 1.0,
    viewport_pmf: Optional[Mapping[int, float]] = None,
    sessions: int = 1000,
) -> pd.DataFrame:
    """Trace table with log-normal bandwidth and raw (unsnapped) viewport heights."""
    if n < 1:
        raise ValueError(f"Trace count must be >= 1, got {n}")
    pmf = dict(viewport_pmf or DEFAULT_VIEWPORT_PMF)
    heights = np.array(sorted(pmf))
    probs = np.array([pmf[h] for h in heights], dtype=float)
    bandwidth = median_bps * np.exp(sigma * rng.standard_normal(n))
    viewport = rng.choice(heights, size=n, p=probs / probs.sum()) + rng.integers(0, 30, size=n)
    return pd.DataFrame(
        {
            "session_id": [f"s{k:05d}" for k in rng.integers(0, sessions, size=n)],
            "estimated_bandwidth_bps": np.round(bandwidth, 1),
            "viewport_height": viewport,
        }
    )


@dataclass
class SyntheticCorpus:
    """Files written by ``synth_corpus``."""

    chunk_paths: list[Path]
    trace_path: Path


def synth_corpus(
    output_dir: str | Path,
    num_chunks: int = 20,
    num_traces: int = 100_000,
    seed: int = 0,
) -> SyntheticCorpus:
    """Write ``num_chunks`` chunk model files and one trace CSV under ``output_dir``."""
    if num_chunks < 1:
        raise ValueError(f"Chunk count must be >= 1, got {num_chunks}")
    output_dir = Path(output_dir)
    rng = np.random.default_rng(seed)
    chunk_paths = []
    for k in range(num_chunks):
        model = synth_chunk_model(f"chunk_{k:03d}", rng)
        path = output_dir / "chunks" / f"{model.chunk_id}.json"
        save_json(model, path)
        chunk_paths.append(path)
    trace_path = output_dir / "traces.csv"
    save_csv(synth_traces(num_traces, rng), trace_path)
    return SyntheticCorpus(chunk_paths=chunk_paths, trace_path=trace_path)
