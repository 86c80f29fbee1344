"""Shared fixtures: a small hand-checkable chunk and atomic distributions."""

import numpy as np
import pytest

from abr_ladder.player_model import Ladder
from abr_ladder.rq_model import ChunkRqModel, RateQualityCurve, RqSample
from abr_ladder.stats_ingest import BandwidthDistribution, ViewportDistribution
from abr_ladder.synthetic import synth_chunk_model


def make_curve(resolution, points, labels=None):
    labels = labels or [None] * len(points)
    return RateQualityCurve(
        resolution=resolution,
        samples=tuple(RqSample(r, q, label) for (r, q), label in zip(points, labels)),
    )


@pytest.fixture
def simple_model():
    """Three resolutions, three samples each, crf23 on the middle sample."""
    labels = ["crf35", "crf23", "crf11"]
    return ChunkRqModel(
        chunk_id="c1",
        source_resolution=1080,
        curves={
            360: make_curve(360, [(1e5, 30.0), (4e5, 36.0), (1.6e6, 39.0)], labels),
            720: make_curve(720, [(2e5, 28.0), (8e5, 37.0), (3.2e6, 42.0)], labels),
            1080: make_curve(1080, [(4e5, 26.0), (1.6e6, 38.0), (6.4e6, 44.0)], labels),
        },
    )


@pytest.fixture
def fixed_ladder():
    """The crf23 ladder of ``simple_model``."""
    return Ladder.from_pairs([(360, 4e5), (720, 8e5), (1080, 1.6e6)], chunk_id="c1")


@pytest.fixture
def viewport_dist():
    return ViewportDistribution({360: 0.2, 720: 0.3, 1080: 0.5})


@pytest.fixture
def bandwidth_dist():
    return BandwidthDistribution(
        support=np.array([3e5, 1e6, 2e6, 5e6]),
        cdf_at_support=np.array([0.1, 0.4, 0.7, 1.0]),
    )


@pytest.fixture
def synthetic_model():
    return synth_chunk_model("synth", np.random.default_rng(7))
