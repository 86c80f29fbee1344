"""Tests for the Monte Carlo playback simulator and ladder comparison."""

from dataclasses import replace

import numpy as np
import pytest

from abr_ladder.baselines import fixed_label_ladder
from abr_ladder.errors import MismatchedInputError, PreconditionError
from abr_ladder.player_model import Ladder, fallback_probability, viewing_probabilities
from abr_ladder.region import RqPoint, achievable_region, contains, operating_points
from abr_ladder.simulator import (
    SimConfig,
    compare,
    per_resolution_change,
    simulate,
)
from abr_ladder.stats_ingest import BandwidthDistribution, ViewportDistribution


def test_sim_config_validation():
    """Test that bad simulation settings are rejected."""
    with pytest.raises(ValueError, match="Session count"):
        SimConfig(num_sessions=0)
    with pytest.raises(ValueError, match="Segments per session"):
        SimConfig(segments_per_session=0)
    with pytest.raises(ValueError, match="duration"):
        SimConfig(segment_duration=0.0)


def test_single_entry_ladder(simple_model, viewport_dist, bandwidth_dist):
    """Test that a one-entry ladder serves every segment without switching."""
    ladder = Ladder.from_pairs([(720, 8e5)], chunk_id="c1")

    report = simulate(ladder, simple_model, viewport_dist, bandwidth_dist, SimConfig(num_sessions=50))

    assert report.empirical_lambda.tolist() == [1.0]
    assert report.switch_rate == 0.0
    assert report.empirical_avg_bitrate == pytest.approx(8e5)
    assert report.empirical_avg_quality == pytest.approx(37.0)


def test_frequencies_match_analytic_model_single_viewport(simple_model, fixed_ladder, bandwidth_dist):
    """Test segment frequencies against the analytic probabilities over a million draws."""
    vd = ViewportDistribution({1080: 1.0})
    config = SimConfig(num_sessions=2000, segments_per_session=500, seed=1)

    report = simulate(fixed_ladder, simple_model, vd, bandwidth_dist, config)

    np.testing.assert_allclose(
        report.empirical_lambda, viewing_probabilities(fixed_ladder, vd, bandwidth_dist), atol=0.005
    )
    assert report.fallback_fraction == pytest.approx(
        fallback_probability(fixed_ladder, vd, bandwidth_dist), abs=0.005
    )


def test_frequencies_match_analytic_model_mixed_viewports(
    simple_model, fixed_ladder, viewport_dist, bandwidth_dist
):
    """Test the hand example, where viewports are drawn once per session."""
    config = SimConfig(num_sessions=4000, segments_per_session=100, seed=2)

    report = simulate(fixed_ladder, simple_model, viewport_dist, bandwidth_dist, config)

    np.testing.assert_allclose(report.empirical_lambda, [0.28, 0.42, 0.30], atol=0.02)
    assert report.empirical_avg_bitrate == pytest.approx(928e3, rel=0.05)
    assert report.fallback_fraction == pytest.approx(0.1, abs=0.01)


def test_bookkeeping(simple_model, fixed_ladder, viewport_dist, bandwidth_dist):
    """Test that counts, shares and watch time add up."""
    config = SimConfig(num_sessions=30, segments_per_session=40, segment_duration=4.0)

    report = simulate(fixed_ladder, simple_model, viewport_dist, bandwidth_dist, config)

    assert report.segment_counts.sum() == 30 * 40
    assert report.empirical_lambda.sum() == pytest.approx(1.0)
    assert sum(report.watch_time_by_resolution.values()) == pytest.approx(1.0)
    assert report.watch_hours == pytest.approx(30 * 40 * 4.0 / 3600)
    assert report.chunk_id == "c1"


def test_simulation_is_deterministic(simple_model, fixed_ladder, viewport_dist, bandwidth_dist):
    """Test that equal seeds give identical reports and different seeds differ."""
    config = SimConfig(num_sessions=100, segments_per_session=20, seed=5)

    first = simulate(fixed_ladder, simple_model, viewport_dist, bandwidth_dist, config)
    second = simulate(fixed_ladder, simple_model, viewport_dist, bandwidth_dist, config)
    other = simulate(
        fixed_ladder, simple_model, viewport_dist, bandwidth_dist, replace(config, seed=6)
    )

    np.testing.assert_array_equal(first.segment_counts, second.segment_counts)
    assert first.switch_rate == second.switch_rate
    assert not np.array_equal(first.segment_counts, other.segment_counts)


def test_empirical_point_is_achievable(synthetic_model):
    """Test that the simulated (R, Q) point lies in the ladder's achievable region."""
    ladder = fixed_label_ladder(synthetic_model, "crf23")
    vd = ViewportDistribution({360: 0.3, 720: 0.4, 1080: 0.3})
    bd = BandwidthDistribution.from_samples(
        np.random.default_rng(4).lognormal(np.log(3e6), 1.0, size=500)
    )

    report = simulate(ladder, synthetic_model, vd, bd, SimConfig(num_sessions=200, segments_per_session=50))
    region = achievable_region(operating_points(ladder, synthetic_model))

    point = RqPoint(report.empirical_avg_bitrate, report.empirical_avg_quality)
    assert contains(region, point, tol=1e-6)


def test_fixed_bandwidth_per_session_never_switches(simple_model, fixed_ladder, viewport_dist, bandwidth_dist):
    """Test that one bandwidth draw per session means no switches."""
    config = SimConfig(num_sessions=200, segments_per_session=30, resample_bandwidth_per_segment=False)

    report = simulate(fixed_ladder, simple_model, viewport_dist, bandwidth_dist, config)

    assert report.switch_rate == 0.0
    assert report.segment_counts.sum() == 200 * 30


def test_resampling_produces_switches(simple_model, fixed_ladder, bandwidth_dist):
    """Test that per-segment bandwidth draws make the player switch."""
    vd = ViewportDistribution({1080: 1.0})
    config = SimConfig(num_sessions=20, segments_per_session=100)

    report = simulate(fixed_ladder, simple_model, vd, bandwidth_dist, config)

    assert report.switch_rate > 0


def test_simulate_rejects_unknown_resolution(simple_model, viewport_dist, bandwidth_dist):
    """Test that ladder resolutions must exist in the model."""
    ladder = Ladder.from_pairs([(480, 5e5)])
    with pytest.raises(MismatchedInputError):
        simulate(ladder, simple_model, viewport_dist, bandwidth_dist, SimConfig(num_sessions=1))


def test_per_resolution_change(fixed_ladder):
    """Test relative bitrate change per resolution, skipping repeated resolutions."""
    other = Ladder.from_bitrates([360, 720, 1080], [2e5, 8e5, 3.2e6])
    assert per_resolution_change(other, fixed_ladder) == {360: -0.5, 720: 0.0, 1080: 1.0}

    repeated = Ladder.from_bitrates([360, 720, 720], [2e5, 8e5, 1.2e6])
    assert per_resolution_change(repeated, fixed_ladder) == {360: -0.5}


def test_compare_identical_ladders(simple_model, fixed_ladder, viewport_dist, bandwidth_dist):
    """Test that comparing a report with itself gives zero change."""
    report = simulate(
        fixed_ladder, simple_model, viewport_dist, bandwidth_dist, SimConfig(num_sessions=50)
    )

    comparison = compare({"fixed": report, "same": report})

    assert comparison.baseline == "fixed"
    assert comparison.chunk_id == "c1"
    same = comparison.ladders["same"]
    assert same.relative_bitrate_change == 0.0
    assert same.normalized_avg_bitrate == 1.0
    assert same.quality_delta == 0.0
    assert same.switch_rate_change == 0.0
    assert all(v == 0.0 for v in same.watch_time_shift.values())
    assert same.per_resolution_change == {360: 0.0, 720: 0.0, 1080: 0.0}
    assert set(comparison.to_dict()["ladders"]) == {"same"}


def test_compare_named_baseline(simple_model, fixed_ladder, viewport_dist, bandwidth_dist):
    """Test that a cheaper ladder shows a negative change against the named baseline."""
    cheaper = Ladder.from_bitrates([360, 720, 1080], [2e5, 4e5, 8e5], chunk_id="c1")
    config = SimConfig(num_sessions=100, segments_per_session=50)
    reports = {
        "optimized": simulate(cheaper, simple_model, viewport_dist, bandwidth_dist, config),
        "fixed": simulate(fixed_ladder, simple_model, viewport_dist, bandwidth_dist, config),
    }

    comparison = compare(reports, baseline="fixed")

    change = comparison.ladders["optimized"]
    assert change.relative_bitrate_change < 0
    assert change.normalized_avg_bitrate == pytest.approx(1 + change.relative_bitrate_change)
    assert change.per_resolution_change == {360: -0.5, 720: -0.5, 1080: -0.5}


def test_compare_rejects_bad_inputs(simple_model, fixed_ladder, viewport_dist, bandwidth_dist):
    """Test mismatched chunks, a lone report and an unknown baseline."""
    report = simulate(
        fixed_ladder, simple_model, viewport_dist, bandwidth_dist, SimConfig(num_sessions=10)
    )

    with pytest.raises(PreconditionError, match="at least two"):
        compare({"fixed": report})
    with pytest.raises(PreconditionError, match="No report named"):
        compare({"a": report, "b": report}, baseline="c")
    with pytest.raises(MismatchedInputError, match="different chunks"):
        compare({"a": report, "b": replace(report, chunk_id="c9")})
