"""Tests for trace ingestion and the empirical distributions."""

import gzip
import json
import logging
import math
import time

import numpy as np
import pytest

from abr_ladder.errors import EmptyInputError, PreconditionError, TraceFormatError
from abr_ladder.stats_ingest import (
    BandwidthDistribution,
    TraceRecord,
    ViewportDistribution,
    bw_density,
    ingest_traces,
    load_distributions,
    prob_bw_gt,
    prob_bw_interval,
    prob_viewport_eq,
    prob_viewport_gt,
    prob_viewport_lt,
    read_trace_file,
    save_distributions,
    snap_viewport,
)

FOUR_RECORDS = """estimated_bandwidth_bps,viewport_height
1000000,720
2000000,1080
1000000,700
3000000,1090
"""


def test_snap_viewport():
    """Test snapping raw heights down to standard heights."""
    assert snap_viewport(720) == 720
    assert snap_viewport(719) == 480
    assert snap_viewport(1200) == 1080
    assert snap_viewport(100) == 144
    assert snap_viewport(5000) == 2160
    np.testing.assert_array_equal(snap_viewport(np.array([360, 400])), [360, 360])


def test_viewport_distribution_validation():
    """Test that the PMF must use standard heights and sum to one."""
    with pytest.raises(ValueError, match="not a standard height"):
        ViewportDistribution({700: 1.0})
    with pytest.raises(ValueError, match="sum to"):
        ViewportDistribution({720: 0.5, 1080: 0.4})


def test_bandwidth_distribution_validation():
    """Test that the CDF must be non-decreasing and end at one."""
    with pytest.raises(ValueError, match="strictly ascending"):
        BandwidthDistribution([2e6, 1e6], [0.5, 1.0])
    with pytest.raises(ValueError, match="non-decreasing"):
        BandwidthDistribution([1e6, 2e6], [0.6, 0.5])
    with pytest.raises(ValueError, match="expected 1"):
        BandwidthDistribution([1e6, 2e6], [0.5, 0.9])


def test_ingest_four_records():
    """Test that a small trace produces the hand-counted PMF and CDF."""
    rows = [
        {"estimated_bandwidth_bps": 1e6, "viewport_height": 720},
        {"estimated_bandwidth_bps": 2e6, "viewport_height": 1080},
        {"estimated_bandwidth_bps": 1e6, "viewport_height": 700},
        {"estimated_bandwidth_bps": 3e6, "viewport_height": 1090},
    ]
    vd, bd = ingest_traces(rows)

    assert vd.pmf == pytest.approx({480: 0.25, 720: 0.25, 1080: 0.5})
    np.testing.assert_array_equal(bd.support, [1e6, 2e6, 3e6])
    np.testing.assert_allclose(bd.cdf_at_support, [0.5, 0.75, 1.0])


def test_ingest_skips_invalid_mappings():
    """Test that malformed mappings are skipped, not fatal."""
    rows = [
        TraceRecord(1e6, 720),
        {"estimated_bandwidth_bps": -1, "viewport_height": 720},
        {"viewport_height": 720},
    ]
    vd, bd = ingest_traces(rows)
    assert vd.pmf == {720: 1.0}
    assert bd.support.tolist() == [1e6]


def test_skipped_records_are_reported_once(caplog):
    """Test a single warning carrying the total skip count."""
    rows = [
        {"estimated_bandwidth_bps": 1e6, "viewport_height": 720},
        {"viewport_height": 720},
        {"estimated_bandwidth_bps": "fast", "viewport_height": 360},
    ]
    with caplog.at_level(logging.WARNING, logger="abr_ladder.stats_ingest"):
        ingest_traces(rows)

    warnings = [r for r in caplog.records if "Skipped" in r.getMessage()]
    assert len(warnings) == 1
    assert "Skipped 2 " in warnings[0].getMessage()


def test_lognormal_median():
    """Test that 10k log-normal samples put the CDF at the generator median near 0.5."""
    rng = np.random.default_rng(11)
    rows = [
        {"estimated_bandwidth_bps": b, "viewport_height": 720}
        for b in rng.lognormal(np.log(3e6), 0.8, size=10_000)
    ]

    _, bd = ingest_traces(rows)

    assert bd.cdf(3e6) == pytest.approx(0.5, abs=0.02)
    assert bd.with_smoothing("piecewise_linear").cdf(3e6) == pytest.approx(0.5, abs=0.02)


def test_ingest_empty_raises():
    """Test that no valid records is an error."""
    with pytest.raises(EmptyInputError):
        ingest_traces([])


def test_step_and_linear_cdf():
    """Test both CDF smoothings between and outside support points."""
    step = BandwidthDistribution([1e6, 2e6, 3e6], [0.5, 0.75, 1.0])
    linear = step.with_smoothing("piecewise_linear")

    assert step.cdf(1.5e6) == 0.5
    assert linear.cdf(1.5e6) == pytest.approx(0.625)
    assert step.cdf(5e5) == 0.0
    assert linear.cdf(5e5) == 0.0
    assert step.cdf(1e6) == linear.cdf(1e6) == 0.5
    assert step.cdf(4e6) == linear.cdf(4e6) == 1.0


def test_density_integrates_to_mass_above_lowest_point():
    """Test that the linear density carries everything but the atom at the lowest point."""
    linear = BandwidthDistribution([1e6, 2e6, 3e6], [0.5, 0.75, 1.0], "piecewise_linear")

    assert linear.density(1.5e6) == pytest.approx(0.25 / 1e6)
    assert bw_density(linear, 2.5e6) == pytest.approx(0.25 / 1e6)
    assert linear.density(5e5) == 0.0
    assert linear.density(3e6) == 0.0
    xs = np.linspace(1e6, 3e6, 200_001)
    integral = np.sum(linear.density(xs[:-1]) * np.diff(xs))
    assert integral == pytest.approx(1.0 - linear.cdf_at_support[0], rel=1e-9)


def test_density_requires_linear_smoothing(bandwidth_dist):
    """Test that the step CDF has no density."""
    with pytest.raises(PreconditionError):
        bandwidth_dist.density(1e6)


def test_probability_queries(viewport_dist, bandwidth_dist):
    """Test the viewport and bandwidth probability helpers."""
    assert prob_viewport_eq(viewport_dist, 720) == 0.3
    assert prob_viewport_eq(viewport_dist, 480) == 0.0
    assert prob_viewport_gt(viewport_dist, 720) == pytest.approx(0.5)
    assert prob_viewport_lt(viewport_dist, 720) == pytest.approx(0.2)
    assert prob_bw_gt(bandwidth_dist, 1e6) == pytest.approx(0.6)
    assert prob_bw_interval(bandwidth_dist, 3e5, 2e6) == pytest.approx(0.6)
    assert prob_bw_interval(bandwidth_dist, 2e6, math.inf) == pytest.approx(0.3)


def test_prob_bw_interval_rejects_reversed_bounds(bandwidth_dist):
    """Test that lo > hi is a precondition error."""
    with pytest.raises(PreconditionError):
        prob_bw_interval(bandwidth_dist, 2e6, 1e6)


def test_sample_step_distribution(bandwidth_dist):
    """Test that inverse-CDF sampling hits support points with the right frequencies."""
    draws = bandwidth_dist.sample(np.random.default_rng(3), 200_000)

    assert set(np.unique(draws)) <= set(bandwidth_dist.support)
    freq = np.array([np.mean(draws == s) for s in bandwidth_dist.support])
    np.testing.assert_allclose(freq, bandwidth_dist.masses, atol=0.01)


def test_sample_is_deterministic(bandwidth_dist):
    """Test that equal seeds give equal draws."""
    a = bandwidth_dist.sample(np.random.default_rng(11), 100)
    b = bandwidth_dist.sample(np.random.default_rng(11), 100)
    np.testing.assert_array_equal(a, b)


def test_mean(bandwidth_dist):
    """Test the mean of the step distribution."""
    assert bandwidth_dist.mean() == pytest.approx(0.1 * 3e5 + 0.3 * 1e6 + 0.3 * 2e6 + 0.3 * 5e6)


def test_read_csv_trace(tmp_path):
    """Test reading the four-record CSV fixture."""
    path = tmp_path / "traces.csv"
    path.write_text(FOUR_RECORDS)

    result = read_trace_file(path)

    assert result.records_read == 4
    assert result.records_skipped == 0
    assert result.viewport.pmf == pytest.approx({480: 0.25, 720: 0.25, 1080: 0.5})


def test_read_csv_counts_malformed_lines(tmp_path):
    """Test that malformed values are skipped and counted."""
    path = tmp_path / "traces.csv"
    path.write_text(FOUR_RECORDS + "abc,720\n-5,1080\n")

    result = read_trace_file(path)

    assert result.records_read == 4
    assert result.records_skipped == 2


def test_read_csv_with_weights(tmp_path):
    """Test that the optional weight column weights records."""
    path = tmp_path / "traces.csv"
    path.write_text("estimated_bandwidth_bps,viewport_height,weight\n1e6,720,3\n2e6,1080,1\n")

    result = read_trace_file(path)

    assert result.viewport.pmf == pytest.approx({720: 0.75, 1080: 0.25})
    np.testing.assert_allclose(result.bandwidth.cdf_at_support, [0.75, 1.0])


def test_read_gzipped_csv(tmp_path):
    """Test that .gz traces are decompressed."""
    path = tmp_path / "traces.csv.gz"
    with gzip.open(path, "wt", encoding="utf-8") as f:
        f.write(FOUR_RECORDS)

    assert read_trace_file(path).records_read == 4


def test_read_csv_missing_column(tmp_path):
    """Test that a missing required column is a format error on the header line."""
    path = tmp_path / "traces.csv"
    path.write_text("estimated_bandwidth_bps,height\n1e6,720\n")

    with pytest.raises(TraceFormatError, match="viewport_height") as exc:
        read_trace_file(path)
    assert exc.value.line == 1


def test_read_csv_extra_fields_reports_line(tmp_path):
    """Test that a structurally broken line is reported with its line number."""
    path = tmp_path / "traces.csv"
    path.write_text("estimated_bandwidth_bps,viewport_height\n1e6,720\n1e6,720,9\n")

    with pytest.raises(TraceFormatError, match="line") as exc:
        read_trace_file(path)
    assert exc.value.line is not None


def test_read_json_lines(tmp_path):
    """Test JSON-lines traces, skipping unparsable and incomplete lines."""
    path = tmp_path / "traces.jsonl"
    lines = [
        json.dumps({"estimated_bandwidth_bps": 1e6, "viewport_height": 720, "session_id": "a"}),
        "not json",
        json.dumps({"viewport_height": 720}),
        json.dumps({"estimated_bandwidth_bps": 2e6, "viewport_height": 360}),
    ]
    path.write_text("\n".join(lines) + "\n")

    result = read_trace_file(path)

    assert result.records_read == 2
    assert result.records_skipped == 2
    assert result.viewport.pmf == pytest.approx({360: 0.5, 720: 0.5})


def test_read_missing_file(tmp_path):
    """Test error for a missing trace file."""
    with pytest.raises(FileNotFoundError):
        read_trace_file(tmp_path / "nope.csv")


def test_distributions_file_round_trip(tmp_path, viewport_dist, bandwidth_dist):
    """Test that saved distributions answer every query exactly like the originals."""
    path = tmp_path / "distributions.json"
    save_distributions(viewport_dist, bandwidth_dist, path)

    vd, bd = load_distributions(path)

    assert vd.pmf == viewport_dist.pmf
    np.testing.assert_array_equal(bd.support, bandwidth_dist.support)
    np.testing.assert_array_equal(bd.cdf_at_support, bandwidth_dist.cdf_at_support)
    xs = np.linspace(0, 6e6, 101)
    np.testing.assert_array_equal(bd.cdf(xs), bandwidth_dist.cdf(xs))
    assert json.loads(path.read_text())["schema_version"] == 1


def test_million_record_csv_ingests_quickly(tmp_path):
    """Test that a 10^6-record trace is ingested in under ten seconds."""
    rng = np.random.default_rng(5)
    n = 1_000_000
    path = tmp_path / "big.csv"
    path.write_text(
        "estimated_bandwidth_bps,viewport_height\n"
        + "\n".join(
            f"{b:.1f},{v}"
            for b, v in zip(
                rng.lognormal(np.log(4e6), 1.0, size=n),
                rng.choice([360, 480, 720, 1080], size=n),
            )
        )
        + "\n"
    )

    start = time.perf_counter()
    result = read_trace_file(path)
    elapsed = time.perf_counter() - start

    assert result.records_read == n
    assert elapsed < 10.0
