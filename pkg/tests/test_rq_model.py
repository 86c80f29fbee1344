"""Tests for rate-quality curves and chunk models."""

import json
import logging
import math

import numpy as np
import pytest

from abr_ladder.rq_model import (
    DEFAULT_CRF_SWEEP,
    ChunkRqModel,
    CurveParams,
    RateQualityCurve,
    RqSample,
    bitrate_range,
    chunk_model_from_dict,
    curve_from_samples,
    eval_quality,
    eval_quality_slope,
    load_chunk_model,
    synth_curve,
)

from conftest import make_curve


def test_sample_validation():
    """Test that samples reject non-positive bitrates and non-finite quality."""
    with pytest.raises(ValueError, match="Bitrate must be positive"):
        RqSample(0.0, 30.0)
    with pytest.raises(ValueError, match="Quality must be finite"):
        RqSample(1e5, math.nan)


def test_curve_needs_two_samples():
    """Test that a curve with one sample is rejected."""
    with pytest.raises(ValueError, match="at least 2 samples"):
        make_curve(360, [(1e5, 30.0)])


def test_curve_rejects_unsorted_bitrates():
    """Test that bitrates must be strictly ascending."""
    with pytest.raises(ValueError, match="strictly ascending"):
        make_curve(360, [(2e5, 30.0), (2e5, 31.0)])


def test_curve_rejects_decreasing_quality():
    """Test that quality may not drop as bitrate rises."""
    with pytest.raises(ValueError, match="quality decreases"):
        make_curve(360, [(1e5, 30.0), (2e5, 29.0)])


def test_eval_quality_interpolates_and_clamps(simple_model):
    """Test linear interpolation inside the range and clamping outside it."""
    curve = simple_model.curve(720)
    assert eval_quality(curve, 5e5) == pytest.approx(32.5)
    assert eval_quality(curve, 1e3) == 28.0
    assert eval_quality(curve, 1e9) == 42.0
    np.testing.assert_allclose(eval_quality(curve, [2e5, 8e5]), [28.0, 37.0])


def test_eval_quality_slope_is_right_hand(simple_model):
    """Test that the slope at a knot is the slope of the segment to its right."""
    curve = simple_model.curve(720)
    assert eval_quality_slope(curve, 8e5) == pytest.approx(5.0 / 2.4e6)
    assert eval_quality_slope(curve, 5e5) == pytest.approx(9.0 / 6e5)
    assert eval_quality_slope(curve, 3.2e6) == 0.0
    assert eval_quality_slope(curve, 1e3) == 0.0


def test_bitrate_range(simple_model):
    """Test the sampled bitrate range."""
    assert bitrate_range(simple_model.curve(1080)) == (4e5, 6.4e6)


def test_curve_from_samples_sorts_and_repairs(caplog):
    """Test that unordered, non-monotone samples are sorted and repaired with a warning."""
    samples = [RqSample(4e5, 35.0), RqSample(1e5, 30.0), RqSample(2e5, 36.0)]
    with caplog.at_level(logging.WARNING, logger="abr_ladder.rq_model"):
        curve = curve_from_samples(360, samples)

    assert list(curve.rates) == [1e5, 2e5, 4e5]
    assert list(curve.qualities) == [30.0, 36.0, 36.0]
    assert "Repaired 1 non-monotone" in caplog.text


def test_curve_from_samples_without_repair_rejects():
    """Test that repair can be switched off."""
    samples = [RqSample(1e5, 30.0), RqSample(2e5, 29.0)]
    with pytest.raises(ValueError, match="quality decreases"):
        curve_from_samples(360, samples, repair=False)


def test_synth_curve_labels_and_shape():
    """Test that synthetic curves carry crf labels and are concave in log-spaced samples."""
    curve = synth_curve(720, CurveParams(a=20.0, b=5.0, r_knee=1e6))

    assert len(curve.samples) == len(DEFAULT_CRF_SWEEP)
    assert curve.samples[0].label == "crf55"
    assert curve.samples[-1].label == "crf5"
    assert curve.samples[-1].bitrate == pytest.approx(1e8)
    assert np.all(np.diff(curve.slopes) < 0)


def test_synth_curve_rejects_bad_params():
    """Test that non-positive parameters are rejected."""
    with pytest.raises(ValueError, match="must be positive"):
        synth_curve(720, CurveParams(a=20.0, b=0.0, r_knee=1e6))


def test_chunk_model_rejects_curve_above_source():
    """Test that curves taller than the source are rejected."""
    with pytest.raises(ValueError, match="exceeds source"):
        ChunkRqModel("c", 720, {1080: make_curve(1080, [(1e5, 1.0), (2e5, 2.0)])})


def test_chunk_model_missing_curve(simple_model):
    """Test that asking for an absent resolution raises KeyError."""
    with pytest.raises(KeyError, match="no curve at 480p"):
        simple_model.curve(480)


def test_load_chunk_model(tmp_path, simple_model):
    """Test reading a chunk model file written from ``to_dict``."""
    path = tmp_path / "c1.json"
    path.write_text(json.dumps(simple_model.to_dict()))

    loaded = load_chunk_model(path)

    assert loaded.chunk_id == "c1"
    assert loaded.resolutions == [360, 720, 1080]
    assert loaded.curve(720).sample_with_label("crf23").bitrate == 8e5


def test_load_chunk_model_missing_file(tmp_path):
    """Test error for a missing file."""
    with pytest.raises(FileNotFoundError):
        load_chunk_model(tmp_path / "missing.json")


def test_chunk_model_from_dict_missing_field():
    """Test that a missing field is reported."""
    with pytest.raises(ValueError, match="missing field"):
        chunk_model_from_dict({"chunk_id": "c", "curves": []})
