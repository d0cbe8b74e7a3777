#!/usr/bin/env python3
"""
Tests for session feature extraction and categorical encoding.
"""

import math

import numpy as np
import pytest

from session_helpers import random_session_document, s1_document, s1_session, session_document, video_meta
from streamqoe.errors import FeatureError
from streamqoe.features import (
    ENCODED_COLUMNS,
    FREQUENCY_FEATURES,
    NUMERIC_FEATURES,
    RATIO_FEATURES,
    encode_categoricals,
    encode_mapping,
    extract_features,
    feature_frame,
    level_time_ratios,
    ratio_level_range,
    resolve_feature_name,
)
from streamqoe.session_model import parse_session

TOLERANCE = 1e-12


def _features(document, **meta):
    return extract_features(parse_session(document), video_meta(**meta))


class TestExtractFeaturesS1:
    """Hand-computed features of the S1 session."""

    @pytest.fixture
    def s1(self):
        return extract_features(s1_session(), video_meta())

    def test_stalling(self, s1):
        assert s1.initial_buffer_time_s == 2.0
        assert s1.rebuffer_percentage == pytest.approx(1 / 9, abs=TOLERANCE)
        assert s1.rebuffer_count == 1
        assert s1.frequency_of_stalling_per_s == pytest.approx(1 / 11, abs=TOLERANCE)
        assert s1.average_stall_duration_s == 1.0
        assert s1.maximum_stall_duration_s == 1.0

    def test_bitrate_and_switching(self, s1):
        assert s1.average_rendered_bitrate_kbps == pytest.approx(1500.0, abs=TOLERANCE)
        assert s1.bitrate_switch_count == 1
        assert s1.average_bitrate_switch_magnitude_kbps == 1000.0
        assert s1.average_relative_bitrate_switch_magnitude_kbps == 1000.0
        assert s1.bitrate_pos_changes_count == 1
        assert s1.bitrate_neg_changes_count == 0
        assert s1.bitrate_max_pos_change_kbps == 1000.0
        assert s1.bitrate_mean_pos_change_kbps == 1000.0
        assert s1.bitrate_max_neg_change_kbps == 0.0
        assert s1.bitrate_mean_neg_change_kbps == 0.0
        assert s1.frequency_of_switching_per_s == pytest.approx(1 / 11, abs=TOLERANCE)
        assert s1.constant_bitrate is False

    def test_level_ratios(self, s1):
        assert s1.ratio_highest_sequence_level == pytest.approx(4 / 9, abs=TOLERANCE)
        assert s1.ratio_minimum_sequence_level == pytest.approx(4 / 9, abs=TOLERANCE)
        assert s1.ratio_sequence_level_max_half == 0.0
        assert s1.ratio_highest_ladder_level == 0.0

    def test_resolution_and_video(self, s1):
        assert s1.average_video_resolution_px2 == pytest.approx(1600 * 900, abs=TOLERANCE)
        assert (s1.si, s1.ti) == (53.0, 66.0)
        assert s1.mean_seq_psnr_db is None
        assert not s1.has_reference


class TestExtractFeaturesEdgeCases:
    """Degenerate sessions and meta handling."""

    def test_single_level_without_stalls(self):
        v = _features(session_document(segments=[(7, 10.0)]))

        assert v.rebuffer_percentage == 0.0
        assert v.bitrate_switch_count == 0
        assert v.average_bitrate_switch_magnitude_kbps == 0.0
        assert v.average_relative_bitrate_switch_magnitude_kbps == 0.0
        assert v.frequency_of_switching_per_s == 0.0
        assert v.ratio_highest_sequence_level == 1.0
        assert v.ratio_minimum_sequence_level == 1.0
        assert v.ratio_sequence_level_max_half == 1.0
        assert v.constant_bitrate is True

    def test_top_level_throughout(self):
        v = _features(session_document(segments=[(11, 4.0), (11, 4.0)], stalls=[(2.0, 3.0)]))
        assert v.ratio_highest_ladder_level == v.ratio_highest_sequence_level

    def test_no_stalls_zeroes_stall_features(self):
        v = _features(session_document(segments=[(2, 4.0), (6, 4.0)], initial_buffering=1.5))

        assert v.rebuffer_percentage == 0.0
        assert v.rebuffer_count == 0
        assert v.frequency_of_stalling_per_s == 0.0
        assert v.average_stall_duration_s == 0.0
        assert v.maximum_stall_duration_s == 0.0

    def test_down_switch_is_negative_change(self):
        v = _features(session_document(segments=[(5, 4.0), (3, 4.0)]))

        assert v.bitrate_neg_changes_count == 1
        assert v.bitrate_max_neg_change_kbps == 1000.0
        assert v.average_relative_bitrate_switch_magnitude_kbps == -1000.0
        assert v.average_bitrate_switch_magnitude_kbps == 1000.0

    def test_repeated_level_is_not_a_switch(self):
        v = _features(session_document(segments=[(3, 2.0), (3, 2.0), (5, 2.0)]))
        assert v.bitrate_switch_count == 1

    def test_psnr_passed_through(self):
        v = _features(s1_document(), psnr=38.2)
        assert v.mean_seq_psnr_db == 38.2
        assert v.has_reference

    def test_mismatched_video_rejected(self):
        with pytest.raises(FeatureError, match="does not match"):
            extract_features(s1_session(), video_meta(video_id="Ski"))


@pytest.fixture(scope="module")
def vectors():
    rng = np.random.default_rng(2024)
    return [_features(random_session_document(rng)) for _ in range(1000)]


class TestFeatureProperties:
    """Properties over randomly generated sessions."""

    def test_ratios_within_unit_interval(self, vectors):
        for v in vectors:
            for name in RATIO_FEATURES:
                value = getattr(v, name)
                assert -TOLERANCE <= value <= 1.0 + TOLERANCE, name

    def test_switch_count_decomposes(self, vectors):
        for v in vectors:
            assert v.bitrate_pos_changes_count + v.bitrate_neg_changes_count == v.bitrate_switch_count

    def test_magnitude_bounds_relative_magnitude(self, vectors):
        for v in vectors:
            assert v.average_bitrate_switch_magnitude_kbps >= abs(
                v.average_relative_bitrate_switch_magnitude_kbps) - 1e-9

    def test_min_and_max_sequence_share_active_time(self, vectors):
        for v in vectors:
            if v.constant_bitrate:
                assert v.ratio_minimum_sequence_level == v.ratio_highest_sequence_level
            else:
                assert v.ratio_minimum_sequence_level + v.ratio_highest_sequence_level <= 1.0 + TOLERANCE

    def test_scaling_durations(self):
        rng = np.random.default_rng(5)
        c = 2.5
        for _ in range(50):
            document = random_session_document(rng)
            scaled = dict(document)
            scaled["initial_buffering_s"] = document["initial_buffering_s"] * c
            scaled["segments"] = [{"level": s["level"], "duration_s": s["duration_s"] * c}
                                  for s in document["segments"]]
            scaled["stalls"] = [{"after_playback_s": s["after_playback_s"] * c, "duration_s": s["duration_s"] * c}
                                for s in document["stalls"]]
            base, stretched = _features(document), _features(scaled)

            for name in RATIO_FEATURES:
                assert getattr(stretched, name) == pytest.approx(getattr(base, name), abs=1e-12)
            for name in FREQUENCY_FEATURES:
                assert getattr(stretched, name) == pytest.approx(getattr(base, name) / c)

    def test_self_concatenation(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            document = random_session_document(rng)
            rendered = math.fsum(s["duration_s"] for s in document["segments"])
            doubled = dict(document)
            doubled["segments"] = document["segments"] * 2
            doubled["stalls"] = document["stalls"] + [
                {"after_playback_s": s["after_playback_s"] + rendered, "duration_s": s["duration_s"]}
                for s in document["stalls"]
            ]
            doubled["initial_buffering_s"] = 0.0
            single = dict(document, initial_buffering_s=0.0)
            base, twice = _features(single), _features(doubled)

            for name in RATIO_FEATURES + ("frequency_of_stalling_per_s", "average_rendered_bitrate_kbps"):
                assert getattr(twice, name) == pytest.approx(getattr(base, name), rel=1e-9, abs=1e-12), name


class TestEncoding:
    """One-hot encoding and the feature table."""

    def test_column_layout(self):
        assert len(NUMERIC_FEATURES) == 25
        assert len(ENCODED_COLUMNS) == 25 + 10 + 5 + 1
        assert ENCODED_COLUMNS[25] == "content_animals"
        assert ENCODED_COLUMNS[35] == "motion_average"
        assert ENCODED_COLUMNS[-1] == "constant_bitrate"

    def test_content_indicator(self):
        v = _features(s1_document(), content="food")
        mapping = encode_mapping(v)

        assert mapping["content_food"] == 1.0
        assert sum(mapping[c] for c in ENCODED_COLUMNS if c.startswith("content_")) == 1.0

    def test_s1_has_two_categorical_ones(self):
        encoded = encode_categoricals(extract_features(s1_session(), video_meta()))
        categorical = encoded[25:40]

        assert categorical.sum() == 2.0
        assert encode_mapping(extract_features(s1_session(), video_meta()))["content_movie"] == 1.0

    def test_constant_bitrate_encoded(self):
        v = _features(session_document(segments=[(4, 10.0)]))
        assert encode_categoricals(v)[-1] == 1.0

    def test_absent_psnr_is_nan(self):
        encoded = encode_mapping(extract_features(s1_session(), video_meta()))
        assert math.isnan(encoded["mean_seq_psnr_db"])

    def test_unknown_category_rejected(self):
        v = extract_features(s1_session(), video_meta())
        broken = v.__class__(**{**v.__dict__, "motion": "wobbly"})

        with pytest.raises(FeatureError, match="unknown motion"):
            encode_categoricals(broken)

    def test_feature_frame_columns(self):
        v = extract_features(s1_session(), video_meta())
        frame = feature_frame([("s1", "TearsOfSteel1", v)], [level_time_ratios(s1_session())])

        assert list(frame.columns[:2]) == ["session_id", "video_id"]
        assert list(frame.columns[2:2 + len(ENCODED_COLUMNS)]) == list(ENCODED_COLUMNS)
        assert frame.columns[-1] == "ratio_level_11"
        assert frame.loc[0, "ratio_level_3"] == pytest.approx(4 / 9)


class TestLevelRatios:
    def test_level_shares(self):
        ratios = level_time_ratios(s1_session())

        assert set(ratios) == set(range(1, 12))
        assert ratios[3] == pytest.approx(4 / 9)
        assert ratios[5] == pytest.approx(4 / 9)
        assert ratios[1] == 0.0

    def test_range(self):
        assert ratio_level_range(s1_session(), 3, 5) == pytest.approx(8 / 9)
        with pytest.raises(FeatureError):
            ratio_level_range(s1_session(), 6, 2)


class TestFeatureNames:
    """Published spellings resolve to canonical columns."""

    @pytest.mark.parametrize(
        "name, canonical",
        [
            ("rebuffer_count", "rebuffer_count"),
            ("Average Weighted Bitrate", "average_rendered_bitrate_kbps"),
            ("Average Bitrate Swithcing magnitude", "average_bitrate_switch_magnitude_kbps"),
            ("Mean SeqPSNR", "mean_seq_psnr_db"),
            ("frequency_of_stalling", "frequency_of_stalling_per_s"),
            ("Motion smooth", "motion_smooth"),
            ("initial_buffer_time", "initial_buffer_time_s"),
        ],
    )
    def test_aliases(self, name, canonical):
        assert resolve_feature_name(name) == canonical

    def test_unknown_name(self):
        with pytest.raises(FeatureError, match="unknown feature name"):
            resolve_feature_name("buffer_health")
