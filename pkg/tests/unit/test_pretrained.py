#!/usr/bin/env python3
"""
Tests for the built-in models, scoring and the model JSON codec.
"""

import json
import math

import numpy as np
import pandas as pd
import pytest

from session_helpers import s1_session, video_meta
from streamqoe.errors import InputError, MissingFeatureError, ModelFormatError
from streamqoe.features import ENCODED_COLUMNS, encode_mapping, extract_features
from streamqoe.gbm import GbmEnsemble, GbmHyperParams, TreeNode
from streamqoe.models import (
    ConstantModel,
    GbmQoEModel,
    LinearModel,
    load_model,
    model_from_dict,
    save_model,
    score_frame,
)
from streamqoe.pretrained import (
    BUILTIN_NAMES,
    GB_TOP10_LINEAR,
    LASSO_FULL,
    LASSO_REFERENCE_FREE,
    builtin_models,
    get_builtin,
    score,
    score_table,
)


def _zero_vector(psnr=0.0):
    vector = dict.fromkeys(ENCODED_COLUMNS, 0.0)
    vector["mean_seq_psnr_db"] = psnr
    return vector


def _sigmoid_mos(v):
    return 100.0 / (1.0 + math.exp(-v))


class TestBuiltinModels:
    """Published weights and their metadata."""

    def test_three_models(self):
        models = builtin_models()
        assert [m.name for m in models] == list(BUILTIN_NAMES)

    def test_gb_top10_linear(self):
        model = get_builtin(GB_TOP10_LINEAR)

        assert model.intercept == 37.72
        assert model.curve_mode == "direct_mos"
        assert len(model.weights) == 10
        assert model.weights["ratio_sequence_level_max_half"] == 17.7497
        assert model.weights["ratio_minimum_sequence_level"] == -21.7635
        assert model.weights["rebuffer_count"] == -3.1143
        assert "average_video_resolution_px2" in model.weights
        assert model.weights["average_video_resolution_px2"] == 0.0

    def test_lasso_full(self):
        model = get_builtin(LASSO_FULL)

        assert model.intercept == 0.11
        assert model.curve_mode == "logit_v"
        assert model.requires_reference
        assert model.weights["rebuffer_percentage"] == -0.5905
        assert model.weights["ratio_minimum_sequence_level"] == -0.8315
        assert model.weights["content_food"] == 0.6206
        assert "content_architecture" not in model.weights

    def test_lasso_reference_free(self):
        model = get_builtin(LASSO_REFERENCE_FREE)

        assert model.intercept == 0.31
        assert model.curve_mode == "logit_v"
        assert not model.requires_reference
        assert "mean_seq_psnr_db" not in model.weights
        assert model.weights["rebuffer_percentage"] == -1.9522
        assert model.weights["frequency_of_stalling_per_s"] == 1.4992
        assert model.weights["constant_bitrate"] == 0.1442

    def test_weight_keys_are_encoded_columns(self):
        for model in builtin_models():
            assert set(model.weights) <= set(ENCODED_COLUMNS), model.name

    def test_unknown_model_lists_builtins(self):
        with pytest.raises(InputError) as excinfo:
            get_builtin("p1203")
        for name in BUILTIN_NAMES:
            assert name in str(excinfo.value)

    def test_weights_are_read_only(self):
        with pytest.raises(TypeError):
            get_builtin(GB_TOP10_LINEAR).weights["rebuffer_count"] = 0.0


class TestScore:
    """Scoring single feature vectors."""

    def test_zero_vector_direct(self):
        result = score(_zero_vector(), get_builtin(GB_TOP10_LINEAR))
        assert result.raw_v == 37.72
        assert result.mos == 37.72

    def test_zero_vector_logit_models(self):
        full = score(_zero_vector(), get_builtin(LASSO_FULL))
        free = score(_zero_vector(), get_builtin(LASSO_REFERENCE_FREE))

        assert full.raw_v == pytest.approx(0.11)
        assert full.mos == pytest.approx(_sigmoid_mos(0.11), abs=1e-9)
        assert free.raw_v == pytest.approx(0.31)
        assert free.mos == pytest.approx(_sigmoid_mos(0.31), abs=1e-9)
        assert free.mos == pytest.approx(57.69, abs=0.01)

    def test_s1_reference_free_dot_product(self):
        features = encode_mapping(extract_features(s1_session(), video_meta()))
        expected = (
            0.31
            - 0.2369 * 1            # rebuffer_count
            - 0.0149 * 1.0          # average stall duration
            + 0.0001 * 1500.0       # average rendered bitrate
            - 0.0076 * 1.0          # maximum stall duration
            - 0.0105 * 0            # negative changes
            + 0.0002 * 0.0          # mean negative change
            + 1.4992 / 11           # stalling frequency
            + 0.1213 * 1            # switch count
            - 0.7385 / 11           # switching frequency
            - 1.9522 / 9            # rebuffer percentage
            + 0.0001 * 1000.0       # switch magnitude
            - 0.0002 * 1000.0       # relative switch magnitude
            - 0.1628 * 4 / 9        # highest sequence level
            - 1.1528 * 4 / 9        # minimum sequence level
            + 0.1442 * 0            # constant bitrate
        )
        result = score(features, get_builtin(LASSO_REFERENCE_FREE))

        assert expected == pytest.approx(-0.510568, abs=1e-6)
        assert result.raw_v == pytest.approx(expected, abs=1e-12)
        assert result.mos == pytest.approx(_sigmoid_mos(expected), abs=1e-9)

    def test_reference_free_ignores_missing_psnr(self):
        features = encode_mapping(extract_features(s1_session(), video_meta()))
        assert math.isnan(features["mean_seq_psnr_db"])
        score(features, get_builtin(LASSO_REFERENCE_FREE))

    def test_full_model_requires_psnr(self):
        features = encode_mapping(extract_features(s1_session(), video_meta()))
        with pytest.raises(MissingFeatureError, match="mean_seq_psnr_db"):
            score(features, get_builtin(LASSO_FULL))

    def test_linear_before_curve(self):
        model = get_builtin(LASSO_FULL)
        rng = np.random.default_rng(4)
        a = dict(zip(ENCODED_COLUMNS, rng.uniform(0, 5, len(ENCODED_COLUMNS))))
        b = dict(zip(ENCODED_COLUMNS, rng.uniform(0, 5, len(ENCODED_COLUMNS))))
        alpha = 0.3
        mixed = {k: alpha * a[k] + (1 - alpha) * b[k] for k in ENCODED_COLUMNS}

        expected = alpha * score(a, model).raw_v + (1 - alpha) * score(b, model).raw_v
        assert score(mixed, model).raw_v == pytest.approx(expected, abs=1e-9)

    def test_mos_clamped(self):
        features = _zero_vector()
        features["rebuffer_count"] = 100.0
        assert score(features, get_builtin(GB_TOP10_LINEAR)).mos == 0.0

    def test_mos_increasing_in_raw_v(self):
        model = get_builtin(LASSO_REFERENCE_FREE)
        results = []
        for count in range(10, -1, -1):
            features = _zero_vector()
            features["rebuffer_count"] = float(count)
            results.append(score(features, model))
        raws = [r.raw_v for r in results]
        moses = [r.mos for r in results]
        assert raws == sorted(raws)
        assert moses == sorted(moses)

    def test_normalization_applied(self):
        model = LinearModel(name="scaled", intercept=0.0, weights={"rebuffer_count": 1.0},
                            normalization={"rebuffer_count": (0.0, 4.0)})
        assert score({"rebuffer_count": 2.0}, model).raw_v == 0.5


class TestScoreTable:
    def test_table_columns(self):
        frame = pd.DataFrame([dict(_zero_vector(), session_id="a"), dict(_zero_vector(), session_id="b")])
        table = score_table(frame, get_builtin(GB_TOP10_LINEAR))

        assert list(table.columns) == ["session_id", "raw_v", "mos"]
        assert table["session_id"].tolist() == ["a", "b"]
        assert table["mos"].tolist() == [37.72, 37.72]

    def test_missing_column_named(self):
        frame = pd.DataFrame([_zero_vector()]).drop(columns=["mean_seq_psnr_db"])
        with pytest.raises(MissingFeatureError, match="mean_seq_psnr_db"):
            score_table(frame, get_builtin(LASSO_FULL))

    def test_matches_single_scoring(self):
        features = encode_mapping(extract_features(s1_session(), video_meta()))
        model = get_builtin(LASSO_REFERENCE_FREE)
        raw, mos = score_frame(pd.DataFrame([features]), model)

        assert raw[0] == pytest.approx(score(features, model).raw_v, abs=1e-12)
        assert mos[0] == pytest.approx(score(features, model).mos, abs=1e-9)


class TestModelCodec:
    """Model JSON documents."""

    def test_export_then_load_scores_identically(self, tmp_path):
        features = encode_mapping(extract_features(s1_session(), video_meta()))
        for model in builtin_models():
            path = tmp_path / f"{model.name}.json"
            save_model(model, path)
            loaded = load_model(path)

            assert loaded == model
            if not model.requires_reference:
                assert score(features, loaded) == score(features, model)

    def test_document_layout(self, tmp_path):
        path = tmp_path / "model.json"
        save_model(get_builtin(LASSO_FULL), path)
        document = json.loads(path.read_text(encoding="utf-8"))

        assert document["name"] == LASSO_FULL
        assert document["w0"] == 0.11
        assert document["curve_mode"] == "logit_v"
        assert document["requires_reference"] is True
        assert document["weights"]["content_food"] == 0.6206
        assert "normalization" not in document

    def test_display_names_resolved(self):
        model = model_from_dict({
            "name": "legacy",
            "w0": 1.0,
            "curve_mode": "direct_mos",
            "weights": {"Average Weighted Bitrate": 0.5, "Rebuffer count": -1.0},
        })
        assert dict(model.weights) == {"average_rendered_bitrate_kbps": 0.5, "rebuffer_count": -1.0}

    def test_unknown_feature_rejected(self):
        with pytest.raises(ModelFormatError, match="unknown feature name"):
            model_from_dict({"name": "x", "w0": 0, "curve_mode": "direct_mos", "weights": {"buffer_health": 1}})

    def test_requires_reference_must_agree(self):
        with pytest.raises(ModelFormatError, match="requires_reference"):
            model_from_dict({"name": "x", "w0": 0, "curve_mode": "logit_v", "requires_reference": True,
                             "weights": {"rebuffer_count": 1}})

    def test_bad_curve_mode(self):
        with pytest.raises(ModelFormatError, match="curve_mode"):
            model_from_dict({"name": "x", "w0": 0, "curve_mode": "linear", "weights": {}})

    def test_unknown_kind(self):
        with pytest.raises(ModelFormatError, match="unknown model kind"):
            model_from_dict({"kind": "forest", "name": "x"})

    def test_invalid_json_file(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text("{", encoding="utf-8")
        with pytest.raises(ModelFormatError):
            load_model(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError, match="cannot read model"):
            load_model(tmp_path / "absent.json")

    def test_gbm_model_round_trip(self, tmp_path):
        tree = TreeNode(n_samples=20, impurity=0.25, value=0.0, feature_index=0, threshold=0.5,
                        left=TreeNode(10, 0.0, -1.0), right=TreeNode(10, 0.0, 1.0))
        ensemble = GbmEnsemble(init_value=0.2, trees=(tree,), learning_rate=0.1,
                               hyper=GbmHyperParams(n_estimators=1), feature_names=("rebuffer_count",))
        model = GbmQoEModel(name="tiny", ensemble=ensemble, normalization={"rebuffer_count": (0.0, 2.0)})
        path = tmp_path / "gbm.json"
        save_model(model, path)
        loaded = load_model(path)

        frame = pd.DataFrame({"rebuffer_count": [0.0, 2.0]})
        np.testing.assert_allclose(loaded.raw_values(frame), [0.1, 0.3], rtol=0, atol=1e-12)
        assert loaded == model

    def test_constant_model(self, tmp_path):
        model = ConstantModel(name="baseline", value=0.0)
        path = tmp_path / "baseline.json"
        save_model(model, path)
        loaded = load_model(path)

        raw, mos = score_frame(pd.DataFrame({"x": [1, 2, 3]}), loaded)
        np.testing.assert_array_equal(raw, [0.0, 0.0, 0.0])
        np.testing.assert_allclose(mos, [50.0, 50.0, 50.0])
