"""
Built-in linear QoE models.

Three published models ship as constants:

- `gb-top10-linear`: the ten most important gradient-boosting features with
  their linear weights, producing MOS directly from unnormalized features.
- `lasso-full`: Lasso regression over all characteristics including PSNR,
  producing V for the canonical sigmoid.
- `lasso-reference-free`: Lasso regression without any reference-video
  feature, producing V for the canonical sigmoid.

Weights absent from a model are zero.
"""

import logging
from typing import Mapping

import pandas as pd

from .errors import InputError
from .models import LinearModel, ScoredResult, score_frame
from .schema import COL_MOS, COL_RAW_V, COL_SESSION_ID, CURVE_DIRECT_MOS, CURVE_LOGIT_V, SCORE_COLUMNS

logger = logging.getLogger(__name__)

GB_TOP10_LINEAR = "gb-top10-linear"
LASSO_FULL = "lasso-full"
LASSO_REFERENCE_FREE = "lasso-reference-free"
BUILTIN_NAMES = (GB_TOP10_LINEAR, LASSO_FULL, LASSO_REFERENCE_FREE)

_GB_TOP10_WEIGHTS = {
    "ratio_sequence_level_max_half": 17.7497,
    "average_video_resolution_px2": 0.0,
    "mean_seq_psnr_db": 0.4884,
    "ratio_minimum_sequence_level": -21.7635,
    "average_rendered_bitrate_kbps": 0.0006,
    "rebuffer_count": -3.1143,
    "initial_buffer_time_s": -0.1277,
    "rebuffer_percentage": -8.9932,
    "frequency_of_switching_per_s": -0.0848,
    "maximum_stall_duration_s": -1.4061,
}

_LASSO_FULL_WEIGHTS = {
    "rebuffer_count": -0.4618,
    "mean_seq_psnr_db": 0.3957,
    "average_rendered_bitrate_kbps": 0.4165,
    "maximum_stall_duration_s": -0.1122,
    "bitrate_pos_changes_count": -0.1494,
    "bitrate_max_pos_change_kbps": -0.013,
    "frequency_of_stalling_per_s": -0.0971,
    "rebuffer_percentage": -0.5905,
    "ratio_highest_sequence_level": -0.0611,
    "ratio_minimum_sequence_level": -0.8315,
    "ratio_sequence_level_max_half": 0.9112,
    "average_video_resolution_px2": 0.3147,
    "ti": -0.1727,
    "content_animals": 0.0639,
    "content_animation": 0.0923,
    "content_food": 0.6206,
    "content_game": -0.0142,
    "content_human": -0.0661,
    "content_movie": -0.0956,
    "motion_average": -0.3295,
    "motion_smooth": 0.0223,
}

_LASSO_REFERENCE_FREE_WEIGHTS = {
    "rebuffer_count": -0.2369,
    "average_stall_duration_s": -0.0149,
    "average_rendered_bitrate_kbps": 0.0001,
    "maximum_stall_duration_s": -0.0076,
    "bitrate_neg_changes_count": -0.0105,
    "bitrate_mean_neg_change_kbps": 0.0002,
    "frequency_of_stalling_per_s": 1.4992,
    "bitrate_switch_count": 0.1213,
    "frequency_of_switching_per_s": -0.7385,
    "rebuffer_percentage": -1.9522,
    "average_bitrate_switch_magnitude_kbps": 0.0001,
    "average_relative_bitrate_switch_magnitude_kbps": -0.0002,
    "ratio_highest_sequence_level": -0.1628,
    "ratio_minimum_sequence_level": -1.1528,
    "constant_bitrate": 0.1442,
}


def builtin_models():
    """The three published models, in a fixed order."""
    return [
        LinearModel(name=GB_TOP10_LINEAR, intercept=37.72, weights=_GB_TOP10_WEIGHTS, curve_mode=CURVE_DIRECT_MOS),
        LinearModel(name=LASSO_FULL, intercept=0.11, weights=_LASSO_FULL_WEIGHTS, curve_mode=CURVE_LOGIT_V),
        LinearModel(
            name=LASSO_REFERENCE_FREE,
            intercept=0.31,
            weights=_LASSO_REFERENCE_FREE_WEIGHTS,
            curve_mode=CURVE_LOGIT_V,
        ),
    ]


def get_builtin(name):
    for model in builtin_models():
        if model.name == name:
            return model
    raise InputError(f"unknown model '{name}'; built-in models are: {', '.join(BUILTIN_NAMES)}")


def score(features: Mapping[str, float], model: LinearModel) -> ScoredResult:
    """Score one encoded feature mapping (column name -> value)."""
    return model.score_one(features)


def score_table(frame: pd.DataFrame, model, n_trees=None) -> pd.DataFrame:
    """Score every row of a feature table into `session_id,raw_v,mos`."""
    raw, mos = score_frame(frame, model, n_trees=n_trees)
    if COL_SESSION_ID in frame.columns:
        session_ids = frame[COL_SESSION_ID].astype(str).to_list()
    else:
        session_ids = [str(i) for i in range(len(frame))]
    logger.debug(f"Scored {len(frame)} rows with model '{model.name}'")
    return pd.DataFrame({COL_SESSION_ID: session_ids, COL_RAW_V: raw, COL_MOS: mos}, columns=list(SCORE_COLUMNS))
