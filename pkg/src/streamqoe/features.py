"""
Session feature extraction.

Turns a StreamingSession plus its VideoMeta into the canonical feature vector:
standard client-side QoE metrics (initial buffering, rebuffering, bitrate and
switching statistics), the handcrafted sequence-level ratios, stall and
switching frequencies, video complexity (SI/TI, PSNR) and the categorical
content/motion/constant-bitrate characteristics.

Durations are seconds, bitrates kbps, resolutions pixels.
"""

import math
import re
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import FeatureError
from .schema import (
    CONTENT_TYPES,
    MOTION_TYPES,
    COL_SESSION_ID,
    COL_VIDEO_ID,
    LEVEL_RATIO_PREFIX,
)
from .session_model import StreamingSession, VideoMeta, session_timeline

# Canonical order of the numeric characteristics.
NUMERIC_FEATURES = (
    "initial_buffer_time_s",
    "rebuffer_percentage",
    "rebuffer_count",
    "average_rendered_bitrate_kbps",
    "bitrate_switch_count",
    "average_bitrate_switch_magnitude_kbps",
    "ratio_highest_ladder_level",
    "average_relative_bitrate_switch_magnitude_kbps",
    "ratio_highest_sequence_level",
    "ratio_minimum_sequence_level",
    "ratio_sequence_level_max_half",
    "average_video_resolution_px2",
    "mean_seq_psnr_db",
    "bitrate_pos_changes_count",
    "bitrate_neg_changes_count",
    "bitrate_max_pos_change_kbps",
    "bitrate_max_neg_change_kbps",
    "bitrate_mean_pos_change_kbps",
    "bitrate_mean_neg_change_kbps",
    "ti",
    "si",
    "frequency_of_stalling_per_s",
    "average_stall_duration_s",
    "maximum_stall_duration_s",
    "frequency_of_switching_per_s",
)

RATIO_FEATURES = (
    "rebuffer_percentage",
    "ratio_highest_ladder_level",
    "ratio_highest_sequence_level",
    "ratio_minimum_sequence_level",
    "ratio_sequence_level_max_half",
)

FREQUENCY_FEATURES = (
    "frequency_of_stalling_per_s",
    "frequency_of_switching_per_s",
)

PSNR_FEATURE = "mean_seq_psnr_db"
CONSTANT_BITRATE = "constant_bitrate"

_UNIT_SUFFIXES = ("_per_s", "_kbps", "_px2", "_db", "_s")


@dataclass(frozen=True)
class FeatureVector:
    initial_buffer_time_s: float
    rebuffer_percentage: float
    rebuffer_count: int
    average_rendered_bitrate_kbps: float
    bitrate_switch_count: int
    average_bitrate_switch_magnitude_kbps: float
    ratio_highest_ladder_level: float
    average_relative_bitrate_switch_magnitude_kbps: float
    ratio_highest_sequence_level: float
    ratio_minimum_sequence_level: float
    ratio_sequence_level_max_half: float
    average_video_resolution_px2: float
    mean_seq_psnr_db: float | None
    bitrate_pos_changes_count: int
    bitrate_neg_changes_count: int
    bitrate_max_pos_change_kbps: float
    bitrate_max_neg_change_kbps: float
    bitrate_mean_pos_change_kbps: float
    bitrate_mean_neg_change_kbps: float
    ti: float
    si: float
    frequency_of_stalling_per_s: float
    average_stall_duration_s: float
    maximum_stall_duration_s: float
    frequency_of_switching_per_s: float
    constant_bitrate: bool
    content: str
    motion: str

    @property
    def has_reference(self):
        return self.mean_seq_psnr_db is not None

    def numeric_values(self):
        """Numeric features in canonical order; absent PSNR is NaN."""
        return [
            math.nan if getattr(self, name) is None else float(getattr(self, name))
            for name in NUMERIC_FEATURES
        ]


@dataclass(frozen=True)
class CategoryVocabulary:
    """Closed vocabularies used for one-hot encoding."""
    content: tuple = CONTENT_TYPES
    motion: tuple = MOTION_TYPES

    @property
    def content_columns(self):
        return tuple(f"content_{c}" for c in self.content)

    @property
    def motion_columns(self):
        return tuple(f"motion_{m}" for m in self.motion)

    def columns(self):
        """Encoded column names: numerics, content, motion, constant_bitrate."""
        return NUMERIC_FEATURES + self.content_columns + self.motion_columns + (CONSTANT_BITRATE,)


DEFAULT_VOCABULARY = CategoryVocabulary()
ENCODED_COLUMNS = DEFAULT_VOCABULARY.columns()


# --- Extraction ---

def _mean_or_zero(values):
    return math.fsum(values) / len(values) if len(values) else 0.0


def extract_features(session: StreamingSession, meta: VideoMeta) -> FeatureVector:
    """Compute the canonical feature vector of one session."""
    if meta.video_id != session.video_id:
        raise FeatureError(
            f"video meta '{meta.video_id}' does not match session video '{session.video_id}'"
        )

    timeline = session_timeline(session)
    active = timeline.active_denominator_s
    total = timeline.total_duration_s
    rendered = timeline.rendered_playback_s
    ladder = session.ladder

    levels = [s.level_index for s in session.segments]
    durations = [s.duration_s for s in session.segments]
    bitrates = session.bitrates_kbps()
    widths = [ladder.level(i).width_px for i in levels]
    heights = [ladder.level(i).height_px for i in levels]

    def time_where(predicate):
        return math.fsum(d for level, d in zip(levels, durations) if predicate(level))

    # Switches: consecutive segments at different levels.
    deltas = [
        bitrates[i] - bitrates[i - 1]
        for i in range(1, len(levels))
        if levels[i] != levels[i - 1]
    ]
    increases = [d for d in deltas if d > 0]
    decreases = [-d for d in deltas if d < 0]
    switch_count = len(deltas)

    stall_durations = [s.duration_s for s in session.stalls]
    half_threshold = math.ceil(len(ladder) / 2)
    highest_seen = max(levels)
    lowest_seen = min(levels)

    return FeatureVector(
        initial_buffer_time_s=session.initial_buffering_s,
        rebuffer_percentage=timeline.total_stall_s / active,
        rebuffer_count=len(stall_durations),
        average_rendered_bitrate_kbps=math.fsum(b * d for b, d in zip(bitrates, durations)) / rendered,
        bitrate_switch_count=switch_count,
        average_bitrate_switch_magnitude_kbps=_mean_or_zero([abs(d) for d in deltas]),
        ratio_highest_ladder_level=time_where(lambda level: level == ladder.max_index) / active,
        average_relative_bitrate_switch_magnitude_kbps=_mean_or_zero(deltas),
        ratio_highest_sequence_level=time_where(lambda level: level == highest_seen) / active,
        ratio_minimum_sequence_level=time_where(lambda level: level == lowest_seen) / active,
        ratio_sequence_level_max_half=time_where(lambda level: level >= half_threshold) / active,
        average_video_resolution_px2=(
            math.fsum(w * d for w, d in zip(widths, durations)) / rendered
            * math.fsum(h * d for h, d in zip(heights, durations)) / rendered
        ),
        mean_seq_psnr_db=meta.mean_seq_psnr,
        bitrate_pos_changes_count=len(increases),
        bitrate_neg_changes_count=len(decreases),
        bitrate_max_pos_change_kbps=max(increases, default=0.0),
        bitrate_max_neg_change_kbps=max(decreases, default=0.0),
        bitrate_mean_pos_change_kbps=_mean_or_zero(increases),
        bitrate_mean_neg_change_kbps=_mean_or_zero(decreases),
        ti=meta.ti,
        si=meta.si,
        frequency_of_stalling_per_s=len(stall_durations) / total,
        average_stall_duration_s=_mean_or_zero(stall_durations),
        maximum_stall_duration_s=max(stall_durations, default=0.0),
        frequency_of_switching_per_s=switch_count / total,
        constant_bitrate=len(set(levels)) == 1,
        content=meta.content,
        motion=meta.motion,
    )


def level_time_ratios(session: StreamingSession) -> dict:
    """Share of active time spent at every ladder level (1..L)."""
    active = session_timeline(session).active_denominator_s
    ratios = {}
    for level in session.ladder.levels:
        spent = math.fsum(s.duration_s for s in session.segments if s.level_index == level.index)
        ratios[level.index] = spent / active
    return ratios


def ratio_level_range(session: StreamingSession, low: int, high: int) -> float:
    """Share of active time spent at levels low..high inclusive."""
    if low > high:
        raise FeatureError(f"empty level range {low}..{high}")
    ratios = level_time_ratios(session)
    return math.fsum(r for level, r in ratios.items() if low <= level <= high)


# --- Encoding ---

def encode_categoricals(vector: FeatureVector, vocab: CategoryVocabulary = DEFAULT_VOCABULARY) -> np.ndarray:
    """Dense numeric vector in `vocab.columns()` order.

    Content and motion become one-hot indicator columns, constant_bitrate 0/1.
    An absent PSNR stays NaN.
    """
    if vector.content not in vocab.content:
        raise FeatureError(f"unknown content '{vector.content}'")
    if vector.motion not in vocab.motion:
        raise FeatureError(f"unknown motion '{vector.motion}'")

    content = [1.0 if vector.content == c else 0.0 for c in vocab.content]
    motion = [1.0 if vector.motion == m else 0.0 for m in vocab.motion]
    return np.array(
        vector.numeric_values() + content + motion + [1.0 if vector.constant_bitrate else 0.0],
        dtype=np.float64,
    )


def encode_mapping(vector: FeatureVector, vocab: CategoryVocabulary = DEFAULT_VOCABULARY) -> dict:
    """Encoded vector keyed by column name."""
    return dict(zip(vocab.columns(), encode_categoricals(vector, vocab).tolist()))


def feature_frame(rows, level_ratios=None, vocab: CategoryVocabulary = DEFAULT_VOCABULARY) -> pd.DataFrame:
    """Build a feature table from (session_id, video_id, FeatureVector) rows.

    `level_ratios`, when given, holds one level -> ratio mapping per row and
    adds `ratio_level_<k>` columns after the encoded ones.
    """
    columns = list(vocab.columns())
    records = []
    for position, (session_id, video_id, vector) in enumerate(rows):
        record = {COL_SESSION_ID: session_id, COL_VIDEO_ID: video_id}
        record.update(zip(columns, encode_categoricals(vector, vocab).tolist()))
        if level_ratios is not None:
            for level, ratio in level_ratios[position].items():
                record[f"{LEVEL_RATIO_PREFIX}{level}"] = ratio
        records.append(record)

    frame = pd.DataFrame.from_records(records)
    ordered = [COL_SESSION_ID, COL_VIDEO_ID] + columns
    extra = [c for c in frame.columns if c not in ordered]
    extra.sort(key=lambda name: int(name[len(LEVEL_RATIO_PREFIX):]))
    if frame.empty:
        return pd.DataFrame(columns=ordered)
    return frame[ordered + extra]


# --- Feature-name aliasing ---

def _normalize_key(name):
    return re.sub(r"[^a-z0-9]+", "_", str(name).lower()).strip("_")


def _strip_unit(name):
    for suffix in _UNIT_SUFFIXES:
        if name.endswith(suffix):
            return name[: -len(suffix)]
    return name


# Published display names and spellings -> canonical column names.
_DISPLAY_ALIASES = {
    "initial_buffer_time": "initial_buffer_time_s",
    "initial_buffer_time_seconds": "initial_buffer_time_s",
    "rebuffer_percentage": "rebuffer_percentage",
    "rebuffer_count": "rebuffer_count",
    "average_rendered_bitrate": "average_rendered_bitrate_kbps",
    "average_rendered_bitrate_kbps": "average_rendered_bitrate_kbps",
    "average_weighted_bitrate": "average_rendered_bitrate_kbps",
    "bitrate_switch_count": "bitrate_switch_count",
    "average_bitrate_switch_magnitude": "average_bitrate_switch_magnitude_kbps",
    "average_bitrate_swithcing_magnitude": "average_bitrate_switch_magnitude_kbps",
    "average_bitrate_switching_magnitude": "average_bitrate_switch_magnitude_kbps",
    "average_relative_bitrate_switching_magnitude": "average_relative_bitrate_switch_magnitude_kbps",
    "average_relative_bitrate_swithcing_magnitude": "average_relative_bitrate_switch_magnitude_kbps",
    "ratio_on_highest_video_quality_level": "ratio_highest_ladder_level",
    "ratio_on_highest_sequence_quality_level": "ratio_highest_sequence_level",
    "ratio_on_minimum_sequence_quality_level": "ratio_minimum_sequence_level",
    "ratio_on_sequence_quality_level_max_2": "ratio_sequence_level_max_half",
    "average_video_resolution": "average_video_resolution_px2",
    "mean_seqpsnr": "mean_seq_psnr_db",
    "mean_seq_psnr": "mean_seq_psnr_db",
    "bitrate_neg_change_s_count": "bitrate_neg_changes_count",
    "frequency_of_stalling": "frequency_of_stalling_per_s",
    "average_duration_of_stalling_events": "average_stall_duration_s",
    "maximum_duration_of_stalling": "maximum_stall_duration_s",
    "frequency_of_switching": "frequency_of_switching_per_s",
}


def resolve_feature_name(name, vocab: CategoryVocabulary = DEFAULT_VOCABULARY) -> str:
    """Map a canonical name, unit-free short form or published display name
    to its canonical encoded-column name."""
    columns = vocab.columns()
    if name in columns:
        return name

    key = _normalize_key(name)
    if key in columns:
        return key
    if key in _DISPLAY_ALIASES:
        return _DISPLAY_ALIASES[key]
    if key.startswith("motion_") and key.endswith("_motion"):
        candidate = key[: -len("_motion")]
        if candidate in columns:
            return candidate
    for column in columns:
        if _strip_unit(column) == key:
            return column
    raise FeatureError(f"unknown feature name '{name}'")


