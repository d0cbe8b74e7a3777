"""
Schema constants for session logs, feature tables and model files.

All JSON keys, CSV column names and closed vocabularies live here so that the
parsers, writers and tests agree on a single spelling.
"""

# =============================================================================
# SESSION LOG FIELDS (one JSON document per session)
# =============================================================================
F_SESSION_ID = "session_id"      # Optional, defaults to the file stem
F_VIDEO_ID = "video_id"
F_LADDER = "ladder"
F_LEVEL_INDEX = "index"
F_BITRATE_KBPS = "bitrate_kbps"
F_WIDTH = "width"
F_HEIGHT = "height"
F_INITIAL_BUFFERING = "initial_buffering_s"
F_SEGMENTS = "segments"
F_SEGMENT_LEVEL = "level"
F_DURATION = "duration_s"
F_STALLS = "stalls"
F_AFTER_PLAYBACK = "after_playback_s"

# =============================================================================
# VIDEO META CSV
# =============================================================================
META_COLUMNS = ("video_id", "fps", "si", "ti", "content", "motion", "mean_seq_psnr")

# =============================================================================
# CATEGORY VOCABULARIES (closed, alphabetical = encoded column order)
# =============================================================================
CONTENT_TYPES = (
    "animals",
    "animation",
    "architecture",
    "food",
    "game",
    "human",
    "movie",
    "nature",
    "screen",
    "sport",
)

MOTION_TYPES = (
    "average",
    "camera",
    "high",
    "smooth",
    "static",
)

# =============================================================================
# TABLE COLUMNS
# =============================================================================
COL_SESSION_ID = "session_id"
COL_VIDEO_ID = "video_id"
COL_MOS = "mos"
COL_PARTITION = "partition"
COL_RAW_V = "raw_v"
LEVEL_RATIO_PREFIX = "ratio_level_"

SCORE_COLUMNS = (COL_SESSION_ID, COL_RAW_V, COL_MOS)
REPORT_COLUMNS = ("partition", "n", "srcc", "p_value", "log10_p", "mae")
CORRELATION_COLUMNS = ("feature", "n", "srcc", "p_value", "log10_p")
IMPORTANCE_COLUMNS = ("rank", "feature", "importance")

# =============================================================================
# PARTITIONS
# =============================================================================
PART_TRAIN = "train"
PART_TEST = "test"
PART_VALIDATE = "validate"
PART_ALL = "all"

PARTITIONS = (PART_TRAIN, PART_TEST, PART_VALIDATE)

# =============================================================================
# MODEL FILES
# =============================================================================
CURVE_DIRECT_MOS = "direct_mos"
CURVE_LOGIT_V = "logit_v"
CURVE_MODES = (CURVE_DIRECT_MOS, CURVE_LOGIT_V)

MODEL_KIND_LINEAR = "linear"
MODEL_KIND_GBM = "gbm"
MODEL_KIND_CONSTANT = "constant"

# =============================================================================
# EXIT CODES
# =============================================================================
EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INPUT = 2
EXIT_NUMERIC = 3
