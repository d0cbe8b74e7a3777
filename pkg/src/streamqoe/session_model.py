"""
Session data model for streamqoe.

Quality ladders, segment playback and stall records, per-video side
information, the JSON session-log codec and the timeline quantities every
feature formula consumes.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import pandas as pd

from .errors import InputError, SessionParseError, SessionValidationError
from .schema import (
    CONTENT_TYPES,
    MOTION_TYPES,
    META_COLUMNS,
    F_SESSION_ID,
    F_VIDEO_ID,
    F_LADDER,
    F_LEVEL_INDEX,
    F_BITRATE_KBPS,
    F_WIDTH,
    F_HEIGHT,
    F_INITIAL_BUFFERING,
    F_SEGMENTS,
    F_SEGMENT_LEVEL,
    F_DURATION,
    F_STALLS,
    F_AFTER_PLAYBACK,
)
from .utils import DATA_DIR, read_json

logger = logging.getLogger(__name__)

REFERENCE_VIDEOS_FILE = DATA_DIR / "reference_videos.csv"

# Stall positions are compared against summed segment durations.
POSITION_TOLERANCE_S = 1e-9


@dataclass(frozen=True)
class QualityLevel:
    """One encoded variant of the reference video."""
    index: int
    bitrate_kbps: float
    width_px: int
    height_px: int

    def __post_init__(self):
        if self.index < 1:
            raise SessionValidationError(f"level index must be >= 1, got {self.index}")
        if not self.bitrate_kbps > 0:
            raise SessionValidationError(f"level {self.index}: bitrate_kbps must be positive, got {self.bitrate_kbps}")
        if self.width_px <= 0 or self.height_px <= 0:
            raise SessionValidationError(
                f"level {self.index}: resolution must be positive, got {self.width_px}x{self.height_px}"
            )


@dataclass(frozen=True)
class QualityLadder:
    """Ordered quality levels; index 1 is the lowest bitrate."""
    levels: tuple

    def __post_init__(self):
        levels = tuple(self.levels)
        object.__setattr__(self, "levels", levels)
        if not levels:
            raise SessionValidationError("ladder must contain at least one level")
        for position, level in enumerate(levels, start=1):
            if level.index != position:
                raise SessionValidationError(
                    f"ladder indices must be contiguous 1..{len(levels)}; position {position} has index {level.index}"
                )
        for lower, upper in zip(levels, levels[1:]):
            if not upper.bitrate_kbps > lower.bitrate_kbps:
                raise SessionValidationError(
                    f"ladder bitrates must strictly increase: level {upper.index} "
                    f"({upper.bitrate_kbps} kbps) <= level {lower.index} ({lower.bitrate_kbps} kbps)"
                )

    def __len__(self):
        return len(self.levels)

    @property
    def max_index(self):
        return len(self.levels)

    def level(self, index):
        """Return the level with the given 1-based index."""
        if not 1 <= index <= len(self.levels):
            raise SessionValidationError(f"level index {index} outside ladder range 1..{len(self.levels)}")
        return self.levels[index - 1]


@dataclass(frozen=True)
class SegmentPlayback:
    level_index: int
    duration_s: float

    def __post_init__(self):
        if not self.duration_s > 0:
            raise SessionValidationError(f"segment duration_s must be positive, got {self.duration_s}")


@dataclass(frozen=True)
class StallEvent:
    after_playback_s: float
    duration_s: float

    def __post_init__(self):
        if self.after_playback_s < 0:
            raise SessionValidationError(f"stall after_playback_s must be >= 0, got {self.after_playback_s}")
        if not self.duration_s > 0:
            raise SessionValidationError(f"stall duration_s must be positive, got {self.duration_s}")


@dataclass(frozen=True)
class TimelineSummary:
    rendered_playback_s: float
    total_duration_s: float
    active_denominator_s: float
    total_stall_s: float


@dataclass(frozen=True)
class StreamingSession:
    """One viewing session: initial buffering, rendered segments and stalls."""
    ladder: QualityLadder
    initial_buffering_s: float
    segments: tuple
    stalls: tuple
    video_id: str
    session_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "stalls", tuple(self.stalls))
        if self.initial_buffering_s < 0:
            raise SessionValidationError(f"initial_buffering_s must be >= 0, got {self.initial_buffering_s}")
        if not self.segments:
            raise SessionValidationError("session must contain at least one segment")
        for position, segment in enumerate(self.segments):
            if not 1 <= segment.level_index <= len(self.ladder):
                raise SessionValidationError(
                    f"segments[{position}]: level {segment.level_index} outside ladder range 1..{len(self.ladder)}"
                )
        rendered = math.fsum(s.duration_s for s in self.segments)
        for position, stall in enumerate(self.stalls):
            if stall.after_playback_s > rendered + POSITION_TOLERANCE_S:
                raise SessionValidationError(
                    f"stalls[{position}]: after_playback_s {stall.after_playback_s} exceeds rendered playback {rendered}"
                )

    def bitrates_kbps(self):
        """Bitrate of every rendered segment, in playback order."""
        return [self.ladder.level(s.level_index).bitrate_kbps for s in self.segments]


@dataclass(frozen=True)
class VideoMeta:
    """Side information about one reference video."""
    video_id: str
    fps: float
    si: float
    ti: float
    content: str
    motion: str
    mean_seq_psnr: float | None = field(default=None)

    def __post_init__(self):
        if not self.fps > 0:
            raise SessionValidationError(f"{self.video_id}: fps must be positive, got {self.fps}")
        if self.si < 0 or self.ti < 0:
            raise SessionValidationError(f"{self.video_id}: si/ti must be >= 0, got si={self.si} ti={self.ti}")
        if self.content not in CONTENT_TYPES:
            raise SessionValidationError(
                f"{self.video_id}: unknown content '{self.content}'; expected one of {', '.join(CONTENT_TYPES)}"
            )
        if self.motion not in MOTION_TYPES:
            raise SessionValidationError(
                f"{self.video_id}: unknown motion '{self.motion}'; expected one of {', '.join(MOTION_TYPES)}"
            )
        if self.mean_seq_psnr is not None and self.mean_seq_psnr < 0:
            raise SessionValidationError(f"{self.video_id}: mean_seq_psnr must be >= 0, got {self.mean_seq_psnr}")


# --- Timeline ---

def session_timeline(session: StreamingSession) -> TimelineSummary:
    """Derive rendered, total and active (total minus initial buffering) durations."""
    rendered = math.fsum(s.duration_s for s in session.segments)
    stall_total = math.fsum(s.duration_s for s in session.stalls)
    return TimelineSummary(
        rendered_playback_s=rendered,
        total_duration_s=session.initial_buffering_s + rendered + stall_total,
        active_denominator_s=rendered + stall_total,
        total_stall_s=stall_total,
    )


# --- JSON codec ---

def _require(document, key, path):
    if not isinstance(document, dict):
        raise SessionParseError(path or "<document>", "expected a JSON object")
    if key not in document:
        raise SessionParseError(f"{path}.{key}" if path else key, "missing required field")
    return document[key]


def _number(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SessionParseError(path, f"expected a number, got {type(value).__name__}")
    if not math.isfinite(value):
        raise SessionParseError(path, f"expected a finite number, got {value}")
    return float(value)


def _integer(value, path):
    if isinstance(value, bool) or not isinstance(value, int):
        if isinstance(value, float) and value.is_integer():
            return int(value)
        raise SessionParseError(path, f"expected an integer, got {value!r}")
    return value


def _list(value, path):
    if not isinstance(value, list):
        raise SessionParseError(path, f"expected a list, got {type(value).__name__}")
    return value


def parse_session(document, session_id=None) -> StreamingSession:
    """Parse and validate one session-log document (dict or JSON text)."""
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as e:
            raise SessionParseError("<document>", f"invalid JSON: {e}") from e
    if not isinstance(document, dict):
        raise SessionParseError("<document>", "expected a JSON object")

    video_id = _require(document, F_VIDEO_ID, "")
    if not isinstance(video_id, str) or not video_id:
        raise SessionParseError(F_VIDEO_ID, "expected a non-empty string")

    levels = []
    for i, raw in enumerate(_list(_require(document, F_LADDER, ""), F_LADDER)):
        path = f"{F_LADDER}[{i}]"
        levels.append(QualityLevel(
            index=_integer(_require(raw, F_LEVEL_INDEX, path), f"{path}.{F_LEVEL_INDEX}"),
            bitrate_kbps=_number(_require(raw, F_BITRATE_KBPS, path), f"{path}.{F_BITRATE_KBPS}"),
            width_px=_integer(_require(raw, F_WIDTH, path), f"{path}.{F_WIDTH}"),
            height_px=_integer(_require(raw, F_HEIGHT, path), f"{path}.{F_HEIGHT}"),
        ))

    segments = []
    for i, raw in enumerate(_list(_require(document, F_SEGMENTS, ""), F_SEGMENTS)):
        path = f"{F_SEGMENTS}[{i}]"
        segments.append(SegmentPlayback(
            level_index=_integer(_require(raw, F_SEGMENT_LEVEL, path), f"{path}.{F_SEGMENT_LEVEL}"),
            duration_s=_number(_require(raw, F_DURATION, path), f"{path}.{F_DURATION}"),
        ))

    stalls = []
    for i, raw in enumerate(_list(document.get(F_STALLS, []), F_STALLS)):
        path = f"{F_STALLS}[{i}]"
        stalls.append(StallEvent(
            after_playback_s=_number(_require(raw, F_AFTER_PLAYBACK, path), f"{path}.{F_AFTER_PLAYBACK}"),
            duration_s=_number(_require(raw, F_DURATION, path), f"{path}.{F_DURATION}"),
        ))

    sid = document.get(F_SESSION_ID, session_id or "")
    if not isinstance(sid, str):
        raise SessionParseError(F_SESSION_ID, "expected a string")

    return StreamingSession(
        ladder=QualityLadder(tuple(levels)),
        initial_buffering_s=_number(_require(document, F_INITIAL_BUFFERING, ""), F_INITIAL_BUFFERING),
        segments=tuple(segments),
        stalls=tuple(stalls),
        video_id=video_id,
        session_id=sid,
    )


def serialize_session(session: StreamingSession) -> dict:
    """Serialize a session to the session-log JSON schema."""
    document = {
        F_VIDEO_ID: session.video_id,
        F_LADDER: [
            {
                F_LEVEL_INDEX: level.index,
                F_BITRATE_KBPS: level.bitrate_kbps,
                F_WIDTH: level.width_px,
                F_HEIGHT: level.height_px,
            }
            for level in session.ladder.levels
        ],
        F_INITIAL_BUFFERING: session.initial_buffering_s,
        F_SEGMENTS: [{F_SEGMENT_LEVEL: s.level_index, F_DURATION: s.duration_s} for s in session.segments],
        F_STALLS: [{F_AFTER_PLAYBACK: s.after_playback_s, F_DURATION: s.duration_s} for s in session.stalls],
    }
    if session.session_id:
        document[F_SESSION_ID] = session.session_id
    return document


def load_session(file_path) -> StreamingSession:
    """Load one session document; the file stem is the default session id."""
    path = Path(file_path)
    try:
        document = read_json(path)
    except json.JSONDecodeError as e:
        raise SessionParseError("<document>", f"invalid JSON in {path.name}: {e}") from e
    return parse_session(document, session_id=path.stem)


# --- Video meta ---

def _meta_from_row(row):
    psnr = row.get("mean_seq_psnr")
    if psnr is None or (isinstance(psnr, float) and math.isnan(psnr)):
        psnr = None
    return VideoMeta(
        video_id=str(row["video_id"]),
        fps=float(row["fps"]),
        si=float(row["si"]),
        ti=float(row["ti"]),
        content=str(row["content"]).strip(),
        motion=str(row["motion"]).strip(),
        mean_seq_psnr=None if psnr is None else float(psnr),
    )


def load_video_meta(file_path) -> dict:
    """Load a VideoMeta CSV into a video_id -> VideoMeta mapping."""
    frame = pd.read_csv(file_path, dtype={"video_id": str, "content": str, "motion": str})
    missing = [c for c in META_COLUMNS if c not in frame.columns and c != "mean_seq_psnr"]
    if missing:
        raise InputError(f"video meta {file_path}: missing columns {', '.join(missing)}")

    catalog = {}
    for row in frame.to_dict(orient="records"):
        meta = _meta_from_row(row)
        if meta.video_id in catalog:
            raise InputError(f"video meta {file_path}: duplicate video_id '{meta.video_id}'")
        catalog[meta.video_id] = meta
    return catalog


def builtin_video_meta() -> dict:
    """Return the packaged catalog of the twenty public reference videos."""
    return load_video_meta(REFERENCE_VIDEOS_FILE)
