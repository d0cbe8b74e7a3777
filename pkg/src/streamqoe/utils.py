"""
Utility helpers for streamqoe.

Logging setup, structured event logging, table and JSON file helpers, and
Markdown rendering of report tables.
"""

import json
import logging
import sys
from datetime import datetime, timezone
UTC = timezone.utc
from pathlib import Path

import pandas as pd
from jinja2 import Environment, FileSystemLoader

logger = logging.getLogger(__name__)

BASE_DIR = Path(__file__).resolve().parent
TEMPLATES_DIR = BASE_DIR / "templates"
DATA_DIR = BASE_DIR / "data"

STDIO_PATH = "-"
# Fixed float format keeps CSV outputs byte-identical between runs; 17 digits round-trip a float64.
CSV_FLOAT_FORMAT = "%.17g"
SESSION_FILE_SUFFIX = ".json"

LOG_FORMAT = '%(asctime)s.%(msecs)03d [%(levelname)s] %(message)s'
LOG_DATE_FORMAT = '%Y-%m-%d %H:%M:%S'

# Template environment
env = Environment(loader=FileSystemLoader(str(TEMPLATES_DIR)), keep_trailing_newline=True)


# --- Logging ---

def configure_logging(level="INFO"):
    """Install a single timestamped stderr handler on the root logger."""
    root_logger = logging.getLogger()
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)

    formatter = logging.Formatter(LOG_FORMAT, datefmt=LOG_DATE_FORMAT)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(formatter)
    root_logger.addHandler(handler)
    root_logger.setLevel(level)


def now_utc_iso():
    """Return current UTC time as ISO 8601 string."""
    return datetime.now(UTC).replace(tzinfo=None).isoformat() + "Z"


def log_event(event: str, **fields):
    """Log an event with timestamp."""
    record = {"event": event, **fields, "ts": now_utc_iso()}
    logger.info(json.dumps(record, default=str))


# --- Session file discovery ---

def find_session_files(inputs):
    """Expand files and directories into an ordered list of session documents.

    Directories contribute their *.json files sorted by name; explicit files
    keep the order they were given in.
    """
    files = []
    for item in inputs:
        path = Path(item)
        if path.is_dir():
            files.extend(sorted(p for p in path.iterdir() if p.suffix == SESSION_FILE_SUFFIX and p.is_file()))
        else:
            files.append(path)
    return files


def read_json(file_path):
    with open(file_path, "r", encoding="utf-8") as f:
        return json.load(f)


def write_json(file_path, payload):
    """Write JSON with sorted keys so repeated exports diff cleanly."""
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if str(file_path) == STDIO_PATH:
        sys.stdout.write(text)
        return
    path = Path(file_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


# --- Tables ---

def read_table(file_path, **kwargs):
    """Read a CSV table; `-` reads stdin."""
    source = sys.stdin if str(file_path) == STDIO_PATH else file_path
    kwargs.setdefault("float_precision", "round_trip")
    return pd.read_csv(source, **kwargs)


def write_table(frame, file_path):
    """Write a CSV table without index; `-` writes stdout."""
    if str(file_path) == STDIO_PATH:
        frame.to_csv(sys.stdout, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
        return
    path = Path(file_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")


def render_template(template_name, **context):
    """Render a Jinja2 template with the given context."""
    template = env.get_template(template_name)
    return template.render(**context)


def write_text(text, file_path):
    if str(file_path) == STDIO_PATH:
        sys.stdout.write(text)
        return
    path = Path(file_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def format_cell(value, precision=4):
    """Format a table cell for Markdown output."""
    if value is None:
        return ""
    if isinstance(value, float):
        if value != value:  # NaN
            return ""
        if value != 0 and (abs(value) < 1e-3 or abs(value) >= 1e6):
            return f"{value:.{precision - 1}e}"
        return f"{value:.{precision}f}"
    return str(value)


env.filters["cell"] = format_cell
