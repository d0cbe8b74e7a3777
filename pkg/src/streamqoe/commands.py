"""
Command implementations behind the streamqoe CLI.

Every command reads its inputs, runs one pipeline stage and writes CSV, JSON
or Markdown. Commands return the process exit code and raise StreamQoEError
subclasses on failure.
"""

import dataclasses
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from .config import get_config_hash
from .errors import FeatureError, InputError
from .evalstats import MedianBaseline, correlation_table, evaluation_report
from .features import ENCODED_COLUMNS, PSNR_FEATURE, extract_features, feature_frame, level_time_ratios
from .gbm import GbmHyperParams, feature_importance, gbm_fit
from .learn import (
    LassoConfig,
    apply_scaler,
    assignment_from_frame,
    fit_scaler,
    lasso_fit,
    ols_fit,
    sorted_stratified_split,
)
from .models import ConstantModel, GbmQoEModel, load_model, save_model, score_frame
from .pretrained import BUILTIN_NAMES, get_builtin, score_table
from .qoe_curve import mos_to_v
from .schema import (
    COL_MOS,
    COL_SESSION_ID,
    CURVE_DIRECT_MOS,
    CURVE_LOGIT_V,
    EXIT_OK,
    IMPORTANCE_COLUMNS,
    LEVEL_RATIO_PREFIX,
    PART_TRAIN,
)
from .session_model import builtin_video_meta, load_session, load_video_meta
from .utils import (
    SESSION_FILE_SUFFIX,
    STDIO_PATH,
    find_session_files,
    log_event,
    read_table,
    render_template,
    write_table,
    write_text,
)

logger = logging.getLogger(__name__)

MODEL_KINDS = ("gbm", "lasso", "ols", "baseline")
FORMATS = ("csv", "markdown")
DOMAINS = ("mos", "v")

MODEL_FILE = "model.json"
SPLIT_FILE = "split.csv"
REPORT_FILE = "report.csv"


# --- Settings from configuration ---

def gbm_hyper_from_config(config) -> GbmHyperParams:
    return GbmHyperParams(**config["gbm"])


def lasso_config_from_config(config) -> LassoConfig:
    lasso = config["lasso"]
    return LassoConfig(alpha=float(lasso["alpha"]), max_iter=int(lasso["max_iter"]), tol=float(lasso["tol"]))


# --- Shared helpers ---

def resolve_model(name_or_path):
    """A built-in model name or the path of a model JSON file."""
    if name_or_path in BUILTIN_NAMES:
        return get_builtin(name_or_path)
    if Path(name_or_path).is_file():
        return load_model(name_or_path)
    return get_builtin(name_or_path)


def _extract_rows(files, catalog, with_level_ratios):
    rows, ratios, rejected = [], [], []
    for path in files:
        try:
            session = load_session(path)
            meta = catalog.get(session.video_id)
            if meta is None:
                raise FeatureError(f"no video meta for video_id '{session.video_id}'")
            vector = extract_features(session, meta)
        except (InputError, OSError) as e:
            logger.error(f"{path}: {e}")
            log_event("session_rejected", file=str(path), error=str(e))
            rejected.append(path)
            continue
        rows.append((session.session_id, session.video_id, vector))
        if with_level_ratios:
            ratios.append(level_time_ratios(session))
    return rows, (ratios if with_level_ratios else None), rejected


def extract_table(inputs, meta=None, with_level_ratios=False) -> pd.DataFrame:
    """Feature table of the session files found under `inputs`, in input order."""
    files = find_session_files(inputs)
    if not files:
        raise InputError("no sessions found")
    catalog = load_video_meta(meta) if meta else builtin_video_meta()
    rows, ratios, rejected = _extract_rows(files, catalog, with_level_ratios)
    if rejected:
        raise InputError(f"{len(rejected)} of {len(files)} session files rejected")

    session_ids = [row[0] for row in rows]
    if len(set(session_ids)) != len(session_ids):
        logger.warning("Duplicate session ids in input; later joins by session_id are ambiguous")
    return feature_frame(rows, ratios)


def join_mos(frame, mos) -> pd.DataFrame:
    """Left-join the `session_id,mos` table at path `mos` onto a feature table.

    An existing `mos` column is replaced.
    """
    if COL_SESSION_ID not in frame.columns:
        raise InputError(f"feature table has no '{COL_SESSION_ID}' column to join MOS on")
    scores = read_table(mos, dtype={COL_SESSION_ID: str})
    for column in (COL_SESSION_ID, COL_MOS):
        if column not in scores.columns:
            raise InputError(f"MOS table {mos} lacks column '{column}'")
    if scores[COL_SESSION_ID].duplicated().any():
        raise InputError(f"MOS table {mos} lists a session more than once")
    frame = frame.drop(columns=[COL_MOS], errors="ignore")
    frame = frame.merge(scores[[COL_SESSION_ID, COL_MOS]], on=COL_SESSION_ID, how="left")
    unmatched = int(frame[COL_MOS].isna().sum())
    if unmatched:
        logger.warning(f"{unmatched} sessions have no MOS in {mos}")
    return frame


def load_feature_table(inputs, meta=None, mos=None) -> pd.DataFrame:
    """Read a feature CSV, or extract one on the fly from session documents.

    `meta` only applies to session inputs; `mos` is joined onto either.
    """
    inputs = [inputs] if isinstance(inputs, (str, Path)) else list(inputs)
    frame = None
    if len(inputs) == 1:
        path = Path(inputs[0])
        if str(inputs[0]) == STDIO_PATH or (path.is_file() and path.suffix != SESSION_FILE_SUFFIX):
            if meta:
                logger.warning("--meta ignored for a feature table input")
            frame = read_table(inputs[0], dtype={COL_SESSION_ID: str})
    if frame is None:
        frame = extract_table(inputs, meta)
    return join_mos(frame, mos) if mos else frame


def _target_values(frame, target):
    if target not in frame.columns:
        raise InputError(f"feature table has no target column '{target}'")
    values = frame[target].to_numpy(dtype=np.float64)
    if np.isnan(values).any():
        raise InputError(f"target column '{target}' has {int(np.isnan(values).sum())} missing values")
    return values


def _transform_target(values, transform):
    return mos_to_v(values) if transform == "logit" else values


def _session_ids(frame):
    if COL_SESSION_ID in frame.columns:
        return frame[COL_SESSION_ID].astype(str).to_list()
    return [str(i) for i in range(len(frame))]


def _write_table_output(frame, output, fmt, template, title):
    if fmt == "markdown":
        text = render_template(template, title=title, columns=list(frame.columns),
                               rows=frame.to_dict(orient="records"))
        write_text(text, output)
    else:
        write_table(frame, output)


# --- Commands ---

def cmd_extract(inputs, output, meta=None, mos=None, level_ratios=False):
    frame = extract_table(inputs, meta, with_level_ratios=level_ratios)
    if mos:
        frame = join_mos(frame, mos)
    write_table(frame, output)
    log_event("sessions_extracted", count=len(frame), output=str(output))
    return EXIT_OK


def cmd_score(inputs, output, model, meta=None, n_trees=None):
    qoe_model = resolve_model(model)
    if n_trees is not None and not isinstance(qoe_model, GbmQoEModel):
        logger.warning(f"--n-trees ignored for non-ensemble model '{qoe_model.name}'")
        n_trees = None
    frame = load_feature_table(inputs, meta)
    scores = score_table(frame, qoe_model, n_trees=n_trees)
    write_table(scores, output)
    logger.info(f"Scored {len(scores)} sessions with '{qoe_model.name}'")
    return EXIT_OK


def cmd_split(input_path, output, ratios, seed, target=COL_MOS):
    frame = read_table(input_path, dtype={COL_SESSION_ID: str})
    assignment = sorted_stratified_split(_target_values(frame, target), ratios, seed)
    write_table(assignment.to_frame(_session_ids(frame)), output)
    log_event("split_created", output=str(output), seed=seed, **assignment.sizes())
    return EXIT_OK


def training_columns(frame, reference_free=False):
    """Encoded columns usable for training, in canonical order.

    Columns absent from the table or empty throughout are skipped; a column
    with only some values missing is an error.
    """
    columns = []
    for name in ENCODED_COLUMNS:
        if name not in frame.columns or (reference_free and name == PSNR_FEATURE):
            continue
        missing = frame[name].isna()
        if missing.all():
            continue
        if missing.any():
            raise FeatureError(f"column '{name}' is missing for {int(missing.sum())} sessions")
        columns.append(name)
    if not columns:
        raise FeatureError("feature table has no usable feature columns")
    return columns


def _drop_constant(columns, X_train):
    keep = [j for j in range(X_train.shape[1]) if np.ptp(X_train[:, j]) > 0]
    dropped = [columns[j] for j in range(len(columns)) if j not in keep]
    if dropped:
        logger.info(f"Dropping columns constant on the training partition: {', '.join(dropped)}")
    return [columns[j] for j in keep], keep


def train_model(frame, kind, config, target=COL_MOS, reference_free=False, name=None):
    """Split, scale and fit one model. Returns (model, assignment, target values)."""
    if kind not in MODEL_KINDS:
        raise InputError(f"unknown model kind '{kind}'; expected one of {', '.join(MODEL_KINDS)}")
    training = config["training"]
    y = _transform_target(_target_values(frame, target), training["target_transform"])
    curve_mode = CURVE_LOGIT_V if training["target_transform"] == "logit" else CURVE_DIRECT_MOS
    split = config["split"]
    assignment = sorted_stratified_split(y, tuple(split["ratios"]), split["seed"])
    train_rows = assignment.mask(PART_TRAIN)
    if not train_rows.any():
        raise InputError("training partition is empty")

    columns = training_columns(frame, reference_free)
    X = frame[columns].to_numpy(dtype=np.float64)
    if kind in ("ols", "lasso"):
        columns, keep = _drop_constant(columns, X[train_rows])
        X = X[:, keep]

    normalization = None
    if training["normalize"] and kind != "baseline":
        scaler = fit_scaler(X[train_rows], columns)
        X = apply_scaler(X, scaler)
        normalization = scaler.to_normalization()

    name = name or f"trained-{kind}"
    config_hash = get_config_hash(config)
    if kind == "gbm":
        ensemble = gbm_fit(X[train_rows], y[train_rows], gbm_hyper_from_config(config), split["seed"], columns)
        model = GbmQoEModel(name=name, ensemble=ensemble, curve_mode=curve_mode,
                            normalization=normalization, config_hash=config_hash)
    elif kind == "baseline":
        baseline = MedianBaseline.fit(y[train_rows])
        model = ConstantModel(name=name, value=baseline.value, curve_mode=curve_mode, config_hash=config_hash)
    else:
        if kind == "ols":
            fitted = ols_fit(X[train_rows], y[train_rows], columns, name=name, curve_mode=curve_mode)
        else:
            fitted = lasso_fit(X[train_rows], y[train_rows], lasso_config_from_config(config), columns,
                               name=name, curve_mode=curve_mode)
        if normalization is not None:
            normalization = {feature: normalization[feature] for feature in fitted.weights}
        model = dataclasses.replace(fitted, normalization=normalization, config_hash=config_hash)

    return model, assignment, y


def cmd_train(input_path, output_dir, kind, config, target=COL_MOS, reference_free=False, name=None):
    frame = read_table(input_path, dtype={COL_SESSION_ID: str})
    model, assignment, y = train_model(frame, kind, config, target, reference_free, name)

    # Report in the training target domain, through the same path `score` uses.
    raw, _ = score_frame(frame, model)
    report = evaluation_report(raw, y, assignment.partition_of)

    output_dir = Path(output_dir)
    save_model(model, output_dir / MODEL_FILE)
    write_table(assignment.to_frame(_session_ids(frame)), output_dir / SPLIT_FILE)
    write_table(report, output_dir / REPORT_FILE)
    log_event("model_trained", kind=kind, name=model.name, features=len(model.feature_names),
              output_dir=str(output_dir), config_hash=model.config_hash)
    for row in report.to_dict(orient="records"):
        logger.info(f"{row['partition']}: n={row['n']} srcc={row['srcc']:.4f} mae={row['mae']:.4f}")
    return EXIT_OK


def cmd_eval(inputs, output, model, split=None, domain="mos", n_trees=None, target=COL_MOS,
             fmt="csv", meta=None, mos=None):
    if domain not in DOMAINS:
        raise InputError(f"domain must be one of {', '.join(DOMAINS)}, got '{domain}'")
    qoe_model = resolve_model(model)
    frame = load_feature_table(inputs, meta, mos)
    truth = _target_values(frame, target)
    if n_trees is not None and not isinstance(qoe_model, GbmQoEModel):
        logger.warning(f"--n-trees ignored for non-ensemble model '{qoe_model.name}'")
        n_trees = None
    raw, mos = score_frame(frame, qoe_model, n_trees=n_trees)

    if domain == "mos":
        pred = mos
    else:
        pred = raw if qoe_model.curve_mode == CURVE_LOGIT_V else mos_to_v(mos)
        truth = mos_to_v(truth)

    partitions = None
    if split:
        partitions = assignment_from_frame(read_table(split, dtype={COL_SESSION_ID: str}),
                                           _session_ids(frame)).partition_of
    report = evaluation_report(pred, truth, partitions)
    _write_table_output(report, output, fmt, "report.md.j2", f"Evaluation of {qoe_model.name}")
    log_event("report_written", model=qoe_model.name, output=str(output), rows=len(report))
    return EXIT_OK


def cmd_export_model(model, output):
    qoe_model = resolve_model(model)
    save_model(qoe_model, output)
    log_event("model_exported", model=qoe_model.name, output=str(output))
    return EXIT_OK


def importance_table(qoe_model, top=None) -> pd.DataFrame:
    if not isinstance(qoe_model, GbmQoEModel):
        raise InputError(f"model '{qoe_model.name}' is not a gradient-boosting model")
    importances = feature_importance(qoe_model.ensemble)
    ranked = sorted(importances.items(), key=lambda item: -item[1])
    if top is not None:
        ranked = ranked[:top]
    return pd.DataFrame(
        [(rank, feature, value) for rank, (feature, value) in enumerate(ranked, start=1)],
        columns=list(IMPORTANCE_COLUMNS),
    )


def cmd_importance(model, output, top=None, fmt="csv"):
    qoe_model = resolve_model(model)
    table = importance_table(qoe_model, top)
    _write_table_output(table, output, fmt, "importance.md.j2", f"Feature importances of {qoe_model.name}")
    return EXIT_OK


def cmd_correlate(inputs, output, target=COL_MOS, fmt="csv", meta=None, mos=None):
    frame = load_feature_table(inputs, meta, mos)
    if target not in frame.columns:
        raise InputError(f"feature table has no target column '{target}'")
    columns = [c for c in ENCODED_COLUMNS if c in frame.columns]
    columns += sorted(
        (c for c in frame.columns if c.startswith(LEVEL_RATIO_PREFIX)),
        key=lambda c: int(c[len(LEVEL_RATIO_PREFIX):]),
    )
    table = correlation_table(frame, target, columns)
    _write_table_output(table, output, fmt, "correlation.md.j2", f"Feature correlation with {target}")
    log_event("report_written", output=str(output), rows=len(table))
    return EXIT_OK

