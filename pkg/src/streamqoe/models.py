"""
QoE models and their JSON codec.

A model turns an encoded feature table into raw model outputs and maps those
onto the 0-100 MOS scale according to its curve mode: `direct_mos` outputs are
MOS already, `logit_v` outputs are integral quality values V fed through the
canonical sigmoid.
"""

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import ClassVar, Mapping

import numpy as np

from .errors import FeatureError, InputError, MissingFeatureError, ModelFormatError
from .features import PSNR_FEATURE, resolve_feature_name
from .gbm import GbmEnsemble, gbm_predict
from .qoe_curve import MOS_SCALE_MAX, v_to_mos
from .schema import (
    CURVE_DIRECT_MOS,
    CURVE_LOGIT_V,
    CURVE_MODES,
    MODEL_KIND_CONSTANT,
    MODEL_KIND_GBM,
    MODEL_KIND_LINEAR,
)
from .utils import read_json, write_json


@dataclass(frozen=True)
class ScoredResult:
    raw_v: float
    mos: float


def to_mos(raw, curve_mode):
    """Map raw outputs onto the MOS scale, clamped to [0, 100]."""
    raw = np.asarray(raw, dtype=np.float64)
    mos = raw if curve_mode == CURVE_DIRECT_MOS else v_to_mos(raw)
    return np.clip(mos, 0.0, MOS_SCALE_MAX)


def _check_curve_mode(curve_mode):
    if curve_mode not in CURVE_MODES:
        raise ModelFormatError(f"curve_mode must be one of {', '.join(CURVE_MODES)}, got '{curve_mode}'")


def _freeze_normalization(normalization):
    if normalization is None:
        return None
    frozen = {}
    for name, bounds in normalization.items():
        low, high = (float(b) for b in bounds)
        if high < low:
            raise ModelFormatError(f"normalization for '{name}' has max {high} below min {low}")
        frozen[name] = (low, high)
    return MappingProxyType(frozen)


def _feature_matrix(frame, columns, normalization, model_name):
    """Pull `columns` out of a feature table, min-max scaled when requested.

    A referenced column that is missing or holds NaN raises
    MissingFeatureError naming it.
    """
    columns = list(columns)
    for name in columns:
        if name not in frame.columns or frame[name].isna().any():
            raise MissingFeatureError(name, model_name)
    X = frame[columns].to_numpy(dtype=np.float64, copy=True) if columns else np.zeros((len(frame), 0))
    if normalization:
        for j, name in enumerate(columns):
            if name in normalization:
                low, high = normalization[name]
                X[:, j] = (X[:, j] - low) / (high - low) if high > low else 0.0
    return X


def _resolve_keys(mapping, what):
    resolved = {}
    for key, value in mapping.items():
        try:
            name = resolve_feature_name(key)
        except FeatureError as e:
            raise ModelFormatError(f"{what}: {e}") from e
        if name in resolved:
            raise ModelFormatError(f"{what}: '{key}' duplicates feature '{name}'")
        resolved[name] = value
    return resolved


def _normalization_to_dict(normalization):
    return {name: [low, high] for name, (low, high) in normalization.items()}


# --- Model kinds ---

@dataclass(frozen=True)
class LinearModel:
    """V (or MOS) = w0 + sum of w_i * psi_i over the weighted features."""
    kind: ClassVar[str] = MODEL_KIND_LINEAR

    name: str
    intercept: float
    weights: Mapping[str, float]
    curve_mode: str = CURVE_DIRECT_MOS
    normalization: Mapping[str, tuple] | None = None
    converged: bool = True
    config_hash: str | None = None

    def __post_init__(self):
        _check_curve_mode(self.curve_mode)
        object.__setattr__(self, "weights", MappingProxyType({k: float(v) for k, v in self.weights.items()}))
        object.__setattr__(self, "normalization", _freeze_normalization(self.normalization))

    @property
    def requires_reference(self):
        return PSNR_FEATURE in self.weights

    @property
    def feature_names(self):
        return tuple(self.weights)

    def raw_values(self, frame, n_trees=None):
        X = _feature_matrix(frame, self.weights, self.normalization, self.name)
        w = np.fromiter(self.weights.values(), dtype=np.float64, count=len(self.weights))
        return self.intercept + X @ w

    def score_one(self, features: Mapping[str, float]) -> ScoredResult:
        terms = []
        for name, weight in self.weights.items():
            value = features.get(name)
            if value is None or math.isnan(float(value)):
                raise MissingFeatureError(name, self.name)
            value = float(value)
            if self.normalization and name in self.normalization:
                low, high = self.normalization[name]
                value = (value - low) / (high - low) if high > low else 0.0
            terms.append(weight * value)
        raw = self.intercept + math.fsum(terms)
        return ScoredResult(raw_v=raw, mos=float(to_mos(raw, self.curve_mode)))

    def to_dict(self):
        data = {
            "kind": self.kind,
            "name": self.name,
            "w0": self.intercept,
            "curve_mode": self.curve_mode,
            "requires_reference": self.requires_reference,
            "weights": dict(self.weights),
            "converged": self.converged,
        }
        if self.normalization is not None:
            data["normalization"] = _normalization_to_dict(self.normalization)
        if self.config_hash:
            data["config_hash"] = self.config_hash
        return data

    @classmethod
    def from_dict(cls, data):
        try:
            weights = _resolve_keys(data["weights"], f"model '{data.get('name', '')}' weights")
            normalization = data.get("normalization")
            if normalization is not None:
                normalization = _resolve_keys(normalization, f"model '{data.get('name', '')}' normalization")
            model = cls(
                name=str(data["name"]),
                intercept=float(data["w0"]),
                weights=weights,
                curve_mode=data["curve_mode"],
                normalization=normalization,
                converged=bool(data.get("converged", True)),
                config_hash=data.get("config_hash"),
            )
        except (KeyError, TypeError, ValueError) as e:
            if isinstance(e, ModelFormatError):
                raise
            raise ModelFormatError(f"invalid linear model: {e}") from e
        declared = data.get("requires_reference")
        if declared is not None and bool(declared) != model.requires_reference:
            raise ModelFormatError(
                f"model '{model.name}' declares requires_reference={declared} "
                f"but its weights {'do' if model.requires_reference else 'do not'} use {PSNR_FEATURE}"
            )
        return model


@dataclass(frozen=True)
class GbmQoEModel:
    """A gradient-boosted ensemble over (optionally normalized) features."""
    kind: ClassVar[str] = MODEL_KIND_GBM

    name: str
    ensemble: GbmEnsemble
    curve_mode: str = CURVE_LOGIT_V
    normalization: Mapping[str, tuple] | None = None
    config_hash: str | None = None

    def __post_init__(self):
        _check_curve_mode(self.curve_mode)
        object.__setattr__(self, "normalization", _freeze_normalization(self.normalization))

    @property
    def feature_names(self):
        return self.ensemble.feature_names

    @property
    def requires_reference(self):
        return PSNR_FEATURE in self.ensemble.feature_names

    def raw_values(self, frame, n_trees=None):
        X = _feature_matrix(frame, self.ensemble.feature_names, self.normalization, self.name)
        return gbm_predict(X, self.ensemble, n_trees=n_trees)

    def to_dict(self):
        data = {
            "kind": self.kind,
            "name": self.name,
            "curve_mode": self.curve_mode,
            "requires_reference": self.requires_reference,
            "ensemble": self.ensemble.to_dict(),
        }
        if self.normalization is not None:
            data["normalization"] = _normalization_to_dict(self.normalization)
        if self.config_hash:
            data["config_hash"] = self.config_hash
        return data

    @classmethod
    def from_dict(cls, data):
        try:
            ensemble = GbmEnsemble.from_dict(data["ensemble"])
            names = tuple(_resolve_keys(dict.fromkeys(ensemble.feature_names), "ensemble features"))
            ensemble = GbmEnsemble(
                init_value=ensemble.init_value,
                trees=ensemble.trees,
                learning_rate=ensemble.learning_rate,
                hyper=ensemble.hyper,
                feature_names=names,
                huber_deltas=ensemble.huber_deltas,
            )
            normalization = data.get("normalization")
            if normalization is not None:
                normalization = _resolve_keys(normalization, f"model '{data.get('name', '')}' normalization")
            return cls(
                name=str(data["name"]),
                ensemble=ensemble,
                curve_mode=data["curve_mode"],
                normalization=normalization,
                config_hash=data.get("config_hash"),
            )
        except (KeyError, TypeError, ValueError) as e:
            if isinstance(e, ModelFormatError):
                raise
            raise ModelFormatError(f"invalid gradient-boosting model: {e}") from e


@dataclass(frozen=True)
class ConstantModel:
    """Predicts one value for every session; the median baseline."""
    kind: ClassVar[str] = MODEL_KIND_CONSTANT

    name: str
    value: float
    curve_mode: str = CURVE_LOGIT_V
    config_hash: str | None = None
    feature_names: tuple = field(default=(), init=False)

    def __post_init__(self):
        _check_curve_mode(self.curve_mode)

    @property
    def requires_reference(self):
        return False

    def raw_values(self, frame, n_trees=None):
        return np.full(len(frame), float(self.value))

    def to_dict(self):
        data = {
            "kind": self.kind,
            "name": self.name,
            "value": self.value,
            "curve_mode": self.curve_mode,
            "requires_reference": False,
        }
        if self.config_hash:
            data["config_hash"] = self.config_hash
        return data

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(
                name=str(data["name"]),
                value=float(data["value"]),
                curve_mode=data["curve_mode"],
                config_hash=data.get("config_hash"),
            )
        except (KeyError, TypeError, ValueError) as e:
            if isinstance(e, ModelFormatError):
                raise
            raise ModelFormatError(f"invalid constant model: {e}") from e


MODEL_TYPES = {cls.kind: cls for cls in (LinearModel, GbmQoEModel, ConstantModel)}


def model_from_dict(data):
    """Decode a model document; a document without `kind` is linear."""
    if not isinstance(data, dict):
        raise ModelFormatError("model document must be a JSON object")
    kind = data.get("kind", MODEL_KIND_LINEAR)
    if kind not in MODEL_TYPES:
        raise ModelFormatError(f"unknown model kind '{kind}'")
    return MODEL_TYPES[kind].from_dict(data)


def load_model(file_path):
    try:
        data = read_json(file_path)
    except OSError as e:
        raise InputError(f"cannot read model {file_path}: {e}") from e
    except ValueError as e:
        raise ModelFormatError(f"{file_path}: not valid JSON: {e}") from e
    return model_from_dict(data)


def save_model(model, file_path):
    write_json(file_path, model.to_dict())


def score_frame(frame, model, n_trees=None):
    """(raw outputs, MOS) arrays for every row of a feature table."""
    raw = model.raw_values(frame, n_trees=n_trees)
    return raw, to_mos(raw, model.curve_mode)
