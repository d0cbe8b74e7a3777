"""
QoE curves.

The sigmoid maps an integral quality value V to a MOS on a 0..b1 scale; its
inverse (the logit) turns MOS targets into V for linear models. The composite
logarithmic curve is a saturating alternative bounded by the MOS scale.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit

from .errors import CurveDomainError

MOS_SCALE_MAX = 100.0
# Keeps the logit finite at the scale edges.
EDGE_EPSILON = 1e-6


@dataclass(frozen=True)
class SigmoidParams:
    """QoE = b1 / (1 + exp(b2 * (V - b3)))."""
    b1: float = MOS_SCALE_MAX
    b2: float = -1.0
    b3: float = 0.0

    def __post_init__(self):
        if not self.b1 > 0:
            raise CurveDomainError(f"sigmoid scale b1 must be positive, got {self.b1}")

    def to_dict(self):
        return {"b1": self.b1, "b2": self.b2, "b3": self.b3}

    @classmethod
    def from_dict(cls, data):
        return cls(float(data["b1"]), float(data["b2"]), float(data["b3"]))


CANONICAL_SIGMOID = SigmoidParams()


@dataclass(frozen=True)
class CompositeCurveParams:
    """Piecewise curve: scale_min below v_low, -log(b1 (b2 - V) / V) + b3
    on [v_low, v_high], scale_max above v_high."""
    v_low: float
    v_high: float
    b1: float
    b2: float
    b3: float
    scale_min: float = 0.0
    scale_max: float = MOS_SCALE_MAX

    def __post_init__(self):
        if not self.v_low < self.v_high:
            raise CurveDomainError(f"v_low ({self.v_low}) must be below v_high ({self.v_high})")
        if not self.scale_min < self.scale_max:
            raise CurveDomainError(f"scale_min ({self.scale_min}) must be below scale_max ({self.scale_max})")


def _unwrap(result):
    return float(result) if np.ndim(result) == 0 else result


def mos_to_v(qoe, scale=MOS_SCALE_MAX, eps=EDGE_EPSILON):
    """V = ln(QoE / (scale - QoE)); accepts scalars or arrays."""
    q = np.asarray(qoe, dtype=np.float64)
    if np.any(np.isnan(q)) or np.any(q < 0) or np.any(q > scale):
        raise CurveDomainError(f"QoE must lie in [0, {scale:g}]")
    q = np.clip(q, eps, scale - eps)
    return _unwrap(logit(q / scale))


def v_to_mos(v, params: SigmoidParams = CANONICAL_SIGMOID):
    """QoE = b1 / (1 + exp(b2 (V - b3))); saturates smoothly in (0, b1)."""
    v = np.asarray(v, dtype=np.float64)
    return _unwrap(params.b1 * expit(-params.b2 * (v - params.b3)))


def composite_eval(v: float, params: CompositeCurveParams) -> float:
    """Evaluate the composite logarithmic curve at V."""
    if v < params.v_low:
        return params.scale_min
    if v > params.v_high:
        return params.scale_max
    if v == 0:
        raise CurveDomainError(f"composite curve undefined at V={v}")
    argument = params.b1 * (params.b2 - v) / v
    if not argument > 0:
        raise CurveDomainError(f"composite curve log argument {argument} <= 0 at V={v}")
    value = -math.log(argument) + params.b3
    return min(max(value, params.scale_min), params.scale_max)
