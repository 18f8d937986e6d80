"""Bias-parameter adjustment of the anesthesia effect ratio.

Two assumption violations enter the identified ratio the same way: as a
positive multiplicative bias. The gamma parameter captures a residual
direct effect of the surgery component on the outcome; the eta parameter
captures an effect of the anesthesia component on the mediators. Either
way the corrected effect is the identified ratio divided by the
parameter, so one code path serves both and ``kind`` is reporting
metadata only.

Because the adjustment is a deterministic monotone transform, adjusted
confidence limits are the unadjusted percentile limits divided by the
parameter; no re-bootstrapping is needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .bootstrap import BootstrapResult
from .exceptions import DataValidationError

__all__ = [
    "SensitivityCurve",
    "CrossingPoints",
    "adjusted_effect",
    "crossing_points",
    "sensitivity_curve",
]

KINDS = ("gamma", "eta")


@dataclass
class SensitivityCurve:
    kind: str
    grid: np.ndarray       # parameter values, > 0
    adjusted: np.ndarray   # point estimate / parameter
    lower: np.ndarray
    upper: np.ndarray

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "param": self.grid,
            "kind": self.kind,
            "estimate": self.adjusted,
            "lower": self.lower,
            "upper": self.upper,
        })


@dataclass(frozen=True)
class CrossingPoints:
    """Parameter values at which the adjusted lower limit, point estimate,
    and upper limit equal 1. Solving adjusted = 1 for the divisor gives
    back the unadjusted value itself, so these are the inputs verbatim."""

    null_at_lower: float
    null_at_point: float
    null_at_upper: float


def adjusted_effect(unadjusted: float, param: float) -> float:
    """Divide the identified ratio by a positive bias parameter."""
    if not unadjusted > 0:
        raise DataValidationError(f"unadjusted ratio must be > 0, got {unadjusted}")
    if not param > 0:
        raise DataValidationError(f"sensitivity parameter must be > 0, got {param}")
    return unadjusted / param


def crossing_points(point: float, lower: float, upper: float) -> CrossingPoints:
    if not 0 < lower <= upper:
        raise DataValidationError(
            f"need 0 < lower <= upper, got lower={lower}, upper={upper}"
        )
    if not point > 0:
        raise DataValidationError(f"point estimate must be > 0, got {point}")
    return CrossingPoints(null_at_lower=lower, null_at_point=point,
                          null_at_upper=upper)


def sensitivity_curve(boot: BootstrapResult, kind: str, grid) -> SensitivityCurve:
    """Adjusted anesthesia estimate and CI across a grid of parameter values.

    Division by a positive constant commutes with the percentile operator,
    so each endpoint is divided directly.
    """
    if kind not in KINDS:
        raise DataValidationError(f"kind must be one of {KINDS}, got {kind!r}")
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0 or (grid <= 0).any():
        raise DataValidationError("grid values must be positive")
    lo, hi = boot.ci["anesthesia"]
    return SensitivityCurve(
        kind=kind,
        grid=grid,
        adjusted=boot.point.anesthesia / grid,
        lower=lo / grid,
        upper=hi / grid,
    )
