"""Curve comparison and convergence diagnostics shared by both engines.

The reference curve everywhere is exp(-t); convergence to it is checked on
fixed dense t-grids (a continuous limit is pinned down by a dense set of
times), and trends across a model-size grid stand in for the limits that
finite experiments cannot take.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CurveReport:
    """One observed curve against exp(-t), with its sup distance."""

    t_grid: np.ndarray
    observed: np.ndarray
    reference: np.ndarray
    sup_abs_err: float
    stderr: np.ndarray | None = None

    def to_json_dict(self) -> dict:
        out = {
            "t_grid": [float(t) for t in self.t_grid],
            "observed": [float(v) for v in self.observed],
            "reference": [float(v) for v in self.reference],
            "sup_abs_err": float(self.sup_abs_err),
        }
        if self.stderr is not None:
            out["stderr"] = [float(v) for v in self.stderr]
        return out


def ks_to_exponential(curve, t_grid=None) -> CurveReport:
    """Sup distance between an observed survival curve and exp(-t).

    ``curve`` is either an object exposing ``t_grid`` and ``observed``
    (rescaled, annealed and circle-law results all do) or a plain value
    array, in which case ``t_grid`` must be given.
    """
    if hasattr(curve, "observed") and hasattr(curve, "t_grid"):
        observed = np.asarray(curve.observed, dtype=float)
        t = np.asarray(curve.t_grid, dtype=float)
        stderr = getattr(curve, "stderr", None)
        if stderr is not None:
            stderr = np.asarray(stderr, dtype=float)
    else:
        if t_grid is None:
            raise ValueError("raw value arrays need an explicit t grid")
        observed = np.asarray(curve, dtype=float)
        t = np.asarray(t_grid, dtype=float)
        stderr = None
    if t.size == 0:
        raise ValueError("t grid must be non-empty")
    if observed.shape != t.shape:
        raise ValueError("curve and grid lengths differ")
    reference = np.exp(-t)
    sup = float(np.max(np.abs(observed - reference)))
    return CurveReport(t_grid=t, observed=observed, reference=reference,
                       sup_abs_err=sup, stderr=stderr)


@dataclass(frozen=True)
class TrendReport:
    """Monotonicity verdict and a log-scale slope for a short value grid."""

    xs: np.ndarray
    values: np.ndarray
    nonincreasing: bool
    log_slope: float

    def to_json_dict(self) -> dict:
        return {
            "xs": [float(x) for x in self.xs],
            "values": [float(v) for v in self.values],
            "nonincreasing": bool(self.nonincreasing),
            "log_slope": float(self.log_slope),
        }


def trend_report(values, xs=None, tol: float = 0.0) -> TrendReport:
    """Is the sequence nonincreasing, and how fast does it fall?

    The slope is a least-squares fit of log(values) against ``xs``
    (default: the index), with values floored at 1e-300 so exact zeros do
    not poison the fit.  Needs at least 3 points.
    """
    v = np.asarray(values, dtype=float)
    if v.size < 3:
        raise ValueError("need at least 3 grid points for a trend")
    x = np.arange(v.size, dtype=float) if xs is None else np.asarray(xs, dtype=float)
    if x.shape != v.shape:
        raise ValueError("xs and values lengths differ")
    noninc = bool(np.all(np.diff(v) <= tol))
    logs = np.log(np.maximum(v, 1e-300))
    slope = float(np.polyfit(x, logs, 1)[0])
    return TrendReport(xs=x, values=v, nonincreasing=noninc, log_slope=slope)


def dkw_band(n_samples: int, alpha: float = 0.01) -> float:
    """Two-sided DKW confidence half-width for an empirical CDF."""
    if n_samples < 1 or not 0.0 < alpha < 1.0:
        raise ValueError("need n_samples >= 1 and alpha in (0, 1)")
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * n_samples))
