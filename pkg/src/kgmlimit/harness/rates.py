"""Log-log rate fitting."""

from __future__ import annotations

from typing import Sequence

import numpy as np


def fit_rate(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float, float]:
    """Least squares of log y = slope log x + intercept.

    Returns (slope, intercept, max_residual) with the residual in log space.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("xs and ys must be 1-D and of equal length")
    if len(x) < 3:
        raise ValueError(f"need at least 3 points, got {len(x)}")
    if np.any(x <= 0) or np.any(y <= 0) or not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("rate fitting needs positive finite values")
    lx, ly = np.log(x), np.log(y)
    M = np.stack([lx, np.ones_like(lx)], axis=1)
    (slope, intercept), *_ = np.linalg.lstsq(M, ly, rcond=None)
    resid = ly - (slope * lx + intercept)
    return float(slope), float(intercept), float(np.max(np.abs(resid)))


def observed_orders(hs: Sequence[float], errs: Sequence[float]) -> list[float]:
    """Pairwise orders log(e_i/e_{i+1}) / log(h_i/h_{i+1})."""
    return [float(np.log(errs[i] / errs[i + 1]) / np.log(hs[i] / hs[i + 1])) for i in range(len(hs) - 1)]
