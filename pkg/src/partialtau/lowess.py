"""Robust locally weighted linear regression (LOWESS).

For each sorted abscissa the ``k = floor(frac * n)`` nearest points are
weighted by the tricube kernel of their distance relative to the farthest of
them, and a weighted straight line is fitted.  Each robustness pass
multiplies the kernel weights by bisquare weights of the current residuals
scaled by six times their median absolute value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateWindow, InvalidConfig, LengthMismatch, TooFewObservations

MIN_POINTS = 5


@dataclass(frozen=True)
class Curve:
    x: np.ndarray
    smooth: np.ndarray


def tricube(u):
    u = np.clip(np.abs(u), 0.0, 1.0)
    return (1.0 - u**3) ** 3


def bisquare(u):
    u = np.clip(np.abs(u), 0.0, 1.0)
    return (1.0 - u**2) ** 2


def _local_fit(xs, ys, x0, w) -> float:
    sw = w.sum()
    if not sw > 0:
        raise DegenerateWindow(f"all weights vanish in the window around x={x0:g}")
    xbar = w @ xs / sw
    ybar = w @ ys / sw
    sxx = w @ (xs - xbar) ** 2
    if sxx <= 1e-12 * max(1.0, sw * xbar * xbar):
        # every weighted point shares one abscissa: local constant
        return float(ybar)
    slope = w @ ((xs - xbar) * (ys - ybar)) / sxx
    return float(ybar + slope * (x0 - xbar))


def _kernel_weights(x, i, k) -> np.ndarray:
    d = np.abs(x - x[i])
    h = np.partition(d, k - 1)[k - 1]
    if h == 0.0:
        return (d == 0.0).astype(float)
    return tricube(d / h)


def lowess(x, y, frac: float = 2.0 / 3.0, iters: int = 3) -> Curve:
    """Smooth ``y`` against ``x``; the curve is evaluated at the sorted ``x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"x and y of shapes {x.shape} and {y.shape}")
    n = len(x)
    if n < MIN_POINTS:
        raise TooFewObservations(f"LOWESS needs at least {MIN_POINTS} points, got {n}")
    if not 0.0 < frac <= 1.0:
        raise InvalidConfig(f"frac must lie in (0, 1], got {frac}")
    if iters < 0:
        raise InvalidConfig("iters must be non-negative")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise InvalidConfig("LOWESS inputs must be finite")
    order = np.argsort(x, kind="mergesort")
    xs, ys = x[order], y[order]
    k = min(n, max(2, int(np.floor(frac * n + 1e-10))))
    kernels = [_kernel_weights(xs, i, k) for i in range(n)]
    robust = np.ones(n)
    fitted = np.empty(n)
    for it in range(iters + 1):
        for i in range(n):
            fitted[i] = _local_fit(xs, ys, xs[i], kernels[i] * robust)
        if it == iters:
            break
        resid = ys - fitted
        # floor the scale so an almost exact fit still downweights outliers
        s = max(np.median(np.abs(resid)), 1e-12 * max(1.0, np.max(np.abs(ys))))
        robust = bisquare(resid / (6.0 * s))
    return Curve(xs, fitted)
