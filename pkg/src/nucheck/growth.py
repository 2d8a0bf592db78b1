"""Growth-rate classification of truncated integrals on a dyadic schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InsufficientDataError

FINITE, DIVERGING, INCONCLUSIVE = "Finite", "Diverging", "Inconclusive"

DIVERGE_SLOPE = 0.1
FLAT_SLOPE = 0.01
CAUCHY_TOL = 1e-3


@dataclass(frozen=True)
class Verdict:
    """Classification of a sequence ``I(rho_k)``.

    ``value`` is the extrapolated limit for Finite verdicts (otherwise the
    last value); ``rate`` is the growth exponent ``p`` in
    ``I ~ (1 - rho)**(-p)`` estimated from the last points.
    """

    kind: str
    value: float
    rate: float = 0.0
    sublinear: bool = False
    cauchy: Optional[float] = None

    @property
    def is_finite(self):
        return self.kind == FINITE


def _slope(x, y):
    xm = x - x.mean()
    return float((xm * (y - y.mean())).sum() / (xm * xm).sum())


def aitken_tail(values):
    """Aitken extrapolation of the last three values of a convergent sequence.

    Falls back to the last value unless the increments shrink geometrically.
    """
    a, b, c = (float(v) for v in values[-3:])
    d1, d2 = b - a, c - b
    if d1 == 0.0 or d2 == 0.0:
        return c
    q = d2 / d1
    if not 0.0 < q < 0.9:
        return c
    return c + d2 * q / (1.0 - q)


def classify_finiteness(values, schedule=None, window=4):
    """Classify truncated integrals as Finite, Diverging or Inconclusive.

    Parameters
    ----------
    values : sequence of float
        ``I(rho_k)`` for the schedule ``rho_k = 1 - 2**-k``.
    schedule : sequence of float, optional
        The radii; only used to recover ``k`` (defaults to consecutive k).
    window : int
        Number of trailing points in the least-squares slope.

    Notes
    -----
    The slope is that of ``log I`` against ``k log 2 = -log(1 - rho_k)``, so
    ``I = 2**k`` has slope 1.  Slope above 0.1 is Diverging with that rate;
    slope below 0.01 together with relative Cauchy differences below 1e-3
    over the last three radii is Finite; anything else is Inconclusive.
    """
    v = np.asarray(values, dtype=float)
    if len(v) < window:
        raise InsufficientDataError(f"need at least {window} values, got {len(v)}")
    if schedule is None:
        k = np.arange(len(v), dtype=float)
    else:
        k = -np.log2(1.0 - np.asarray(schedule, dtype=float))
    last = float(v[-1])
    if np.all(v[-3:] == 0.0):
        return Verdict(FINITE, 0.0, 0.0, False, 0.0)
    if np.any(v[-window:] <= 0.0):
        return Verdict(INCONCLUSIVE, last)
    x = k[-window:] * math.log(2.0)
    y = np.log(v[-window:])
    slope = _slope(x, y)
    cauchy = max(abs(v[-1] - v[-2]) / abs(v[-1]), abs(v[-2] - v[-3]) / abs(v[-2]))
    if slope > DIVERGE_SLOPE:
        sublinear = False
        if len(v) >= 2 * window - 1:
            earlier = _slope(k[-2 * window + 1:-window + 1] * math.log(2.0),
                             np.log(np.maximum(v[-2 * window + 1:-window + 1], 1e-300)))
            sublinear = slope < 0.8 * earlier
        return Verdict(DIVERGING, last, slope, sublinear, cauchy)
    if slope < FLAT_SLOPE and cauchy < CAUCHY_TOL:
        return Verdict(FINITE, aitken_tail(v), slope, False, cauchy)
    return Verdict(INCONCLUSIVE, last, slope, False, cauchy)
