"""Radial weights, Shields-Williams normality checks and normal pairs.

Weights are stored through their logarithm so that values such as
``exp(-c / (1 - r))`` remain usable at radii extremely close to one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import (
    DomainError,
    InvalidWeightError,
    ParseError,
    PreconditionError,
    ResolutionError,
)

__all__ = [
    "RadialWeight",
    "NormalityReport",
    "NormalPair",
    "standard_weight",
    "exponential_weight",
    "constant_weight",
    "tabulated_weight",
    "eval_weight",
    "check_normality",
    "make_normal_pair",
    "dual_weight",
    "bloch_factor",
    "parse_weight",
    "load_table",
    "log_one_minus_r2",
]

NORMAL, FAILS_I, FAILS_II = "Normal", "FailsI", "FailsII"
BETA_MAX = 8.0
# almost-decreasing exponents below this are treated as absent
GAMMA_MIN = 1e-3


def log_one_minus_r2(r):
    """``log(1 - r**2)`` without cancellation near ``r = 1``."""
    r = np.asarray(r, dtype=float)
    return np.log1p(-r) + np.log1p(r)


@dataclass(frozen=True)
class RadialWeight:
    """A positive radial weight ``nu(r)`` evaluated through ``log nu``.

    ``kind`` is one of ``standard``, ``exp``, ``const``, ``table`` or
    ``dual`` (the companion weight of a normal pair, which need not be
    monotone).  ``r_max`` bounds the radii where the weight is known;
    tabulated weights cannot be evaluated past their last sample.
    """

    kind: str
    param: float = 0.0
    log_eval: Callable = field(default=None, repr=False, compare=False)
    r_max: float = 1.0
    source: Optional[str] = None

    def log(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < 0.0) or np.any(r >= 1.0):
            raise DomainError("weights are defined for 0 <= r < 1")
        if np.any(r > self.r_max):
            raise ResolutionError(
                f"{self.spec()} is tabulated only up to r = {self.r_max}, requested {float(np.max(r))}"
            )
        return self.log_eval(r)

    def __call__(self, r):
        return np.exp(self.log(r))

    def log_at(self, z):
        """``log nu(|z|)`` for complex arguments."""
        return self.log(np.abs(z))

    @property
    def is_standard(self):
        return self.kind == "standard"

    def spec(self):
        if self.kind == "standard":
            return f"standard:{_fmt(self.param)}"
        if self.kind == "exp":
            return f"exp:{_fmt(self.param)}"
        if self.kind == "const":
            return "const"
        if self.kind == "table":
            return f"table:{self.source}"
        if self.kind == "bloch":
            return f"bloch:{self.source}"
        return f"dual:{_fmt(self.param)}"


def _fmt(x):
    return repr(float(x)) if float(x) != int(x) else str(int(x))


def standard_weight(alpha0):
    """``(1 - r**2)**alpha0``; ``alpha0 = 0`` gives the constant weight."""
    alpha0 = float(alpha0)
    if alpha0 < 0:
        raise InvalidWeightError("standard weight exponent must be non-negative")
    return RadialWeight("standard", alpha0, lambda r: alpha0 * log_one_minus_r2(r))


def exponential_weight(c):
    """``exp(-c / (1 - r))``."""
    c = float(c)
    if c <= 0:
        raise InvalidWeightError("exponential weight needs c > 0")
    return RadialWeight("exp", c, lambda r: -c / (1.0 - r))


def constant_weight():
    return RadialWeight("const", 0.0, lambda r: np.zeros_like(r, dtype=float))


def tabulated_weight(r, values, source="<memory>"):
    """Weight interpolated from samples by a monotone cubic in log space.

    Samples must have strictly increasing ``r`` in ``[0, 1)`` and positive,
    non-increasing values.  The first sample must sit at ``r = 0``.
    """
    r = np.asarray(r, dtype=float)
    v = np.asarray(values, dtype=float)
    if r.ndim != 1 or r.shape != v.shape or len(r) < 2:
        raise InvalidWeightError("table needs at least two (r, value) samples")
    if np.any(np.diff(r) <= 0):
        raise InvalidWeightError("table radii must be strictly increasing")
    if r[0] != 0.0 or r[-1] >= 1.0:
        raise InvalidWeightError("table radii must start at 0 and stay below 1")
    if np.any(v <= 0):
        raise InvalidWeightError("table values must be positive")
    if np.any(np.diff(v) > 1e-12 * v[:-1]):
        raise InvalidWeightError("table values must be non-increasing")
    interp = PchipInterpolator(r, np.log(v), extrapolate=False)
    return RadialWeight("table", 0.0, lambda x: interp(x), float(r[-1]), source)


def load_table(path):
    """Read a two-column text table ``r nu(r)`` into a tabulated weight."""
    try:
        data = np.loadtxt(path, ndmin=2)
    except OSError as exc:
        raise ParseError(f"cannot read weight table {path}: {exc}") from exc
    except ValueError as exc:
        raise ParseError(f"malformed weight table {path}: {exc}") from exc
    if data.shape[1] != 2:
        raise ParseError(f"weight table {path} must have two columns")
    try:
        return tabulated_weight(data[:, 0], data[:, 1], source=str(path))
    except InvalidWeightError as exc:
        raise ParseError(f"weight table {path}: {exc}") from exc


def parse_weight(text):
    """Parse ``standard:<a>``, ``exp:<c>``, ``const`` or ``table:<path>``."""
    text = text.strip()
    kind, _, arg = text.partition(":")
    kind = kind.strip().lower()
    try:
        if kind == "standard":
            a = float(arg)
            if not a > 0:
                raise ParseError(f"standard weight exponent must be > 0, got {arg!r}")
            return standard_weight(a)
        if kind == "exp":
            c = float(arg)
            if not c > 0:
                raise ParseError(f"exponential weight needs c > 0, got {arg!r}")
            return exponential_weight(c)
        if kind == "const" and not arg:
            return constant_weight()
        if kind == "table" and arg:
            return load_table(arg.strip())
    except ValueError as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"bad weight parameter in {text!r}") from exc
    raise ParseError(f"unknown weight specification {text!r}")


def eval_weight(w, r):
    """Evaluate ``w`` at a radius ``0 <= r < 1``."""
    if not 0.0 <= r < 1.0:
        raise DomainError(f"radius must satisfy 0 <= r < 1, got {r}")
    return float(w(np.float64(r)))


# ---------------------------------------------------------------------------
# Normality
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NormalityReport:
    conditionI_ratios: tuple
    conditionI_inf: float
    beta_estimate: Optional[float]
    conditionII_k: Optional[int]
    conditionII_limsup: Optional[float]
    gamma_estimate: Optional[float]
    verdict: str
    certified: bool = True

    @property
    def is_normal(self):
        return self.verdict == NORMAL


def _dyadic(n):
    return 1.0 - 2.0 ** (-np.asarray(n, dtype=float))


def _tail_slope(logh, n):
    x = n - n.mean()
    return float((x * (logh - logh.mean())).sum() / (x * x).sum())


def _bisect(passes, increasing, lo=0.0, hi=BETA_MAX, steps=60):
    """Boundary of the set where ``passes`` holds on ``(lo, hi]``.

    With ``increasing=True`` the set is ``[b, hi]`` and ``b`` is returned;
    otherwise it is ``(lo, b]``.
    """
    if increasing:
        if not passes(hi):
            return None
        for _ in range(steps):
            mid = 0.5 * (lo + hi)
            if passes(mid):
                hi = mid
            else:
                lo = mid
        return hi
    lo_probe = hi * 2.0 ** (-steps)
    if not passes(lo_probe):
        return None
    lo = lo_probe
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if passes(mid):
            lo = mid
        else:
            hi = mid
    return lo


def check_normality(w, n_max=20, k_max=4, tol=1e-6):
    """Sampled test of conditions (I) and (II) at dyadic radii ``1 - 2**-n``.

    Condition (I) uses ``inf_n nu(r_{n+1}) / nu(r_n)`` for ``n = 1..n_max``.
    Condition (II) looks for the smallest ``k <= k_max`` whose ratio
    ``nu(r_{n+k}) / nu(r_n)`` stays below ``1 - tol`` over the tail
    ``n >= n_max / 2`` (the limsup proxy).  The exponents ``beta`` and
    ``gamma`` come from bisection on the trend of
    ``log(nu / (1 - r**2)**b)`` over the same tail: almost increasing means
    a least-squares slope ``>= -tol`` per dyadic step, almost decreasing a
    slope ``<= tol``.
    """
    if n_max < 4 or k_max < 1:
        raise PreconditionError("check_normality needs n_max >= 4 and k_max >= 1")
    n = np.arange(1, n_max + 2)
    logv = w.log(_dyadic(n))
    ratios = np.exp(logv[1:] - logv[:-1])
    inf_I = float(ratios.min())

    tail = np.arange(max(1, n_max // 2), n_max + 1)
    cond_k, limsup = None, None
    for k in range(1, k_max + 1):
        start = tail[tail + k <= n_max]
        if len(start) == 0:
            break
        ls = float(np.max(np.exp(w.log(_dyadic(start + k)) - w.log(_dyadic(start)))))
        if ls < 1.0 - tol:
            cond_k, limsup = k, ls
            break

    lt = w.log(_dyadic(tail))
    lp = log_one_minus_r2(_dyadic(tail))
    tf = tail.astype(float)
    beta = _bisect(lambda b: _tail_slope(lt - b * lp, tf) >= -tol, increasing=True)
    gamma = _bisect(lambda g: _tail_slope(lt - g * lp, tf) <= tol, increasing=False)
    if gamma is not None and gamma < GAMMA_MIN:
        gamma = None
    if beta is not None and beta < 1e-9:
        beta = 0.0

    if inf_I <= tol:
        verdict = FAILS_I
    elif cond_k is None:
        verdict = FAILS_II
    else:
        verdict = NORMAL
    return NormalityReport(
        tuple(float(x) for x in ratios[:n_max]), inf_I, beta, cond_k, limsup, gamma,
        verdict, certified=w.kind != "table",
    )


@dataclass(frozen=True)
class NormalPair:
    """Weights with ``nu(r) * omega(r) = (1 - r**2)**alpha``."""

    nu: RadialWeight
    omega: RadialWeight
    alpha: float
    report: NormalityReport = field(repr=False, compare=False, default=None)


def dual_weight(nu, alpha):
    """``omega(r) = (1 - r**2)**alpha / nu(r)``, with no normality checks."""
    alpha = float(alpha)
    return RadialWeight(
        "dual", alpha, lambda r: alpha * log_one_minus_r2(r) - nu.log_eval(r), nu.r_max,
        source=nu.spec(),
    )


def bloch_factor(mu):
    """``(1 - r**2) mu(r)``, the weight of the Bloch-form norm ``sup (1-|z|^2) mu |f'|``."""
    return RadialWeight(
        "bloch", mu.param, lambda r: log_one_minus_r2(r) + mu.log_eval(r), mu.r_max,
        source=mu.spec(),
    )


def make_normal_pair(nu, alpha, report=None):
    """Build the companion weight ``omega`` of a normal pair.

    Raises
    ------
    InvalidWeightError
        ``nu`` is not classified Normal, or needs ``beta`` beyond the
        supported range.
    PreconditionError
        ``alpha <= beta - 1``.
    """
    report = report or check_normality(nu)
    if not report.is_normal:
        raise InvalidWeightError(f"{nu.spec()} is not a normal weight ({report.verdict})")
    if report.beta_estimate is None:
        raise InvalidWeightError(f"{nu.spec()} needs beta > {BETA_MAX}, outside the supported range")
    if not alpha > report.beta_estimate - 1.0:
        raise PreconditionError(
            f"alpha = {alpha} must exceed beta - 1 = {report.beta_estimate - 1.0:.6g}"
        )
    return NormalPair(nu, dual_weight(nu, alpha), float(alpha), report)
