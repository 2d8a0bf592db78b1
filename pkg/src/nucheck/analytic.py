"""Analytic functions on the unit disk as small expression trees.

Primitives are polynomials, kernel powers ``(1 - conj(c) z)**(-p)`` and
finite kernel sums.  Trees are closed under sums, products, scalar
multiples, composition, differentiation and antiderivatives from zero.
Polynomial subtrees are folded into a single :class:`Polynomial` so that
operations on polynomials stay coefficient-exact.

All evaluation is vectorized over numpy arrays.  Non-integer powers use the
principal branch, which is safe because ``Re(1 - conj(c) z) > 0`` whenever
``|c| < 1`` and ``|z| < 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import ConstructionError, DivergenceError, DomainError, EvaluationError
from .growth import DIVERGING, FINITE, classify_finiteness
from .quad import (
    SupResult,
    SupSolverConfig,
    build_quadrature,
    integrate_disk,
    integrate_values,
    one_minus_abs2,
    schedule_quadrature,
    sup_over_disk,
    sup_over_radius,
)

__all__ = [
    "AnalyticFunction",
    "Polynomial",
    "KernelPower",
    "KernelSum",
    "SelfMap",
    "certify_self_map",
    "identity",
    "z",
    "constant",
    "monomial",
    "evaluate",
    "differentiate",
    "bergman_kernel",
    "pairing",
    "a1_norm",
    "test_function",
    "weighted_sup_norm",
    "bloch_norm",
    "little_membership",
    "Membership",
]

# Gauss-Legendre rule on [0, 1] for path integrals from the origin.
_PATH_X, _PATH_W = np.polynomial.legendre.leggauss(128)
_PATH_X = 0.5 * (_PATH_X + 1.0)
_PATH_W = 0.5 * _PATH_W


def _num(c):
    return complex(c)


def _fmt_complex(c):
    c = complex(c)
    return f"{c.real!r},{c.imag!r}"


class AnalyticFunction:
    """Base class; subclasses implement ``_eval``, ``derivative`` and ``spec``."""

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        with np.errstate(all="ignore"):
            return self._eval(z)

    # algebra -----------------------------------------------------------
    def __add__(self, other):
        return add(self, as_function(other))

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, scale(-1.0, as_function(other)))

    def __rsub__(self, other):
        return add(as_function(other), scale(-1.0, self))

    def __neg__(self):
        return scale(-1.0, self)

    def __mul__(self, other):
        if isinstance(other, AnalyticFunction):
            return multiply(self, other)
        return scale(other, self)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return scale(1.0 / complex(other), self)

    def compose(self, inner):
        """``self(inner(z))``; ``inner`` must map the disk into the disk."""
        return compose(self, as_function(inner))

    def antiderivative(self):
        """``F(z) = integral_0^z f``."""
        return antiderivative(self)

    def derivative(self):
        raise NotImplementedError

    def spec(self):
        raise NotImplementedError

    def __repr__(self):
        return self.spec()

    def __eq__(self, other):
        return isinstance(other, AnalyticFunction) and self.spec() == other.spec()

    def __hash__(self):
        return hash(self.spec())

    @property
    def is_polynomial(self):
        return False

    @property
    def is_constant(self):
        return False


@dataclass(frozen=True, eq=False, repr=False)
class Polynomial(AnalyticFunction):
    """Finite Taylor polynomial, coefficients in ascending degree."""

    coeffs: tuple

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex).ravel()
        if len(c) == 0:
            c = np.zeros(1, dtype=complex)
        nz = np.nonzero(c)[0]
        c = c[: nz[-1] + 1] if len(nz) else c[:1] * 0
        object.__setattr__(self, "coeffs", tuple(complex(x) for x in c))

    @cached_property
    def array(self):
        return np.asarray(self.coeffs, dtype=complex)

    @property
    def degree(self):
        return len(self.coeffs) - 1

    def _eval(self, z):
        return npoly.polyval(z, self.array)

    def derivative(self):
        if self.degree == 0:
            return Polynomial((0.0,))
        return Polynomial(tuple(npoly.polyder(self.array)))

    def integral(self):
        return Polynomial(tuple(npoly.polyint(self.array, lbnd=0.0)))

    def spec(self):
        return "poly:[" + ";".join(_fmt_complex(c) for c in self.coeffs) + "]"

    @property
    def is_polynomial(self):
        return True

    @property
    def is_constant(self):
        return self.degree == 0

    @property
    def is_monomial(self):
        return sum(1 for c in self.coeffs if c != 0) <= 1


@dataclass(frozen=True, eq=False, repr=False)
class KernelPower(AnalyticFunction):
    """``z -> (1 - conj(c) z)**(-p)`` with ``|c| < 1`` and ``p > 0``."""

    c: complex
    p: float

    def __post_init__(self):
        object.__setattr__(self, "c", complex(self.c))
        object.__setattr__(self, "p", float(self.p))
        if not abs(self.c) < 1.0:
            raise ConstructionError(f"kernel parameter must satisfy |c| < 1, got {self.c}")
        if not self.p > 0:
            raise ConstructionError(f"kernel exponent must be positive, got {self.p}")

    def _eval(self, z):
        u = 1.0 - np.conj(self.c) * z
        n = int(self.p)
        if n == self.p and n <= 16:
            # integer exponents by repeated multiplication, cheaper than exp/log
            out = u
            for _ in range(n - 1):
                out = out * u
            return 1.0 / out
        return np.exp(-self.p * np.log(u))

    def derivative(self):
        if self.c == 0:
            return Polynomial((0.0,))
        return scale(self.p * np.conj(self.c), KernelPower(self.c, self.p + 1.0))

    def antiderivative(self):
        if self.c == 0:
            return Polynomial((0.0, 1.0))
        return Antiderivative(self)

    def spec(self):
        return f"kernel:{self.c.real!r},{self.c.imag!r},{self.p!r}"

    @property
    def is_constant(self):
        return self.c == 0


class KernelSum(AnalyticFunction):
    """``z -> sum_k a_k (1 - conj(c_k) z)**(-p)`` for many nodes ``c_k``."""

    def __init__(self, coeffs, points, p):
        self.coeffs = np.asarray(coeffs, dtype=complex).ravel()
        self.points = np.asarray(points, dtype=complex).ravel()
        self.p = float(p)
        if self.coeffs.shape != self.points.shape:
            raise ConstructionError("kernel sum needs one coefficient per point")
        if np.any(np.abs(self.points) >= 1.0):
            raise ConstructionError("kernel sum points must lie in the open disk")

    def _eval(self, z, chunk=4096):
        flat = z.ravel()
        out = np.empty(flat.shape, dtype=complex)
        cc = np.conj(self.points)[:, None]
        for i in range(0, len(flat), chunk):
            zz = flat[None, i:i + chunk]
            out[i:i + chunk] = self.coeffs @ np.exp(-self.p * np.log(1.0 - cc * zz))
        return out.reshape(z.shape)

    def derivative(self):
        return KernelSum(self.coeffs * self.p * np.conj(self.points), self.points, self.p + 1.0)

    def spec(self):
        terms = [
            f"(scale {_fmt_complex(a)} kernel:{c.real!r},{c.imag!r},{self.p!r})"
            for a, c in zip(self.coeffs, self.points)
        ]
        return "(+ " + " ".join(terms) + ")" if len(terms) != 1 else terms[0]


@dataclass(frozen=True, eq=False, repr=False)
class Scaled(AnalyticFunction):
    factor: complex
    f: AnalyticFunction

    def _eval(self, z):
        return self.factor * self.f._eval(z)

    def derivative(self):
        return scale(self.factor, self.f.derivative())

    def antiderivative(self):
        return scale(self.factor, antiderivative(self.f))

    def spec(self):
        return f"(scale {_fmt_complex(self.factor)} {self.f.spec()})"

    @property
    def is_constant(self):
        return self.f.is_constant


@dataclass(frozen=True, eq=False, repr=False)
class Sum(AnalyticFunction):
    terms: tuple

    def _eval(self, z):
        out = self.terms[0]._eval(z)
        for t in self.terms[1:]:
            out = out + t._eval(z)
        return out

    def derivative(self):
        return add(*[t.derivative() for t in self.terms])

    def antiderivative(self):
        return add(*[antiderivative(t) for t in self.terms])

    def spec(self):
        return "(+ " + " ".join(t.spec() for t in self.terms) + ")"

    @property
    def is_constant(self):
        return all(t.is_constant for t in self.terms)


@dataclass(frozen=True, eq=False, repr=False)
class Product(AnalyticFunction):
    a: AnalyticFunction
    b: AnalyticFunction

    def _eval(self, z):
        return self.a._eval(z) * self.b._eval(z)

    def derivative(self):
        return add(multiply(self.a.derivative(), self.b), multiply(self.a, self.b.derivative()))

    def spec(self):
        return f"(* {self.a.spec()} {self.b.spec()})"

    @property
    def is_constant(self):
        return self.a.is_constant and self.b.is_constant


@dataclass(frozen=True, eq=False, repr=False)
class Composition(AnalyticFunction):
    outer: AnalyticFunction
    inner: AnalyticFunction

    def _eval(self, z):
        return self.outer._eval(self.inner._eval(z))

    def derivative(self):
        return multiply(compose(self.outer.derivative(), self.inner), self.inner.derivative())

    def spec(self):
        return f"(o {self.outer.spec()} {self.inner.spec()})"

    @property
    def is_constant(self):
        return self.outer.is_constant or self.inner.is_constant


@dataclass(frozen=True, eq=False, repr=False)
class Antiderivative(AnalyticFunction):
    """``integral_0^z f`` along the segment, by a 128-node Gauss rule."""

    f: AnalyticFunction

    def _eval(self, z):
        pts = z[..., None] * _PATH_X
        return z * (self.f._eval(pts) @ _PATH_W)

    def derivative(self):
        return self.f

    def spec(self):
        return f"(int {self.f.spec()})"


# ---------------------------------------------------------------------------
# constructors with polynomial folding
# ---------------------------------------------------------------------------


def as_function(x):
    if isinstance(x, SelfMap):
        return x.f
    if isinstance(x, AnalyticFunction):
        return x
    return Polynomial((complex(x),))


def constant(c):
    return Polynomial((complex(c),))


def monomial(n, c=1.0):
    return Polynomial(tuple([0.0] * n + [complex(c)]))


z = Polynomial((0.0, 1.0))


def _is_zero(f):
    return isinstance(f, Polynomial) and f.degree == 0 and f.coeffs[0] == 0


def scale(c, f):
    c = complex(c)
    if isinstance(f, Polynomial):
        return Polynomial(tuple(c * f.array))
    if c == 0:
        return Polynomial((0.0,))
    if c == 1:
        return f
    if isinstance(f, Scaled):
        return scale(c * f.factor, f.f)
    if isinstance(f, KernelSum):
        return KernelSum(c * f.coeffs, f.points, f.p)
    return Scaled(c, f)


def add(*fs):
    terms, poly = [], None
    for f in fs:
        parts = f.terms if isinstance(f, Sum) else (f,)
        for t in parts:
            if isinstance(t, Polynomial):
                poly = t.array if poly is None else npoly.polyadd(poly, t.array)
            else:
                terms.append(t)
    if poly is not None:
        p = Polynomial(tuple(poly))
        if not _is_zero(p) or not terms:
            terms.append(p)
    if len(terms) == 1:
        return terms[0]
    return Sum(tuple(terms))


def multiply(a, b):
    if isinstance(a, Polynomial) and isinstance(b, Polynomial):
        return Polynomial(tuple(npoly.polymul(a.array, b.array)))
    if _is_zero(a) or _is_zero(b):
        return Polynomial((0.0,))
    if isinstance(a, Polynomial) and a.degree == 0:
        return scale(a.coeffs[0], b)
    if isinstance(b, Polynomial) and b.degree == 0:
        return scale(b.coeffs[0], a)
    return Product(a, b)


def _poly_compose(outer, inner):
    out = np.zeros(1, dtype=complex)
    for c in outer.array[::-1]:
        out = npoly.polyadd(npoly.polymul(out, inner.array), [c])
    return Polynomial(tuple(out))


def compose(outer, inner):
    if isinstance(outer, Polynomial) and isinstance(inner, Polynomial):
        return _poly_compose(outer, inner)
    if outer.is_constant and isinstance(outer, Polynomial):
        return outer
    if isinstance(inner, Polynomial) and inner.degree == 1 and inner.coeffs == (0j, 1 + 0j):
        return outer
    return Composition(outer, inner)


def antiderivative(f):
    if isinstance(f, Polynomial):
        return f.integral()
    if isinstance(f, (Sum, Scaled, KernelPower)):
        return f.antiderivative()
    return Antiderivative(f)


# ---------------------------------------------------------------------------
# self-maps
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SelfMap:
    """An analytic self-map of the disk with a sampled certificate.

    ``certified_max`` is the maximum of ``|phi|`` over 4096 equally spaced
    points of the circle ``|z| = 0.999``.
    """

    f: AnalyticFunction
    certified_max: float

    def __call__(self, w):
        return self.f(w)

    def derivative(self):
        return self.f.derivative()

    def spec(self):
        return self.f.spec()

    @property
    def is_polynomial(self):
        return self.f.is_polynomial

    @property
    def is_constant(self):
        return self.f.is_constant


def certify_self_map(f, radius=0.999, samples=4096):
    """Wrap ``f`` as a :class:`SelfMap`, rejecting maps that leave the disk."""
    if isinstance(f, SelfMap):
        return f
    f = as_function(f)
    t = 2.0 * np.pi * np.arange(samples) / samples
    m = float(np.max(np.abs(f(radius * np.exp(1j * t)))))
    if not m <= 1.0 + 1e-9:
        raise ConstructionError(f"not a self-map of the disk: max |phi| on |z|={radius} is {m:.6g}")
    return SelfMap(f, m)


identity = z


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def evaluate(f, w):
    """Value of ``f`` at a point (or array of points) of the open disk."""
    w = np.asarray(w, dtype=complex)
    if np.any(np.abs(w) >= 1.0):
        raise DomainError("evaluation requires |z| < 1")
    out = as_function(f)(w)
    return complex(out) if out.ndim == 0 else out


def differentiate(f):
    return as_function(f).derivative()


def bergman_kernel(zeta, alpha):
    """Kernel ``K_zeta`` reproducing point values under :func:`pairing`.

    The pairing is bilinear, ``(f, g) = int f(w) g(conj w) (1-|w|^2)^alpha dA``,
    so the kernel that satisfies ``(f, K_zeta) = f(zeta)`` is
    ``(alpha + 1) / (1 - zeta z)**(alpha + 2)``, i.e. a kernel power with
    parameter ``conj(zeta)``.  For real ``zeta`` this coincides with the
    conjugated form ``(alpha + 1) / (1 - conj(zeta) z)**(alpha + 2)``.
    """
    if not abs(zeta) < 1:
        raise DomainError("kernel point must lie in the open disk")
    if not alpha > -1:
        raise DomainError("alpha must exceed -1")
    return scale(alpha + 1.0, KernelPower(np.conj(complex(zeta)), alpha + 2.0))


def default_pairing_quadrature():
    return build_quadrature(256, 512, 1.0 - 2.0 ** -40, cluster=True)


def pairing(f, g, alpha, quad=None, second_form=False):
    """Bilinear pairing ``int f(w) g(conj w) (1 - |w|^2)^alpha dA(w)``.

    With ``second_form=True`` the equivalent ``int f(conj w) g(w) ...`` is
    evaluated instead.  The default rule is double-exponential in ``s`` up
    to ``rho = 1 - 2**-40``, exact to rounding for polynomial data at any
    ``alpha > -1``.
    """
    quad = quad or default_pairing_quadrature()
    f, g = as_function(f), as_function(g)
    if (f.is_polynomial and g.is_polynomial) and quad.rho < 1.0 - 2.0 ** -10:
        raise DomainError("polynomial pairings need truncation radius >= 1 - 2**-10")
    w = quad.nodes()
    weight = np.exp(alpha * np.log(quad.one_minus_s))[:, None]
    if second_form:
        vals = f(np.conj(w)) * g(w) * weight
    else:
        vals = f(w) * g(np.conj(w)) * weight
    return integrate_values(vals, quad)


def a1_norm(f, omega, k_max=40, n_per_panel=16, n_theta=256):
    """``int |f| omega dA`` with truncation radii ``1 - 2**-k`` and a tail limit.

    Raises
    ------
    DivergenceError
        The truncated integrals grow like a power of ``1 / (1 - rho)``.
    """
    f = as_function(f)
    schedule = [1.0 - 2.0 ** (-k) for k in range(1, k_max + 1)]
    quad = schedule_quadrature(schedule, n_per_panel, n_theta, cluster_first=True)
    w = quad.nodes()
    logo = omega.log(quad.radii)[:, None]
    vals = np.abs(f(w)) * np.exp(logo)
    partial = [float(x) for x in integrate_values(vals, quad, cumulative=True)]
    verdict = classify_finiteness(partial, schedule)
    if verdict.kind == DIVERGING:
        raise DivergenceError(f"A^1 integral diverges (growth exponent {verdict.rate:.3g})")
    return verdict.value if verdict.kind == FINITE else partial[-1]


def test_function(zeta, phi, nu, beta):
    """Witness ``f_zeta(z) = (1-|w|^2)^(b+1) / (nu(w) (1 - conj(w) z)^(b+1))``, ``w = phi(zeta)``.

    It satisfies ``f_zeta(phi(zeta)) = 1 / nu(phi(zeta))``.
    """
    if not abs(zeta) < 1:
        raise DomainError("test function point must lie in the open disk")
    if not beta > 0:
        raise DomainError("beta must be positive")
    w = complex(as_function(phi)(np.complex128(zeta)))
    lw = math.log1p(-abs(w)) + math.log1p(abs(w))
    amp = math.exp((beta + 1.0) * lw - float(nu.log(abs(w))))
    if w == 0:
        return constant(amp)
    return scale(amp, KernelPower(w, beta + 1.0))


def _radial_profile(f):
    """Return ``(|a|, n)`` when ``|f(z)| = |a| |z|**n``, else ``None``."""
    if isinstance(f, Polynomial) and f.is_monomial:
        nz = [i for i, c in enumerate(f.coeffs) if c != 0]
        if not nz:
            return 0.0, 0
        return abs(f.coeffs[nz[0]]), nz[0]
    return None


def weighted_sup_norm(f, nu, solver=None):
    """``sup nu(z) |f(z)|`` over the disk, with its argmax.

    Monomials reduce to a one-dimensional search in ``r``.  The result
    carries ``at_boundary``/``unbounded`` flags from the solver; an
    unbounded flag means the weighted values still grow at
    ``1 - 2**-E`` (``E`` the solver's boundary exponent).
    """
    f = as_function(f)
    solver = solver or SupSolverConfig()
    prof = _radial_profile(f)
    if prof is not None:
        a, n = prof
        if a == 0:
            return SupResult(0.0, 0j)
        la = math.log(a)
        with np.errstate(divide="ignore"):
            return sup_over_radius(lambda r: nu.log(r) + la + n * np.log(r), solver, log=True)

    def logF(w):
        with np.errstate(divide="ignore"):
            return nu.log(np.abs(w)) + np.log(np.abs(f(w)))

    return sup_over_disk(logF, solver, log=True)


def bloch_norm(f, nu, solver=None):
    """``|f(0)| + sup nu(z) |f'(z)|``."""
    f = as_function(f)
    return abs(complex(f(np.complex128(0)))) + weighted_sup_norm(f.derivative(), nu, solver).value


@dataclass(frozen=True)
class Membership:
    verdict: str
    limit: Optional[float]
    radii: tuple
    values: tuple


MEMBER, NON_MEMBER = "Member", "NonMember"


def default_membership_schedule():
    return [0.0] + [1.0 - 2.0 ** (-k) for k in range(1, 41)]


def _circle_max(f, r, n=4096, iterations=40):
    if r == 0.0:
        return float(abs(f(np.complex128(0))))
    t = 2.0 * np.pi * np.arange(n) / n
    v = np.abs(f(r * np.exp(1j * t)))
    j = int(np.argmax(v))
    a, b = t[j] - 2 * np.pi / n, t[j] + 2 * np.pi / n
    g = (math.sqrt(5) - 1) / 2
    h = lambda x: float(abs(f(np.complex128(r * np.exp(1j * x)))))
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = h(c), h(d)
    for _ in range(iterations):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = h(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = h(d)
    return max(float(v[j]), fc, fd)


def little_membership(f, nu, mode="H0", schedule=None):
    """Decide numerically whether ``nu |f| -> 0`` (``H0``) or ``nu |f'| -> 0`` (``Bloch0``).

    ``m(rho)`` is the maximum of the weighted modulus on ``|z| = rho``.
    Member when the last ``m`` falls below ``1e-6`` times the largest value
    seen; NonMember when the last three values all stay above ``1e-3`` times
    that peak (the reported limit is the last value); Inconclusive otherwise.
    """
    f = as_function(f)
    if mode not in ("H0", "Bloch0"):
        raise ValueError("mode must be 'H0' or 'Bloch0'")
    target = f if mode == "H0" else f.derivative()
    radii = list(schedule) if schedule is not None else default_membership_schedule()
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise DomainError("membership schedule must increase strictly")
    m = [float(nu(np.float64(r))) * _circle_max(target, r) for r in radii]
    peak = max(m)
    if peak == 0.0:
        return Membership(MEMBER, 0.0, tuple(radii), tuple(m))
    if m[-1] < 1e-6 * peak:
        return Membership(MEMBER, 0.0, tuple(radii), tuple(m))
    if all(x > 1e-3 * peak for x in m[-3:]):
        return Membership(NON_MEMBER, m[-1], tuple(radii), tuple(m))
    return Membership("Inconclusive", None, tuple(radii), tuple(m))
