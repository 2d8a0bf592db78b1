"""Boundedness and nuclearity criteria for Volterra composition operators.

Boundedness is governed by two suprema over the disk (``M1`` for ``T`` and
its analogue for ``S``).  Nuclearity is governed by integrals over the disk
of an inner supremum,

    I = int [ sup_z w_tgt(z) |h(z)| / |1 - conj(zeta) phi(z)|**p ] w_src(zeta) dA(zeta),

where ``h`` is ``g'`` (kind T) or ``g`` (kind S) and ``p`` is ``alpha + 2``
or ``alpha + 3``.  The integral is truncated at radii ``1 - 2**-k`` and the
growth of the truncations is classified as Finite, Diverging or
Inconclusive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.polynomial import polynomial as npoly

from .analytic import Polynomial, SelfMap, as_function, compose, identity, multiply, z as z_fn
from .errors import ConstructionError, PreconditionError
from .growth import DIVERGING, FINITE, INCONCLUSIVE, Verdict, classify_finiteness
from .quad import (
    SupResult,
    SupSolverConfig,
    dyadic_schedule,
    integrate_values,
    maximize_batch,
    schedule_quadrature,
    sup_over_disk,
)
from .weights import RadialWeight, log_one_minus_r2, make_normal_pair

__all__ = [
    "CriterionSpec",
    "CriterionReport",
    "NodeDiagnostic",
    "criterion_M1",
    "criterion_S_sup",
    "inner_sup",
    "inner_sups",
    "nuclearity_criterion",
    "m_alpha",
    "n_alpha",
    "p_alpha",
    "q_alpha",
    "c_phi",
    "c_phi_d",
    "t_g",
    "s_g",
    "criterion_bloch_M",
    "classify_finiteness",
    "default_criterion_solver",
]

WEIGHTED, BLOCH = "weighted", "bloch"
NUMERATORS = {"T": ("g_prime",), "S": ("g", "phi_prime_g")}
# |phi| is clipped below one before weights are evaluated at phi(z)
_R_CLIP = 1.0 - 2.0 ** -52
# per-node solver horizon: E = max(E0, -log2(1 - |zeta|) + margin), capped
_E_MARGIN = 8
_E_CAP = 48


def default_criterion_solver():
    """Sup solver used at every quadrature node (coarser than the default)."""
    return SupSolverConfig(n_r=64, n_theta=128, iterations=40, tol=1e-12, rounds=8)


def _log_abs(values):
    with np.errstate(divide="ignore"):
        return np.log(np.abs(values))


def _log1m(z):
    return log_one_minus_r2(np.minimum(np.abs(z), _R_CLIP))


# ---------------------------------------------------------------------------
# Specs and reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CriterionSpec:
    """Ingredients of one nuclearity-type criterion integral.

    Parameters
    ----------
    kind : {"T", "S"}
        Operator kind; fixes the kernel exponent ``alpha + 2`` or ``alpha + 3``.
    alpha : float
        Pairing exponent, ``alpha > -1``.
    family : {"weighted", "bloch"}
        Weighted-space factors ``(1-|z|^2) mu(z)`` and ``(1-|zeta|^2)^alpha / nu(zeta)``,
        or Bloch-order factors ``(1-|z|^2)^gamma`` and ``(1-|zeta|^2)^(alpha-beta+1)``.
    numerator : str, optional
        ``g_prime`` (kind T), ``g`` or ``phi_prime_g`` (kind S).
    """

    kind: str
    alpha: float
    family: str = WEIGHTED
    nu: Optional[RadialWeight] = None
    mu: Optional[RadialWeight] = None
    beta: Optional[float] = None
    gamma: Optional[float] = None
    numerator: Optional[str] = None

    def __post_init__(self):
        if self.kind not in NUMERATORS:
            raise ConstructionError(f"criterion kind must be 'T' or 'S', got {self.kind!r}")
        if not self.alpha > -1:
            raise ConstructionError(f"alpha must exceed -1, got {self.alpha}")
        if self.family == WEIGHTED:
            if self.nu is None or self.mu is None:
                raise ConstructionError("weighted criteria need both nu and mu")
        elif self.family == BLOCH:
            if self.beta is None or self.gamma is None:
                raise ConstructionError("Bloch-order criteria need both beta and gamma")
        else:
            raise ConstructionError(f"unknown factor family {self.family!r}")
        num = self.numerator or NUMERATORS[self.kind][0]
        if num not in NUMERATORS[self.kind]:
            raise ConstructionError(f"numerator {num!r} does not match kind {self.kind}")
        object.__setattr__(self, "numerator", num)
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def exponent(self):
        return self.alpha + (2.0 if self.kind == "T" else 3.0)

    def log_target(self, z):
        """``log w_tgt(z)``."""
        if self.family == WEIGHTED:
            r = np.minimum(np.abs(z), _R_CLIP)
            return log_one_minus_r2(r) + self.mu.log(r)
        return self.gamma * _log1m(z)

    def log_source(self, radii, one_minus_s):
        """``log w_src`` at radii ``r`` with ``1 - r**2`` supplied exactly."""
        lo = np.log(one_minus_s)
        if self.family == WEIGHTED:
            return self.alpha * lo - self.nu.log(radii)
        return (self.alpha - self.beta + 1.0) * lo

    def numerator_function(self, g, phi):
        g = as_function(g)
        if self.numerator == "g_prime":
            return g.derivative()
        if self.numerator == "g":
            return g
        return multiply(as_function(phi).derivative(), g)

    def describe(self):
        d = {"kind": self.kind, "alpha": self.alpha, "family": self.family,
             "numerator": self.numerator, "exponent": self.exponent}
        if self.family == WEIGHTED:
            d.update(nu=self.nu.spec(), mu=self.mu.spec())
        else:
            d.update(beta=self.beta, gamma=self.gamma)
        return d


@dataclass(frozen=True)
class NodeDiagnostic:
    """Inner supremum at one quadrature node."""

    zeta: complex
    argmax: complex
    inner: float
    integrand: float
    at_boundary: bool = False
    unbounded: bool = False


@dataclass
class CriterionReport:
    """Truncated criterion values, their classification and node diagnostics.

    ``values[k]`` is the integral over ``|zeta| <= radii[k]``.  ``diagnostics``
    holds, per annulus, the node with the largest integrand.  ``pair_valid``
    records whether ``{nu, omega}`` is a normal pair at ``alpha`` (weighted
    specs only); the integral is computed either way.
    """

    name: str
    spec: CriterionSpec
    radii: tuple
    values: tuple
    verdict: Verdict
    diagnostics: tuple = ()
    pair_valid: Optional[bool] = None
    note: str = ""
    node_zeta: np.ndarray = field(default=None, repr=False)
    node_weight: np.ndarray = field(default=None, repr=False)
    node_inner: np.ndarray = field(default=None, repr=False)
    node_argmax: np.ndarray = field(default=None, repr=False)
    node_log_source: np.ndarray = field(default=None, repr=False)

    @property
    def kind(self):
        return self.verdict.kind

    @property
    def value(self):
        return self.verdict.value

    @property
    def rate(self):
        return self.verdict.rate

    @property
    def is_finite(self):
        return self.verdict.kind == FINITE

    def to_dict(self):
        v = self.verdict
        return {
            "name": self.name,
            "spec": self.spec.describe(),
            "radii": list(self.radii),
            "values": list(self.values),
            "verdict": v.kind,
            "value": None if v.value is None else float(v.value),
            "rate": None if v.rate is None else float(v.rate),
            "sublinear": bool(v.sublinear),
            "cauchy": None if v.cauchy is None else float(v.cauchy),
            "pair_valid": self.pair_valid,
            "note": self.note,
            "diagnostics": [
                {"zeta": [d.zeta.real, d.zeta.imag], "argmax": [d.argmax.real, d.argmax.imag],
                 "inner": d.inner, "integrand": d.integrand,
                 "at_boundary": d.at_boundary, "unbounded": d.unbounded}
                for d in self.diagnostics
            ],
        }


# ---------------------------------------------------------------------------
# Boundedness suprema
# ---------------------------------------------------------------------------


def _phi_function(phi):
    return phi.f if isinstance(phi, SelfMap) else as_function(phi)


def criterion_M1(g, phi, nu, mu, solver=None):
    """``sup (1-|z|^2) mu(z) / nu(phi(z)) |g'(z)|`` with its argmax.

    Returns a :class:`SupResult` (iterable as ``(value, argmax)``); its
    ``unbounded`` flag signals an unbounded operator.
    """
    gp = as_function(g).derivative()
    ph = _phi_function(phi)
    if _is_zero(gp):
        return SupResult(0.0, 0j)

    def logF(w):
        a = np.minimum(np.abs(ph(w)), _R_CLIP)
        r = np.minimum(np.abs(w), _R_CLIP)
        return log_one_minus_r2(r) + mu.log(r) - nu.log(a) + _log_abs(gp(w))

    return sup_over_disk(logF, solver, probes=[0j], log=True)


def criterion_S_sup(g, phi, nu, mu, solver=None):
    """``sup (1-|z|^2)/(1-|phi(z)|^2) mu(z)/nu(phi(z)) |g(z)|`` with its argmax."""
    g = as_function(g)
    ph = _phi_function(phi)
    if _is_zero(g):
        return SupResult(0.0, 0j)

    def logF(w):
        a = np.minimum(np.abs(ph(w)), _R_CLIP)
        r = np.minimum(np.abs(w), _R_CLIP)
        return (log_one_minus_r2(r) - log_one_minus_r2(a) + mu.log(r) - nu.log(a)
                + _log_abs(g(w)))

    return sup_over_disk(logF, solver, probes=[0j], log=True)


def _is_zero(f):
    return isinstance(f, Polynomial) and f.degree == 0 and f.coeffs[0] == 0


# ---------------------------------------------------------------------------
# Inner supremum
# ---------------------------------------------------------------------------


def _monomial_power(f):
    """``(coefficient, n)`` if ``f`` is ``c z**n``, else ``None``."""
    if isinstance(f, Polynomial) and f.is_monomial:
        nz = [i for i, c in enumerate(f.coeffs) if c != 0]
        return (f.coeffs[nz[0]], nz[0]) if nz else (0j, 0)
    return None


def _rotation_order(num, phi):
    """``m`` when the inner sup depends on ``|zeta|`` only (``phi = c z**m``)."""
    if _monomial_power(num) is None:
        return None
    mp = _monomial_power(phi)
    if mp is None or mp[1] < 1:
        return None
    return mp[1]


def _seeds(zetas, phi):
    """Warm starts: the node itself, the origin and preimages ``phi^{-1}(zeta)``."""
    zetas = np.asarray(zetas, dtype=complex)
    cols = [zetas, np.zeros_like(zetas)]
    if isinstance(phi, Polynomial) and 1 <= phi.degree <= 8:
        c = phi.array
        pre = np.tile(zetas[:, None], (1, phi.degree))
        for i, zt in enumerate(zetas):
            cc = c.copy()
            cc[0] -= zt
            roots = npoly.polyroots(cc)
            roots = roots[np.abs(roots) < 1.0]
            pre[i, : len(roots)] = roots
        cols.extend(pre.T)
    return np.stack(cols, axis=1)


def _horizon(zetas, E0):
    a = np.abs(np.asarray(zetas, dtype=complex))
    with np.errstate(divide="ignore"):
        need = np.ceil(-np.log2(1.0 - np.minimum(a, _R_CLIP))) + _E_MARGIN
    return np.minimum(np.maximum(E0, need), _E_CAP)


def inner_sups(zetas, spec, g, phi, solver=None):
    """Inner suprema at many nodes, one :class:`SupResult` per node.

    Three paths, all returning the same quantity: a constant ``phi`` factors
    the kernel out of the supremum; ``phi = c z**m`` with a monomial
    numerator makes the supremum depend on ``|zeta|`` only; otherwise all
    nodes are solved as one batch seeded with ``zeta``, ``0`` and the
    preimages of ``zeta`` under ``phi``.
    """
    solver = solver or default_criterion_solver()
    zetas = np.atleast_1d(np.asarray(zetas, dtype=complex)).ravel()
    if np.any(np.abs(zetas) >= 1.0):
        raise PreconditionError("inner_sup needs |zeta| < 1")
    ph = _phi_function(phi)
    num = spec.numerator_function(g, ph)
    p = spec.exponent
    if _is_zero(num):
        return [SupResult(0.0, 0j) for _ in zetas]

    def logA(w):
        return spec.log_target(w) + _log_abs(num(w))

    if ph.is_constant:
        c = complex(ph(np.complex128(0)))
        base = sup_over_disk(logA, solver, probes=[0j], log=True)
        scale = np.abs(1.0 - np.conj(zetas) * c) ** (-p)
        return [SupResult(base.value * float(s), base.argmax, base.at_boundary, base.unbounded, base.growth)
                for s in scale]

    m = _rotation_order(num, ph)
    if m is not None:
        radii, inverse = np.unique(np.abs(zetas), return_inverse=True)
        res = _solve_batch(radii.astype(complex), logA, ph, p, solver, _seeds(radii, ph))
        out = []
        for zt, i in zip(zetas, inverse):
            r = res[i]
            rot = np.exp(1j * np.angle(zt) / m) if zt != 0 else 1.0
            out.append(SupResult(r.value, complex(r.argmax * rot), r.at_boundary, r.unbounded, r.growth))
        return out
    return _solve_batch(zetas, logA, ph, p, solver, _seeds(zetas, ph))


def _solve_batch(zetas, logA, ph, p, solver, seeds):
    cz = np.conj(zetas)

    def logF(w, rows):
        if w.ndim == 2 and w.strides[0] == 0:
            base = w[:1]
            a, f = logA(base), ph(base)
        else:
            a, f = logA(w), ph(w)
        return a - p * _log_abs(1.0 - cz[rows][:, None] * f)

    return maximize_batch(logF, len(zetas), solver, seeds=seeds,
                          boundary_exponent=_horizon(zetas, solver.boundary_exponent))


def inner_sup(zeta, spec, g, phi, solver=None):
    """``sup_z w_tgt(z) |h(z)| / |1 - conj(zeta) phi(z)|**p`` as a :class:`SupResult`."""
    return inner_sups([zeta], spec, g, phi, solver)[0]


# ---------------------------------------------------------------------------
# Criterion integrals
# ---------------------------------------------------------------------------


def _pair_status(spec):
    if spec.family != WEIGHTED:
        return None, ""
    try:
        make_normal_pair(spec.nu, spec.alpha)
    except Exception as exc:  # the integral is still well defined
        return False, f"not a normal pair: {exc}"
    return True, ""


def nuclearity_criterion(spec, g, phi, schedule=None, n_per_panel=8, n_theta=32,
                         solver=None, name="criterion"):
    """Truncated criterion integrals ``I(rho_k)`` and their finiteness verdict.

    Parameters
    ----------
    spec : CriterionSpec
    g : AnalyticFunction
    phi : SelfMap or AnalyticFunction
    schedule : sequence of float, optional
        Truncation radii, default ``1 - 2**-k`` for ``k = 2..12``.
    n_per_panel, n_theta : int
        Radial Gauss nodes per annulus and angular nodes.
    solver : SupSolverConfig, optional
        Configuration of the inner supremum solves.

    Returns
    -------
    CriterionReport
        Diverging when the inner supremum is unbounded at some node, with
        that node among the diagnostics.
    """
    schedule = list(schedule) if schedule is not None else dyadic_schedule()
    quad = schedule_quadrature(schedule, n_per_panel, n_theta)
    nodes = quad.nodes()
    res = inner_sups(nodes.ravel(), spec, g, phi, solver)
    inner = np.array([r.value for r in res]).reshape(nodes.shape)
    argmax = np.array([r.argmax for r in res]).reshape(nodes.shape)
    unbounded = np.array([r.unbounded for r in res]).reshape(nodes.shape)
    at_b = np.array([r.at_boundary for r in res]).reshape(nodes.shape)
    growth = np.array([r.growth for r in res]).reshape(nodes.shape)
    logsrc = spec.log_source(quad.radii, quad.one_minus_s)[:, None] * np.ones((1, quad.n_theta))
    with np.errstate(divide="ignore"):
        integrand = np.exp(np.log(inner) + logsrc)
    partial = [float(v) for v in integrate_values(integrand, quad, cumulative=True)]
    verdict = classify_finiteness(partial, schedule)
    pair_valid, note = _pair_status(spec)

    diags, start = [], 0
    for end, _ in quad.panel_ends:
        block = integrand[start:end]
        i, j = np.unravel_index(int(np.argmax(block)), block.shape)
        i += start
        diags.append(NodeDiagnostic(complex(nodes[i, j]), complex(argmax[i, j]), float(inner[i, j]),
                                    float(integrand[i, j]), bool(at_b[i, j]), bool(unbounded[i, j])))
        start = end
    if np.any(unbounded):
        i, j = np.argwhere(unbounded)[0]
        bad = NodeDiagnostic(complex(nodes[i, j]), complex(argmax[i, j]), float(inner[i, j]),
                             float(integrand[i, j]), True, True)
        diags.append(bad)
        verdict = Verdict(DIVERGING, partial[-1], float(growth[unbounded].max()), False, verdict.cauchy)
        note = (note + "; " if note else "") + f"inner supremum unbounded at zeta = {bad.zeta:.6g}"

    return CriterionReport(
        name, spec, tuple(float(r) for r in schedule), tuple(partial), verdict, tuple(diags),
        pair_valid, note, nodes.ravel(), quad.weights().ravel(), inner.ravel(), argmax.ravel(),
        logsrc.ravel(),
    )


def m_alpha(g, phi, nu, mu, alpha, **kw):
    """Kind T, weighted-space criterion ``M_alpha``."""
    return nuclearity_criterion(CriterionSpec("T", alpha, WEIGHTED, nu, mu), g, phi, name="m_alpha", **kw)


def n_alpha(g, phi, nu, mu, alpha, **kw):
    """Kind S, weighted-space criterion ``N_alpha``."""
    return nuclearity_criterion(CriterionSpec("S", alpha, WEIGHTED, nu, mu), g, phi, name="n_alpha", **kw)


def p_alpha(g, phi, alpha, beta, gamma, **kw):
    """Kind T, Bloch-order criterion ``P_alpha``."""
    spec = CriterionSpec("T", alpha, BLOCH, beta=beta, gamma=gamma)
    return nuclearity_criterion(spec, g, phi, name="p_alpha", **kw)


def q_alpha(g, phi, alpha, beta, gamma, **kw):
    """Kind S, Bloch-order criterion ``Q_alpha``."""
    spec = CriterionSpec("S", alpha, BLOCH, beta=beta, gamma=gamma)
    return nuclearity_criterion(spec, g, phi, name="q_alpha", **kw)


def c_phi(phi, nu, mu, alpha, **kw):
    """Composition case ``g = z`` of ``M_alpha``."""
    rep = m_alpha(z_fn, phi, nu, mu, alpha, **kw)
    rep.name = "c_phi"
    return rep


def c_phi_d(phi, nu, mu, alpha, **kw):
    """``g = 1`` case of ``N_alpha`` (composition after differentiation)."""
    rep = n_alpha(Polynomial((1.0,)), phi, nu, mu, alpha, **kw)
    rep.name = "c_phi_d"
    return rep


def t_g(g, nu, mu, alpha, **kw):
    """Plain Volterra case ``phi = id`` of ``M_alpha``."""
    rep = m_alpha(g, identity, nu, mu, alpha, **kw)
    rep.name = "t_g"
    return rep


def s_g(g, nu, mu, alpha, **kw):
    """Plain case ``phi = id`` of ``N_alpha``."""
    rep = n_alpha(g, identity, nu, mu, alpha, **kw)
    rep.name = "s_g"
    return rep


def criterion_bloch_M(g, phi, **kw):
    """Both readings of the Bloch-space (``beta = 1``) criterion.

    ``printed`` integrates ``sup (1-|z|^2) |phi'(z)| |g(z)| / |1 - conj(w) phi(z)|^3``;
    ``derived`` integrates ``sup (1-|z|^2) |g'(z)| / |1 - conj(w) phi(z)|^2``,
    the form that follows from ``(T f)' = f(phi) g'``.  Both use plain area
    measure in ``w``.  The two are reported side by side; neither is
    preferred.

    Neither integrand carries a vanishing source factor, so the increments
    of ``I(rho_k)`` only decay like ``2**-k``; the default schedule therefore
    runs to ``k = 16`` so the Cauchy test can pass.
    """
    kw.setdefault("schedule", dyadic_schedule(2, 16))
    printed = nuclearity_criterion(
        CriterionSpec("S", 0.0, BLOCH, beta=1.0, gamma=1.0, numerator="phi_prime_g"),
        g, phi, name="bloch_m_printed", **kw,
    )
    derived = nuclearity_criterion(
        CriterionSpec("T", 0.0, BLOCH, beta=1.0, gamma=1.0), g, phi, name="bloch_m_derived", **kw,
    )
    return printed, derived
