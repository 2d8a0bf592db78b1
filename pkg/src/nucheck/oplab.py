"""Operator-level oracles for ``T_g^phi`` and ``S_g^phi``.

Norm conventions used throughout:

* source norm: ``||f|| = sup nu(z) |f(z)|``;
* target norm: the Bloch form ``sup (1-|z|^2) mu(z) |F'(z)|`` of an image
  ``F`` (images vanish at the origin), evaluated from the closed-form
  derivative ``F' = f(phi) g'`` or ``f'(phi) g``.  Passing ``norm="sup"``
  uses ``sup mu |F|`` instead.

In these norms ``||T|| <= M1`` holds exactly, and the nuclear decomposition
total bounds ``||T||`` from above.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.polynomial import polynomial as npoly

from .analytic import (
    AnalyticFunction,
    KernelSum,
    Polynomial,
    SelfMap,
    antiderivative,
    as_function,
    compose,
    little_membership,
    monomial,
    multiply,
    scale,
    test_function,
    weighted_sup_norm,
)
from .criteria import (
    WEIGHTED,
    CriterionSpec,
    default_criterion_solver,
    nuclearity_criterion,
)
from .errors import PreconditionError, RefusalError, UndefinedRatioError, UnsupportedRepresentationError
from .quad import SupSolverConfig, dyadic_schedule, sup_over_disk
from .weights import bloch_factor, check_normality, log_one_minus_r2

__all__ = [
    "apply_T",
    "apply_S",
    "image_derivative",
    "target_norm",
    "source_norm",
    "OperatorTruncation",
    "truncation_matrix",
    "operator_norm_lower",
    "NuclearDecomposition",
    "nuclear_decomposition",
    "absolutely_summing_probe",
    "compactness_probe",
    "COMPACT_LIKELY",
    "NON_COMPACT_LIKELY",
    "INCONCLUSIVE",
]

COMPACT_LIKELY, NON_COMPACT_LIKELY, INCONCLUSIVE = "CompactLikely", "NonCompactLikely", "Inconclusive"
MAX_TRUNCATION = 256
MAX_FAMILY = 8


def _fn(x):
    return x.f if isinstance(x, SelfMap) else as_function(x)


def _check_kind(kind):
    if kind not in ("T", "S"):
        raise PreconditionError(f"operator kind must be 'T' or 'S', got {kind!r}")


# ---------------------------------------------------------------------------
# Applying the operators
# ---------------------------------------------------------------------------


def image_derivative(kind, g, phi, f):
    """Derivative of the image: ``f(phi) g'`` (T) or ``f'(phi) g`` (S)."""
    _check_kind(kind)
    g, phi, f = as_function(g), _fn(phi), as_function(f)
    if kind == "T":
        return multiply(compose(f, phi), g.derivative())
    return multiply(compose(f.derivative(), phi), g)


def apply_T(g, phi, f):
    """``(T f)(z) = int_0^z f(phi(t)) g'(t) dt``.

    Exact coefficient arithmetic when all inputs are polynomials; otherwise
    a 128-node Gauss rule along the segment ``[0, z]``.
    """
    return antiderivative(image_derivative("T", g, phi, f))


def apply_S(g, phi, f):
    """``(S f)(z) = int_0^z f'(phi(t)) g(t) dt``."""
    return antiderivative(image_derivative("S", g, phi, f))


def _apply(kind, g, phi, f):
    return apply_T(g, phi, f) if kind == "T" else apply_S(g, phi, f)


def source_norm(f, nu, solver=None):
    """``sup nu |f|``."""
    return weighted_sup_norm(f, nu, solver).value


def target_norm(kind, g, phi, f, mu, norm="bloch", solver=None):
    """Target norm of the image of ``f``; see the module docstring."""
    if norm == "bloch":
        return weighted_sup_norm(image_derivative(kind, g, phi, f), bloch_factor(mu), solver).value
    if norm == "sup":
        return weighted_sup_norm(_apply(kind, g, phi, f), mu, solver).value
    raise PreconditionError(f"norm must be 'bloch' or 'sup', got {norm!r}")


# ---------------------------------------------------------------------------
# Matrix truncation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OperatorTruncation:
    """Images of ``z**n``, ``n = 0..N``, as columns of Taylor coefficients.

    With ``normalized`` set, column ``n`` is the image of ``z**n / ||z**n||``
    (source norm), and ``scales[n] = ||z**n||``.
    """

    kind: str
    N: int
    matrix: np.ndarray = field(repr=False)
    normalized: bool = False
    scales: Optional[np.ndarray] = field(default=None, repr=False)

    def column(self, n):
        return self.matrix[:, n]


def _poly_power_table(phi, N):
    out, cur = [np.ones(1, dtype=complex)], np.ones(1, dtype=complex)
    for _ in range(N):
        cur = npoly.polymul(cur, phi.array)
        out.append(cur)
    return out


def truncation_matrix(kind, g, phi, N=64, normalized=False, nu=None, solver=None):
    """Exact matrix of the operator on the monomials ``1, z, ..., z**N``.

    Raises
    ------
    UnsupportedRepresentationError
        ``g`` or ``phi`` is not a polynomial.
    """
    _check_kind(kind)
    g, ph = as_function(g), _fn(phi)
    if not (isinstance(g, Polynomial) and isinstance(ph, Polynomial)):
        raise UnsupportedRepresentationError("truncation_matrix needs polynomial g and phi")
    if not 0 <= N <= MAX_TRUNCATION:
        raise PreconditionError(f"degree bound must lie in 0..{MAX_TRUNCATION}, got {N}")
    if normalized and nu is None:
        raise PreconditionError("normalized truncation needs the source weight nu")
    powers = _poly_power_table(ph, N)
    gp = g.derivative().array
    cols = []
    for n in range(N + 1):
        if kind == "T":
            d = npoly.polymul(powers[n], gp)
        else:
            d = n * npoly.polymul(powers[n - 1], g.array) if n > 0 else np.zeros(1, dtype=complex)
        cols.append(npoly.polyint(np.atleast_1d(d), lbnd=0.0))
    rows = max(len(c) for c in cols)
    M = np.zeros((rows, N + 1), dtype=complex)
    for n, c in enumerate(cols):
        M[: len(c), n] = c
    scales = None
    if normalized:
        scales = np.array([source_norm(monomial(n), nu, solver) for n in range(N + 1)])
        M = M / scales[None, :]
    return OperatorTruncation(kind, N, M, normalized, scales)


# ---------------------------------------------------------------------------
# Witness lower bound
# ---------------------------------------------------------------------------


def default_probe_points():
    """``zeta`` samples for test-function probes: 0 plus 8 angles on 4 circles."""
    pts = [0j]
    for r in (0.5, 0.9, 0.99, 0.999):
        pts.extend(r * np.exp(2j * np.pi * np.arange(8) / 8))
    return np.array(pts)


def _probe_set(phi, nu, beta, points, max_degree=8):
    probes = [(f"z^{n}", monomial(n)) for n in range(max_degree + 1)]
    for zt in points:
        probes.append((f"f_zeta({zt.real:.6g}{zt.imag:+.6g}j)", test_function(zt, phi, nu, beta)))
    return probes


def operator_norm_lower(kind, g, phi, nu, mu, probes=None, beta=None, norm="bloch", solver=None):
    """Largest ratio ``||image(f)|| / ||f||`` over a probe set.

    The default probes are the monomials of degree <= 8 and the test
    functions ``f_zeta`` at :func:`default_probe_points`.  Probes with zero
    source norm are skipped.

    Returns
    -------
    (float, str)
        The bound and the id of the witness that attains it.
    """
    _check_kind(kind)
    if probes is None:
        if beta is None:
            b = check_normality(nu).beta_estimate if nu.kind != "const" else None
            beta = b if b is not None and b > 0 else 1.0
        probes = _probe_set(phi, nu, beta, default_probe_points())
    elif not isinstance(probes[0], tuple):
        probes = [(f"probe{i}", p) for i, p in enumerate(probes)]
    best, witness = 0.0, None
    for pid, f in probes:
        sn = source_norm(f, nu, solver)
        if not sn > 0 or not math.isfinite(sn):
            continue
        ratio = target_norm(kind, g, phi, f, mu, norm, solver) / sn
        if ratio > best or witness is None:
            best, witness = max(best, ratio), pid
    return best, witness


# ---------------------------------------------------------------------------
# Nuclear decomposition
# ---------------------------------------------------------------------------


@dataclass
class NuclearDecomposition:
    """Rank-one terms ``x'_k (x) y_k`` at quadrature nodes ``zeta_k``.

    ``x'_k(f) = c_k f(zeta_k)`` with ``c_k = w_k (alpha+1) (1-|zeta_k|^2)^alpha``
    (times ``(alpha+2) conj(zeta_k)`` for kind S).  ``y_k`` is the
    antiderivative of ``g' / (1 - conj(zeta_k) phi)^(alpha+2)`` (kind T) or
    ``g / (1 - conj(zeta_k) phi)^(alpha+3)`` (kind S).  ``functional_norms``
    excludes the quadrature weight; ``term_bounds = w_k ||x'_k|| ||y_k||``.

    ``||x'_k||`` uses ``1 / nu(zeta_k)``, which is exact for standard
    weights.  For other weights ``slack`` is set: the true point-evaluation
    norm is only comparable to it, up to an unquantified constant.
    """

    kind: str
    alpha: float
    nodes: np.ndarray
    weights: np.ndarray
    functional_norms: np.ndarray
    image_norms: np.ndarray
    term_bounds: np.ndarray
    total: float
    g: AnalyticFunction = field(repr=False, default=None)
    phi: AnalyticFunction = field(repr=False, default=None)
    coefficients: np.ndarray = field(repr=False, default=None)
    slack: bool = False

    def __len__(self):
        return len(self.nodes)

    @property
    def exponent(self):
        return self.alpha + (2.0 if self.kind == "T" else 3.0)

    def image_derivative(self, f):
        """Derivative of ``T_N f`` in closed form."""
        f = as_function(f)
        if len(self.nodes) == 0:
            return Polynomial((0.0,))
        ks = KernelSum(self.coefficients * f(self.nodes), self.nodes, self.exponent)
        h = self.g.derivative() if self.kind == "T" else self.g
        return multiply(h, compose(ks, self.phi))

    def apply(self, f):
        """The finite-rank operator ``T_N f``."""
        return antiderivative(self.image_derivative(f))

    def to_dict(self):
        return {
            "kind": self.kind,
            "alpha": self.alpha,
            "nodes": [[float(z.real), float(z.imag)] for z in self.nodes],
            "weights": [float(w) for w in self.weights],
            "functional_norms": [float(x) for x in self.functional_norms],
            "image_norms": [float(x) for x in self.image_norms],
            "term_bounds": [float(x) for x in self.term_bounds],
            "total": float(self.total),
            "slack": bool(self.slack),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        nodes = np.array([complex(a, b) for a, b in d["nodes"]], dtype=complex)
        return cls(d["kind"], float(d["alpha"]), nodes, np.array(d["weights"]),
                   np.array(d["functional_norms"]), np.array(d["image_norms"]),
                   np.array(d["term_bounds"]), float(d["total"]), slack=bool(d.get("slack", False)))


def nuclear_decomposition(g, phi, nu, mu, alpha, kind="T", schedule=None, n_per_panel=8,
                          n_theta=32, solver=None, criterion=None):
    """Discretize the kernel representation of the operator into rank-one terms.

    The criterion report at the same resolution supplies the nodes and the
    image norms ``||y_k||`` (which are exactly its inner suprema), so the
    total equals ``(alpha+1)`` times the discretized ``M_alpha`` sum for
    kind T.  For kind S each term carries ``(alpha+1)(alpha+2)|zeta_k|``;
    nodes with ``|zeta_k| <= 1/2`` are thereby bounded by half the
    ``N_alpha`` integrand and the total never exceeds
    ``(alpha+1)(alpha+2) N_alpha``.

    Raises
    ------
    RefusalError
        The criterion is not classified Finite.
    """
    _check_kind(kind)
    g, ph = as_function(g), _fn(phi)
    if criterion is None:
        spec = CriterionSpec(kind, alpha, WEIGHTED, nu, mu)
        criterion = nuclearity_criterion(spec, g, ph, schedule, n_per_panel, n_theta, solver,
                                         name="m_alpha" if kind == "T" else "n_alpha")
    if not criterion.is_finite:
        raise RefusalError(
            f"nuclear decomposition refused: criterion verdict is {criterion.kind}"
            + (f" (rate {criterion.rate:.3g})" if criterion.kind == "Diverging" else "")
            + (f"; {criterion.note}" if criterion.note else "")
        )
    a = float(alpha)
    nodes = criterion.node_zeta
    w = criterion.node_weight
    inner = criterion.node_inner
    fn = (a + 1.0) * np.exp(criterion.node_log_source)
    coef = w * (a + 1.0) * np.exp(a * log_one_minus_r2(np.abs(nodes)))
    if kind == "S":
        fn = fn * (a + 2.0) * np.abs(nodes)
        coef = coef * (a + 2.0) * np.conj(nodes)
    keep = (inner > 0) & (fn > 0)
    nodes, w, fn, inner, coef = nodes[keep], w[keep], fn[keep], inner[keep], coef[keep]
    terms = w * fn * inner
    total = math.fsum(terms.tolist())
    return NuclearDecomposition(kind, a, nodes, w, fn, inner, terms, total, g, ph, coef,
                                slack=nu.kind != "standard")


def decomposition_error(dec, f, mu, kind="T", solver=None):
    """Target-norm distance between the image of ``f`` and ``T_N f``."""
    exact = image_derivative(kind, dec.g, dec.phi, f)
    approx = dec.image_derivative(f)
    wl = bloch_factor(mu)

    def logF(z):
        with np.errstate(divide="ignore"):
            return wl.log(np.minimum(np.abs(z), 1.0 - 2.0 ** -52)) + np.log(np.abs(exact(z) - approx(z)))

    return sup_over_disk(logF, solver, probes=[0j], log=True).value


__all__.append("decomposition_error")


# ---------------------------------------------------------------------------
# Absolutely summing and compactness probes
# ---------------------------------------------------------------------------


def _unimodular_max(values):
    """``max |sum eta_i a_i|`` over ``eta in {1, i, -1, -i}**n`` at every point.

    ``values`` has shape ``(n, P)``.  For a direction ``u`` each term picks the
    rotation closest to ``u``; the optimal sign pattern is the best response
    to its own direction, so scanning one ``u`` inside every arc between the
    ``4n`` switching angles finds it.
    """
    a = np.asarray(values, dtype=complex)
    n = a.shape[0]
    base = np.angle(a)
    breaks = (base[:, None, :] + np.pi / 4 + np.arange(4)[None, :, None] * np.pi / 2) % (2 * np.pi)
    breaks = np.sort(breaks.reshape(4 * n, -1), axis=0)
    nxt = np.roll(breaks, -1, axis=0)
    nxt[-1] += 2 * np.pi
    mids = 0.5 * (breaks + nxt)
    best = np.zeros(a.shape[1])
    for u in mids:
        k = np.round((u[None, :] - base) / (np.pi / 2)) % 4
        s = np.sum(a * np.exp(0.5j * np.pi * k), axis=0)
        best = np.maximum(best, np.abs(s))
    return best


def absolutely_summing_probe(kind, g, phi, nu, mu, family, norm="bloch", solver=None):
    """``sum ||image(f_i)|| / max_eta ||sum eta_i f_i||`` with ``eta`` on fourth roots of unity.

    The denominator is ``sup_z nu(z) max_eta |sum eta_i f_i(z)|``, which
    equals the maximum over sign patterns of the source norms.

    Raises
    ------
    UndefinedRatioError
        Every member of the family is zero.
    """
    _check_kind(kind)
    family = [as_function(f) for f in family]
    if not 1 <= len(family) <= MAX_FAMILY:
        raise PreconditionError(f"family size must lie in 1..{MAX_FAMILY}")

    def logF(z):
        vals = np.stack([np.broadcast_to(f(z), z.shape) for f in family]).reshape(len(family), -1)
        m = _unimodular_max(vals).reshape(z.shape)
        with np.errstate(divide="ignore"):
            return nu.log(np.minimum(np.abs(z), 1.0 - 2.0 ** -52)) + np.log(m)

    denom = sup_over_disk(logF, solver, probes=[0j], log=True).value
    if not denom > 0:
        raise UndefinedRatioError("absolutely summing ratio undefined: the family is zero")
    num = math.fsum(target_norm(kind, g, phi, f, mu, norm, solver) for f in family)
    return num / denom


def compactness_probe(kind, g, phi, nu, mu, N=16, solver=None):
    """Heuristic compactness label from images of normalized monomials.

    Images of ``z**n / ||z**n||``, ``n = 0..N``, must be in the little
    target space and their target norms must tend to zero.  Returns
    ``CompactLikely`` when the last norm is below ``1e-3`` times the
    largest, ``NonCompactLikely`` when an image is not in the little space
    or the last three norms stay above a tenth of the largest, and
    ``Inconclusive`` otherwise.
    """
    _check_kind(kind)
    g, ph = as_function(g), _fn(phi)
    if not (isinstance(g, Polynomial) and isinstance(ph, Polynomial)):
        raise UnsupportedRepresentationError("compactness_probe needs polynomial g and phi")
    wl = bloch_factor(mu)
    norms = []
    for n in range(N + 1):
        f = scale(1.0 / source_norm(monomial(n), nu, solver), monomial(n))
        d = image_derivative(kind, g, ph, f)
        if little_membership(d, wl, "H0").verdict == "NonMember":
            return NON_COMPACT_LIKELY
        norms.append(weighted_sup_norm(d, wl, solver).value)
    peak = max(norms)
    if peak == 0.0 or norms[-1] <= 1e-3 * peak:
        return COMPACT_LIKELY
    if min(norms[-3:]) >= 0.1 * peak:
        return NON_COMPACT_LIKELY
    return INCONCLUSIVE
