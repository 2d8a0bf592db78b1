"""Quadrature over centered disks and a global supremum solver on the unit disk.

Radial rules live in the variable ``s = r**2`` so that the normalized area
measure becomes ``dA = ds dtheta / (2 pi)``.  Every rule stores ``1 - s``
separately because most integrands in this package carry powers of
``1 - |z|**2`` that must stay accurate as ``s`` approaches one.

The supremum solver works on the log of the objective, scans a polar grid
whose radial nodes cluster toward the boundary in ``u = -log2(1 - r)``, and
polishes the best cell by coordinate-wise golden-section search.  It is
batched: one call maximizes ``B`` related objectives at once, which is how
the criteria evaluate an inner supremum at every quadrature node.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConstructionError, EvaluationError

__all__ = [
    "DiskQuadrature",
    "SupSolverConfig",
    "SupResult",
    "build_quadrature",
    "schedule_quadrature",
    "dyadic_schedule",
    "integrate_disk",
    "integrate_values",
    "sup_over_disk",
    "sup_over_radius",
    "maximize_batch",
    "one_minus_abs2",
    "worker_count",
]

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def worker_count():
    """Worker cap from ``NUCHECK_THREADS``, defaulting to the CPU count."""
    raw = os.environ.get("NUCHECK_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


def one_minus_abs2(z):
    """``1 - |z|**2`` evaluated as ``(1 - |z|)(1 + |z|)``."""
    r = np.abs(z)
    return (1.0 - r) * (1.0 + r)


def dyadic_schedule(k_min=2, k_max=12):
    """Radii ``1 - 2**-k`` for ``k = k_min..k_max``."""
    return [1.0 - 2.0 ** (-k) for k in range(k_min, k_max + 1)]


# ---------------------------------------------------------------------------
# Quadrature rules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiskQuadrature:
    """Product rule on ``{|z| <= rho}``: radial nodes in ``s`` times uniform angles.

    ``panel_ends`` lists, for composite rules, the index one past the last
    radial node of each panel together with the panel's outer radius; a plain
    rule has a single panel.
    """

    s: np.ndarray
    one_minus_s: np.ndarray
    radial_weights: np.ndarray
    n_theta: int
    rho: float
    theta_offset: float = 0.0
    panel_ends: tuple = ()
    clustered: bool = False

    @property
    def n_r(self):
        return len(self.s)

    @property
    def radii(self):
        return np.sqrt(self.s)

    @property
    def angles(self):
        return self.theta_offset + 2.0 * np.pi * np.arange(self.n_theta) / self.n_theta

    def nodes(self):
        """Complex nodes, shape ``(n_r, n_theta)``, radial-major."""
        return self.radii[:, None] * np.exp(1j * self.angles)[None, :]

    def weights(self):
        """Node weights, shape ``(n_r, n_theta)``; they sum to ``rho**2``."""
        w = self.radial_weights / self.n_theta
        return np.repeat(w[:, None], self.n_theta, axis=1)

    def rotated(self, offset):
        return DiskQuadrature(
            self.s, self.one_minus_s, self.radial_weights, self.n_theta,
            self.rho, self.theta_offset + offset, self.panel_ends, self.clustered,
        )

    @property
    def panel_radii(self):
        return [rho for _, rho in self.panel_ends]


def _gauss_in_s(n, a, b, one_minus_b):
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    s = a + half * (x + 1.0)
    oms = one_minus_b + half * (1.0 - x)
    return s, oms, half * w


def _tanh_sinh_in_s(n, b, one_minus_b):
    # Double-exponential rule on [0, b]; b - s is formed without cancellation.
    L = 3.2
    u = np.linspace(-L, L, n)
    h = u[1] - u[0]
    q = 0.5 * np.pi * np.sinh(u)
    gap = b / (1.0 + np.exp(2.0 * q))          # b - s
    s = b - gap
    w = b * h * 0.5 * np.pi * np.cosh(u) / (2.0 * np.cosh(q) ** 2)
    return s, one_minus_b + gap, w


def _one_minus_square(rho):
    return (1.0 - rho) * (1.0 + rho)


def build_quadrature(n_r, n_theta, rho, cluster=False):
    """Product rule on the disk of radius ``rho``.

    Parameters
    ----------
    n_r, n_theta : int
        Radial and angular node counts (at least 8 and 16).
    rho : float
        Truncation radius in ``(0, 1)``.
    cluster : bool
        Use a double-exponential radial rule that crowds nodes toward both
        ends of ``[0, rho**2]``; suited to endpoint singularities such as
        ``(1 - s)**alpha`` with non-integer ``alpha``.
    """
    if n_r < 8 or n_theta < 16:
        raise ConstructionError(f"quadrature needs n_r >= 8 and n_theta >= 16, got {n_r}, {n_theta}")
    if not 0.0 < rho < 1.0:
        raise ConstructionError(f"truncation radius must lie in (0, 1), got {rho}")
    b = rho * rho
    omb = _one_minus_square(rho)
    if cluster:
        s, oms, w = _tanh_sinh_in_s(n_r, b, omb)
    else:
        s, oms, w = _gauss_in_s(n_r, 0.0, b, omb)
    return DiskQuadrature(s, oms, w, int(n_theta), float(rho), 0.0, ((n_r, float(rho)),), cluster)


def schedule_quadrature(schedule, n_per_panel=8, n_theta=32, cluster_first=False):
    """Composite rule with one Gauss panel per annulus of a radii schedule.

    The first panel covers ``[0, schedule[0]]``; panel ``k`` covers the
    annulus between consecutive radii.  Partial sums over leading panels give
    the truncated integrals ``I(rho_k)``.  ``cluster_first`` replaces the
    first panel by a double-exponential rule with four times the nodes, for
    integrands like ``|z| = s**0.5`` that are not smooth in ``s`` at 0.
    """
    radii = [float(r) for r in schedule]
    if not radii or any(b <= a for a, b in zip(radii, radii[1:])):
        raise ConstructionError("schedule must be non-empty and strictly increasing")
    if radii[0] <= 0.0 or radii[-1] >= 1.0:
        raise ConstructionError("schedule radii must lie in (0, 1)")
    if n_per_panel < 2 or n_theta < 1:
        raise ConstructionError("panel rule too small")
    parts, ends, lo, count = [], [], 0.0, 0
    for rho in radii:
        if cluster_first and lo == 0.0:
            s, oms, w = _tanh_sinh_in_s(4 * n_per_panel, rho * rho, _one_minus_square(rho))
            parts.append((s, oms, w))
            count += len(s)
            ends.append((count, rho))
            lo = rho * rho
            continue
        s, oms, w = _gauss_in_s(n_per_panel, lo, rho * rho, _one_minus_square(rho))
        parts.append((s, oms, w))
        count += n_per_panel
        ends.append((count, rho))
        lo = rho * rho
    s = np.concatenate([p[0] for p in parts])
    oms = np.concatenate([p[1] for p in parts])
    w = np.concatenate([p[2] for p in parts])
    return DiskQuadrature(s, oms, w, int(n_theta), radii[-1], 0.0, tuple(ends), False)


def _fsum_complex(values):
    values = np.asarray(values)
    if values.ndim == 2:
        # angular rows pairwise in numpy, rows exactly rounded
        values = values.sum(axis=1)
    values = np.ravel(values)
    if np.iscomplexobj(values):
        return complex(math.fsum(values.real), math.fsum(values.imag))
    return math.fsum(values)


def _check_finite(values, quad):
    bad = ~np.isfinite(values)
    if np.any(bad):
        i, j = np.argwhere(bad)[0]
        z = quad.nodes()[i, j]
        raise EvaluationError(f"non-finite integrand at node ({i}, {j}), z = {z:.6g}")


def integrate_values(values, quad, cumulative=False):
    """Weighted node sum of precomputed node values (shape ``(n_r, n_theta)``).

    With ``cumulative=True`` returns the truncated integral at the outer
    radius of every panel.
    """
    values = np.asarray(values)
    if values.shape != (quad.n_r, quad.n_theta):
        values = np.broadcast_to(values, (quad.n_r, quad.n_theta))
    _check_finite(values, quad)
    wv = values * quad.weights()
    if not cumulative:
        return _fsum_complex(wv)
    out, start, running = [], 0, 0.0
    for end, _ in quad.panel_ends:
        running = running + _fsum_complex(wv[start:end])
        out.append(running)
        start = end
    return out


def integrate_disk(F, quad, cumulative=False):
    """Integrate ``F`` against normalized area measure over the rule's disk.

    ``F`` is called once on the full ``(n_r, n_theta)`` node array.  Each
    angular row is summed by numpy and the row sums are reduced with
    ``math.fsum``, so the result does not depend on worker count.
    """
    values = np.asarray(F(quad.nodes()))
    return integrate_values(values, quad, cumulative=cumulative)


# ---------------------------------------------------------------------------
# Supremum solver
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SupSolverConfig:
    """Coarse grid size, golden-section iterations and stopping tolerance.

    ``boundary_exponent`` E puts the outermost coarse radius at ``1 - 2**-E``.
    """

    n_r: int = 128
    n_theta: int = 256
    iterations: int = 40
    tol: float = 1e-10
    boundary_exponent: float = 12.0
    rounds: int = 8

    def __post_init__(self):
        if self.n_r < 16 or self.n_theta < 16:
            raise ConstructionError("sup solver grid counts must be >= 16")
        if not self.tol > 0:
            raise ConstructionError("sup solver tolerance must be positive")
        if self.iterations < 1 or self.rounds < 1:
            raise ConstructionError("sup solver needs at least one iteration and round")


@dataclass(frozen=True)
class SupResult:
    """Outcome of a supremum search.

    ``at_boundary`` marks a supremum approached at the outermost searched
    radius (not attained inside); ``unbounded`` additionally means the values
    were still growing polynomially in ``1/(1 - r)`` there.
    """

    value: float
    argmax: complex
    at_boundary: bool = False
    unbounded: bool = False
    growth: float = 0.0

    def __iter__(self):
        yield self.value
        yield self.argmax


def _u_to_r(u):
    return -np.expm1(-u * math.log(2.0))


def _coarse_u_nodes(n_r, E):
    n_inner = n_r // 2
    r_inner = np.linspace(0.0, 0.9, n_inner, endpoint=False)
    u_inner = -np.log2(1.0 - r_inner)
    u_outer = np.linspace(-math.log2(0.1), E, n_r - n_inner)
    return np.concatenate([u_inner, u_outer])


@dataclass
class _State:
    u: np.ndarray
    t: np.ndarray
    val: np.ndarray
    du: np.ndarray
    dt: np.ndarray
    umax: np.ndarray = field(default=None)


def _evaluate(logF, u, t, rows):
    z = _u_to_r(u) * np.exp(1j * t)
    with np.errstate(all="ignore"):
        v = np.asarray(logF(z, rows), dtype=float)
    return np.where(np.isnan(v), -np.inf, v)


def _golden(logF, st, rows, coord, lo, hi, iterations):
    # Batched golden-section maximization along one coordinate.
    other = st.t if coord == "u" else st.u

    def f(x):
        return _evaluate(logF, x[:, None], other[:, None], rows)[:, 0] if coord == "u" else \
            _evaluate(logF, other[:, None], x[:, None], rows)[:, 0]

    a, b = lo.copy(), hi.copy()
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iterations):
        left = fc >= fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = b - _GOLDEN * (b - a)
        new_d = a + _GOLDEN * (b - a)
        x_new = np.where(left, new_c, new_d)
        f_new = f(x_new)
        c, d, fc, fd = (
            np.where(left, new_c, d),
            np.where(left, c, new_d),
            np.where(left, f_new, fd),
            np.where(left, fc, f_new),
        )
    x = 0.5 * (a + b)
    fx = f(x)
    better = fx > st.val
    if coord == "u":
        st.u = np.where(better, x, st.u)
    else:
        st.t = np.where(better, x, st.t)
    st.val = np.where(better, fx, st.val)
    return better


def _refine(logF, st, rows, config):
    prev = st.val.copy()
    for _ in range(config.rounds):
        ulo = np.maximum(st.u - st.du, 0.0)
        uhi = np.minimum(st.u + st.du, st.umax)
        _golden(logF, st, rows, "u", ulo, uhi, config.iterations)
        _golden(logF, st, rows, "t", st.t - st.dt, st.t + st.dt, config.iterations)
        gain = st.val - prev
        prev = st.val.copy()
        if np.all(~np.isfinite(st.val) | (gain <= config.tol)):
            break
        st.du = np.maximum(st.du * 0.5, 1e-6)
        st.dt = np.maximum(st.dt * 0.5, 1e-7)


def _boundary_growth(logF, u, t, umax, rows):
    # Slope of log F against log(1/(1 - r)) along the argmax ray near the edge.
    us = umax[:, None] - np.array([4.0, 3.0, 2.0, 1.0, 0.0])[None, :]
    vals = _evaluate(logF, us, np.repeat(t[:, None], 5, axis=1), rows)
    x = us * math.log(2.0)
    xm = x.mean(axis=1, keepdims=True)
    with np.errstate(all="ignore"):
        slope = ((x - xm) * (vals - vals.mean(axis=1, keepdims=True))).sum(axis=1) / ((x - xm) ** 2).sum(axis=1)
    return np.where(np.isfinite(slope), slope, 0.0)


def _chunks(n, size):
    return [np.arange(i, min(i + size, n)) for i in range(0, n, size)]


def maximize_batch(logF, batch, config=None, seeds=None, boundary_exponent=None, workers=None):
    """Maximize ``B`` objectives given by their logarithms.

    Parameters
    ----------
    logF : callable
        ``logF(z, rows)`` with ``z`` complex of shape ``(len(rows), P)``
        returns the log-objective of problem ``rows[i]`` at row ``i`` of
        ``z``.  ``-inf`` encodes a zero objective.
    batch : int
        Number of problems ``B``.
    seeds : array_like, optional
        Complex candidate points of shape ``(B, K)`` (warm starts).
    boundary_exponent : array_like, optional
        Per-problem outer exponent E (defaults to ``config.boundary_exponent``).

    Returns
    -------
    list of SupResult
    """
    config = config or SupSolverConfig()
    E = np.full(batch, float(config.boundary_exponent)) if boundary_exponent is None \
        else np.broadcast_to(np.asarray(boundary_exponent, dtype=float), (batch,)).copy()
    seeds = None if seeds is None else np.asarray(seeds, dtype=complex).reshape(batch, -1)
    theta = 2.0 * np.pi * np.arange(config.n_theta) / config.n_theta
    dtheta0 = 2.0 * np.pi / config.n_theta

    P = config.n_r * config.n_theta
    size = max(1, min(batch, 2_000_000 // P))
    jobs = _chunks(batch, size)

    def run(rows):
        Emax = float(E[rows].max())
        ug = _coarse_u_nodes(config.n_r, Emax)
        rg = _u_to_r(ug)
        zg = (rg[:, None] * np.exp(1j * theta)[None, :]).ravel()
        zz = np.broadcast_to(zg, (len(rows), P))
        with np.errstate(all="ignore"):
            vals = np.asarray(logF(zz, rows), dtype=float)
        vals = np.where(np.isnan(vals), -np.inf, vals)
        # rows whose own E is smaller than the chunk max ignore outer nodes
        mask = ug[None, :] > E[rows][:, None] + 1e-12
        vals = np.where(np.repeat(mask, config.n_theta, axis=1), -np.inf, vals)
        k = np.argmax(vals, axis=1)
        best = vals[np.arange(len(rows)), k]
        i, j = np.divmod(k, config.n_theta)
        st = _State(
            u=ug[i].copy(), t=theta[j].copy(), val=best.copy(),
            du=np.maximum(np.abs(ug[np.minimum(i + 1, len(ug) - 1)] - ug[np.maximum(i - 1, 0)]), 1e-3),
            dt=np.full(len(rows), dtheta0),
            umax=E[rows].copy(),
        )
        if seeds is not None:
            sz = seeds[rows]
            with np.errstate(all="ignore"):
                sr = np.minimum(np.abs(sz), _u_to_r(st.umax)[:, None])
                su = -np.log2(1.0 - sr)
                st_ = np.angle(sz) % (2.0 * np.pi)
            sv = _evaluate(logF, su, st_, rows)
            m = np.argmax(sv, axis=1)
            svb = sv[np.arange(len(rows)), m]
            use = svb > st.val
            st.u = np.where(use, su[np.arange(len(rows)), m], st.u)
            st.t = np.where(use, st_[np.arange(len(rows)), m], st.t)
            st.val = np.where(use, svb, st.val)
            st.du = np.where(use, 1.0, st.du)
        finite = np.isfinite(st.val)
        if np.any(finite):
            _refine(logF, st, rows, config)
        near = st.u >= st.umax - 1.0
        growth = np.zeros(len(rows))
        if np.any(near):
            growth[near] = _boundary_growth(logF, st.u[near], st.t[near], st.umax[near], rows[near])
        out = []
        for b in range(len(rows)):
            v = float(np.exp(st.val[b])) if np.isfinite(st.val[b]) else 0.0
            if v == 0.0:
                out.append(SupResult(0.0, 0j))
                continue
            r = float(_u_to_r(st.u[b]))
            t = float(st.t[b]) % (2.0 * math.pi)
            z = 0j if r == 0.0 else complex(r * math.cos(t), r * math.sin(t))
            out.append(SupResult(v, z, bool(near[b]), bool(near[b] and growth[b] > 0.1), float(growth[b])))
        return out

    nw = min(workers or worker_count(), len(jobs))
    if nw > 1:
        with ThreadPoolExecutor(nw) as ex:
            parts = list(ex.map(run, jobs))
    else:
        parts = [run(rows) for rows in jobs]
    return [res for part in parts for res in part]


def sup_over_disk(F, config=None, probes=None, log=False):
    """Supremum of a non-negative field over the open unit disk.

    Parameters
    ----------
    F : callable
        Vectorized ``F(z)``; with ``log=True`` it returns ``log F(z)``.
    probes : array_like, optional
        Extra points that seed the search; the result is never below
        ``max F(probes)``.
    """
    def logF(z, rows):
        if log:
            return F(z)
        with np.errstate(divide="ignore"):
            return np.log(np.asarray(F(z), dtype=float))

    seeds = None if probes is None else np.atleast_1d(np.asarray(probes, dtype=complex))[None, :]
    return maximize_batch(logF, 1, config, seeds=seeds)[0]


def sup_over_radius(f, config=None, log=False):
    """Supremum over ``r`` in ``[0, 1)`` of a radial profile ``f(r)``.

    One-dimensional counterpart of :func:`sup_over_disk` for integrands that
    depend on ``|z|`` only; the argmax is reported on the positive axis.
    """
    config = config or SupSolverConfig()

    def logF(z, rows):
        r = np.abs(z)
        if log:
            return f(r)
        with np.errstate(divide="ignore"):
            return np.log(np.asarray(f(r), dtype=float))

    radial = SupSolverConfig(
        n_r=max(config.n_r, 256), n_theta=16, iterations=config.iterations,
        tol=config.tol, boundary_exponent=config.boundary_exponent, rounds=2,
    )
    res = maximize_batch(logF, 1, radial)[0]
    return SupResult(res.value, complex(abs(res.argmax), 0.0), res.at_boundary, res.unbounded, res.growth)
