import json
import math

import numpy as np
import pytest

from nucheck.analytic import KernelPower, Polynomial, certify_self_map, constant, identity, z
from nucheck.criteria import (
    CriterionSpec,
    c_phi,
    criterion_bloch_M,
    criterion_M1,
    criterion_S_sup,
    default_criterion_solver,
    inner_sup,
    inner_sups,
    m_alpha,
    n_alpha,
    nuclearity_criterion,
    p_alpha,
    t_g,
)
from nucheck.errors import ConstructionError
from nucheck.growth import DIVERGING, FINITE
from nucheck.oplab import operator_norm_lower
from nucheck.quad import dyadic_schedule
from nucheck.weights import standard_weight

S0, S1, S2, S3 = (standard_weight(a) for a in (0, 1, 2, 3))
ZERO_MAP = certify_self_map(constant(0))
HALF = certify_self_map(z / 2)
SQUARE = certify_self_map(z * z)
# 10^4 x 10^4 polar brute force of sup (1-|z|^2) / |1 - z/2|^3, frozen
ORACLE_INNER_HALF = 1.8778771474757439
SMALL = dict(schedule=dyadic_schedule(2, 8), n_per_panel=4, n_theta=16)


class TestSpec:
    def test_exponent_matches_kind(self):
        assert CriterionSpec("T", 1.5, nu=S1, mu=S1).exponent == pytest.approx(3.5)
        assert CriterionSpec("S", 1.5, nu=S1, mu=S1).exponent == pytest.approx(4.5)

    @pytest.mark.parametrize("kw", [
        dict(kind="X", alpha=1, nu=S1, mu=S1),
        dict(kind="T", alpha=-1, nu=S1, mu=S1),
        dict(kind="T", alpha=1, nu=S1),
        dict(kind="T", alpha=1, family="bloch", beta=1.0),
        dict(kind="T", alpha=1, family="other", nu=S1, mu=S1),
        dict(kind="T", alpha=1, nu=S1, mu=S1, numerator="g"),
    ])
    def test_rejects_inconsistent(self, kw):
        with pytest.raises(ConstructionError):
            CriterionSpec(**kw)


class TestBoundedness:
    def test_m1_identity(self):
        res = criterion_M1(z, identity, S1, S1)
        assert abs(res.value - 1) < 1e-6
        assert abs(res.argmax) < 1e-6

    def test_m1_square(self):
        res = criterion_M1(z, SQUARE, S1, S2)
        assert abs(res.value - 1) < 1e-6
        assert abs(res.argmax) < 1e-6

    def test_m1_constant_symbol(self):
        assert criterion_M1(constant(3), HALF, S1, S1).value == 0

    def test_s_sup_examples(self):
        assert criterion_S_sup(constant(1), identity, S1, S1).value == pytest.approx(1, abs=1e-9)
        assert criterion_S_sup(constant(0), identity, S1, S1).value == 0
        res = criterion_S_sup(constant(1), HALF, S1, S1)
        assert abs(res.value - 1) < 1e-6 and abs(res.argmax) < 1e-6

    def test_unbounded_flag(self):
        # g' = (1 - c z)^-2 with c near 1 outgrows the factor (1 - |z|^2)
        res = criterion_M1(KernelPower(1 - 1e-9, 2).antiderivative(), identity, S1, S1)
        assert res.unbounded and res.value > 1e3
        res = criterion_M1(KernelPower(1 - 1e-9, 1).antiderivative(), identity, S1, S1)
        assert not res.unbounded and res.value == pytest.approx(2, abs=1e-3)

    @pytest.mark.parametrize("g,phi,nu,mu", [
        (z, identity, S1, S1),
        (z, SQUARE, S1, S2),
        (Polynomial((0, 1, 0.5j)), HALF, S1, S1),
    ])
    def test_sandwich_with_witness_bound(self, g, phi, nu, mu):
        lower, _ = operator_norm_lower("T", g, phi, nu, mu)
        assert lower <= criterion_M1(g, phi, nu, mu).value * (1 + 1e-9)


class TestInnerSup:
    def test_origin(self):
        spec = CriterionSpec("T", 1, nu=S1, mu=S1)
        assert inner_sup(0, spec, z, identity).value == pytest.approx(1, abs=1e-12)

    def test_zero_map_ignores_zeta(self):
        spec = CriterionSpec("T", 2, nu=S1, mu=S1)
        a = inner_sup(0.5, spec, z, ZERO_MAP).value
        b = inner_sup(-0.9j, spec, z, ZERO_MAP).value
        assert a == pytest.approx(1, abs=1e-12) and b == pytest.approx(a, abs=1e-12)

    def test_frozen_oracle(self):
        spec = CriterionSpec("T", 1, nu=S0, mu=S0)
        res = inner_sup(0.5, spec, z, identity)
        assert abs(res.value - ORACLE_INNER_HALF) < 1e-9
        assert abs(res.argmax - (math.sqrt(7) - 2)) < 1e-5

    def test_batch_equals_single(self):
        spec = CriterionSpec("S", 1, nu=S1, mu=S1)
        g, phi = Polynomial((1, 0.3j)), certify_self_map(z / 3 + z * z / 2)
        zs = np.array([0, 0.4, -0.7j, 0.9 * np.exp(1j)])
        batch = inner_sups(zs, spec, g, phi)
        for zeta, r in zip(zs, batch):
            assert r.value == pytest.approx(inner_sup(zeta, spec, g, phi).value, rel=1e-10)


class TestNuclearity:
    def test_constant_symbol_is_zero(self):
        rep = m_alpha(constant(2), HALF, S1, S1, 2, **SMALL)
        assert rep.kind == FINITE and rep.value == 0 and all(v == 0 for v in rep.values)

    def test_factorized_case(self):
        rep = m_alpha(z, ZERO_MAP, S1, S1, 2)
        assert rep.kind == FINITE
        assert abs(rep.value - 0.5) < 1e-4
        for rho, v in zip(rep.radii, rep.values):
            b = 1 - rho * rho
            assert abs(v - (1 - b * b) / 2) < 1e-4

    def test_divergent_case(self):
        rep = m_alpha(z, ZERO_MAP, S3, S1, 1)
        assert rep.kind == DIVERGING
        assert rep.rate == pytest.approx(1.0, abs=0.05)
        assert rep.pair_valid is False

    @pytest.mark.parametrize("runner", [
        lambda g: m_alpha(g, HALF, S1, S1, 2, **SMALL),
        lambda g: n_alpha(g, HALF, S1, S1, 2, **SMALL),
        lambda g: p_alpha(g, HALF, 2, 1.0, 1.0, **SMALL),
    ])
    def test_homogeneity(self, runner):
        g = Polynomial((0.2, 1, -0.4j))
        a = runner(g).values
        b = runner(-2.5j * g).values
        for x, y in zip(a, b):
            assert y == pytest.approx(2.5 * x, rel=1e-12)

    def test_monotone_truncation(self):
        phi = certify_self_map(Polynomial((0.1, 0.4, 0.2j)))
        for rep in (m_alpha(z + z * z, phi, S1, S1, 2, **SMALL),
                    n_alpha(z + 1, phi, S1, S2, 3, **SMALL)):
            assert all(b >= a for a, b in zip(rep.values, rep.values[1:]))

    def test_t_g_matches_closed_form_node_for_node(self):
        g = Polynomial((0, 1, 0.3))
        rep = t_g(g, S1, S1, 2, **SMALL)
        assert rep.name == "t_g"
        zeta = rep.node_zeta
        w = np.linspace(0, 1, 2001)[:-1]
        # spot-check the inner sups directly against the corollary form
        for k in (0, len(zeta) // 2, len(zeta) - 1):
            c = zeta[k]
            zz = w[:, None] * np.exp(1j * np.linspace(0, 2 * np.pi, 721))[None, :]
            F = (1 - np.abs(zz) ** 2) ** 2 * np.abs(1 + 0.6 * zz) / np.abs(1 - np.conj(c) * zz) ** 4
            assert rep.node_inner[k] >= F.max() * (1 - 1e-12)
            assert rep.node_inner[k] <= F.max() * (1 + 1e-3)
        same = m_alpha(g, identity, S1, S1, 2, **SMALL)
        assert np.array_equal(rep.node_inner, same.node_inner)

    def test_composition_specialization(self):
        a = c_phi(HALF, S1, S1, 2, **SMALL)
        b = m_alpha(z, HALF, S1, S1, 2, **SMALL)
        assert a.values == b.values and a.name == "c_phi"

    def test_report_serializes(self):
        d = m_alpha(z, HALF, S1, S1, 2, **SMALL).to_dict()
        assert d["verdict"] in (FINITE, DIVERGING, "Inconclusive")
        assert len(d["values"]) == 7
        json.dumps(d)

    def test_default_solver(self):
        cfg = default_criterion_solver()
        assert cfg.n_r == 64 and cfg.n_theta == 128


class TestBlochM:
    def test_zero_symbol(self):
        printed, derived = criterion_bloch_M(constant(0), HALF, **SMALL)
        assert printed.value == 0 and derived.value == 0

    def test_zero_map_printed(self):
        printed, _ = criterion_bloch_M(z, ZERO_MAP, **SMALL)
        assert printed.kind == FINITE and printed.value == 0

    def test_half_map_self_convergent(self):
        coarse = criterion_bloch_M(z, HALF, n_per_panel=4, n_theta=16)
        fine = criterion_bloch_M(z, HALF, n_per_panel=8, n_theta=32)
        for a, b in zip(coarse, fine):
            assert a.kind == FINITE and b.kind == FINITE
            assert abs(a.value - b.value) <= 1e-3 * b.value
        printed, derived = fine
        assert printed.name == "bloch_m_printed" and derived.name == "bloch_m_derived"
        assert abs(printed.value - derived.value) > 0.1
