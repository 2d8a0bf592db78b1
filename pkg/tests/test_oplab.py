import json
import math

import numpy as np
import pytest

from nucheck.analytic import KernelPower, Polynomial, certify_self_map, constant, identity, monomial, z
from nucheck.criteria import m_alpha, n_alpha
from nucheck.errors import (
    PreconditionError,
    RefusalError,
    UndefinedRatioError,
    UnsupportedRepresentationError,
)
from nucheck.oplab import (
    NuclearDecomposition,
    _unimodular_max,
    absolutely_summing_probe,
    apply_S,
    apply_T,
    compactness_probe,
    decomposition_error,
    image_derivative,
    nuclear_decomposition,
    operator_norm_lower,
    source_norm,
    target_norm,
    truncation_matrix,
)
from nucheck.quad import SupSolverConfig, dyadic_schedule
from nucheck.weights import standard_weight

S1, S2 = standard_weight(1), standard_weight(2)
HALF = certify_self_map(z / 2)
SQUARE = certify_self_map(z * z)
ZERO_MAP = certify_self_map(constant(0))
RNG = np.random.default_rng(7)
POINTS = 0.95 * np.sqrt(RNG.random(100)) * np.exp(2j * np.pi * RNG.random(100))
SMALL = dict(schedule=dyadic_schedule(2, 10), n_per_panel=4, n_theta=16)


def rand_poly(deg, scale=1.0):
    return Polynomial(tuple(scale * (RNG.normal(size=deg + 1) + 1j * RNG.normal(size=deg + 1))))


class TestApply:
    def test_T_examples(self):
        assert apply_T(z, HALF, constant(1)) == z
        assert apply_T(z, identity, z) == Polynomial((0, 0, 0.5))
        assert apply_T(z, SQUARE, z) == Polynomial((0, 0, 0, 1 / 3))

    def test_S_examples(self):
        assert apply_S(constant(1), identity, z * z) == Polynomial((0, 0, 1))
        assert np.all(apply_S(z, HALF, constant(4))(POINTS) == 0)
        assert apply_S(z, HALF, z) == Polynomial((0, 0, 0.5))

    @pytest.mark.parametrize("apply", [apply_T, apply_S])
    def test_linearity(self, apply):
        g, phi = rand_poly(3), certify_self_map(rand_poly(3, 0.1))
        f1, f2 = rand_poly(4), rand_poly(5)
        a, b = 2 - 1j, 0.5j
        lhs = apply(g, phi, a * f1 + b * f2)
        rhs = a * apply(g, phi, f1) + b * apply(g, phi, f2)
        assert np.allclose(lhs.array, rhs.array, rtol=0, atol=1e-12)

    def test_derivative_identities(self):
        g, phi, f = rand_poly(3), certify_self_map(rand_poly(2, 0.15)), rand_poly(4)
        dT = apply_T(g, phi, f).derivative()(POINTS)
        assert np.max(np.abs(dT - f(phi(POINTS)) * g.derivative()(POINTS))) < 1e-10
        dS = apply_S(g, phi, f).derivative()(POINTS)
        assert np.max(np.abs(dS - f.derivative()(phi(POINTS)) * g(POINTS))) < 1e-10

    def test_non_polynomial_path(self):
        g, f = KernelPower(0.5, 1), KernelPower(-0.3j, 2)
        img = apply_T(g, HALF, f)
        d = img.derivative()(POINTS)
        assert np.max(np.abs(d - f(POINTS / 2) * g.derivative()(POINTS))) < 1e-10

    @pytest.mark.parametrize("f", [z, constant(1), KernelPower(0.4, 2), z * z + 3])
    def test_vanishing_at_zero(self, f):
        for kind_apply in (apply_T, apply_S):
            assert kind_apply(Polynomial((1, 2, 3)), HALF, f)(np.complex128(0)) == 0

    def test_kind_checked(self):
        with pytest.raises(PreconditionError):
            image_derivative("X", z, identity, z)


class TestTruncationMatrix:
    def test_identity_symbol(self):
        M = truncation_matrix("T", z, identity, N=32).matrix
        for n in range(33):
            col = np.zeros(M.shape[0], complex)
            col[n + 1] = 1 / (n + 1)
            assert np.max(np.abs(M[:, n] - col)) <= 1e-12

    def test_square_map(self):
        M = truncation_matrix("T", z, SQUARE, N=32).matrix
        for n in range(33):
            col = np.zeros(M.shape[0], complex)
            col[2 * n + 1] = 1 / (2 * n + 1)
            assert np.max(np.abs(M[:, n] - col)) <= 1e-12

    def test_constant_symbol_zero(self):
        assert not np.any(truncation_matrix("T", constant(3), HALF, N=8).matrix)

    @pytest.mark.parametrize("kind", ["T", "S"])
    def test_columns_match_apply(self, kind):
        g, phi = rand_poly(3), certify_self_map(rand_poly(2, 0.15))
        tr = truncation_matrix(kind, g, phi, N=12)
        apply = apply_T if kind == "T" else apply_S
        for n in range(13):
            c = apply(g, phi, monomial(n)).array
            col = tr.column(n)
            k = max(len(c), len(col))
            assert np.max(np.abs(np.pad(c, (0, k - len(c))) - np.pad(col, (0, k - len(col))))) <= 1e-12

    def test_normalized(self):
        tr = truncation_matrix("T", z, identity, N=4, normalized=True, nu=S1)
        assert tr.scales[0] == pytest.approx(1.0)
        assert tr.matrix[2, 1] == pytest.approx(0.5 / (2 / (3 * math.sqrt(3))), rel=1e-10)

    def test_rejections(self):
        with pytest.raises(UnsupportedRepresentationError):
            truncation_matrix("T", KernelPower(0.5, 1), identity)
        with pytest.raises(PreconditionError):
            truncation_matrix("T", z, identity, N=300)
        with pytest.raises(PreconditionError):
            truncation_matrix("T", z, identity, normalized=True)


class TestNormLower:
    def test_zero_operator(self):
        assert operator_norm_lower("T", constant(2), HALF, S1, S1, probes=[z, z * z])[0] == 0

    def test_sup_norm_example(self):
        bound, _ = operator_norm_lower("T", z, identity, S1, S1, probes=[constant(1)], norm="sup")
        assert bound == pytest.approx(2 / (3 * math.sqrt(3)), rel=1e-9)

    def test_bloch_norm_dominates_example(self):
        bound, wid = operator_norm_lower("T", z, identity, S1, S1, probes=[constant(1)])
        assert bound >= 2 / (3 * math.sqrt(3)) and wid == "probe0"

    def test_S_reproduces(self):
        bound, _ = operator_norm_lower("S", constant(1), identity, S1, S1, probes=[z], norm="sup")
        assert bound == pytest.approx(1.0, rel=1e-9)

    def test_norms(self):
        assert source_norm(z, S1) == pytest.approx(2 / (3 * math.sqrt(3)), rel=1e-12)
        assert target_norm("T", z, identity, constant(1), S1) == pytest.approx(1.0, abs=1e-12)
        with pytest.raises(PreconditionError):
            target_norm("T", z, identity, z, S1, norm="l2")


class TestNuclearDecomposition:
    def test_constant_symbol_empty(self):
        dec = nuclear_decomposition(constant(1), HALF, S1, S1, 2, **SMALL)
        assert len(dec) == 0 and dec.total == 0

    def test_zero_map(self):
        dec = nuclear_decomposition(z, ZERO_MAP, S1, S1, 2)
        assert abs(dec.total - 1.5) < 1e-3
        # every y_k is z
        f = rand_poly(3)
        img = dec.apply(f)
        assert abs(img(np.complex128(0.3)) - f(0) * 0.3) < 1e-3 * (1 + abs(f(0)))

    def test_total_matches_criterion(self):
        rep = m_alpha(z, HALF, S1, S1, 2, **SMALL)
        dec = nuclear_decomposition(z, HALF, S1, S1, 2, criterion=rep)
        crit = math.fsum((rep.node_weight * rep.node_inner * np.exp(rep.node_log_source)).tolist())
        assert dec.total == pytest.approx(3 * crit, rel=1e-12)

    def test_refinement_stable(self):
        a = nuclear_decomposition(z, HALF, S1, S1, 2, schedule=dyadic_schedule(2, 10),
                                  n_per_panel=4, n_theta=16).total
        b = nuclear_decomposition(z, HALF, S1, S1, 2, schedule=dyadic_schedule(2, 12),
                                  n_per_panel=8, n_theta=32).total
        assert abs(a - b) <= 0.05 * b

    def test_refused_when_not_finite(self):
        with pytest.raises(RefusalError):
            nuclear_decomposition(z, ZERO_MAP, S1, standard_weight(3), 1, **SMALL)

    def test_S_kind_bounded_by_criterion(self):
        rep = n_alpha(z, HALF, S1, S1, 2, **SMALL)
        dec = nuclear_decomposition(z, HALF, S1, S1, 2, kind="S", criterion=rep)
        assert dec.total <= 3 * 4 * rep.values[-1] * (1 + 1e-12)
        f = rand_poly(4)
        err = decomposition_error(dec, f, S1, kind="S")
        assert err <= 1e-2 * target_norm("S", z, HALF, f, S1)

    def test_fidelity_decreases(self):
        f = rand_poly(6)
        errs = []
        for lo, hi, npp, nt in ((2, 10, 4, 16), (4, 12, 8, 32)):
            dec = nuclear_decomposition(z, HALF, S1, S1, 2, schedule=dyadic_schedule(lo, hi),
                                        n_per_panel=npp, n_theta=nt)
            errs.append(decomposition_error(dec, f, S1, solver=SupSolverConfig(n_r=32, n_theta=64)))
        assert errs[1] < errs[0]

    def test_json_round_trip(self):
        dec = nuclear_decomposition(z, HALF, S1, S1, 2, **SMALL)
        back = NuclearDecomposition.from_dict(json.loads(dec.to_json()))
        assert back.total == dec.total
        assert np.array_equal(back.nodes, dec.nodes)
        assert back.to_json() == dec.to_json()
        assert dec.slack is False

    def test_slack_flag_for_general_weights(self):
        from nucheck.weights import tabulated_weight

        r = 1 - 2.0 ** -np.linspace(0, 40, 400)
        nu = tabulated_weight(r, (1 - r) * (1 + r))
        rep = m_alpha(z, HALF, nu, nu, 2, **SMALL)
        dec = nuclear_decomposition(z, HALF, nu, nu, 2, criterion=rep)
        assert dec.slack is True


class TestAbsolutelySumming:
    def test_zero_family(self):
        with pytest.raises(UndefinedRatioError):
            absolutely_summing_probe("T", z, identity, S1, S1, [constant(0)])

    def test_zero_operator(self):
        assert absolutely_summing_probe("T", constant(1), HALF, S1, S1, [z, 1 + z]) == 0

    def test_identity_example(self):
        r = absolutely_summing_probe("T", z, identity, S1, S1, [constant(1), z])
        assert math.isfinite(r) and r > 0
        # the matching decomposition does not exist: M_alpha is not Finite here
        with pytest.raises(RefusalError):
            nuclear_decomposition(z, identity, S1, S1, 1, **SMALL)

    def test_family_size(self):
        with pytest.raises(PreconditionError):
            absolutely_summing_probe("T", z, identity, S1, S1, [z] * 9)

    def test_unimodular_max_brute_force(self):
        import itertools

        a = RNG.normal(size=(4, 5)) + 1j * RNG.normal(size=(4, 5))
        best = np.zeros(5)
        for eta in itertools.product((1, 1j, -1, -1j), repeat=4):
            best = np.maximum(best, np.abs(np.array(eta) @ a))
        assert np.allclose(_unimodular_max(a), best, rtol=1e-14, atol=0)


class TestCompactness:
    def test_examples(self):
        assert compactness_probe("T", constant(1), HALF, S1, S1) == "CompactLikely"
        assert compactness_probe("T", z, HALF, S1, S1) == "CompactLikely"
        assert compactness_probe("S", constant(1), identity, S1, S1) == "NonCompactLikely"

    def test_needs_polynomials(self):
        with pytest.raises(UnsupportedRepresentationError):
            compactness_probe("T", KernelPower(0.3, 1), HALF, S1, S1)
