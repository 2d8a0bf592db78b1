import numpy as np
import pytest

from nucheck.errors import DomainError, InvalidWeightError, ParseError, PreconditionError, ResolutionError
from nucheck.weights import (
    check_normality,
    constant_weight,
    eval_weight,
    exponential_weight,
    load_table,
    make_normal_pair,
    parse_weight,
    standard_weight,
    tabulated_weight,
)

GRID = np.linspace(0.0, 1.0, 10_000, endpoint=False)


class TestEvalWeight:
    def test_standard_values(self):
        assert eval_weight(standard_weight(1), 0.0) == 1.0
        assert eval_weight(standard_weight(1), 0.5) == pytest.approx(0.75, rel=1e-15)
        assert eval_weight(standard_weight(2), 0.5) == pytest.approx(0.5625, rel=1e-15)

    @pytest.mark.parametrize("r", [-0.1, 1.0, 1.5])
    def test_domain(self, r):
        with pytest.raises(DomainError):
            eval_weight(standard_weight(1), r)

    @pytest.mark.parametrize("w", [standard_weight(0.5), standard_weight(3), exponential_weight(1),
                                   constant_weight()])
    def test_positive_and_non_increasing(self, w):
        v = w(GRID)
        assert np.all(v > 0) or w.kind == "exp"  # exp underflows to 0 only in linear space
        assert np.all(np.diff(v) <= 1e-12)

    def test_log_space_survives_underflow(self):
        w = exponential_weight(1)
        assert np.isfinite(w.log(1 - 2.0 ** -40))
        assert w.log(1 - 2.0 ** -40) == pytest.approx(-(2.0 ** 40))


class TestNormality:
    @pytest.mark.parametrize("a0", [0.5, 1, 2, 3])
    def test_standard_weights_are_normal(self, a0):
        rep = check_normality(standard_weight(a0), n_max=20)
        assert rep.verdict == "Normal"
        assert rep.conditionI_ratios[-1] == pytest.approx(2.0 ** -a0, abs=1e-4)
        assert rep.beta_estimate <= rep.gamma_estimate + 1e-6
        assert rep.beta_estimate == pytest.approx(a0, abs=1e-4)

    def test_first_ratio_seven_twelfths(self):
        rep = check_normality(standard_weight(1), n_max=20)
        assert abs(rep.conditionI_ratios[0] - 7.0 / 12.0) <= 1e-12
        assert rep.conditionI_inf == pytest.approx(0.5, abs=1e-4)

    def test_closed_form_ratios(self):
        rep = check_normality(standard_weight(1), n_max=20)
        for n, ratio in enumerate(rep.conditionI_ratios, 1):
            exact = 0.5 * (2 - 2.0 ** (-n - 1)) / (2 - 2.0 ** (-n))
            assert ratio == pytest.approx(exact, rel=1e-12)

    def test_exponential_fails_I(self):
        rep = check_normality(exponential_weight(1))
        assert rep.verdict == "FailsI"
        assert rep.conditionI_ratios[2] == pytest.approx(np.exp(-8.0), rel=1e-12)

    def test_constant_fails_II(self):
        rep = check_normality(constant_weight())
        assert rep.verdict == "FailsII"
        assert all(r == 1.0 for r in rep.conditionI_ratios)
        assert rep.conditionII_k is None

    def test_bad_parameters(self):
        with pytest.raises(PreconditionError):
            check_normality(standard_weight(1), n_max=2)

    def test_table_beyond_range(self):
        r = np.linspace(0, 0.99, 50)
        w = tabulated_weight(r, 1 - r * r)
        with pytest.raises(ResolutionError):
            check_normality(w, n_max=20)


class TestNormalPair:
    def test_product_identity(self):
        nu = standard_weight(1)
        pair = make_normal_pair(nu, 2)
        r = np.linspace(0, 0.999, 1000)
        prod = pair.nu(r) * pair.omega(r)
        assert np.allclose(prod, (1 - r * r) ** 2, rtol=1e-12, atol=0)

    def test_singular_companion(self):
        pair = make_normal_pair(standard_weight(1), 0.5)
        assert pair.omega(np.float64(0.5)) == pytest.approx(0.75 ** -0.5, rel=1e-14)

    def test_alpha_too_small(self):
        with pytest.raises(PreconditionError):
            make_normal_pair(standard_weight(1), -0.5)

    def test_non_normal(self):
        with pytest.raises(InvalidWeightError):
            make_normal_pair(exponential_weight(1), 2)


class TestParsing:
    @pytest.mark.parametrize("text,kind", [("standard:1", "standard"), ("exp:2", "exp"), ("const", "const")])
    def test_kinds(self, text, kind):
        assert parse_weight(text).kind == kind

    @pytest.mark.parametrize("text", ["standard:-1", "standard:x", "gauss:1", "exp:0", "table:"])
    def test_rejects(self, text):
        with pytest.raises(ParseError):
            parse_weight(text)

    def test_round_trip(self):
        for text in ("standard:1", "standard:0.5", "exp:2", "const"):
            assert parse_weight(parse_weight(text).spec()).spec() == parse_weight(text).spec()

    def test_table(self, tmp_path):
        r = np.linspace(0, 0.999, 200)
        p = tmp_path / "w.txt"
        np.savetxt(p, np.column_stack([r, (1 - r * r) ** 2]))
        w = parse_weight(f"table:{p}")
        assert w(np.float64(0.5)) == pytest.approx(0.5625, rel=1e-5)
        rep = check_normality(w, n_max=8)
        assert not rep.certified

    def test_missing_table(self):
        with pytest.raises(ParseError):
            load_table("/nonexistent/table.txt")

    def test_table_must_be_monotone(self):
        with pytest.raises(InvalidWeightError):
            tabulated_weight([0, 0.5], [1.0, 2.0])
