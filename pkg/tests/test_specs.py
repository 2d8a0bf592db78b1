import numpy as np
import pytest

from nucheck.analytic import KernelPower, Polynomial, z
from nucheck.errors import ParseError
from nucheck.specs import format_function, parse_function

PTS = np.array([0, 0.3, -0.5j, 0.7 * np.exp(1j)])


class TestParse:
    def test_identity(self):
        assert np.allclose(parse_function("z")(PTS), PTS)

    def test_polynomial(self):
        f = parse_function("poly:[0,0;1,0;0,2]")
        assert isinstance(f, Polynomial)
        assert np.allclose(f(PTS), PTS + 2j * PTS ** 2)

    def test_kernel(self):
        f = parse_function("kernel:0.5,0,2")
        assert np.allclose(f(PTS), (1 - 0.5 * PTS) ** -2.0)

    def test_compound(self):
        f = parse_function("(+ (o (d kernel:0.5,0,2) (scale 0.5,0 z)) (* z z))")
        want = KernelPower(0.5, 2).derivative()(PTS / 2) + PTS ** 2
        assert np.allclose(f(PTS), want)

    def test_antiderivative(self):
        f = parse_function("(int poly:[1,0])")
        assert np.allclose(f(PTS), PTS)

    @pytest.mark.parametrize("text", [
        "", "w", "poly:[]", "poly:[1]", "poly:[a,b]", "kernel:1,0,2", "kernel:0.1,0",
        "(+ z", "(foo z)", "(d z z)", "z z", "(scale 1 z)",
    ])
    def test_rejects(self, text):
        with pytest.raises(ParseError):
            parse_function(text)


class TestRoundTrip:
    @pytest.mark.parametrize("text", [
        "z",
        "poly:[0,0;1,0]",
        "kernel:0.25,-0.5,2.5",
        "(+ z kernel:0.1,0.2,1)",
        "(o kernel:0.5,0,2 poly:[0,0;0.5,0])",
        "(int (* z kernel:0.3,0,3))",
    ])
    def test_spec_parse_spec(self, text):
        f = parse_function(text)
        s = format_function(f)
        g = parse_function(s)
        assert format_function(g) == s
        assert np.allclose(f(PTS), g(PTS), rtol=1e-14, atol=0)

    def test_values_survive_exactly(self):
        p = Polynomial((0.1, 1 / 3, -2.0e-17j))
        assert parse_function(format_function(p)) == p
        assert format_function(z * z) == format_function(parse_function(format_function(z * z)))
