import math

import numpy as np
import pytest

from nucheck.errors import InsufficientDataError
from nucheck.growth import DIVERGING, FINITE, INCONCLUSIVE, aitken_tail, classify_finiteness
from nucheck.quad import dyadic_schedule


def test_constant_is_finite():
    v = classify_finiteness([1.0] * 11, dyadic_schedule())
    assert v.kind == FINITE and v.value == 1.0


def test_power_of_two_diverges_with_exponent_one():
    k = np.arange(2, 13)
    v = classify_finiteness(2.0 ** k, dyadic_schedule())
    assert v.kind == DIVERGING
    assert v.rate == pytest.approx(1.0, abs=1e-12)


def test_linear_in_k_is_slow():
    k = np.arange(2, 13, dtype=float)
    v = classify_finiteness(k, dyadic_schedule())
    assert v.kind == INCONCLUSIVE or (v.kind == DIVERGING and v.sublinear)


def test_too_few_values():
    with pytest.raises(InsufficientDataError):
        classify_finiteness([1.0, 2.0, 3.0])


def test_zero_sequence_is_finite_zero():
    v = classify_finiteness([0.0] * 6)
    assert v.kind == FINITE and v.value == 0.0


def test_geometric_tail_extrapolates_exactly():
    k = np.arange(2, 13)
    v = classify_finiteness(0.5 - 2.0 ** (-2 * k), dyadic_schedule())
    assert v.kind == FINITE
    assert v.value == pytest.approx(0.5, abs=1e-15)


def test_cauchy_gate():
    # flat log-slope but relative steps of 1e-2 stay Inconclusive
    v = classify_finiteness([1.0, 1.01, 1.02, 1.03, 1.04])
    assert v.kind == INCONCLUSIVE


def test_aitken_falls_back_without_geometric_decay():
    assert aitken_tail([1.0, 2.0, 3.0]) == 3.0
