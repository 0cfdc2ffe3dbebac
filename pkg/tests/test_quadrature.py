"""Quadrature rules: exactness against closed-form monomial integrals."""
from math import factorial

import numpy as np
import pytest

from cellforce.quadrature import (
    gauss_legendre,
    gauss_on_interval,
    triangle_rule,
    triangle_tensor_rule,
)


def reference_triangle_integral(p, q):
    # exact integral of x^p y^q over the triangle (0,0), (1,0), (0,1)
    return factorial(p) * factorial(q) / factorial(p + q + 2)


@pytest.mark.parametrize("degree", [2, 5, 7])
def test_triangle_rule_exact_to_degree(degree):
    bary, w = triangle_rule(degree)
    assert abs(w.sum() - 1.0) < 1e-13
    x, y = bary[:, 1], bary[:, 2]
    for p in range(degree + 1):
        for q in range(degree + 1 - p):
            approx = 0.5 * np.sum(w * x**p * y**q)
            assert approx == pytest.approx(reference_triangle_integral(p, q), abs=1e-14)


def test_triangle_tensor_rule_matches_symmetric_rule():
    bary, w = triangle_tensor_rule(12)
    assert abs(w.sum() - 1.0) < 1e-12
    x, y = bary[:, 1], bary[:, 2]
    for p, q in [(0, 0), (3, 2), (5, 5), (7, 1)]:
        approx = 0.5 * np.sum(w * x**p * y**q)
        assert approx == pytest.approx(reference_triangle_integral(p, q), rel=1e-12)


def test_gauss_interval_polynomial_exactness():
    x, w = gauss_on_interval(-1.5, 2.5, 4)
    # degree 7 exact with 4 points
    for k in range(8):
        exact = (2.5 ** (k + 1) - (-1.5) ** (k + 1)) / (k + 1)
        assert np.sum(w * x**k) == pytest.approx(exact, rel=1e-13)


def test_gauss_legendre_rejects_bad_order():
    with pytest.raises(ValueError):
        gauss_legendre(0)
