"""Numerical integration rules used by the assembly and post-processing code.

Triangle rules are given in barycentric coordinates with weights that sum to
one; multiply by the physical triangle area to integrate.  For P1 elements the
barycentric coordinates double as the basis function values at the quadrature
points, which the load-vector builders exploit.
"""
from __future__ import annotations

import numpy as np

__all__ = [
    "gauss_legendre",
    "gauss_on_interval",
    "triangle_rule",
    "triangle_tensor_rule",
]


def gauss_legendre(order: int):
    """Nodes and weights of the ``order``-point Gauss-Legendre rule on [-1, 1]."""
    if order < 1:
        raise ValueError("Gauss-Legendre order must be >= 1")
    return np.polynomial.legendre.leggauss(order)


def gauss_on_interval(a: float, b: float, order: int):
    """Gauss-Legendre nodes/weights mapped to the interval [a, b]."""
    x, w = gauss_legendre(order)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


# Symmetric triangle rules (Dunavant).  Columns: barycentric triple + weight.
_TRI_RULES = {
    1: np.array([[1 / 3, 1 / 3, 1 / 3, 1.0]]),
    2: np.array(
        [
            [2 / 3, 1 / 6, 1 / 6, 1 / 3],
            [1 / 6, 2 / 3, 1 / 6, 1 / 3],
            [1 / 6, 1 / 6, 2 / 3, 1 / 3],
        ]
    ),
}


def _orbit(a: float, b: float, c: float, w: float):
    """All distinct permutations of a barycentric triple with a common weight."""
    seen = []
    for perm in {(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)}:
        seen.append((*perm, w))
    return sorted(seen)


def _build_rule(orbits):
    rows = []
    for orbit in orbits:
        rows.extend(_orbit(*orbit))
    return np.array(rows)


# Degree 5, 7 points.
_TRI_RULES[5] = _build_rule(
    [
        (1 / 3, 1 / 3, 1 / 3, 0.225),
        (0.059715871789770, 0.470142064105115, 0.470142064105115, 0.132394152788506),
        (0.797426985353087, 0.101286507323456, 0.101286507323456, 0.125939180544827),
    ]
)

# Degree 7, 13 points (one negative weight).
_TRI_RULES[7] = _build_rule(
    [
        (1 / 3, 1 / 3, 1 / 3, -0.149570044467670),
        (0.479308067841923, 0.260345966079038, 0.260345966079038, 0.175615257433204),
        (0.869739794195568, 0.065130102902216, 0.065130102902216, 0.053347235608839),
        (0.638444188569809, 0.312865496004875, 0.048690315425316, 0.077113760890257),
    ]
)


def triangle_rule(degree: int):
    """Barycentric points ``(Q, 3)`` and weights ``(Q,)`` exact to ``degree``.

    Weights sum to one; scale by the triangle area.
    """
    for available in sorted(_TRI_RULES):
        if available >= degree:
            rule = _TRI_RULES[available]
            return rule[:, :3].copy(), rule[:, 3].copy()
    raise ValueError(f"no triangle rule of degree >= {degree}")


def triangle_tensor_rule(n: int):
    """Duffy-collapsed tensor Gauss rule on the reference triangle.

    ``n * n`` points; accurate for smooth integrands far beyond the symmetric
    rules, which makes it a useful independent reference.  Returned in
    barycentric coordinates with weights summing to one.
    """
    x, w = gauss_legendre(n)
    u = 0.5 * (x + 1.0)
    wu = 0.5 * w
    U, V = np.meshgrid(u, u, indexing="ij")
    WU, WV = np.meshgrid(wu, wu, indexing="ij")
    # Duffy map: (u, v) -> (u, v (1 - u)), Jacobian (1 - u); reference area 1/2.
    xi = U.ravel()
    eta = (V * (1.0 - U)).ravel()
    wq = (WU * WV * (1.0 - U)).ravel()
    bary = np.column_stack([1.0 - xi - eta, xi, eta])
    return bary, wq * 2.0
