"""Self-contained 1D check: P1 elements versus a closed-form point-force solution.

Solves ``-u'' = delta(x - (c - h/2)) - delta(x - (c + h/2))`` on ``(0, L)``
with homogeneous Dirichlet ends and unit stiffness.  The exact solution

    ``u(x) = h x / L + (x - (c + h/2))_+ - (x - (c - h/2))_+``

is piecewise linear, so the finite-element solution on any mesh whose nodes
include the two force points reproduces it exactly at the nodes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConfigurationError, GeometryError

__all__ = ["Cell1D", "exact_1d", "solve_1d", "max_nodal_error"]


@dataclass(frozen=True)
class Cell1D:
    """1D cell of size ``h`` centred at ``c`` inside ``(0, L)``."""

    L: float
    c: float
    h: float

    def __post_init__(self):
        if not 0.0 < self.c - 0.5 * self.h < self.c + 0.5 * self.h < self.L:
            raise GeometryError(
                f"cell [{self.c - 0.5 * self.h}, {self.c + 0.5 * self.h}] "
                f"must lie strictly inside (0, {self.L})"
            )

    @property
    def left(self) -> float:
        return self.c - 0.5 * self.h

    @property
    def right(self) -> float:
        return self.c + 0.5 * self.h


def exact_1d(cell: Cell1D, x):
    """Closed-form displacement; accepts scalars or arrays within [0, L]."""
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0.0) or np.any(x_arr > cell.L):
        raise GeometryError(f"evaluation points must lie in [0, {cell.L}]")
    u = (
        cell.h * x_arr / cell.L
        + np.maximum(x_arr - cell.right, 0.0)
        - np.maximum(x_arr - cell.left, 0.0)
    )
    return float(u) if np.isscalar(x) else u


def _hat_load(x_nodes: np.ndarray, point: float, sign: float, rhs: np.ndarray) -> None:
    k = int(np.searchsorted(x_nodes, point, side="right") - 1)
    k = min(max(k, 0), len(x_nodes) - 2)
    width = x_nodes[k + 1] - x_nodes[k]
    theta = (point - x_nodes[k]) / width
    rhs[k] += sign * (1.0 - theta)
    rhs[k + 1] += sign * theta


def solve_1d(cell: Cell1D, nodes: int, align: bool = True):
    """P1 solve on a uniform mesh of ``nodes`` points; returns ``(x, u_h)``.

    With ``align`` the two force points are required to coincide with mesh
    nodes (the setting in which the discrete solution is nodally exact).
    """
    if nodes < 3:
        raise ConfigurationError(f"need at least 3 nodes, got {nodes}")
    x = np.linspace(0.0, cell.L, nodes)
    dx = x[1] - x[0]
    if align:
        for point in (cell.left, cell.right):
            if abs(point / dx - round(point / dx)) > 1e-9:
                raise ConfigurationError(
                    f"force point {point} is not a node of the {nodes}-node mesh"
                )

    rhs = np.zeros(nodes)
    _hat_load(x, cell.left, +1.0, rhs)
    _hat_load(x, cell.right, -1.0, rhs)

    n_int = nodes - 2
    # Tridiagonal stiffness of -u'' with unit stiffness on interior nodes.
    bands = np.zeros((2, n_int))
    bands[0, 1:] = -1.0 / dx
    bands[1, :] = 2.0 / dx
    u_int = scipy.linalg.solveh_banded(bands, rhs[1:-1])
    u = np.zeros(nodes)
    u[1:-1] = u_int
    return x, u


def max_nodal_error(cell: Cell1D, nodes: int, align: bool = True) -> float:
    """Max absolute nodal error of the P1 solution against the closed form."""
    x, u = solve_1d(cell, nodes, align=align)
    return float(np.max(np.abs(u - exact_1d(cell, x))))
