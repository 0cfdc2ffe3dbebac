"""Sparse SPD solves: Jacobi-preconditioned CG with a dense Cholesky cross-check.

The CG iteration is deterministic (fixed order, no reduction races), so runs
are reproducible bit-for-bit on the same platform.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .elasticity import StiffnessSystem
from .errors import ConfigurationError, SolverError, SPDViolationError
from .mesh import Mesh

__all__ = ["Solution", "SolveReport", "solve"]

_DENSE_LIMIT = 5000


@dataclass(eq=False)
class Solution:
    """Nodal displacement field attached to its mesh."""

    mesh: Mesh
    u: np.ndarray  # (N, 2)
    bc: str

    @property
    def dof_vector(self) -> np.ndarray:
        return self.u.reshape(-1)


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    relative_residual: float
    method: str
    wall_time: float


def _pcg(A, b, tol, max_iter, x0=None):
    """Jacobi-preconditioned conjugate gradients; returns (x, iterations, history)."""
    diag = A.diagonal()
    if np.any(diag <= 0):
        raise SPDViolationError("system diagonal has non-positive entries")
    inv_diag = 1.0 / diag
    b_norm = np.linalg.norm(b)
    x = np.zeros_like(b) if x0 is None else x0.astype(float).copy()
    r = b - A @ x if x0 is not None else b.copy()
    history = [np.linalg.norm(r) / b_norm]
    if history[-1] <= tol:
        return x, 0, history
    z = inv_diag * r
    p = z.copy()
    rz = float(r @ z)
    for k in range(1, max_iter + 1):
        Ap = A @ p
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            raise SPDViolationError(
                f"negative curvature at iteration {k} (p^T A p = {pAp}); "
                "the reduced system is not positive definite"
            )
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        history.append(np.linalg.norm(r) / b_norm)
        if history[-1] <= tol:
            return x, k, history
        z = inv_diag * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(
        f"CG did not reach tolerance {tol} in {max_iter} iterations "
        f"(last relative residual {history[-1]:.3e})",
        residual_history=history,
    )


def solve(
    system: StiffnessSystem,
    rhs: np.ndarray,
    tol: float = 1e-10,
    max_iter: int | None = None,
    method: str = "cg",
    x0: np.ndarray | None = None,
) -> tuple[Solution, SolveReport]:
    """Solve the reduced SPD system to a relative residual of ``tol``.

    Constrained (Dirichlet) dofs are exactly zero in the returned solution.
    ``method='cholesky'`` runs a dense factorization (systems below 5000
    unknowns) as an independent cross-check of the CG path.
    """
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (system.num_dofs,):
        raise ConfigurationError(
            f"rhs has shape {rhs.shape}, expected ({system.num_dofs},)"
        )
    start = time.perf_counter()
    free = system.free_dofs
    A = system.reduced_operator()
    b = rhs[free]
    n = len(free)

    if np.linalg.norm(b) == 0.0:
        u = np.zeros(system.num_dofs)
        report = SolveReport(0, 0.0, method, time.perf_counter() - start)
        return Solution(system.mesh, u.reshape(-1, 2), system.bc), report

    if method == "cg":
        if max_iter is None:
            max_iter = 20 * n
        x0_free = None if x0 is None else np.asarray(x0, dtype=float)[free]
        x, iterations, history = _pcg(A, b, tol, max_iter, x0=x0_free)
    elif method == "cholesky":
        if n > _DENSE_LIMIT:
            raise ConfigurationError(
                f"dense Cholesky cross-check limited to {_DENSE_LIMIT} unknowns, got {n}"
            )
        try:
            factor = scipy.linalg.cho_factor(A.toarray(), lower=True)
        except np.linalg.LinAlgError as exc:
            raise SPDViolationError(f"Cholesky factorization failed: {exc}") from exc
        x = scipy.linalg.cho_solve(factor, b)
        iterations = 1
    else:
        raise ConfigurationError(f"unknown solve method {method!r}")

    rel = float(np.linalg.norm(b - A @ x) / np.linalg.norm(b))
    if method == "cholesky" and rel > 1e-8:
        raise SolverError(f"Cholesky solve left relative residual {rel:.3e}")

    u = np.zeros(system.num_dofs)
    u[free] = x
    report = SolveReport(iterations, rel, method, time.perf_counter() - start)
    return Solution(system.mesh, u.reshape(-1, 2), system.bc), report
