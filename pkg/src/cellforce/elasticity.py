"""P1 Galerkin assembly for plane-strain linear elasticity.

The constitutive law is Hooke's law with factors ``E / (1 + nu)`` and
``E nu / ((1 + nu)(1 - 2 nu))``; its 2D restriction with the volumetric
``nu / (1 - 2 nu)`` term retained is plane strain.  Stiffness inside the cell
region is scaled by the softness factor ``beta``.

Degrees of freedom interleave displacement components: node ``k`` owns dofs
``2k`` (x) and ``2k + 1`` (y).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import AssemblyError, ConfigurationError, NumericsWarning
from .mesh import EdgeTag, Mesh, RegionTag

__all__ = [
    "MaterialParams",
    "StiffnessSystem",
    "plane_strain_matrix",
    "element_stiffness",
    "assemble",
]


@dataclass(frozen=True)
class MaterialParams:
    """Constitutive and boundary constants (dimensionless)."""

    E: float = 1.0
    nu: float = 0.48
    beta: float = 1e-5  # cell/substrate stiffness factor
    kappa: float = 1.0  # Robin spring constant on the outer boundary
    P: float = 1.0  # traction magnitude on the cell wall

    def __post_init__(self):
        if self.E <= 0:
            raise ConfigurationError(f"E must be positive, got {self.E}")
        if not 0.0 < self.nu < 0.5:
            raise ConfigurationError(f"nu must lie in (0, 0.5), got {self.nu}")
        if self.beta < 0:
            raise ConfigurationError(f"beta must be >= 0, got {self.beta}")
        if self.kappa < 0:
            raise ConfigurationError(f"kappa must be >= 0, got {self.kappa}")


def plane_strain_matrix(E: float, nu: float) -> np.ndarray:
    """3x3 constitutive matrix acting on (eps_xx, eps_yy, gamma_xy)."""
    factor = E / ((1.0 + nu) * (1.0 - 2.0 * nu))
    return factor * np.array(
        [
            [1.0 - nu, nu, 0.0],
            [nu, 1.0 - nu, 0.0],
            [0.0, 0.0, 0.5 * (1.0 - 2.0 * nu)],
        ]
    )


def _strain_displacement(vertices: np.ndarray):
    """B matrices (..., 3, 6) and signed areas for one or many triangles."""
    v = np.asarray(vertices, dtype=float)
    single = v.ndim == 2
    if single:
        v = v[None]
    x, y = v[..., 0], v[..., 1]
    two_a = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    B = np.zeros((len(v), 3, 6))
    B[:, 0, 0::2] = b
    B[:, 1, 1::2] = c
    B[:, 2, 0::2] = c
    B[:, 2, 1::2] = b
    B /= two_a[:, None, None]
    return (B[0] if single else B), (0.5 * two_a if not single else 0.5 * two_a[0])


def element_stiffness(vertices: np.ndarray, E_local: float, nu: float) -> np.ndarray:
    """Exact 6x6 stiffness of one plane-strain P1 triangle.

    Element dofs are ``(u0x, u0y, u1x, u1y, u2x, u2y)``.  The strain is
    constant per element, so ``area * B^T D B`` is the exact integral of
    ``sigma(phi_i) : eps(phi_j)``.
    """
    B, area = _strain_displacement(np.asarray(vertices, dtype=float))
    if abs(area) < 1e-14 * max(1.0, np.abs(vertices).max()) ** 2:
        raise AssemblyError(f"degenerate triangle with area {area}")
    D = plane_strain_matrix(E_local, nu)
    return abs(area) * (B.T @ D @ B)


@dataclass(eq=False)
class StiffnessSystem:
    """Assembled sparse system: elastic matrix, boundary terms, constraints.

    ``matrix`` is the raw elastic stiffness over all ``2N`` dofs (no boundary
    treatment), ``robin_terms`` the kappa-scaled outer-boundary mass (Robin BC
    only), and ``constrained_dofs`` the Dirichlet-fixed dofs (zero value).
    """

    mesh: Mesh
    matrix: sp.csr_matrix
    robin_terms: sp.csr_matrix | None
    constrained_dofs: np.ndarray
    bc: str

    @property
    def num_dofs(self) -> int:
        return self.matrix.shape[0]

    @property
    def operator(self) -> sp.csr_matrix:
        """Elastic matrix plus Robin boundary terms (still unconstrained)."""
        if self.robin_terms is not None:
            return (self.matrix + self.robin_terms).tocsr()
        return self.matrix

    @property
    def free_dofs(self) -> np.ndarray:
        mask = np.ones(self.num_dofs, dtype=bool)
        mask[self.constrained_dofs] = False
        return np.nonzero(mask)[0]

    def reduced_operator(self) -> sp.csr_matrix:
        """System restricted to free dofs (symmetric elimination of constraints)."""
        free = self.free_dofs
        return self.operator[np.ix_(free, free)].tocsr()


def _element_stiffness_batch(mesh: Mesh, E_per_tri: np.ndarray, nu: float) -> np.ndarray:
    verts = mesh.nodes[mesh.triangles]
    B, areas = _strain_displacement(verts)
    if np.any(np.abs(areas) < 1e-14 * max(mesh.domain_size) ** 2):
        raise AssemblyError("degenerate triangle encountered during assembly")
    D_unit = plane_strain_matrix(1.0, nu)
    K = np.einsum("tji,jk,tkl->til", B, D_unit, B)
    K *= (np.abs(areas) * E_per_tri)[:, None, None]
    return K


def _robin_boundary_mass(mesh: Mesh, kappa: float) -> sp.csr_matrix:
    """kappa * integral of phi_i . phi_j over the outer boundary (exact)."""
    outer = mesh.boundary_edges[mesh.edge_tags == EdgeTag.OUTER_BOUNDARY]
    a, b = outer[:, 0], outer[:, 1]
    lengths = np.linalg.norm(mesh.nodes[a] - mesh.nodes[b], axis=1)
    rows, cols, vals = [], [], []
    for comp in (0, 1):
        da, db = 2 * a + comp, 2 * b + comp
        # Edge mass |e|/6 * [[2, 1], [1, 2]] per displacement component.
        rows.extend([da, db, da, db])
        cols.extend([da, db, db, da])
        vals.extend(
            [
                kappa * lengths / 3.0,
                kappa * lengths / 3.0,
                kappa * lengths / 6.0,
                kappa * lengths / 6.0,
            ]
        )
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    n = mesh.num_dofs
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def assemble(mesh: Mesh, params: MaterialParams, bc: str = "dirichlet") -> StiffnessSystem:
    """Assemble the global plane-strain stiffness with the requested outer BC.

    Stiffness is ``beta * E`` on cell-interior triangles and ``E`` elsewhere
    (irrelevant on hole meshes, which carry no cell-interior triangles).
    ``bc='dirichlet'`` fixes all outer-boundary dofs to zero;
    ``bc='robin'`` adds the kappa-scaled outer-boundary mass instead.
    """
    if bc not in ("dirichlet", "robin"):
        raise ConfigurationError(f"unknown boundary condition {bc!r}")

    E_per_tri = np.where(
        mesh.tri_regions == RegionTag.CELL_INTERIOR, params.beta * params.E, params.E
    )
    if bc == "dirichlet" and not mesh.has_hole and params.beta == 0.0:
        warnings.warn(
            "beta = 0 on a full mesh leaves the cell interior without stiffness; "
            "the Dirichlet system is singular",
            NumericsWarning,
            stacklevel=2,
        )
    if bc == "robin" and params.kappa == 0.0:
        warnings.warn(
            "kappa = 0 leaves the Robin system with a rigid-body null space",
            NumericsWarning,
            stacklevel=2,
        )

    K_el = _element_stiffness_batch(mesh, E_per_tri, params.nu)
    tris = mesh.triangles
    dofs = np.empty((mesh.num_triangles, 6), dtype=np.int64)
    dofs[:, 0::2] = 2 * tris
    dofs[:, 1::2] = 2 * tris + 1
    rows = np.repeat(dofs, 6, axis=1).ravel()
    cols = np.tile(dofs, (1, 6)).ravel()
    n = mesh.num_dofs
    matrix = sp.coo_matrix((K_el.ravel(), (rows, cols)), shape=(n, n)).tocsr()

    if bc == "dirichlet":
        nodes = mesh.outer_boundary_nodes()
        constrained = np.sort(np.concatenate([2 * nodes, 2 * nodes + 1]))
        robin = None
    else:
        constrained = np.array([], dtype=np.int64)
        robin = _robin_boundary_mass(mesh, params.kappa)

    return StiffnessSystem(
        mesh=mesh, matrix=matrix, robin_terms=robin, constrained_dofs=constrained, bc=bc
    )
