"""Finite elements for 2D linear elasticity under cellular traction forces.

The package compares three ways of loading an elastic substrate with the
contractile forces of an embedded square cell: Dirac point forces on the cell
wall (with an optional soft-inclusion stiffness), Gaussian-regularized forces,
and the traction applied as a natural boundary condition on a mesh with the
cell removed.  Post-processing covers the norms, area-change ratios and the
consistency/convergence measurements that relate the approaches.
"""

from .analysis import (
    ConvergenceStudy,
    MomentumBalance,
    Polygon2D,
    SmoothingConsistencyReport,
    SmoothingRow,
    TriSurface,
    area_reduction,
    beta_consistency_sweep,
    cube_surface,
    estimate_order,
    fit_loglog_slope,
    h1_diff_norm,
    h1_norm,
    l2_norm,
    midpoint_quadrature_order,
    momentum_balance,
    shoelace_area,
    smoothing_consistency_sweep,
    solve_force_problem,
    square_polygon,
    write_solution_svg,
)
from .elasticity import MaterialParams, StiffnessSystem, assemble, element_stiffness
from .errors import (
    AssemblyError,
    CellforceError,
    ConfigurationError,
    GeometryError,
    LocationError,
    NumericsWarning,
    SolverError,
    SPDViolationError,
    UndefinedOrderError,
)
from .forces import (
    ContinuousImmersed,
    HoleNeumann,
    PointForces,
    SmoothedGaussian,
    SmoothedParticleGradient,
    build_rhs,
    discretize_cell_boundary,
    gaussian_delta,
    gaussian_delta_gradient,
    rhs_continuous_immersed,
    rhs_hole_neumann,
    rhs_point_forces,
    rhs_smoothed_gaussian,
    rhs_smoothed_particle_gradient,
)
from .mesh import (
    CellGeometry,
    CellSquare,
    EdgeTag,
    Mesh,
    RegionTag,
    cell_boundary_loop,
    export_mesh_text,
    extract_hole,
    generate_mesh,
    locate_point,
    rectangle_boundary_loop,
    refine,
)
from .solver import Solution, SolveReport, solve
from .verify1d import Cell1D, exact_1d, max_nodal_error, solve_1d

__version__ = "0.1.0"
