"""Finite volume solver with integrated quadratic reconstruction."""

from .geometry import (
    CellGeometry,
    CellKind,
    FaceGeometry,
    cfl_number,
    interior_quadrature_weights,
    make_cell,
    monotonicity_factor,
    second_moments,
)
from .harness import (
    ConfigError,
    ErrorReport,
    InvariantReport,
    RunConfig,
    check_invariants,
    convergence_study,
    error_norms,
    load_config,
    parse_config,
    run_case,
)
from .mesh import (
    Mesh,
    MeshError,
    build_cuboid_mesh,
    build_interval_mesh,
    build_rect_mesh,
    build_tri_mesh,
    load_tri_mesh,
)
from .models import (
    ConservationLawModel,
    ModelError,
    burgers_exact_smooth,
    burgers_model,
    get_model,
    leveque_shapes,
    linear_advection_model,
    model_names,
    riemann_ic_and_exact,
    rotation_model,
)
from .qp import QPProblem, QPSolution, kkt_residual, solve_qp
from .reconstruction import (
    PiecewiseQuadraticField,
    QuadraticCellPoly,
    assemble_least_squares,
    basis_vector,
    bootstrap_initial,
    compute_bounds,
    k_exact_reconstruct,
    reconstruct_cell,
    reconstruct_field,
)
from .solver import (
    CFLError,
    SolverError,
    SolverState,
    TimeControls,
    advance_to,
    compute_time_step,
    forward_euler_step,
    init_state,
    lax_friedrichs_flux,
    max_wave_speed,
    spatial_residual,
    ssp_rk3_step,
)

__all__ = [name for name in dir() if not name.startswith("_")]
