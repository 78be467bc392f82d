"""Eigensolvers with quasi-optimal shift-and-invert preconditioning for
periodic Schrödinger problems on expanding box domains, plus the supporting
homogenization machinery."""

__version__ = "0.1.0"

from .assembly import (  # noqa: F401
    KERNEL_BACKEND,
    CoefficientSpec,
    ScalarField,
    assemble_corrector_system,
    assemble_pencil,
    field_norms,
    interpolate,
)
from .eigensolve import (  # noqa: F401
    EigResult,
    SolverConfig,
    deflated_smallest_k,
    inverse_power,
    lopcg,
    rayleigh_quotient,
)
from .grid import (  # noqa: F401
    BoundarySpec,
    DofMap,
    DomainSpec,
    Mesh,
    build_box_mesh,
    build_dof_map,
    mask_cells,
)
from .homogenize import (  # noqa: F401
    HomogenizedModel,
    align_degenerate_pair,
    analytic_limit_eigenpairs,
    homogenized_coefficients,
    solve_correctors,
)
from .linalg import (  # noqa: F401
    SparseMatrix,
    SpdFactor,
    dense_sym_eig,
    shift_invert_apply,
    shift_invert_factor,
    spmv,
)
from .pipeline import (  # noqa: F401
    ExperimentConfig,
    ShiftReport,
    compute_quasi_optimal_shift,
    factorization_check,
    run_experiment,
    solve_expanding_problem,
)
from .potentials import (  # noqa: F401
    PotentialSpec,
    barrier_wrap,
    chain_centers,
    coulomb_chain,
    eval_potential,
)
