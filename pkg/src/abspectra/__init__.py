"""Spectral laboratory for half-integer Aharonov-Bohm operators on 2D domains.

Submodules
----------
geometry       domains, gauge cuts, graded meshes
abfem          sign-flip FEM assembly and generalized eigensolves
spectral       nodal sets and vanishing-order fits
almgren        boundary frequency function E, H, N and its identities
limit_profile  half-plane blow-up profile (beta, expansion coefficients)
experiments    pole sweeps, rate fits, blow-up comparison, matrix oracle
"""

from .geometry import (
    DomainSpec,
    Mesh,
    MeshError,
    PoleConfig,
    build_mesh,
    insert_cut,
    load_mesh,
    save_mesh,
)

__version__ = "0.1.0"

from .abfem import (  # noqa: E402
    EigenProblem,
    EigenResult,
    Weight,
    assemble,
    manufactured_ab_solution,
    solve_eigs,
    solve_local_dirichlet,
)
from .almgren import (  # noqa: E402
    FrequencyTrace,
    check_dH_identity,
    check_frequency_bounds,
    estimate_Ma,
    frequency_trace,
    pohozaev_residual,
)
from .experiments import (  # noqa: E402
    RateFit,
    SweepSpec,
    blowup_compare,
    fit_rate,
    matrix_lemma_check,
    run_sweep,
)
from .limit_profile import (  # noqa: E402
    LimitProfile,
    build_profile,
    compute_beta,
    eval_psi,
    extract_coefficients,
)
from .spectral import (  # noqa: E402
    NodalSet,
    VanishingOrder,
    extract_nodal_set,
    vanishing_order,
)
