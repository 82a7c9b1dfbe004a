"""Numerical laboratory for atomistic thin films and their plate limits.

Layout: `lattice` holds the film geometry and discrete gradients,
`potentials` the cell interaction laws, `energy` the assembled lattice
energies, `quadforms` the reference Hessian forms and their vertical
relaxation, `limits` the plate functionals, `recovery` the matching
deformation sequences, and `harness` the configured CLI runs.
"""

from .lattice import (
    CORNER_OFFSETS,
    E3,
    FilmConfig,
    M,
    M1,
    Z,
    Z1,
    Z2,
    ZMINUS,
    affine_part,
    build_lattice,
    discrete_gradient,
    dist2_SO3Z,
    dist_SO3Z,
    nearest_rotation,
    rescaled_gradient,
)
from .potentials import (
    MassSpring,
    NonPenParams,
    PairLaw,
    PenaltyParams,
    PenalizedLaw,
    chi_penalty,
    v_nonpen,
)
from .energy import (
    AtomisticModel,
    ForceField,
    e_atom,
    e_body,
    e_nonpen,
    e_total,
    e_total_gradient,
    in_s_delta,
    make_admissible_force,
)
from .quadforms import Forms, QuadraticForm, RelaxationSolver, assemble_forms, fd_hessian
from .limits import (
    PolyDisplacement,
    Quadrature,
    SampledDisplacement,
    TrigDisplacement,
    TrigForce,
    coefficient_identities,
    e_vk,
    e_vk_nu,
    e_vk_nu_decoupled,
    force_limit,
    strains_at,
)
from .recovery import (
    build_recovery,
    energy_barrier_check,
    extract_displacements,
    extract_strain,
    interpolate_and_rigidity,
    limit_strain,
    scaled_energy_gap,
    solve_correctors,
    strain_moment_report,
)
from .harness import MinimizeResult, main, minimize_atomistic

__version__ = "0.1.0"
