"""Occupation-measure controller synthesis for discrete-time hybrid polynomial systems."""

from .controller import PiecewiseController, apply, extract, extract_controller
from .model import (
    HybridSystem,
    Mode,
    OutOfDomainError,
    SemialgebraicSet,
    TransitionSet,
    box_set,
    build_all_transitions,
    build_transition_set,
    load_system,
    normalize_input_box,
    save_system,
    validate,
)
from .moments import (
    MomentSequence,
    dirac_moments,
    lebesgue_box_moments,
    localizing_matrix,
    moment_matrix,
    pushforward_row,
)
from .polyalg import Polynomial, basis, enumerate_monomials, format_poly, parse_poly
from .relaxation import (
    DualCertificate,
    RelaxationResult,
    SdpProblem,
    assemble_primal,
    check_certificate,
    lower,
    moments_from_solution,
    read_dual,
    relaxation_order_min,
    solve_relaxation,
)
from .sim import (
    ControllabilityMap,
    SampleSpec,
    Trajectory,
    rollout,
    sample_controllability,
    step,
)
from .solver import (
    ConicProgram,
    SdpSolution,
    SolverOptions,
    read_sdpa,
    read_sdpa_solution,
    solve,
    write_sdpa,
    write_solution,
)

__version__ = "0.1.0"
