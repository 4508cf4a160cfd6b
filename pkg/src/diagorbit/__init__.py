"""Diagonal-orbit measures, nonconventional ergodic sums and coboundary solvers."""

__version__ = "0.1.0"

from .coboundary import (
    CoboundaryCertificate,
    KomlosTrace,
    Status,
    circle_partial_solver,
    komlos_construct,
    reverse_direction,
    solve_orbit,
    verify_certificate,
)
from .measures import (
    NuSupport,
    build_nu_support,
    check_nonsingularity,
    lp_norm_nu,
    sample_nu,
    shift_weight,
)
from .planted import make_planted
from .sums import (
    SupportObservable,
    TensorObservable,
    eval_F,
    ergodic_sums,
    shifted_sum_condition,
    sup_norm_diagnostic,
)
from .systems import (
    CircleRotation,
    FiniteMap,
    FiniteSpace,
    InvalidPointError,
    ParameterError,
    System,
    apply_product,
    orbit_of,
)
