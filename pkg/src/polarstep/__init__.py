"""Linearly implicit energy-preserving integrators for Hamiltonian systems
with cubic energy, applied to periodic finite-difference discretizations of
the KdV and Camassa-Holm equations."""

from .grid import (
    BandedCirculantOperator,
    LUSolver,
    PeriodicGrid,
    SingularMatrixError,
    make_operator,
    solve_dense,
)
from .hamsys import CubicHamiltonianSystem, from_cubic_tensor, random_cubic_system
from .integrators import (
    AVF_TABLEAU,
    KAHAN_TABLEAU,
    MIDPOINT_TABLEAU,
    NAMED_TABLEAUS,
    PDG_TABLEAU,
    TRAPEZOIDAL_TABLEAU,
    PolarizedEnergy,
    TrajectoryRecord,
    TwoStepTableau,
    avf_step,
    canonical_polarized_energy,
    general_two_step,
    integrate,
    kahan_step,
    kahan_two_step,
    midpoint_step,
    pdg_avf,
    pdg_itoh_abe,
    pdg_itoh_abe_symmetrized,
    pdg_quadratic,
    pdg_scheme_step,
    trapezoidal_step,
)
from .models import CamassaHolmModel, KdVModel

__all__ = [
    "AVF_TABLEAU",
    "BandedCirculantOperator",
    "CamassaHolmModel",
    "CubicHamiltonianSystem",
    "KAHAN_TABLEAU",
    "KdVModel",
    "LUSolver",
    "MIDPOINT_TABLEAU",
    "NAMED_TABLEAUS",
    "PDG_TABLEAU",
    "PeriodicGrid",
    "PolarizedEnergy",
    "SingularMatrixError",
    "TRAPEZOIDAL_TABLEAU",
    "TrajectoryRecord",
    "TwoStepTableau",
    "avf_step",
    "canonical_polarized_energy",
    "from_cubic_tensor",
    "general_two_step",
    "integrate",
    "kahan_step",
    "kahan_two_step",
    "make_operator",
    "midpoint_step",
    "pdg_avf",
    "pdg_itoh_abe",
    "pdg_itoh_abe_symmetrized",
    "pdg_quadratic",
    "pdg_scheme_step",
    "random_cubic_system",
    "solve_dense",
    "trapezoidal_step",
]
