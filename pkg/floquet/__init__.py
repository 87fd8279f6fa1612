__version__ = "1.0.0"

from .errors import (
    ExitStatus,
    FloquetError,
    InvalidArgumentError,
    NotApplicableError,
    NumericalFailure,
    PropagationFailure,
)
from .integrator import Monodromy, PropagationConfig, Trajectory, extend_by_periodicity, monodromy, propagate
from .lab import (
    PerturbationExperiment,
    canonical_perturbed,
    closed_form_perturbed,
    integrate_perturbed,
    neighborhood_scan,
    psi_series,
)
from .spectral import SpectralTolerances, StabilityVerdict, multipliers, strong_stability_verdict
from .symplectic import RankOneUpdate, StructureMatrix, apply_rank_one, standard_structure_matrix
from .systems import (
    CoupledTripleParams,
    MathieuParams,
    PeriodicCoefficient,
    coupled_triple_hamiltonian,
    mathieu_hamiltonian,
    perturbed_hamiltonian,
)
