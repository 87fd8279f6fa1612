"""Invariant suite run by ``floquet verify`` against one configured system."""

import logging
from dataclasses import dataclass
from typing import Callable, Final, List, Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .integrator import PropagationConfig, Trajectory, propagate
from .lab import (
    PerturbationExperiment,
    canonical_perturbed,
    classify_by_form_identity,
    form_identity_residual,
    psi_series,
)
from .spectral import SpectralTolerances, multipliers
from .symplectic import (
    RankOneUpdate,
    apply_rank_one,
    inverse_rank_one,
    rank_one_matrix,
    symplecticity_residual,
)
from .systems import PeriodicCoefficient, perturbation_term, perturbed_hamiltonian

__all__ = ["CheckResult", "match_spectra", "run_checks"]

LOG: Final = logging.getLogger("floquet.checks")
TRIALS: Final[int] = 100
PSI_BOUND: Final[float] = 1e-9


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    bound: float

    @property
    def passed(self) -> bool:
        return bool(self.value <= self.bound)


def match_spectra(first: np.ndarray, second: np.ndarray) -> float:
    """Largest distance under the best one-to-one pairing of two eigenvalue sets."""
    cost = np.abs(np.subtract.outer(np.asarray(first), np.asarray(second)))
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


class _Suite:
    def __init__(
        self,
        base: PeriodicCoefficient,
        config: PropagationConfig,
        tolerances: SpectralTolerances,
        update: RankOneUpdate,
        rng: np.random.Generator,
    ):
        self.base = base
        self.config = config
        self.tolerances = tolerances
        self.update = update
        self.rng = rng
        self.J = base.J
        self.trajectory: Trajectory = propagate(base, config, base.period)
        self.W = self.trajectory.final

    def random_update(self, spread: float = 0.5) -> RankOneUpdate:
        return RankOneUpdate(self.rng.uniform(-spread, spread, self.J.dimension))

    def random_times(self) -> np.ndarray:
        return self.rng.uniform(0, self.base.period, TRIALS)

    def hamiltonian_symmetry(self) -> CheckResult:
        return CheckResult("hamiltonian_symmetry", self.base.symmetry_defect(self.random_times()), 1e-14)

    def hamiltonian_periodicity(self) -> CheckResult:
        return CheckResult("hamiltonian_periodicity", self.base.periodicity_defect(self.random_times()), 1e-12)

    def trajectory_symplecticity(self) -> CheckResult:
        return CheckResult("trajectory_symplecticity", self.trajectory.max_residual, self.config.residual_alarm)

    def unit_determinant(self) -> CheckResult:
        return CheckResult("unit_determinant", float(np.abs(self.trajectory.determinants() - 1).max()), 1e-8)

    def rank_one_symplecticity(self) -> CheckResult:
        base_residual = symplecticity_residual(self.W, self.J)
        worst = 0.0
        for _ in range(TRIALS):
            update = self.random_update()
            perturbed = apply_rank_one(update, self.W, self.J)
            scale = np.linalg.norm(rank_one_matrix(update, self.J), 2) ** 2
            # the monodromy is itself only symplectic to its own residual
            allowed = 1e-12 * max(1.0, np.linalg.norm(perturbed, 2) ** 2) + scale * base_residual
            worst = max(worst, symplecticity_residual(perturbed, self.J) / allowed)
        return CheckResult("rank_one_symplecticity", worst, 1.0)

    def rank_one_inverse(self) -> CheckResult:
        identity = np.eye(self.J.dimension)
        worst = 0.0
        for _ in range(TRIALS):
            update = self.random_update()
            product = rank_one_matrix(update, self.J) @ inverse_rank_one(update, self.J)
            worst = max(worst, float(np.linalg.norm(product - identity, 2)))
        return CheckResult("rank_one_inverse", worst, 1e-13)

    def perturbed_congruence(self) -> CheckResult:
        worst = 0.0
        for t in self.random_times():
            update = self.random_update()
            h = self.base(t)
            defect = perturbed_hamiltonian(update, self.base)(t) - h - perturbation_term(update, self.base, t)
            worst = max(worst, float(np.linalg.norm(defect, 2) / np.linalg.norm(h, 2)))
        return CheckResult("perturbed_congruence", worst, 1e-13)

    def quadratic_form_identity(self) -> CheckResult:
        worst = 0.0
        norm = np.linalg.norm(self.W, 2)
        for _ in range(TRIALS):
            update = self.random_update()
            y = self.rng.standard_normal(self.J.dimension)
            y /= np.linalg.norm(y)
            bound = 1e-13 * (1 + norm * float(update.vector @ update.vector))
            residual = form_identity_residual(self.W, update, y, self.J, self.tolerances.s0_convention)
            worst = max(worst, residual / bound)
        return CheckResult("quadratic_form_identity", worst, 1.0)

    def color_agreement(self) -> CheckResult:
        tolerance = self.tolerances.form_tolerance * max(1.0, float(np.linalg.norm(self.W, 2)))
        records = [r for r in multipliers(self.W, self.J, self.tolerances) if r.on_circle and r.multiplicity == 1]
        disagreements = 0
        for record in records:
            y = np.array(record.eigenvector)
            for update in (self.update, self.random_update(0.1)):
                if classify_by_form_identity(
                    self.W, update, y, self.J, tolerance, self.tolerances.s0_convention
                ) is not record.color:
                    disagreements += 1
        return CheckResult("color_agreement", float(disagreements), 0.0)

    def psi_bound(self) -> CheckResult:
        update = self.update if not self.update.is_zero else self.random_update()
        experiment = PerturbationExperiment(self.base, update, (1.0,), self.config, self.tolerances)
        series = psi_series(experiment, 1.0, self.trajectory)
        return CheckResult("psi_bound", series.psi_max, PSI_BOUND)

    def multiplier_similarity(self) -> CheckResult:
        update = self.update if not self.update.is_zero else self.random_update()
        canonical = canonical_perturbed(self.base, update, self.config)
        distance = match_spectra(np.linalg.eigvals(canonical.final), np.linalg.eigvals(self.W))
        return CheckResult("multiplier_similarity", distance, 1e-8)

    def multiplier_reciprocity(self) -> CheckResult:
        values = np.linalg.eigvals(self.W)
        distance = match_spectra(values, 1 / values)
        return CheckResult("multiplier_reciprocity", distance, 1e-8 * max(1.0, float(np.abs(values).max())))

    def checks(self) -> List[Callable[[], CheckResult]]:
        return [
            self.hamiltonian_symmetry,
            self.hamiltonian_periodicity,
            self.trajectory_symplecticity,
            self.unit_determinant,
            self.rank_one_symplecticity,
            self.rank_one_inverse,
            self.perturbed_congruence,
            self.quadratic_form_identity,
            self.color_agreement,
            self.psi_bound,
            self.multiplier_similarity,
            self.multiplier_reciprocity,
        ]


def run_checks(
    base: PeriodicCoefficient,
    config: PropagationConfig,
    tolerances: Optional[SpectralTolerances] = None,
    update: Optional[RankOneUpdate] = None,
    seed: Optional[int] = None,
) -> List[CheckResult]:
    """
    Evaluate every invariant on ``base``. ``update`` is used where a specific
    perturbation is needed; random perturbations are drawn from ``seed``.
    """
    tolerances = tolerances or SpectralTolerances()
    update = update or RankOneUpdate.zero(base.dimension)
    suite = _Suite(base, config, tolerances, update, np.random.default_rng(seed))
    results = []
    for check in suite.checks():
        result = check()
        LOG.info("%s: %.3g (bound %.3g)", result.name, result.value, result.bound)
        results.append(result)
    return results
