"""
Rank-one perturbation experiments.

The perturbed fundamental solution is reached two ways: in closed form, by multiplying
X(t) by I + uuᵀJ, and by integrating the perturbed coefficient H̃ from X̃(0) = I + uuᵀJ.
ψ(t) measures how far apart the two land. Scans over scaled copies of u report how the
stability verdict behaves as the perturbation grows.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Final, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import FloquetError, InternalConsistencyError, InvalidArgumentError
from .integrator import PropagationConfig, Trajectory, extend_by_periodicity, propagate
from .spectral import (
    Color,
    SpectralTolerances,
    StabilityVerdict,
    multipliers,
    strong_stability_verdict,
)
from .symplectic import (
    FORM_TOLERANCE,
    GramLabel,
    GramValue,
    RankOneUpdate,
    S0Convention,
    StructureMatrix,
    apply_rank_one,
    hermitian_form,
    inverse_rank_one,
    rank_one_matrix,
    s0_matrix,
    standard_structure_matrix,
    symplecticity_residual,
)
from .systems import (
    PeriodicCoefficient,
    integral_distance,
    perturbation_magnitude,
    perturbed_hamiltonian,
)

__all__ = [
    "DEFAULT_SCALES",
    "NeighborhoodReport",
    "NeighborhoodRow",
    "PerturbationExperiment",
    "PsiSeries",
    "canonical_perturbed",
    "classify_by_form_identity",
    "closed_form_perturbed",
    "color_margin",
    "form_identity_residual",
    "integrate_perturbed",
    "neighborhood_scan",
    "phi_matrix",
    "psi_series",
    "recover_fundamental",
]

LOG: Final = logging.getLogger("floquet.lab")
DEFAULT_SCALES: Final[Tuple[float, ...]] = (1.0, 1e-1, 1e-2, 1e-3)
EIGENVECTOR_TOLERANCE: Final[float] = 1e-6

_COLORS: Final = {GramLabel.POSITIVE: Color.RED, GramLabel.NEGATIVE: Color.GREEN, GramLabel.MIXED: Color.MIXED}


@dataclass(frozen=True, eq=False)
class PerturbationExperiment:
    base: PeriodicCoefficient
    update: RankOneUpdate
    scales: Tuple[float, ...] = DEFAULT_SCALES
    config: PropagationConfig = field(default_factory=PropagationConfig)
    tolerances: SpectralTolerances = field(default_factory=SpectralTolerances)
    periods: int = 1

    def __post_init__(self):
        scales = tuple(float(s) for s in self.scales)
        if not scales:
            raise InvalidArgumentError("at least one scale is required")
        if not all(math.isfinite(s) and s >= 0 for s in scales):
            raise InvalidArgumentError(f"scales must be finite and nonnegative, got {scales}")
        object.__setattr__(self, "scales", scales)
        if isinstance(self.periods, bool) or int(self.periods) != self.periods or self.periods < 1:
            raise InvalidArgumentError(f"periods must be a positive integer, got {self.periods!r}")
        object.__setattr__(self, "periods", int(self.periods))
        self.update.check(self.base.J)


@dataclass(frozen=True, eq=False)
class PsiSeries:
    """ψ(t) = ‖X̃₁(t) - X̃₂(t)‖ on the shared grid."""

    times: np.ndarray
    psi: np.ndarray
    scale: float = 1.0
    label: str = ""
    psi_max: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "psi_max", float(self.psi.max()) if len(self.psi) else 0.0)


def _transform(trajectory: Trajectory, matrix: np.ndarray, label: str) -> Trajectory:
    matrices = matrix @ trajectory.matrices
    return replace(
        trajectory,
        matrices=matrices,
        residuals=np.array([symplecticity_residual(m, trajectory.J) for m in matrices]),
        label=label,
    )


def closed_form_perturbed(trajectory: Trajectory, update: RankOneUpdate) -> Trajectory:
    """X̃(t) = (I + uuᵀJ)X(t), pointwise."""
    update.check(trajectory.J)
    if update.is_zero:
        return trajectory
    if trajectory.degraded:
        LOG.warning("%s: perturbing a degraded trajectory", trajectory.label)
    return _transform(trajectory, rank_one_matrix(update, trajectory.J), f"{trajectory.label}+closed-form")


def recover_fundamental(trajectory: Trajectory, update: RankOneUpdate) -> Trajectory:
    """(I - uuᵀJ)X̃(t), the fundamental solution a perturbed solution came from."""
    update.check(trajectory.J)
    if update.is_zero:
        return trajectory
    return _transform(trajectory, inverse_rank_one(update, trajectory.J), f"{trajectory.label}+recovered")


def integrate_perturbed(
    base: PeriodicCoefficient,
    update: RankOneUpdate,
    config: PropagationConfig,
    t_end: Optional[float] = None,
) -> Trajectory:
    """Integrate the perturbed coefficient from X̃(0) = I + uuᵀJ."""
    update.check(base.J)
    t_end = base.period if t_end is None else t_end
    if update.is_zero:
        return propagate(base, config, t_end)
    return propagate(perturbed_hamiltonian(update, base), config, t_end, rank_one_matrix(update, base.J))


def canonical_perturbed(
    base: PeriodicCoefficient,
    update: RankOneUpdate,
    config: PropagationConfig,
    t_end: Optional[float] = None,
) -> Trajectory:
    """Integrate the perturbed coefficient from W̃(0) = I."""
    update.check(base.J)
    t_end = base.period if t_end is None else t_end
    if update.is_zero:
        return propagate(base, config, t_end)
    return propagate(perturbed_hamiltonian(update, base), config, t_end)


def psi_series(
    experiment: PerturbationExperiment,
    scale: float = 1.0,
    reference: Optional[Trajectory] = None,
) -> PsiSeries:
    """
    ψ(t) between the closed-form and the integrated perturbed solutions for the update
    scaled by ``scale``. ``reference`` is the unperturbed one-period trajectory, computed
    when not given. With ``periods > 1`` both solutions are extended by periodicity.
    """
    base, config = experiment.base, experiment.config
    update = experiment.update.scaled(scale)
    if reference is None:
        reference = propagate(base, config, base.period)
    closed = closed_form_perturbed(reference, update)
    integrated = integrate_perturbed(base, update, config)
    if experiment.periods > 1:
        n = experiment.periods - 1
        closed = extend_by_periodicity(closed, reference.final, n)
        # X̃(t + P) = X̃(t)·X̃(0)⁻¹X̃(P)
        step = inverse_rank_one(update, base.J) @ integrated.final
        integrated = extend_by_periodicity(integrated, step, n)
    if closed.times.shape != integrated.times.shape or not np.array_equal(closed.times, integrated.times):
        raise InternalConsistencyError("closed-form and integrated solutions are on different grids")
    psi = np.linalg.norm(closed.matrices - integrated.matrices, ord=2, axis=(1, 2))
    series = PsiSeries(times=closed.times, psi=psi, scale=float(scale), label=base.label)
    LOG.info("%s: scale %g, ψmax = %.3g", base.label, scale, series.psi_max)
    return series


def phi_matrix(
    W: np.ndarray,
    update: RankOneUpdate,
    J: Optional[StructureMatrix] = None,
    convention: S0Convention = "definition",
) -> np.ndarray:
    """
    The shift between S₀ and S̃₀: (JuuᵀJW + (JuuᵀJW)ᵀ)/2, or (uuᵀJWJ + (uuᵀJWJ)ᵀ)/2
    under the transposed S₀ convention.
    """
    J = _structure(update, J)
    v = update.vector
    W = np.asarray(W, dtype=float)
    if convention == "definition":
        product = np.outer(J.entries @ v, v @ J.entries @ W)
    elif convention == "transposed":
        product = np.outer(v, v @ J.entries @ W @ J.entries)
    else:
        raise InvalidArgumentError(f"unknown S0 convention {convention!r}")
    return 0.5 * (product + product.T)


def _structure(update: RankOneUpdate, J: Optional[StructureMatrix]) -> StructureMatrix:
    if J is None:
        if update.dimension % 2:
            raise InvalidArgumentError(f"u has odd dimension {update.dimension}")
        J = standard_structure_matrix(update.dimension // 2)
    update.check(J)
    return J


def _nonzero(y: Union[Sequence[complex], np.ndarray], dimension: int) -> np.ndarray:
    y = np.asarray(y)
    if y.shape != (dimension,):
        raise InvalidArgumentError(f"y has shape {y.shape}, expected ({dimension},)")
    if not y.any():
        raise InvalidArgumentError("y must be nonzero")
    return y


def _forms(
    W: np.ndarray, update: RankOneUpdate, y: np.ndarray, J: StructureMatrix, convention: S0Convention
) -> Tuple[float, float, float]:
    S0 = s0_matrix(W, J, convention)
    S0_tilde = s0_matrix(apply_rank_one(update, W, J), J, convention)
    phi = phi_matrix(W, update, J, convention)
    return (
        hermitian_form(y, S0).real,
        hermitian_form(y, S0_tilde).real,
        hermitian_form(y, phi).real,
    )


def form_identity_residual(
    W: np.ndarray,
    update: RankOneUpdate,
    y: Union[Sequence[complex], np.ndarray],
    J: Optional[StructureMatrix] = None,
    convention: S0Convention = "definition",
) -> float:
    """|(S₀y, y) - (S̃₀y, y) + φ(y)| for S̃₀ the S₀ of (I + uuᵀJ)W."""
    J = _structure(update, J)
    W = np.asarray(W, dtype=float)
    y = _nonzero(y, J.dimension)
    if update.is_zero:
        return 0.0
    original, perturbed, phi = _forms(W, update, y, J, convention)
    return abs(original - perturbed + phi)


def classify_by_form_identity(
    W: np.ndarray,
    update: RankOneUpdate,
    y: Union[Sequence[complex], np.ndarray],
    J: Optional[StructureMatrix] = None,
    tolerance: Optional[float] = None,
    convention: S0Convention = "definition",
) -> Color:
    """
    Colour of the unit-circle eigenvector y of W, read off the perturbed matrix:
    red iff (S̃₀y, y) > φ(y).

    ``tolerance`` is relative to ‖y‖²; the default matches the one used by
    :func:`floquet.spectral.multipliers`.
    """
    J = _structure(update, J)
    W = np.asarray(W, dtype=float)
    y = _nonzero(y, J.dimension).astype(complex)
    norm2 = float(np.vdot(y, y).real)
    eigenvalue = np.vdot(y, W @ y) / norm2
    if np.linalg.norm(W @ y - eigenvalue * y) > EIGENVECTOR_TOLERANCE * math.sqrt(norm2):
        raise InvalidArgumentError("y is not an eigenvector of W")
    if abs(abs(eigenvalue) - 1) > EIGENVECTOR_TOLERANCE:
        raise InvalidArgumentError(f"eigenvalue {eigenvalue:.6g} is not on the unit circle")
    if tolerance is None:
        tolerance = FORM_TOLERANCE * max(1.0, float(np.linalg.norm(W, 2)))
    if update.is_zero:
        value = hermitian_form(y, s0_matrix(W, J, convention)).real
    else:
        _, perturbed, phi = _forms(W, update, y, J, convention)
        value = perturbed - phi
    return _COLORS[GramValue.classify(value, tolerance * norm2).label]


def color_margin(
    W: np.ndarray,
    update: RankOneUpdate,
    J: Optional[StructureMatrix] = None,
    tolerances: Optional[SpectralTolerances] = None,
) -> float:
    """min |(S̃₀y, y) - φ(y)| over unit-circle eigenvectors y of W; +∞ if there are none."""
    J = _structure(update, J)
    W = np.asarray(W, dtype=float)
    tolerances = tolerances or SpectralTolerances()
    margins = []
    for record in multipliers(W, J, tolerances):
        if not record.on_circle:
            continue
        y = np.array(record.eigenvector)
        _, perturbed, phi = _forms(W, update, y, J, tolerances.s0_convention)
        margins.append(abs(perturbed - phi))
    return min(margins, default=math.inf)


@dataclass(frozen=True, eq=False)
class NeighborhoodRow:
    scale: float
    e_norm_max: float = math.nan
    e_integral: float = math.nan
    coupling_norm: float = math.nan
    psi_max: float = math.nan
    color_margin: float = math.nan
    verdict: Optional[StabilityVerdict] = None
    matrix_verdict: Optional[StabilityVerdict] = None
    series: Optional[PsiSeries] = field(default=None, repr=False)
    error: Optional[str] = None

    @property
    def stable(self) -> Optional[bool]:
        return None if self.verdict is None else self.verdict.stable

    @property
    def strongly_stable(self) -> Optional[bool]:
        return None if self.verdict is None else self.verdict.strongly_stable

    @property
    def delta_color(self) -> Optional[float]:
        return None if self.verdict is None else self.verdict.delta_color


@dataclass(frozen=True, eq=False)
class NeighborhoodReport:
    label: str
    u: Tuple[float, ...]
    unperturbed: StabilityVerdict
    rows: Tuple[NeighborhoodRow, ...]

    @property
    def completed(self) -> bool:
        return all(row.error is None for row in self.rows)

    @property
    def largest_stable_scale(self) -> Optional[float]:
        """Largest tested scale such that every tested scale up to it is stable."""
        largest = None
        for row in sorted(self.rows, key=lambda r: r.scale):
            if not row.stable:
                break
            largest = row.scale
        return largest


def _row(
    experiment: PerturbationExperiment,
    scale: float,
    reference: Trajectory,
) -> NeighborhoodRow:
    base, J = experiment.base, experiment.base.J
    update = experiment.update.scaled(scale)
    W = reference.final
    v = update.vector
    series = psi_series(experiment, scale, reference)
    canonical = canonical_perturbed(base, update, experiment.config)
    label = f"{base.label}@{scale:g}"
    return NeighborhoodRow(
        scale=scale,
        e_norm_max=perturbation_magnitude(update, base),
        e_integral=integral_distance(update, base),
        coupling_norm=float(np.linalg.norm(np.outer(v, v @ J.entries @ W), 2)),
        psi_max=series.psi_max,
        color_margin=color_margin(W, update, J, experiment.tolerances),
        verdict=strong_stability_verdict(canonical.final, J, experiment.tolerances, label=label),
        matrix_verdict=strong_stability_verdict(
            apply_rank_one(update, W, J), J, experiment.tolerances, label=f"{label}:matrix"
        ),
        series=series,
    )


def neighborhood_scan(experiment: PerturbationExperiment) -> NeighborhoodReport:
    """
    One row per scale, largest first. A row that fails numerically is recorded with
    its error and the scan moves on.
    """
    base = experiment.base
    reference = propagate(base, experiment.config, base.period)
    unperturbed = strong_stability_verdict(reference.final, base.J, experiment.tolerances, label=base.label)
    rows = []
    for scale in sorted(experiment.scales, reverse=True):
        try:
            rows.append(_row(experiment, scale, reference))
        except FloquetError as e:
            LOG.warning("%s: scale %g failed: %s", base.label, scale, e)
            rows.append(NeighborhoodRow(scale=scale, error=f"{type(e).__name__}: {e}"))
    return NeighborhoodReport(
        label=base.label,
        u=experiment.update.u,
        unperturbed=unperturbed,
        rows=tuple(rows),
    )
