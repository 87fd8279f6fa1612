"""
Periodic Hamiltonian coefficient families and their rank-one perturbations.

Every coefficient is an immutable, reentrant evaluator ``t ↦ H(t)`` together with its
period and structure matrix J. The perturbed coefficient of an update u is

    H̃(t) = (I - uuᵀJ)ᵀ H(t) (I - uuᵀJ) = H(t) + E(t),

which carries the rank-one perturbation (I + uuᵀJ)X(t) of the fundamental solution.
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Final, Mapping, Optional, Tuple, Union

import numpy as np

from .errors import ConfigError, InvalidDimensionError, InvalidParameterError
from .symplectic import (
    RankOneUpdate,
    StructureMatrix,
    inverse_rank_one,
    standard_structure_matrix,
)

__all__ = [
    "FAMILIES",
    "CoupledTripleParams",
    "MathieuParams",
    "PeriodicCoefficient",
    "PerturbedCoefficient",
    "build_system",
    "coupled_triple_hamiltonian",
    "integral_distance",
    "load_samples",
    "mathieu_hamiltonian",
    "perturbation_magnitude",
    "perturbation_term",
    "perturbed_hamiltonian",
    "sampled_hamiltonian",
]

LOG: Final = logging.getLogger("floquet.systems")
SAMPLES_PER_PERIOD: Final[int] = 512

Evaluator = Callable[[float], np.ndarray]


@dataclass(frozen=True, eq=False)
class PeriodicCoefficient:
    """A symmetric P-periodic matrix function H(t) with its structure matrix."""

    period: float
    evaluator: Evaluator
    J: StructureMatrix
    label: str = "custom"
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not (math.isfinite(self.period) and self.period > 0):
            raise InvalidParameterError(f"period must be positive, got {self.period}")

    @property
    def dimension(self) -> int:
        return self.J.dimension

    def __call__(self, t: float) -> np.ndarray:
        return self.evaluator(t)

    def grid(self, samples: int = SAMPLES_PER_PERIOD) -> np.ndarray:
        """Uniform grid on [0, P) with ``samples`` points."""
        return np.arange(samples) * (self.period / samples)

    def symmetry_defect(self, times) -> float:
        """max ‖H(t) - H(t)ᵀ‖ / ‖H(t)‖ over ``times``."""
        return max(_relative(h - h.T, h) for h in map(self, times))

    def periodicity_defect(self, times) -> float:
        """max ‖H(t + P) - H(t)‖ / ‖H(t)‖ over ``times``."""
        return max(_relative(self(t + self.period) - self(t), self(t)) for t in times)

    def __repr__(self) -> str:
        return f"{type(self).__qualname__}(label={self.label!r}, dimension={self.dimension}, period={self.period})"


def _relative(difference: np.ndarray, reference: np.ndarray) -> float:
    scale = np.linalg.norm(reference, 2)
    return float(np.linalg.norm(difference, 2) / scale) if scale else float(np.abs(difference).max())


@dataclass(frozen=True)
class MathieuParams:
    a: float
    b: float


@dataclass(frozen=True)
class CoupledTripleParams:
    p1: float
    p2: float
    p3: float
    q1: float
    q2: float
    q3: float
    a: float
    b: float
    c: float
    g: float
    gamma: float

    def __post_init__(self):
        for name in ("q1", "q2", "q3"):
            if not getattr(self, name) > 0:
                raise InvalidParameterError(f"{name} must be positive, got {getattr(self, name)}")
        if self.gamma == 0:
            raise InvalidParameterError("gamma must be nonzero")


def mathieu_hamiltonian(params: MathieuParams) -> PeriodicCoefficient:
    """y'' + (a + b sin 2t) y = 0 as a π-periodic Hamiltonian system in (y, y')."""
    a, b = float(params.a), float(params.b)

    def evaluate(t: float) -> np.ndarray:
        return np.array([[a + b * math.sin(2 * t), 0.0], [0.0, 1.0]])

    return PeriodicCoefficient(
        period=math.pi,
        evaluator=evaluate,
        J=standard_structure_matrix(1),
        label="mathieu",
        params={"a": a, "b": b},
    )


def coupled_triple_hamiltonian(params: CoupledTripleParams) -> PeriodicCoefficient:
    """
    Three oscillators coupled through 2γ and 5γ harmonics, in the mass-normalised
    coordinates (η_i/√q_i, η_i'); H(t) = blockdiag(P(t), I₃), period 2π/γ.
    """
    p = params
    s13 = 1.0 / math.sqrt(p.q1 * p.q3)
    s23 = 1.0 / math.sqrt(p.q2 * p.q3)

    def evaluate(t: float) -> np.ndarray:
        c2, s2 = math.cos(2 * p.gamma * t), math.sin(2 * p.gamma * t)
        s5 = math.sin(5 * p.gamma * t)
        h = np.eye(6)
        h[0, 0] = (p.p1 + p.a * c2) / p.q1
        h[1, 1] = p.p2 / p.q2
        h[2, 2] = p.p3 / p.q3
        h[0, 2] = h[2, 0] = (p.b * c2 + p.c * s2) * s13
        h[1, 2] = h[2, 1] = p.g * s5 * s23
        return h

    return PeriodicCoefficient(
        period=2 * math.pi / abs(p.gamma),
        evaluator=evaluate,
        J=standard_structure_matrix(3),
        label="coupled-triple",
        params={k: float(v) for k, v in vars(p).items()},
    )


def sampled_hamiltonian(times, matrices, period: float, *, label: str = "sampled") -> PeriodicCoefficient:
    """
    Trigonometric interpolation of H(t) from M uniform samples t_k = kP/M on [0, P).

    Sample matrices must be symmetric; the interpolant is symmetrised on evaluation.
    """
    times = np.asarray(times, dtype=float)
    matrices = np.asarray(matrices, dtype=float)
    if matrices.ndim != 3 or matrices.shape[1] != matrices.shape[2] or matrices.shape[1] % 2:
        raise InvalidDimensionError(f"samples must be a stack of 2N×2N matrices, got {matrices.shape}")
    count = len(times)
    if count != len(matrices) or count < 2:
        raise InvalidParameterError("need at least two samples, one matrix per time")
    if not (math.isfinite(period) and period > 0):
        raise InvalidParameterError(f"period must be positive, got {period}")
    if not np.allclose(times, np.arange(count) * (period / count), rtol=0, atol=1e-9 * period):
        raise InvalidParameterError("sample times must be the uniform grid kP/M on [0, P)")
    asymmetry = np.abs(matrices - matrices.transpose(0, 2, 1)).max()
    if asymmetry > 1e-12 * max(1.0, np.abs(matrices).max()):
        raise InvalidParameterError(f"sample matrices are not symmetric (defect {asymmetry:.3g})")

    coefficients = np.fft.rfft(matrices, axis=0) / count
    weights = np.full(len(coefficients), 2.0)
    weights[0] = 1.0
    if count % 2 == 0:
        # Nyquist term is real and shared between ±M/2
        weights[-1] = 1.0
    weighted = coefficients * weights[:, None, None]
    omega = 2 * math.pi / period * np.arange(len(coefficients))

    def evaluate(t: float) -> np.ndarray:
        h = np.tensordot(np.exp(1j * omega * t), weighted, axes=1).real
        return 0.5 * (h + h.T)

    dimension = matrices.shape[1]
    return PeriodicCoefficient(
        period=float(period),
        evaluator=evaluate,
        J=standard_structure_matrix(dimension // 2),
        label=label,
        params={"period": float(period), "samples": float(count)},
    )


def load_samples(path: Union[str, Path]) -> Tuple[np.ndarray, np.ndarray]:
    """Read ``t, vec(H) row-major`` rows, the layout of the trajectory CSV export."""
    times, rows = [], []
    try:
        with open(path, newline="", encoding="utf-8") as file:
            reader = csv.reader(row for row in file if not row.startswith("#"))
            next(reader, None)
            for record in reader:
                if not record:
                    continue
                times.append(float(record[0]))
                rows.append([float(x) for x in record[1:]])
    except (OSError, ValueError) as e:
        raise ConfigError(f"cannot read samples from {path}: {e}") from e
    if not rows:
        raise ConfigError(f"{path} holds no samples")
    width = len(rows[0])
    dimension = math.isqrt(width)
    if dimension ** 2 != width:
        # trailing residual column of the trajectory layout is ignored
        dimension = math.isqrt(width - 1)
    if dimension ** 2 not in (width, width - 1) or any(len(r) != width for r in rows):
        raise ConfigError(f"{path} rows do not hold square matrices")
    matrices = np.array([r[: dimension ** 2] for r in rows]).reshape(-1, dimension, dimension)
    return np.array(times), matrices


@dataclass(frozen=True, eq=False)
class PerturbedCoefficient(PeriodicCoefficient):
    """H̃(t) = (I - uuᵀJ)ᵀ H(t) (I - uuᵀJ) for a base coefficient and an update."""

    base: Optional[PeriodicCoefficient] = None
    update: Optional[RankOneUpdate] = None

    def term(self, t: float) -> np.ndarray:
        """E(t) = H̃(t) - H(t)."""
        assert self.base is not None and self.update is not None
        return perturbation_term(self.update, self.base, t)


def _outer_terms(update: RankOneUpdate, base: PeriodicCoefficient) -> Tuple[np.ndarray, np.ndarray]:
    if update.dimension != base.dimension:
        raise InvalidDimensionError(
            f"update has dimension {update.dimension}, system has dimension {base.dimension}"
        )
    uu = np.outer(update.vector, update.vector)
    j = base.J.entries
    return j @ uu, uu @ j


def perturbation_term(update: RankOneUpdate, base: PeriodicCoefficient, t: float) -> np.ndarray:
    """E(t) = (JuuᵀH)ᵀ + JuuᵀH + (uuᵀJ)ᵀ H (uuᵀJ)."""
    juu, uuj = _outer_terms(update, base)
    h = base(t)
    linear = juu @ h
    return linear.T + linear + uuj.T @ h @ uuj


def perturbed_hamiltonian(update: RankOneUpdate, base: PeriodicCoefficient) -> PerturbedCoefficient:
    """The coefficient whose fundamental solutions are (I + uuᵀJ)X(t)."""
    _outer_terms(update, base)
    inverse = inverse_rank_one(update, base.J)

    def evaluate(t: float) -> np.ndarray:
        h = inverse.T @ base(t) @ inverse
        return 0.5 * (h + h.T)

    return PerturbedCoefficient(
        period=base.period,
        evaluator=evaluate,
        J=base.J,
        label=f"{base.label}+rank-one",
        params=base.params,
        base=base,
        update=update,
    )


def perturbation_magnitude(
    update: RankOneUpdate, base: PeriodicCoefficient, samples: int = SAMPLES_PER_PERIOD
) -> float:
    """max ‖E(t)‖ over a uniform grid of one period."""
    if update.is_zero:
        return 0.0
    return max(np.linalg.norm(perturbation_term(update, base, t), 2) for t in base.grid(samples))


def integral_distance(
    update: RankOneUpdate, base: PeriodicCoefficient, samples: int = SAMPLES_PER_PERIOD
) -> float:
    """∫₀ᴾ ‖E(t)‖ dt; the rectangle rule is the trapezoidal rule for a periodic integrand."""
    if update.is_zero:
        return 0.0
    norms = [np.linalg.norm(perturbation_term(update, base, t), 2) for t in base.grid(samples)]
    return float(np.sum(norms) * base.period / samples)


def _mathieu(params: Mapping[str, float]) -> PeriodicCoefficient:
    return mathieu_hamiltonian(MathieuParams(**params))


def _coupled_triple(params: Mapping[str, float]) -> PeriodicCoefficient:
    return coupled_triple_hamiltonian(CoupledTripleParams(**params))


def _sampled(params: Mapping[str, Union[float, str]]) -> PeriodicCoefficient:
    params = dict(params)
    path = params.pop("samples", None)
    period = params.pop("period", None)
    if path is None or period is None or params:
        raise InvalidParameterError("sampled systems take exactly 'samples' (a path) and 'period'")
    times, matrices = load_samples(str(path))
    return sampled_hamiltonian(times, matrices, float(period), label=f"sampled:{Path(str(path)).name}")


FAMILIES: Final[Dict[str, Callable[[Mapping], PeriodicCoefficient]]] = {
    "mathieu": _mathieu,
    "coupled-triple": _coupled_triple,
    "sampled": _sampled,
}


def build_system(family: str, params: Mapping[str, Union[float, str]]) -> PeriodicCoefficient:
    try:
        factory = FAMILIES[family]
    except KeyError:
        raise InvalidParameterError(
            f"unknown system family {family!r}; choose from {', '.join(FAMILIES)}"
        ) from None
    try:
        return factory(params)
    except TypeError as e:
        # missing or unexpected keyword for the parameter dataclass
        raise InvalidParameterError(f"bad parameters for {family}: {e}") from e
