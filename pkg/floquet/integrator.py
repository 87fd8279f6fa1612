"""
Fixed-step propagation of the fundamental solution of J·dX/dt = H(t)·X.

Gauss–Legendre collocation (orders 4 and 6) preserves the quadratic invariant XᵀJX
and is the default; the classical explicit Runge–Kutta method is kept as an
independent cross-check. Steps are uniform so that the unperturbed and perturbed
integrations share a grid.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache
from typing import Callable, Final, Optional, Tuple, Union

import numpy as np
from numpy.polynomial import Polynomial, legendre
from scipy import linalg

from .errors import InvalidArgumentError, InvalidDimensionError, PropagationFailure
from .symplectic import StructureMatrix, symplecticity_residual
from .systems import PeriodicCoefficient

__all__ = [
    "Method",
    "Monodromy",
    "PropagationConfig",
    "Trajectory",
    "extend_by_periodicity",
    "gauss_legendre_tableau",
    "monodromy",
    "propagate",
]

LOG: Final = logging.getLogger("floquet.integrator")
MIN_STEPS: Final[int] = 16


class Method(Enum):
    GAUSS4 = "gauss4"
    GAUSS6 = "gauss6"
    RK4 = "rk4"

    @classmethod
    def convert(cls, argument: Union[str, "Method"]) -> "Method":
        if isinstance(argument, cls):
            return argument
        try:
            return cls(str(argument).strip().lower())
        except ValueError:
            raise InvalidArgumentError(
                f"unknown method {argument!r}; choose from {', '.join(m.value for m in cls)}"
            ) from None

    @property
    def order(self) -> int:
        return {Method.GAUSS4: 4, Method.GAUSS6: 6, Method.RK4: 4}[self]

    @property
    def stages(self) -> int:
        return {Method.GAUSS4: 2, Method.GAUSS6: 3, Method.RK4: 4}[self]


@dataclass(frozen=True)
class PropagationConfig:
    steps_per_period: int = 2048
    method: Method = Method.GAUSS6
    newton_tolerance: float = 1e-13
    max_newton_iterations: int = 25
    residual_alarm: float = 1e-9

    def __post_init__(self):
        object.__setattr__(self, "method", Method.convert(self.method))
        if isinstance(self.steps_per_period, bool) or int(self.steps_per_period) != self.steps_per_period:
            raise InvalidArgumentError(f"steps_per_period must be an integer, got {self.steps_per_period!r}")
        object.__setattr__(self, "steps_per_period", int(self.steps_per_period))
        if self.steps_per_period < MIN_STEPS:
            raise InvalidArgumentError(
                f"steps_per_period must be at least {MIN_STEPS}, got {self.steps_per_period}"
            )
        if int(self.max_newton_iterations) < 1:
            raise InvalidArgumentError("max_newton_iterations must be positive")
        for name in ("newton_tolerance", "residual_alarm"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidArgumentError(f"{name} must be positive, got {value}")


@lru_cache(maxsize=None)
def gauss_legendre_tableau(stages: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Butcher tableau (A, b, c) of the s-stage Gauss–Legendre collocation method.

    c are the Gauss nodes on [0, 1], b the quadrature weights and
    A[i, j] = ∫₀^{c_i} ℓ_j where ℓ_j is the Lagrange polynomial of node j.
    """
    nodes, weights = legendre.leggauss(stages)
    c = (nodes + 1) / 2
    b = weights / 2
    a = np.empty((stages, stages))
    for j in range(stages):
        others = np.delete(c, j)
        # one stage: the basis is the constant 1
        numerator = Polynomial.fromroots(others) if others.size else Polynomial([1.0])
        lagrange = numerator / np.prod(c[j] - others)
        primitive = lagrange.integ()
        a[:, j] = primitive(c) - primitive(0.0)
    for array in (a, b, c):
        array.setflags(write=False)
    return a, b, c


@dataclass(frozen=True, eq=False)
class Trajectory:
    """X(t) on a time grid, with the symplecticity residual at every grid point."""

    times: np.ndarray
    matrices: np.ndarray
    residuals: np.ndarray
    config: PropagationConfig
    J: StructureMatrix
    period: Optional[float] = None
    label: str = ""

    @property
    def final(self) -> np.ndarray:
        return self.matrices[-1]

    @property
    def max_residual(self) -> float:
        return float(self.residuals.max())

    @property
    def degraded(self) -> bool:
        return self.max_residual > self.config.residual_alarm

    def determinants(self) -> np.ndarray:
        return np.linalg.det(self.matrices)

    def covers_one_period(self) -> bool:
        if self.period is None:
            return False
        return self.times[0] == 0 and abs(self.times[-1] - self.period) <= 1e-12 * self.period

    def __len__(self) -> int:
        return len(self.times)

    def __repr__(self) -> str:
        return (
            f"{type(self).__qualname__}(label={self.label!r}, points={len(self)}, "
            f"t_end={self.times[-1]:.6g}, max_residual={self.max_residual:.3g})"
        )


@dataclass(frozen=True, eq=False)
class Monodromy:
    """W = X(P) and where it came from."""

    matrix: np.ndarray
    residual: float
    period: float
    label: str = ""
    config: PropagationConfig = field(default_factory=PropagationConfig)
    trajectory: Optional[Trajectory] = field(default=None, repr=False)

    @property
    def degraded(self) -> bool:
        return self.residual > self.config.residual_alarm


Step = Callable[[np.ndarray, float, float, int], np.ndarray]


def _gauss_step(base: PeriodicCoefficient, config: PropagationConfig) -> Step:
    a, b, c = gauss_legendre_tableau(config.method.stages)
    stages = len(b)
    dimension = base.dimension
    identity = np.eye(stages * dimension)
    J = base.J

    def step(X: np.ndarray, t: float, h: float, index: int) -> np.ndarray:
        slopes = [J.apply_inverse(base(t + ci * h)) for ci in c]
        stage_matrix = identity - h * np.block(
            [[a[i, j] * slopes[i] for j in range(stages)] for i in range(stages)]
        )
        rhs = np.vstack([slope @ X for slope in slopes])
        try:
            factors = linalg.lu_factor(stage_matrix, check_finite=True)
        except (ValueError, np.linalg.LinAlgError) as e:
            raise PropagationFailure(f"stage system at step {index}: {e}", step_index=index) from e
        # Newton on a linear stage system; extra iterations act as iterative refinement
        bound = config.newton_tolerance * (1 + np.abs(rhs).max())
        K = np.zeros_like(rhs)
        residual = rhs
        for _ in range(config.max_newton_iterations):
            K += linalg.lu_solve(factors, residual)
            residual = rhs - stage_matrix @ K
            error = np.abs(residual).max()
            if error <= bound:
                break
        else:
            raise PropagationFailure(
                f"implicit stages did not converge at step {index} (residual {error:.3g})",
                step_index=index,
            )
        if not np.isfinite(K).all():
            raise PropagationFailure(f"non-finite stages at step {index}", step_index=index)
        increment = sum(b[i] * K[i * dimension : (i + 1) * dimension] for i in range(stages))
        return X + h * increment

    return step


def _rk4_step(base: PeriodicCoefficient, config: PropagationConfig) -> Step:
    J = base.J

    def step(X: np.ndarray, t: float, h: float, index: int) -> np.ndarray:
        start = J.apply_inverse(base(t))
        middle = J.apply_inverse(base(t + h / 2))
        end = J.apply_inverse(base(t + h))
        k1 = start @ X
        k2 = middle @ (X + h / 2 * k1)
        k3 = middle @ (X + h / 2 * k2)
        k4 = end @ (X + h * k3)
        result = X + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.isfinite(result).all():
            raise PropagationFailure(f"non-finite state at step {index}", step_index=index)
        return result

    return step


def _step_count(period: float, steps_per_period: int, t_end: float) -> int:
    return max(1, math.ceil(t_end * steps_per_period / period - 1e-9))


def propagate(
    base: PeriodicCoefficient,
    config: PropagationConfig,
    t_end: float,
    X0: Optional[np.ndarray] = None,
) -> Trajectory:
    """
    Integrate dX/dt = J⁻¹H(t)X from X(0) = X0 (default I) over [0, t_end] on a uniform
    grid of ``steps_per_period`` steps per period.
    """
    if not (math.isfinite(t_end) and t_end > 0):
        raise InvalidArgumentError(f"t_end must be positive, got {t_end}")
    dimension = base.dimension
    if X0 is None:
        X0 = np.eye(dimension)
    X0 = np.array(X0, dtype=float)
    if X0.shape != (dimension, dimension):
        raise InvalidDimensionError(f"X0 has shape {X0.shape}, expected ({dimension}, {dimension})")
    if np.linalg.matrix_rank(X0) < dimension:
        raise InvalidArgumentError("X0 must be nonsingular")

    count = _step_count(base.period, config.steps_per_period, t_end)
    times = np.linspace(0.0, t_end, count + 1)
    step = (_rk4_step if config.method is Method.RK4 else _gauss_step)(base, config)

    matrices = np.empty((count + 1, dimension, dimension))
    matrices[0] = X0
    X = X0
    for index in range(count):
        t = times[index]
        X = step(X, t, times[index + 1] - t, index)
        matrices[index + 1] = X
    residuals = np.array([symplecticity_residual(m, base.J) for m in matrices])
    trajectory = Trajectory(
        times=times,
        matrices=matrices,
        residuals=residuals,
        config=config,
        J=base.J,
        period=base.period,
        label=base.label,
    )
    if trajectory.degraded:
        LOG.warning(
            "%s: symplecticity residual %.3g exceeds %.3g (%s, %d steps/period)",
            base.label,
            trajectory.max_residual,
            config.residual_alarm,
            config.method.value,
            config.steps_per_period,
        )
    elif LOG.isEnabledFor(logging.DEBUG):
        LOG.debug(
            "%s: %d steps to t=%.6g, max residual %.3g", base.label, count, t_end, trajectory.max_residual
        )
    return trajectory


def monodromy(base: PeriodicCoefficient, config: PropagationConfig) -> Monodromy:
    """X(P) from the identity."""
    trajectory = propagate(base, config, base.period)
    return Monodromy(
        matrix=trajectory.final,
        residual=float(trajectory.residuals[-1]),
        period=base.period,
        label=base.label,
        config=config,
        trajectory=trajectory,
    )


def extend_by_periodicity(
    trajectory: Trajectory, W: Union[Monodromy, np.ndarray], n: int
) -> Trajectory:
    """
    Extend a one-period trajectory to [0, (n+1)P] through X(t + kP) = X(t)Wᵏ,
    without further integration.
    """
    if isinstance(n, bool) or int(n) != n or n < 0:
        raise InvalidArgumentError(f"n must be a nonnegative integer, got {n!r}")
    if not trajectory.covers_one_period():
        raise InvalidArgumentError("trajectory must cover exactly one period [0, P]")
    if n == 0:
        return trajectory
    matrix = W.matrix if isinstance(W, Monodromy) else np.asarray(W, dtype=float)
    dimension = trajectory.J.dimension
    if matrix.shape != (dimension, dimension):
        raise InvalidDimensionError(f"W has shape {matrix.shape}, expected ({dimension}, {dimension})")
    assert trajectory.period is not None
    period = trajectory.period

    head_times, head = trajectory.times[:-1], trajectory.matrices[:-1]
    times, matrices, residuals = [head_times], [head], [trajectory.residuals[:-1]]
    power = np.eye(dimension)
    for k in range(1, int(n) + 1):
        power = power @ matrix if k > 1 else matrix.copy()
        block = head @ power
        times.append(head_times + k * period)
        matrices.append(block)
        residuals.append(np.array([symplecticity_residual(m, trajectory.J) for m in block]))
    last = trajectory.matrices[-1] @ power
    times.append(np.array([(n + 1) * period]))
    matrices.append(last[None])
    residuals.append(np.array([symplecticity_residual(last, trajectory.J)]))
    return replace(
        trajectory,
        times=np.concatenate(times),
        matrices=np.concatenate(matrices),
        residuals=np.concatenate(residuals),
        period=period,
    )
