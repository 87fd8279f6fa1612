"""
Matrix-level building blocks: the structure matrix J, rank-one symplectic updates
``I + uuᵀJ`` and their inverses, and the Hermitian forms used to classify multipliers.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Final, Iterable, Literal, Optional, Tuple

import numpy as np
from scipy import linalg

from .errors import InvalidArgumentError, InvalidDimensionError

__all__ = [
    "FORM_TOLERANCE",
    "GramLabel",
    "GramValue",
    "RankOneUpdate",
    "S0Convention",
    "StructureMatrix",
    "apply_rank_one",
    "eigenspace_form",
    "gram_color",
    "gram_kind",
    "hermitian_form",
    "inverse_rank_one",
    "random_symplectic",
    "rank_one_matrix",
    "s0_matrix",
    "standard_structure_matrix",
    "symplecticity_residual",
]

LOG: Final = logging.getLogger("floquet.symplectic")
# relative to the norm of the matrix defining the form
FORM_TOLERANCE: Final[float] = 1e-8

S0Convention = Literal["definition", "transposed"]


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def _check_square(matrix: np.ndarray, dimension: int, name: str) -> np.ndarray:
    matrix = np.asarray(matrix)
    if matrix.shape != (dimension, dimension):
        raise InvalidDimensionError(
            f"{name} has shape {matrix.shape}, expected ({dimension}, {dimension})"
        )
    return matrix


@dataclass(frozen=True, eq=False)
class StructureMatrix:
    """
    A real nonsingular skew-symmetric matrix J.

    ``standard`` marks the block form [[0, -I], [I, 0]], for which J⁻¹ = -J is applied
    symbolically instead of solving with J.
    """

    entries: np.ndarray
    standard: bool = False

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1] or entries.shape[0] % 2:
            raise InvalidDimensionError(f"J must be 2N×2N, got shape {entries.shape}")
        object.__setattr__(self, "entries", _frozen(entries))

    @property
    def dimension(self) -> int:
        return self.entries.shape[0]

    @property
    def half(self) -> int:
        return self.entries.shape[0] // 2

    def apply_inverse(self, matrix: np.ndarray) -> np.ndarray:
        """Return J⁻¹ @ matrix without forming J⁻¹."""
        if self.standard:
            return -(self.entries @ matrix)
        return linalg.solve(self.entries, matrix)

    def __repr__(self) -> str:
        return f"{type(self).__qualname__}(dimension={self.dimension}, standard={self.standard})"


@lru_cache(maxsize=None)
def standard_structure_matrix(n: int) -> StructureMatrix:
    """Block form [[0, -I_N], [I_N, 0]]."""
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidDimensionError(f"N must be a positive integer, got {n!r}")
    n = int(n)
    entries = np.zeros((2 * n, 2 * n))
    entries[:n, n:] = -np.eye(n)
    entries[n:, :n] = np.eye(n)
    return StructureMatrix(entries, standard=True)


@dataclass(frozen=True)
class RankOneUpdate:
    """The perturbation ``I + (s·u)(s·u)ᵀJ`` defined by a vector u and a scale s."""

    u: Tuple[float, ...]
    scale: float = 1.0
    _vector: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        u = tuple(float(x) for x in np.ravel(self.u))
        if not u:
            raise InvalidArgumentError("u must not be empty")
        if not all(np.isfinite(u)):
            raise InvalidArgumentError(f"u must be finite, got {u}")
        if not np.isfinite(self.scale) or self.scale < 0:
            raise InvalidArgumentError(f"scale must be finite and nonnegative, got {self.scale}")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "scale", float(self.scale))
        object.__setattr__(self, "_vector", _frozen(self.scale * np.array(u)))

    @classmethod
    def zero(cls, dimension: int) -> "RankOneUpdate":
        return cls((0.0,) * dimension)

    @property
    def vector(self) -> np.ndarray:
        return self._vector

    @property
    def dimension(self) -> int:
        return len(self.u)

    @property
    def is_zero(self) -> bool:
        return not self._vector.any()

    def scaled(self, factor: float) -> "RankOneUpdate":
        return type(self)(self.u, self.scale * factor)

    def isotropy(self, J: StructureMatrix) -> float:
        """uᵀJu; zero up to roundoff for every u since J is skew."""
        v = self._vector
        return float(v @ J.entries @ v)

    def check(self, J: StructureMatrix) -> None:
        if self.dimension != J.dimension:
            raise InvalidDimensionError(
                f"update has dimension {self.dimension}, J has dimension {J.dimension}"
            )


def _default_structure(update: RankOneUpdate, J: Optional[StructureMatrix]) -> StructureMatrix:
    if J is None:
        if update.dimension % 2:
            raise InvalidDimensionError(f"u has odd dimension {update.dimension}")
        J = standard_structure_matrix(update.dimension // 2)
    update.check(J)
    return J


def rank_one_matrix(update: RankOneUpdate, J: Optional[StructureMatrix] = None) -> np.ndarray:
    """I + uuᵀJ."""
    J = _default_structure(update, J)
    v = update.vector
    return np.eye(J.dimension) + np.outer(v, v @ J.entries)


def apply_rank_one(
    update: RankOneUpdate, W: np.ndarray, J: Optional[StructureMatrix] = None
) -> np.ndarray:
    """(I + uuᵀJ)W, J-symplectic whenever W is."""
    J = _default_structure(update, J)
    W = _check_square(W, J.dimension, "W")
    v = update.vector
    return W + np.outer(v, v @ J.entries @ W)


def inverse_rank_one(update: RankOneUpdate, J: Optional[StructureMatrix] = None) -> np.ndarray:
    """I - uuᵀJ, the exact inverse of I + uuᵀJ."""
    J = _default_structure(update, J)
    v = update.vector
    return np.eye(J.dimension) - np.outer(v, v @ J.entries)


def symplecticity_residual(W: np.ndarray, J: StructureMatrix) -> float:
    """‖WᵀJW - J‖ in the 2-norm."""
    W = _check_square(W, J.dimension, "W")
    return float(np.linalg.norm(W.T @ J.entries @ W - J.entries, 2))


def s0_matrix(
    W: np.ndarray, J: StructureMatrix, convention: S0Convention = "definition"
) -> np.ndarray:
    """
    The symmetric matrix S₀ = (JW + (JW)ᵀ)/2 used for the colour classification.

    ``convention="transposed"`` selects (WJ + (WJ)ᵀ)/2 instead, the other form
    found in the literature; the two differ in general.
    """
    W = _check_square(W, J.dimension, "W")
    if convention == "definition":
        product = J.entries @ W
    elif convention == "transposed":
        product = W @ J.entries
    else:
        raise InvalidArgumentError(f"unknown S0 convention {convention!r}")
    # A + Aᵀ is bitwise symmetric
    return 0.5 * (product + product.T)


class GramLabel(Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    MIXED = "mixed"


@dataclass(frozen=True)
class GramValue:
    value: float
    tolerance: float
    label: GramLabel

    @classmethod
    def classify(cls, value: float, tolerance: float) -> "GramValue":
        if value > tolerance:
            label = GramLabel.POSITIVE
        elif value < -tolerance:
            label = GramLabel.NEGATIVE
        else:
            label = GramLabel.MIXED
        return cls(float(value), float(tolerance), label)


def _nonzero_vector(x: Iterable[complex], dimension: int) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    if x.shape != (dimension,):
        raise InvalidDimensionError(f"vector has shape {x.shape}, expected ({dimension},)")
    if not x.any():
        raise InvalidArgumentError("the form is evaluated on a nonzero vector")
    return x


def hermitian_form(x: np.ndarray, M: np.ndarray) -> complex:
    """x*Mx; real whenever M is Hermitian."""
    return complex(np.vdot(x, M @ x))


def gram_kind(
    x: Iterable[complex], J: StructureMatrix, tolerance: Optional[float] = None
) -> GramValue:
    """
    (iJx, x). Positive marks the first kind, negative the second, anything within
    tolerance of zero the mixed kind. The tolerance is relative to ‖x‖².
    """
    x = _nonzero_vector(x, J.dimension)
    if tolerance is None:
        tolerance = FORM_TOLERANCE * float(np.linalg.norm(J.entries, 2))
    value = hermitian_form(x, 1j * J.entries)
    return GramValue.classify(value.real, tolerance * float(np.vdot(x, x).real))


def gram_color(
    x: Iterable[complex], S0: np.ndarray, tolerance: Optional[float] = None
) -> GramValue:
    """(S₀x, x). Positive marks red, negative green, anything within tolerance mixed."""
    S0 = np.asarray(S0)
    x = _nonzero_vector(x, S0.shape[0])
    if tolerance is None:
        tolerance = FORM_TOLERANCE * float(np.linalg.norm(S0, 2))
    value = hermitian_form(x, S0)
    return GramValue.classify(value.real, tolerance * float(np.vdot(x, x).real))


def eigenspace_form(Q: np.ndarray, M: np.ndarray, tolerance: float) -> GramValue:
    """
    The Hermitian form M restricted to the span of the orthonormal columns of Q.

    Definite restrictions are labelled by their sign and valued by the eigenvalue
    closest to zero. Indefinite or degenerate restrictions vanish on some vector of
    the subspace and are labelled mixed with value 0.
    """
    Q = np.asarray(Q, dtype=complex)
    restricted = Q.conj().T @ M @ Q
    restricted = 0.5 * (restricted + restricted.conj().T)
    eigenvalues = linalg.eigvalsh(restricted)
    if eigenvalues[0] > tolerance:
        return GramValue(float(eigenvalues[0]), tolerance, GramLabel.POSITIVE)
    if eigenvalues[-1] < -tolerance:
        return GramValue(float(eigenvalues[-1]), tolerance, GramLabel.NEGATIVE)
    return GramValue(0.0, tolerance, GramLabel.MIXED)


def random_symplectic(
    n: int, rng: np.random.Generator, *, factors: int = 2, spread: float = 0.5
) -> np.ndarray:
    """A J-symplectic matrix built from random rank-one updates applied to I."""
    J = standard_structure_matrix(n)
    W = np.eye(J.dimension)
    for _ in range(factors):
        W = apply_rank_one(RankOneUpdate(rng.uniform(-spread, spread, J.dimension)), W, J)
    return W
