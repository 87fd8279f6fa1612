"""
Eigen-analysis of monodromy matrices.

Multipliers on the unit circle are classified by kind, the sign of (iJx, x), and by
colour, the sign of (S₀x, x). Repeated multipliers are classified on their whole
eigenspace. The verdict reports each facet of strong stability separately so that a
failing system says why it fails.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Dict, Final, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from .errors import (
    InternalConsistencyError,
    InvalidArgumentError,
    InvalidDimensionError,
    NotApplicableError,
    SpectralFailure,
)
from .integrator import Monodromy
from .symplectic import (
    GramLabel,
    S0Convention,
    StructureMatrix,
    eigenspace_form,
    gram_color,
    gram_kind,
    s0_matrix,
)

__all__ = [
    "VERDICT_SCHEMA",
    "decode_float",
    "encode_float",
    "Color",
    "CriterionResult",
    "Kind",
    "MultiplierRecord",
    "SpectralSplit",
    "SpectralTolerances",
    "StabilityVerdict",
    "gap_color",
    "gap_kind",
    "multipliers",
    "spectral_split",
    "strong_stability_verdict",
    "verdict_from_dict",
    "verdict_from_json",
    "verdict_to_dict",
    "verdict_to_json",
]

LOG: Final = logging.getLogger("floquet.spectral")
VERDICT_SCHEMA: Final[str] = "floquet.verdict/1"
# imaginary residue tolerated in projectors assembled from conjugate-closed classes
PROJECTOR_IMAG_TOLERANCE: Final[float] = 1e-9


@dataclass(frozen=True)
class SpectralTolerances:
    circle_tolerance: float = 1e-6
    gap_floor: float = 1e-6
    cluster_radius: float = 1e-7
    rank_tolerance: float = 1e-8
    form_tolerance: float = 1e-8
    psd_tolerance: float = 1e-9
    projector_tolerance: float = 1e-8
    s0_convention: S0Convention = "definition"

    def __post_init__(self):
        for name, value in asdict(self).items():
            if name == "s0_convention":
                if value not in ("definition", "transposed"):
                    raise InvalidArgumentError(f"unknown S0 convention {value!r}")
            elif not (math.isfinite(value) and value >= 0):
                raise InvalidArgumentError(f"{name} must be finite and nonnegative, got {value}")


class Kind(Enum):
    FIRST = "first"
    SECOND = "second"
    MIXED = "mixed"
    OFF_CIRCLE = "off-circle"


class Color(Enum):
    RED = "red"
    GREEN = "green"
    MIXED = "mixed"
    OFF_CIRCLE = "off-circle"


_KINDS: Final = {GramLabel.POSITIVE: Kind.FIRST, GramLabel.NEGATIVE: Kind.SECOND, GramLabel.MIXED: Kind.MIXED}
_COLORS: Final = {GramLabel.POSITIVE: Color.RED, GramLabel.NEGATIVE: Color.GREEN, GramLabel.MIXED: Color.MIXED}


@dataclass(frozen=True)
class MultiplierRecord:
    value: complex
    modulus: float
    eigenvector: Tuple[complex, ...]
    kind: Kind
    color: Color
    kind_form: float
    color_form: float
    multiplicity: int = 1
    semi_simple: bool = True

    @property
    def on_circle(self) -> bool:
        return self.kind is not Kind.OFF_CIRCLE

    @property
    def angle(self) -> float:
        return math.atan2(self.value.imag, self.value.real)


def _matrix(W: Union[Monodromy, np.ndarray], J: StructureMatrix) -> np.ndarray:
    matrix = W.matrix if isinstance(W, Monodromy) else np.asarray(W, dtype=float)
    if matrix.shape != (J.dimension, J.dimension):
        raise InvalidDimensionError(f"W has shape {matrix.shape}, expected ({J.dimension}, {J.dimension})")
    if not np.isfinite(matrix).all():
        raise InvalidArgumentError("W has non-finite entries")
    return matrix


def _clusters(values: np.ndarray, radius: float) -> List[List[int]]:
    clusters: List[List[int]] = []
    for index, value in enumerate(values):
        for cluster in clusters:
            if abs(values[cluster[0]] - value) <= radius * max(1.0, abs(value)):
                cluster.append(index)
                break
        else:
            clusters.append([index])
    return clusters


def multipliers(
    W: Union[Monodromy, np.ndarray],
    J: StructureMatrix,
    tolerances: Optional[SpectralTolerances] = None,
) -> List[MultiplierRecord]:
    """
    All eigenpairs of W, sorted by argument then modulus.

    Unit-modulus multipliers are labelled by kind and colour; a cluster of repeated
    multipliers is labelled from the forms restricted to its eigenspace, and its
    members carry an orthonormal basis of that eigenspace as eigenvectors.
    """
    tolerances = tolerances or SpectralTolerances()
    matrix = _matrix(W, J)
    try:
        values, vectors = linalg.eig(matrix)
        singular = linalg.svdvals(matrix)
    except (linalg.LinAlgError, ValueError) as e:
        raise SpectralFailure(f"eigensolver failed: {e}") from e
    if singular[-1] == 0:
        raise InvalidArgumentError("W must be nonsingular")
    vectors = vectors / np.linalg.norm(vectors, axis=0)

    S0 = s0_matrix(matrix, J, tolerances.s0_convention)
    scale = max(1.0, float(np.linalg.norm(matrix, 2)))
    kind_tolerance = tolerances.form_tolerance * float(np.linalg.norm(J.entries, 2))
    color_tolerance = tolerances.form_tolerance * scale
    iJ = 1j * J.entries

    records: List[MultiplierRecord] = []
    for cluster in _clusters(values, tolerances.cluster_radius):
        size = len(cluster)
        members = values[cluster]
        if size == 1:
            x = vectors[:, cluster[0]]
            kind = gram_kind(x, J, kind_tolerance)
            color = gram_color(x, S0, color_tolerance)
            semi_simple = True
        else:
            center = members.mean()
            spread = float(np.abs(members - center).max())
            _, sv, vh = linalg.svd(matrix - center * np.eye(J.dimension))
            threshold = max(tolerances.rank_tolerance, 2 * spread) * scale
            geometric = int(np.count_nonzero(sv <= threshold))
            semi_simple = geometric >= size
            if not semi_simple:
                LOG.debug("multiplier %.6g: algebraic %d, geometric %d", center, size, geometric)
            basis = vh[-max(1, min(geometric, size)) :].conj().T
            kind = eigenspace_form(basis, iJ, kind_tolerance)
            color = eigenspace_form(basis, S0, color_tolerance)
        for position, index in enumerate(cluster):
            value = complex(values[index])
            modulus = abs(value)
            if semi_simple and size > 1:
                x = basis[:, position]
            else:
                x = vectors[:, index]
            on_circle = abs(modulus - 1) <= tolerances.circle_tolerance
            records.append(
                MultiplierRecord(
                    value=value,
                    modulus=modulus,
                    eigenvector=tuple(complex(z) for z in x),
                    kind=_KINDS[kind.label] if on_circle else Kind.OFF_CIRCLE,
                    color=_COLORS[color.label] if on_circle else Color.OFF_CIRCLE,
                    kind_form=kind.value,
                    color_form=color.value,
                    multiplicity=size,
                    semi_simple=semi_simple,
                )
            )
    records.sort(key=lambda r: (r.angle, r.modulus))
    return records


def _gap(records: Sequence[MultiplierRecord], attribute: str, first: Enum, second: Enum, mixed: Enum) -> float:
    labels = [getattr(r, attribute) for r in records]
    if any(r.kind is Kind.OFF_CIRCLE for r in records):
        raise NotApplicableError("gaps are defined for multipliers on the unit circle only")
    if mixed in labels:
        return 0.0
    ones = [r.value for r, label in zip(records, labels) if label is first]
    others = [r.value for r, label in zip(records, labels) if label is second]
    if not ones or not others:
        return math.inf
    return float(min(abs(x - y) for x in ones for y in others))


def gap_kind(records: Sequence[MultiplierRecord]) -> float:
    """Smallest distance between multipliers of the first and second kind."""
    return _gap(records, "kind", Kind.FIRST, Kind.SECOND, Kind.MIXED)


def gap_color(records: Sequence[MultiplierRecord]) -> float:
    """Smallest distance between red and green multipliers."""
    return _gap(records, "color", Color.RED, Color.GREEN, Color.MIXED)


@dataclass(frozen=True, eq=False)
class SpectralSplit:
    P_r: np.ndarray
    P_g: np.ndarray
    S_r: np.ndarray
    S_g: np.ndarray
    S0: np.ndarray
    completeness_residual: float
    cross_residual: float
    idempotence_residual: float
    commutation_residual: float


def _projector(V: np.ndarray, mask: np.ndarray) -> np.ndarray:
    # V D V⁻¹ as a solve against Vᵀ
    try:
        complex_projector = linalg.solve(V.T, (V * mask).T).T
    except (linalg.LinAlgError, ValueError) as e:
        raise SpectralFailure(f"eigenvector basis is singular: {e}") from e
    imaginary = float(np.abs(complex_projector.imag).max())
    if imaginary > PROJECTOR_IMAG_TOLERANCE * max(1.0, float(np.abs(complex_projector).max())):
        raise InternalConsistencyError(
            f"projector has imaginary part {imaginary:.3g}; colour classes are not closed under conjugation"
        )
    return complex_projector.real


def spectral_split(
    W: Union[Monodromy, np.ndarray],
    J: StructureMatrix,
    records: Sequence[MultiplierRecord],
    convention: S0Convention = "definition",
) -> SpectralSplit:
    """Spectral projectors onto the red and green invariant subspaces, and S₀ restricted to them."""
    matrix = _matrix(W, J)
    if len(records) != J.dimension:
        raise InvalidDimensionError(f"expected {J.dimension} records, got {len(records)}")
    unusable = [r for r in records if r.color not in (Color.RED, Color.GREEN)]
    if unusable:
        raise NotApplicableError(
            f"{len(unusable)} multiplier(s) are mixed or off the unit circle; no red/green split"
        )
    V = np.array([r.eigenvector for r in records]).T
    red = np.array([r.color is Color.RED for r in records], dtype=float)
    P_r = _projector(V, red)
    P_g = _projector(V, 1 - red)
    S0 = s0_matrix(matrix, J, convention)
    S_r = P_r.T @ S0 @ P_r
    S_g = P_g.T @ S0 @ P_g
    identity = np.eye(J.dimension)

    def norm(m: np.ndarray) -> float:
        return float(np.linalg.norm(m, 2))

    return SpectralSplit(
        P_r=P_r,
        P_g=P_g,
        S_r=0.5 * (S_r + S_r.T),
        S_g=0.5 * (S_g + S_g.T),
        S0=S0,
        completeness_residual=norm(P_r + P_g - identity),
        cross_residual=norm(P_r.T @ S0 @ P_g),
        idempotence_residual=max(norm(P_r @ P_r - P_r), norm(P_g @ P_g - P_g)),
        commutation_residual=max(norm(P_r @ matrix - matrix @ P_r), norm(P_g @ matrix - matrix @ P_g)),
    )


@dataclass(frozen=True)
class CriterionResult:
    name: str
    passed: bool
    value: Optional[float]
    bound: Optional[float]
    detail: str = ""


@dataclass(frozen=True)
class StabilityVerdict:
    stable: bool
    strongly_stable: bool
    delta_kgl: float
    delta_color: float
    max_modulus: float
    criteria: Tuple[CriterionResult, ...]
    tolerances: SpectralTolerances = field(default_factory=SpectralTolerances)
    records: Tuple[MultiplierRecord, ...] = ()
    label: str = ""

    def criterion(self, name: str) -> CriterionResult:
        for result in self.criteria:
            if result.name == name:
                return result
        raise KeyError(name)

    @property
    def failed(self) -> List[str]:
        return [c.name for c in self.criteria if not c.passed]


def strong_stability_verdict(
    W: Union[Monodromy, np.ndarray],
    J: StructureMatrix,
    tolerances: Optional[SpectralTolerances] = None,
    *,
    label: str = "",
) -> StabilityVerdict:
    """
    Stability: every multiplier on the unit circle and semi-simple. Strong stability
    additionally asks for no mixed colour, a colour gap above ``gap_floor``, definite
    restrictions S_r ⪰ 0 ⪰ S_g, and a clean projector split.
    """
    tolerances = tolerances or SpectralTolerances()
    matrix = _matrix(W, J)
    if not label and isinstance(W, Monodromy):
        label = W.label
    records = multipliers(matrix, J, tolerances)
    on_circle = [r for r in records if r.on_circle]
    max_modulus = max(r.modulus for r in records)
    deviation = max(abs(r.modulus - 1) for r in records)

    unit_circle = CriterionResult(
        "unit_circle", len(on_circle) == len(records), deviation, tolerances.circle_tolerance,
        f"{len(records) - len(on_circle)} multiplier(s) off the unit circle",
    )
    defective = {r.value for r in on_circle if not r.semi_simple}
    semi_simple = CriterionResult(
        "semi_simple", not defective, float(len(defective)), 0.0,
        f"{len(defective)} defective unit-circle multiplier(s)",
    )
    stable = unit_circle.passed and semi_simple.passed

    delta_kgl = gap_kind(on_circle) if on_circle else math.inf
    delta_color = gap_color(on_circle) if on_circle else math.inf
    mixed_kind = sum(r.kind is Kind.MIXED for r in on_circle)
    mixed_color = sum(r.color is Color.MIXED for r in on_circle)
    kgl = CriterionResult(
        "kgl", mixed_kind == 0 and delta_kgl > tolerances.gap_floor, delta_kgl, tolerances.gap_floor,
        f"{mixed_kind} mixed-kind multiplier(s); informational",
    )
    no_mixed = CriterionResult(
        "no_mixed_color", mixed_color == 0, float(mixed_color), 0.0,
        f"{mixed_color} mixed-colour multiplier(s)",
    )
    color_gap = CriterionResult(
        "color_gap", delta_color > tolerances.gap_floor, delta_color, tolerances.gap_floor,
        "smallest red/green distance",
    )

    if stable and mixed_color == 0:
        definiteness, projector = _split_criteria(matrix, J, records, tolerances)
    else:
        reason = "not applicable: unstable or mixed colour"
        definiteness = CriterionResult("definiteness", False, None, None, reason)
        projector = CriterionResult("projector", False, None, None, reason)

    criteria = (unit_circle, semi_simple, kgl, no_mixed, color_gap, definiteness, projector)
    strongly_stable = stable and all(c.passed for c in (no_mixed, color_gap, definiteness, projector))
    verdict = StabilityVerdict(
        stable=stable,
        strongly_stable=strongly_stable,
        delta_kgl=delta_kgl,
        delta_color=delta_color,
        max_modulus=max_modulus,
        criteria=criteria,
        tolerances=tolerances,
        records=tuple(records),
        label=label,
    )
    LOG.info(
        "%s: stable=%s strongly_stable=%s max|λ|=%.12g δ_S=%.6g",
        label or "W",
        stable,
        strongly_stable,
        max_modulus,
        delta_color,
    )
    return verdict


def _split_criteria(
    matrix: np.ndarray,
    J: StructureMatrix,
    records: Sequence[MultiplierRecord],
    tolerances: SpectralTolerances,
) -> Tuple[CriterionResult, CriterionResult]:
    try:
        split = spectral_split(matrix, J, records, tolerances.s0_convention)
    except (SpectralFailure, InternalConsistencyError) as e:
        LOG.warning("spectral split failed: %s", e)
        return (
            CriterionResult("definiteness", False, None, None, str(e)),
            CriterionResult("projector", False, None, None, str(e)),
        )
    psd_tol = tolerances.psd_tolerance * float(np.linalg.norm(split.S0, 2))
    red_min = float(linalg.eigvalsh(split.S_r)[0])
    green_max = float(linalg.eigvalsh(split.S_g)[-1])
    difference = split.S_r - split.S_g
    separation = float(linalg.eigvalsh(0.5 * (difference + difference.T))[0])
    definiteness = CriterionResult(
        "definiteness",
        red_min >= -psd_tol and green_max <= psd_tol and separation > psd_tol,
        separation,
        psd_tol,
        f"λmin(S_r)={red_min:.3g}, λmax(S_g)={green_max:.3g}",
    )
    bound = tolerances.projector_tolerance * max(1.0, float(np.linalg.norm(split.S0, 2)))
    worst = max(split.completeness_residual, split.cross_residual)
    projector = CriterionResult(
        "projector",
        split.completeness_residual <= tolerances.projector_tolerance and split.cross_residual <= bound,
        worst,
        bound,
        f"completeness {split.completeness_residual:.3g}, cross {split.cross_residual:.3g}",
    )
    return definiteness, projector


def encode_float(value: Optional[float]) -> Any:
    if value is None or math.isfinite(value):
        return value
    return "inf" if value > 0 else "-inf"


def decode_float(value: Any) -> Optional[float]:
    if value is None:
        return None
    return float(value)


def _complex(value: complex) -> List[float]:
    return [value.real, value.imag]


def verdict_to_dict(verdict: StabilityVerdict) -> Dict[str, Any]:
    return {
        "schema": VERDICT_SCHEMA,
        "label": verdict.label,
        "stable": verdict.stable,
        "strongly_stable": verdict.strongly_stable,
        "delta_kgl": encode_float(verdict.delta_kgl),
        "delta_color": encode_float(verdict.delta_color),
        "max_modulus": verdict.max_modulus,
        "criteria": [
            {
                "name": c.name,
                "passed": c.passed,
                "value": encode_float(c.value),
                "bound": encode_float(c.bound),
                "detail": c.detail,
            }
            for c in verdict.criteria
        ],
        "multipliers": [
            {
                "value": _complex(r.value),
                "modulus": r.modulus,
                "kind": r.kind.value,
                "color": r.color.value,
                "kind_form": r.kind_form,
                "color_form": r.color_form,
                "multiplicity": r.multiplicity,
                "semi_simple": r.semi_simple,
                "eigenvector": [_complex(z) for z in r.eigenvector],
            }
            for r in verdict.records
        ],
        "tolerances": asdict(verdict.tolerances),
    }


def verdict_from_dict(document: Dict[str, Any]) -> StabilityVerdict:
    if document.get("schema") != VERDICT_SCHEMA:
        raise InvalidArgumentError(f"unsupported verdict schema {document.get('schema')!r}")
    try:
        return StabilityVerdict(
            stable=bool(document["stable"]),
            strongly_stable=bool(document["strongly_stable"]),
            delta_kgl=float(document["delta_kgl"]),
            delta_color=float(document["delta_color"]),
            max_modulus=float(document["max_modulus"]),
            criteria=tuple(
                CriterionResult(
                    name=c["name"],
                    passed=bool(c["passed"]),
                    value=decode_float(c["value"]),
                    bound=decode_float(c["bound"]),
                    detail=c["detail"],
                )
                for c in document["criteria"]
            ),
            tolerances=SpectralTolerances(**document["tolerances"]),
            records=tuple(
                MultiplierRecord(
                    value=complex(*r["value"]),
                    modulus=float(r["modulus"]),
                    eigenvector=tuple(complex(*z) for z in r["eigenvector"]),
                    kind=Kind(r["kind"]),
                    color=Color(r["color"]),
                    kind_form=float(r["kind_form"]),
                    color_form=float(r["color_form"]),
                    multiplicity=int(r["multiplicity"]),
                    semi_simple=bool(r["semi_simple"]),
                )
                for r in document["multipliers"]
            ),
            label=document.get("label", ""),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidArgumentError(f"malformed verdict document: {e}") from e


def verdict_to_json(verdict: StabilityVerdict) -> str:
    return json.dumps(verdict_to_dict(verdict), indent=2, allow_nan=False) + "\n"


def verdict_from_json(text: str) -> StabilityVerdict:
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise InvalidArgumentError(f"verdict is not valid JSON: {e}") from e
    return verdict_from_dict(document)
