import math
from dataclasses import replace

import numpy as np
import pytest

from floquet.errors import (
    InternalConsistencyError,
    InvalidArgumentError,
    InvalidDimensionError,
    NotApplicableError,
)
from floquet.integrator import monodromy
from floquet.spectral import (
    VERDICT_SCHEMA,
    Color,
    Kind,
    SpectralTolerances,
    decode_float,
    encode_float,
    gap_color,
    gap_kind,
    multipliers,
    spectral_split,
    strong_stability_verdict,
    verdict_from_dict,
    verdict_from_json,
    verdict_to_dict,
    verdict_to_json,
)
from floquet.symplectic import random_symplectic, standard_structure_matrix
from floquet.systems import MathieuParams, mathieu_hamiltonian

from .helpers import EDGE_A, EDGE_B, rotation, two_block_rotation

QUARTER = rotation(math.pi / 2)


@pytest.fixture(scope="module")
def J4():
    return standard_structure_matrix(2)


class TestMultipliers:
    def test_minus_identity(self, J2):
        records = multipliers(-np.eye(2), J2)
        assert len(records) == 2
        for record in records:
            assert record.value == pytest.approx(-1)
            assert record.multiplicity == 2
            assert record.semi_simple
            assert record.color is Color.MIXED
            assert record.kind is Kind.MIXED

    def test_quarter_rotation(self, J2):
        records = multipliers(QUARTER, J2)
        assert [r.value for r in records] == pytest.approx([-1j, 1j])
        assert {r.kind for r in records} == {Kind.FIRST, Kind.SECOND}
        assert sorted(r.kind_form for r in records) == pytest.approx([-1.0, 1.0])
        assert all(r.color is Color.RED for r in records)
        for record in records:
            assert record.modulus == abs(record.value)
            assert np.linalg.norm(record.eigenvector) == pytest.approx(1.0)

    def test_off_circle(self, J2):
        records = multipliers(np.diag([2.0, 0.5]), J2)
        assert sorted(r.modulus for r in records) == pytest.approx([0.5, 2.0])
        assert all(r.kind is Kind.OFF_CIRCLE and r.color is Color.OFF_CIRCLE for r in records)
        assert not any(r.on_circle for r in records)

    def test_defective_multiplier(self, J2):
        records = multipliers(np.array([[1.0, 1.0], [0.0, 1.0]]), J2)
        assert all(r.multiplicity == 2 and not r.semi_simple for r in records)

    def test_conjugate_pairs(self, stable_trajectory, J2):
        first, second = multipliers(stable_trajectory.final, J2)
        assert first.value == pytest.approx(second.value.conjugate(), abs=1e-12)
        assert first.color is second.color
        assert first.kind_form == pytest.approx(-second.kind_form, abs=1e-10)

    def test_reciprocal_pairs(self, rng):
        J = standard_structure_matrix(3)
        for _ in range(20):
            values = np.array([r.value for r in multipliers(random_symplectic(3, rng), J)])
            for value in values:
                assert np.abs(values - 1 / value).min() <= 1e-8 * max(1.0, abs(value))

    def test_singular(self, J2):
        with pytest.raises(InvalidArgumentError):
            multipliers(np.zeros((2, 2)), J2)

    def test_shape(self, J2):
        with pytest.raises(InvalidDimensionError):
            multipliers(np.eye(4), J2)

    def test_accepts_monodromy(self, rotation_system, config):
        records = multipliers(monodromy(rotation_system, config), rotation_system.J)
        assert all(r.value == pytest.approx(-1, abs=1e-10) for r in records)


class TestGaps:
    def test_quarter_rotation(self, J2):
        records = multipliers(QUARTER, J2)
        assert gap_kind(records) == pytest.approx(2.0)
        assert gap_color(records) == math.inf

    def test_mixed_gives_zero(self, J2):
        records = multipliers(-np.eye(2), J2)
        assert gap_kind(records) == 0
        assert gap_color(records) == 0

    def test_two_blocks(self, J4):
        records = multipliers(two_block_rotation(math.pi / 3, -math.pi / 4), J4)
        assert sum(r.color is Color.RED for r in records) == 2
        assert sum(r.color is Color.GREEN for r in records) == 2
        assert gap_color(records) == pytest.approx(2 * math.sin(math.pi / 24))

    def test_off_circle_not_applicable(self, J2):
        records = multipliers(np.diag([2.0, 0.5]), J2)
        with pytest.raises(NotApplicableError):
            gap_kind(records)
        with pytest.raises(NotApplicableError):
            gap_color(records)


class TestSplit:
    def test_all_red(self, J2):
        split = spectral_split(QUARTER, J2, multipliers(QUARTER, J2))
        assert np.allclose(split.P_r, np.eye(2), atol=1e-12)
        assert np.allclose(split.P_g, 0, atol=1e-12)
        assert split.completeness_residual <= 1e-12

    def test_two_blocks(self, J4):
        W = two_block_rotation(math.pi / 3, -math.pi / 4)
        split = spectral_split(W, J4, multipliers(W, J4))
        assert np.allclose(split.P_r, np.diag([1.0, 0.0, 1.0, 0.0]), atol=1e-12)
        assert np.allclose(split.P_g, np.diag([0.0, 1.0, 0.0, 1.0]), atol=1e-12)
        assert split.cross_residual <= 1e-12
        assert np.trace(split.P_r) + np.trace(split.P_g) == pytest.approx(4, abs=1e-8)
        assert split.idempotence_residual <= 1e-8
        assert split.commutation_residual <= 1e-8
        assert np.array_equal(split.S_r, split.S_r.T)
        assert np.linalg.eigvalsh(split.S_r).min() >= -1e-12
        assert np.linalg.eigvalsh(split.S_g).max() <= 1e-12

    def test_stable_mathieu(self, stable_trajectory, J2):
        W = stable_trajectory.final
        split = spectral_split(W, J2, multipliers(W, J2))
        assert split.completeness_residual <= 1e-8
        assert split.commutation_residual <= 1e-8

    def test_rejects_mixed(self, J2):
        with pytest.raises(NotApplicableError):
            spectral_split(-np.eye(2), J2, multipliers(-np.eye(2), J2))

    def test_rejects_off_circle(self, J2):
        W = np.diag([2.0, 0.5])
        with pytest.raises(NotApplicableError):
            spectral_split(W, J2, multipliers(W, J2))

    def test_conjugate_closure(self, J4):
        W = two_block_rotation(math.pi / 3, -math.pi / 4)
        records = multipliers(W, J4)
        # recolour one member of a conjugate pair
        flipped = Color.GREEN if records[0].color is Color.RED else Color.RED
        broken = [replace(records[0], color=flipped), *records[1:]]
        with pytest.raises(InternalConsistencyError):
            spectral_split(W, J4, broken)

    def test_record_count(self, J4):
        W = two_block_rotation(math.pi / 3, -math.pi / 4)
        with pytest.raises(InvalidDimensionError):
            spectral_split(W, J4, multipliers(W, J4)[:2])


class TestVerdict:
    def test_stable_mathieu(self, stable_trajectory, J2):
        verdict = strong_stability_verdict(stable_trajectory.final, J2, label="mathieu")
        assert verdict.stable
        assert verdict.strongly_stable
        assert abs(verdict.max_modulus - 1) <= 1e-6
        assert not verdict.failed
        assert verdict.label == "mathieu"

    def test_unstable_mathieu(self, unstable_trajectory, J2):
        verdict = strong_stability_verdict(unstable_trajectory.final, J2)
        assert not verdict.stable
        assert not verdict.strongly_stable
        assert verdict.max_modulus > 1 + 1e-6
        assert "unit_circle" in verdict.failed
        assert verdict.criterion("definiteness").value is None

    def test_point_below_fourth_tongue_is_stable(self, config):
        # b4(q = 2.5) ~ 16.19484, so a = 16.19166 lies in the stable band beneath it
        system = mathieu_hamiltonian(MathieuParams(EDGE_A, EDGE_B))
        W = monodromy(system, config)
        assert np.trace(W.matrix) == pytest.approx(1.999982009070946, abs=1e-6)
        verdict = strong_stability_verdict(W, system.J)
        assert verdict.stable
        assert verdict.strongly_stable
        assert abs(verdict.max_modulus - 1) <= 1e-9

    def test_minus_identity(self, J2):
        verdict = strong_stability_verdict(-np.eye(2), J2)
        assert verdict.stable
        assert not verdict.strongly_stable
        assert not verdict.criterion("no_mixed_color").passed
        assert verdict.delta_color == 0

    def test_quarter_rotation(self, J2):
        verdict = strong_stability_verdict(QUARTER, J2)
        assert verdict.strongly_stable
        assert verdict.delta_kgl == pytest.approx(2.0)
        assert verdict.delta_color == math.inf

    def test_two_blocks(self, J4):
        verdict = strong_stability_verdict(two_block_rotation(math.pi / 3, -math.pi / 4), J4)
        assert verdict.strongly_stable
        assert verdict.delta_color == pytest.approx(2 * math.sin(math.pi / 24))

    def test_gap_floor(self, J4):
        W = two_block_rotation(math.pi / 3, -math.pi / 4)
        verdict = strong_stability_verdict(W, J4, SpectralTolerances(gap_floor=1.0))
        assert verdict.stable
        assert not verdict.strongly_stable
        assert "color_gap" in verdict.failed
        assert verdict.criterion("definiteness").passed

    def test_defective(self, J2):
        verdict = strong_stability_verdict(np.array([[1.0, 1.0], [0.0, 1.0]]), J2)
        assert not verdict.stable
        assert "semi_simple" in verdict.failed

    def test_strong_implies_stable(self, rng):
        J = standard_structure_matrix(2)
        for _ in range(30):
            verdict = strong_stability_verdict(random_symplectic(2, rng), J)
            assert verdict.stable or not verdict.strongly_stable
            if verdict.strongly_stable:
                assert verdict.delta_color > 0
                assert all(r.color is not Color.MIXED for r in verdict.records)

    def test_tightening_circle_tolerance(self, stable_trajectory, unstable_trajectory, J2):
        for W in (stable_trajectory.final, unstable_trajectory.final):
            loose = strong_stability_verdict(W, J2, SpectralTolerances(circle_tolerance=1e-3))
            tight = strong_stability_verdict(W, J2, SpectralTolerances(circle_tolerance=1e-12))
            assert loose.stable or not tight.stable

    def test_invalid_tolerances(self):
        with pytest.raises(InvalidArgumentError):
            SpectralTolerances(circle_tolerance=-1.0)
        with pytest.raises(InvalidArgumentError):
            SpectralTolerances(s0_convention="other")


class TestVerdictDocument:
    def test_float_encoding(self):
        assert encode_float(math.inf) == "inf"
        assert encode_float(-math.inf) == "-inf"
        assert encode_float(0.5) == 0.5
        assert encode_float(None) is None
        assert decode_float("inf") == math.inf
        assert decode_float(None) is None

    @pytest.mark.parametrize("W", [QUARTER, -np.eye(2), np.diag([2.0, 0.5])])
    def test_json_reparses_equal(self, J2, W):
        verdict = strong_stability_verdict(W, J2, label="case")
        text = verdict_to_json(verdict)
        assert "Infinity" not in text and "NaN" not in text
        assert verdict_from_json(text) == verdict

    def test_schema(self, J2):
        document = verdict_to_dict(strong_stability_verdict(QUARTER, J2))
        assert document["schema"] == VERDICT_SCHEMA
        assert document["delta_color"] == "inf"
        assert [c["name"] for c in document["criteria"]] == [
            "unit_circle",
            "semi_simple",
            "kgl",
            "no_mixed_color",
            "color_gap",
            "definiteness",
            "projector",
        ]
        document["schema"] = "floquet.verdict/0"
        with pytest.raises(InvalidArgumentError):
            verdict_from_dict(document)

    def test_malformed(self, J2):
        document = verdict_to_dict(strong_stability_verdict(QUARTER, J2))
        del document["stable"]
        with pytest.raises(InvalidArgumentError):
            verdict_from_dict(document)
        with pytest.raises(InvalidArgumentError):
            verdict_from_json("{")
