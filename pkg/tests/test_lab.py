import math

import numpy as np
import pytest

from floquet import lab
from floquet.checks import match_spectra
from floquet.errors import (
    InternalConsistencyError,
    InvalidArgumentError,
    InvalidDimensionError,
    PropagationFailure,
)
from floquet.integrator import PropagationConfig, propagate
from floquet.lab import (
    DEFAULT_SCALES,
    PerturbationExperiment,
    canonical_perturbed,
    classify_by_form_identity,
    closed_form_perturbed,
    color_margin,
    form_identity_residual,
    integrate_perturbed,
    neighborhood_scan,
    phi_matrix,
    psi_series,
    recover_fundamental,
)
from floquet.spectral import Color, SpectralTolerances, multipliers
from floquet.symplectic import (
    RankOneUpdate,
    rank_one_matrix,
    random_symplectic,
    s0_matrix,
    standard_structure_matrix,
)

from .helpers import COUPLED_U, STABLE_U, UNSTABLE_U, rotation

QUARTER = rotation(math.pi / 2)


class TestExperiment:
    def test_defaults(self, stable_system):
        experiment = PerturbationExperiment(stable_system, RankOneUpdate(STABLE_U))
        assert experiment.scales == DEFAULT_SCALES == (1.0, 0.1, 0.01, 0.001)
        assert experiment.periods == 1

    @pytest.mark.parametrize("scales", [(), (-1.0,), (math.nan,), (1.0, math.inf)])
    def test_invalid_scales(self, stable_system, scales):
        with pytest.raises(InvalidArgumentError):
            PerturbationExperiment(stable_system, RankOneUpdate(STABLE_U), scales)

    @pytest.mark.parametrize("periods", [0, 1.5, True])
    def test_invalid_periods(self, stable_system, periods):
        with pytest.raises(InvalidArgumentError):
            PerturbationExperiment(stable_system, RankOneUpdate(STABLE_U), periods=periods)

    def test_dimension_mismatch(self, stable_system):
        with pytest.raises(InvalidDimensionError):
            PerturbationExperiment(stable_system, RankOneUpdate(COUPLED_U))


class TestClosedForm:
    def test_zero_update(self, stable_trajectory):
        assert closed_form_perturbed(stable_trajectory, RankOneUpdate.zero(2)) is stable_trajectory

    def test_initial_value(self, stable_trajectory):
        update = RankOneUpdate(STABLE_U)
        closed = closed_form_perturbed(stable_trajectory, update)
        assert np.array_equal(closed.matrices[0], rank_one_matrix(update))
        assert np.array_equal(closed.times, stable_trajectory.times)

    def test_stays_symplectic(self, stable_trajectory):
        closed = closed_form_perturbed(stable_trajectory, RankOneUpdate(STABLE_U))
        assert closed.max_residual <= 10 * stable_trajectory.max_residual + 1e-13

    def test_recover(self, stable_trajectory):
        update = RankOneUpdate(STABLE_U)
        recovered = recover_fundamental(closed_form_perturbed(stable_trajectory, update), update)
        assert np.allclose(recovered.matrices, stable_trajectory.matrices, rtol=0, atol=1e-13)

    def test_dimension_mismatch(self, stable_trajectory):
        with pytest.raises(InvalidDimensionError):
            closed_form_perturbed(stable_trajectory, RankOneUpdate(COUPLED_U))


class TestIntegrated:
    def test_zero_update_is_unperturbed(self, stable_system, config, stable_trajectory):
        integrated = integrate_perturbed(stable_system, RankOneUpdate.zero(2), config)
        assert np.array_equal(integrated.matrices, stable_trajectory.matrices)
        canonical = canonical_perturbed(stable_system, RankOneUpdate.zero(2), config)
        assert np.array_equal(canonical.matrices, stable_trajectory.matrices)

    def test_rotation_closed_form(self, rotation_system, config):
        update = RankOneUpdate((0.1, -0.2))
        integrated = integrate_perturbed(rotation_system, update, config)
        assert np.allclose(integrated.final, -rank_one_matrix(update), rtol=0, atol=1e-9)

    def test_stable_example_not_degraded(self, stable_system, config):
        integrated = integrate_perturbed(stable_system, RankOneUpdate(STABLE_U), config)
        assert not integrated.degraded

    def test_canonical_times_initial_value(self, stable_system, config):
        update = RankOneUpdate(STABLE_U)
        canonical = canonical_perturbed(stable_system, update, config)
        integrated = integrate_perturbed(stable_system, update, config)
        shifted = canonical.matrices @ rank_one_matrix(update)
        assert np.allclose(shifted, integrated.matrices, rtol=0, atol=1e-10)

    @pytest.mark.parametrize("system_name", ["stable_system", "coupled_system"])
    def test_canonical_multipliers_match(self, request, rng, system_name):
        system = request.getfixturevalue(system_name)
        config = PropagationConfig(steps_per_period=256)
        W = propagate(system, config, system.period).final
        reference = np.linalg.eigvals(W)
        for _ in range(20):
            update = RankOneUpdate(rng.uniform(-1, 1, system.dimension))
            canonical = canonical_perturbed(system, update, config)
            assert match_spectra(np.linalg.eigvals(canonical.final), reference) <= 1e-8


class TestPsi:
    def test_zero_update_is_exactly_zero(self, stable_system, config):
        experiment = PerturbationExperiment(stable_system, RankOneUpdate.zero(2), (1.0,), config)
        series = psi_series(experiment)
        assert series.psi_max == 0
        assert not series.psi.any()

    @pytest.mark.parametrize("scale", DEFAULT_SCALES)
    def test_stable_example(self, stable_system, config, stable_trajectory, scale):
        experiment = PerturbationExperiment(stable_system, RankOneUpdate(STABLE_U), config=config)
        series = psi_series(experiment, scale, stable_trajectory)
        assert series.scale == scale
        assert len(series.times) == len(stable_trajectory)
        assert (series.psi >= 0).all()
        assert series.psi_max == series.psi.max()
        assert series.psi_max <= 1e-10

    def test_unstable_example(self, unstable_system, config, unstable_trajectory):
        experiment = PerturbationExperiment(unstable_system, RankOneUpdate(UNSTABLE_U), config=config)
        assert psi_series(experiment, 1.0, unstable_trajectory).psi_max <= 1e-9

    def test_coupled_example(self, coupled_system, config):
        experiment = PerturbationExperiment(coupled_system, RankOneUpdate(COUPLED_U), config=config)
        series = psi_series(experiment)
        assert series.psi_max <= 1e-9

    def test_pointwise_reconstruction(self, stable_system, config, stable_trajectory):
        update = RankOneUpdate(STABLE_U)
        closed = closed_form_perturbed(stable_trajectory, update)
        integrated = integrate_perturbed(stable_system, update, config)
        assert np.allclose(closed.matrices, integrated.matrices, rtol=0, atol=1e-10)

    def test_several_periods(self, stable_system, config, stable_trajectory):
        experiment = PerturbationExperiment(stable_system, RankOneUpdate(STABLE_U), config=config, periods=3)
        series = psi_series(experiment, 1.0, stable_trajectory)
        assert series.times[-1] == pytest.approx(3 * math.pi)
        assert len(series.times) == 3 * 2048 + 1
        assert series.psi_max <= 1e-9

    def test_grid_mismatch(self, stable_system, config, monkeypatch):
        coarse = PropagationConfig(steps_per_period=64)
        monkeypatch.setattr(
            lab, "integrate_perturbed", lambda base, update, _config, t_end=None: propagate(base, coarse, base.period)
        )
        experiment = PerturbationExperiment(stable_system, RankOneUpdate(STABLE_U), config=config)
        with pytest.raises(InternalConsistencyError):
            psi_series(experiment)


class TestQuadraticForms:
    def test_phi_hand_example(self, J2):
        assert np.array_equal(phi_matrix(np.eye(2), RankOneUpdate((1.0, 0.0)), J2), [[0, 0], [0, -1]])

    def test_phi_transposed_hand_example(self, J2):
        phi = phi_matrix(np.eye(2), RankOneUpdate((1.0, 0.0)), J2, "transposed")
        assert np.array_equal(phi, [[-1, 0], [0, 0]])
        with pytest.raises(InvalidArgumentError):
            phi_matrix(np.eye(2), RankOneUpdate((1.0, 0.0)), J2, "other")

    def test_identity_hand_example(self, J2):
        update = RankOneUpdate((1.0, 0.0))
        y = np.array([0.0, 1.0])
        assert y @ s0_matrix(np.eye(2), J2) @ y == 0
        assert form_identity_residual(np.eye(2), update, y, J2) == 0

    def test_zero_update(self, rng):
        W = random_symplectic(2, rng)
        assert form_identity_residual(W, RankOneUpdate.zero(4), rng.standard_normal(4)) == 0

    @pytest.mark.parametrize("convention", ["definition", "transposed"])
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_identity_random(self, rng, n, convention):
        J = standard_structure_matrix(n)
        for _ in range(100):
            W = random_symplectic(n, rng)
            update = RankOneUpdate(rng.uniform(-1, 1, 2 * n))
            y = rng.standard_normal(2 * n)
            y /= np.linalg.norm(y)
            bound = 1e-13 * (1 + np.linalg.norm(W, 2) * float(update.vector @ update.vector))
            assert form_identity_residual(W, update, y, J, convention) <= bound

    def test_zero_vector(self, J2):
        with pytest.raises(InvalidArgumentError):
            form_identity_residual(np.eye(2), RankOneUpdate((1.0, 0.0)), np.zeros(2), J2)

    def test_classify_without_update(self, J2):
        for record in multipliers(QUARTER, J2):
            assert classify_by_form_identity(QUARTER, RankOneUpdate.zero(2), record.eigenvector, J2) is Color.RED

    def test_classify_agrees_with_color(self, J2, rng):
        for record in multipliers(QUARTER, J2):
            for _ in range(20):
                update = RankOneUpdate(rng.uniform(-0.3, 0.3, 2))
                assert classify_by_form_identity(QUARTER, update, record.eigenvector, J2) is record.color

    def test_classify_agrees_on_stable_monodromy(self, stable_trajectory, J2, rng):
        W = stable_trajectory.final
        for record in multipliers(W, J2):
            for _ in range(20):
                update = RankOneUpdate(rng.uniform(-1, 1, 2))
                assert classify_by_form_identity(W, update, record.eigenvector, J2) is record.color

    def test_classify_follows_transposed_convention(self, stable_trajectory, J2, rng):
        W = stable_trajectory.final
        tolerances = SpectralTolerances(s0_convention="transposed")
        records = multipliers(W, J2, tolerances)
        for record in records:
            for _ in range(20):
                update = RankOneUpdate(rng.uniform(-1, 1, 2))
                color = classify_by_form_identity(W, update, record.eigenvector, J2, convention="transposed")
                assert color is record.color
        S0 = s0_matrix(W, J2, "transposed")
        expected = min(abs(np.vdot(r.eigenvector, S0 @ np.array(r.eigenvector)).real) for r in records)
        assert color_margin(W, RankOneUpdate(STABLE_U), J2, tolerances) == pytest.approx(expected, abs=1e-10)

    @pytest.mark.parametrize("y", [(1.0, 0.0), (0.0, 1.0), (1.0, 1j)])
    def test_classify_minus_identity(self, J2, y):
        assert classify_by_form_identity(-np.eye(2), RankOneUpdate((0.4, -0.7)), y, J2) is Color.MIXED

    def test_classify_requires_eigenvector(self, J2):
        with pytest.raises(InvalidArgumentError):
            classify_by_form_identity(QUARTER, RankOneUpdate((0.1, 0.1)), (1.0, 0.0), J2)
        with pytest.raises(InvalidArgumentError):
            classify_by_form_identity(np.diag([2.0, 0.5]), RankOneUpdate((0.1, 0.1)), (1.0, 0.0), J2)

    def test_color_margin(self, stable_trajectory, J2):
        W = stable_trajectory.final
        margin = color_margin(W, RankOneUpdate(STABLE_U), J2)
        assert 0 < margin < math.inf
        assert color_margin(np.diag([2.0, 0.5]), RankOneUpdate(STABLE_U), J2) == math.inf


class TestNeighborhood:
    def test_stable_example(self, stable_system, config):
        report = neighborhood_scan(PerturbationExperiment(stable_system, RankOneUpdate(STABLE_U), config=config))
        assert report.unperturbed.strongly_stable
        assert [row.scale for row in report.rows] == [1.0, 0.1, 0.01, 0.001]
        assert all(row.stable for row in report.rows)
        assert all(row.psi_max <= 1e-10 for row in report.rows)
        assert report.completed
        assert report.largest_stable_scale == 1.0
        norms = [row.e_norm_max for row in report.rows]
        assert norms == sorted(norms, reverse=True)

    def test_unstable_example(self, unstable_system, config):
        report = neighborhood_scan(
            PerturbationExperiment(unstable_system, RankOneUpdate(UNSTABLE_U), config=config)
        )
        assert not report.unperturbed.stable
        assert not any(row.stable for row in report.rows)
        assert not any(row.matrix_verdict.stable for row in report.rows)
        assert report.largest_stable_scale is None

    def test_zero_scale(self, stable_system, config):
        report = neighborhood_scan(
            PerturbationExperiment(stable_system, RankOneUpdate(STABLE_U), (0.0,), config)
        )
        (row,) = report.rows
        assert row.e_norm_max == 0
        assert row.psi_max == 0
        assert row.verdict.stable == report.unperturbed.stable
        assert row.verdict.strongly_stable == report.unperturbed.strongly_stable

    def test_ascending_scales_are_sorted(self, stable_system, config):
        report = neighborhood_scan(
            PerturbationExperiment(stable_system, RankOneUpdate(STABLE_U), (0.01, 1.0, 0.1), config)
        )
        assert [row.scale for row in report.rows] == [1.0, 0.1, 0.01]

    def test_failed_row_is_recorded(self, stable_system, config, monkeypatch):
        real = lab.canonical_perturbed

        def failing(base, update, config, t_end=None):
            if update.scale == 1.0:
                raise PropagationFailure("stage solve diverged", step_index=7)
            return real(base, update, config, t_end)

        monkeypatch.setattr(lab, "canonical_perturbed", failing)
        report = neighborhood_scan(
            PerturbationExperiment(stable_system, RankOneUpdate(STABLE_U), (1.0, 0.1), config)
        )
        failed, ok = report.rows
        assert failed.error.startswith("PropagationFailure")
        assert failed.stable is None
        assert ok.error is None and ok.stable
        assert not report.completed
        assert report.largest_stable_scale == 0.1
