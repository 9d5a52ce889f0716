import math

import numpy as np
import pytest

from quadsense import montecarlo
from quadsense.errors import TailMassError, ValidationError
from quadsense.montecarlo import (
    fock_two_mode_squeezer_moments,
    quadrant_cell_sums,
    run_verification,
    sample_pair,
    sample_photocurrents,
    stimulated_fock_moments,
    thinning_loss,
)
from quadsense.source import FwmSourceParams, TwinBeamMoments, build_coherence_grid
from quadsense.source import fwm_moments

G2_IDEAL = TwinBeamMoments(2.0, 1.0, 6.0, 3.0, 4.0)


def test_zero_variance_cells_give_constant_samples():
    grid = build_coherence_grid(16.0, 16.0, 8.0, 64.0)
    m = TwinBeamMoments(5.0, 3.0, 0.0, 0.0, 0.0)
    batch = sample_photocurrents(grid, m, 100, seed=1)
    sums = quadrant_cell_sums(grid, m)
    for q in (1, 2, 3, 4):
        assert np.allclose(batch.probe[q], sums[q].mean_p)
        assert np.allclose(batch.conjugate[q], sums[q].mean_c)


def test_single_cell_moments_converge():
    # One cell holding the whole beam: empirical moments must match the
    # gain-two ideal moments within 5 standard errors.
    n = 1_000_000
    p, c = sample_pair(G2_IDEAL, n, seed=42)
    se_var_p = 6.0 * math.sqrt(2.0 / n)
    se_var_c = 3.0 * math.sqrt(2.0 / n)
    se_cov = math.sqrt((6.0 * 3.0 + 16.0) / n)
    assert abs(np.var(p) - 6.0) < 5 * se_var_p
    assert abs(np.var(c) - 3.0) < 5 * se_var_c
    assert abs(np.cov(p, c)[0, 1] - 4.0) < 5 * se_cov


def test_batches_are_worker_count_invariant():
    grid = build_coherence_grid(16.0, 16.0, 8.0, 64.0)
    n = (1 << 20) + 12345  # crosses a chunk boundary
    one = sample_photocurrents(grid, G2_IDEAL, n, seed=9, n_workers=1)
    eight = sample_photocurrents(grid, G2_IDEAL, n, seed=9, n_workers=8)
    for q in (1, 2, 3, 4):
        assert np.array_equal(one.probe[q], eight.probe[q])
        assert np.array_equal(one.conjugate[q], eight.conjugate[q])


def test_different_seeds_differ():
    p1, _ = sample_pair(G2_IDEAL, 1000, seed=1)
    p2, _ = sample_pair(G2_IDEAL, 1000, seed=2)
    assert not np.array_equal(p1, p2)


def test_grid_too_fine_for_sampling_is_rejected():
    grid = build_coherence_grid(360.0, 360.0, 0.5, 1600.0)
    with pytest.raises(ValidationError):
        sample_photocurrents(grid, G2_IDEAL, 10, seed=1)


def test_thinning_edge_cases():
    x = np.array([1.0, 2.0, 3.0])
    assert np.array_equal(thinning_loss(x, 1.0, seed=1), x)
    assert np.array_equal(thinning_loss(x, 0.0, seed=1), np.zeros(3))
    with pytest.raises(ValidationError):
        thinning_loss(x, 1.5, seed=1)


def test_thinning_matches_loss_map_in_bright_regime():
    from quadsense.optics import LossChannel, apply_loss

    # Bright scaling keeps the Gaussian intensity model exact; the loss map
    # sends the gain-two probe marginal to var = 2.0 at eta = 0.5, recovered
    # here after normalizing by the brightness.
    bright = 1e4
    m = TwinBeamMoments(2 * bright, bright, 6 * bright, 3 * bright, 4 * bright)
    n = 1_000_000
    p, _ = sample_pair(m, n, seed=3)
    thinned = thinning_loss(p, 0.5, seed=4)
    expected = apply_loss(m, LossChannel(0.5, 0.5))
    assert expected.var_p / bright == pytest.approx(2.0)
    se = expected.var_p * math.sqrt(2.0 / n)
    assert abs(np.var(thinned) - expected.var_p) < 5 * se
    assert abs(np.mean(thinned) - expected.mean_p) < 5 * math.sqrt(expected.var_p / n)


def test_fock_unit_gain_keeps_conjugate_dark():
    m = fock_two_mode_squeezer_moments(1.0, 1.0)
    assert m.mean_c == pytest.approx(0.0, abs=1e-12)
    assert m.cov == pytest.approx(0.0, abs=1e-12)
    assert m.mean_p == pytest.approx(1.0, rel=1e-10)


def test_fock_vacuum_seed_is_perfectly_number_correlated():
    m = fock_two_mode_squeezer_moments(1.2, 0.0)
    assert m.mean_p == pytest.approx(m.mean_c, rel=1e-10)
    assert m.mean_p == pytest.approx(0.2, rel=1e-8)
    assert m.var_p == pytest.approx(m.var_c, rel=1e-10)
    assert m.cov == pytest.approx(m.var_p, rel=1e-10)


def test_stimulated_fock_matches_closed_forms():
    for gain in (1.05, 1.2, 1.3):
        for seed_flux in (0.5, 1.0, 4.0):
            fock = stimulated_fock_moments(gain, seed_flux)
            analytic = fwm_moments(FwmSourceParams(gain=gain, seed_flux=seed_flux))
            assert fock.mean_p == pytest.approx(analytic.mean_p, rel=1e-6)
            assert fock.mean_c == pytest.approx(analytic.mean_c, rel=1e-6, abs=1e-9)
            assert fock.var_p == pytest.approx(analytic.var_p, rel=1e-6)
            assert fock.var_c == pytest.approx(analytic.var_c, rel=1e-6, abs=1e-9)
            assert fock.cov == pytest.approx(analytic.cov, rel=1e-6, abs=1e-9)


def test_fock_insufficient_truncation_raises():
    with pytest.raises(TailMassError):
        fock_two_mode_squeezer_moments(1.3, 2.0, truncation=5)


def test_fock_rejects_invalid_inputs():
    with pytest.raises(ValidationError):
        fock_two_mode_squeezer_moments(0.9, 1.0)
    with pytest.raises(ValidationError):
        fock_two_mode_squeezer_moments(1.2, -1.0)


def test_verification_suite_passes_quickly():
    checks = run_verification(n_samples=200_000, seed=77)
    names = {c.name for c in checks}
    assert {
        "fock_vs_closed_form",
        "thinning_vs_loss_map",
        "sampled_difference_noise",
        "snl_linearity",
        "quadrant_cell_sums",
        "cross_quadrant_independence",
        "worker_invariance",
        "quadrant_partition_balance",
    } <= names
    failed = [c.name for c in checks if not c.passed]
    assert not failed, f"verification checks failed: {failed}"
