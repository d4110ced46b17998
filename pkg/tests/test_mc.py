import math

import numpy as np
import pytest

from conftest import LorentzianResponse, line_array
from sensing.estimation import FieldModel, TubeArray, crlb, fim_array
from sensing.mc import (
    ShotRecord,
    crlb_saturation_study,
    estimable_parameters,
    log_likelihood,
    make_rng,
    mle,
    simulate_shots,
)
from service.errors import DomainError

TRUTH = FieldModel(0.005, 0.003, 0.0)


def test_streams_are_reproducible(lorentzian, small_line):
    first = simulate_shots(small_line, TRUTH, lorentzian, 1000, seed=11, stream=3)
    again = simulate_shots(small_line, TRUTH, lorentzian, 1000, seed=11, stream=3)
    other = simulate_shots(small_line, TRUTH, lorentzian, 1000, seed=11, stream=4)
    assert np.array_equal(first.counts, again.counts)
    assert not np.array_equal(first.counts, other.counts)
    assert make_rng(5, 1).random() == make_rng(5, 1).random()


def test_counts_follow_binomial_mean(lorentzian, small_line):
    N, streams = 200, 400
    T, _, _ = lorentzian.evaluate(TRUTH.local_fields(small_line))
    counts = np.array([simulate_shots(small_line, TRUTH, lorentzian, N, 1, s).counts for s in range(streams)])
    sigma = np.sqrt(N * T * (1 - T) / streams)
    assert np.all(np.abs(counts.mean(axis=0) - N * T) < 4 * sigma)


def test_simulation_requires_shots(lorentzian, small_line):
    with pytest.raises(DomainError):
        simulate_shots(small_line, TRUTH, lorentzian, 0, seed=1)


def test_shot_record_validation():
    with pytest.raises(DomainError):
        ShotRecord([3, 11], N=10, rng_seed=0)
    with pytest.raises(DomainError):
        ShotRecord([-1, 2], N=10, rng_seed=0)


def test_log_likelihood_without_shots_is_zero(lorentzian, small_line):
    record = ShotRecord(np.zeros(small_line.size), N=0, rng_seed=0)
    assert log_likelihood(record, small_line, TRUTH, lorentzian) == 0.0


def test_log_likelihood_peaks_at_truth_for_noiseless_counts(lorentzian, small_line):
    N = 1_000_000
    T, _, _ = lorentzian.evaluate(TRUTH.local_fields(small_line))
    record = ShotRecord(np.round(N * T), N, rng_seed=0)
    at_truth = log_likelihood(record, small_line, TRUTH, lorentzian)
    shifted = log_likelihood(record, small_line, FieldModel(0.006, 0.003, 0.0), lorentzian)
    assert at_truth > shifted


def test_mle_recovers_truth_from_noiseless_counts(lorentzian, small_line):
    N = 1_000_000
    T, _, _ = lorentzian.evaluate(TRUTH.local_fields(small_line))
    record = ShotRecord(np.round(N * T), N, rng_seed=0)
    sigmas = crlb(fim_array(small_line, TRUTH, lorentzian), N, ("B0", "Bx")).uncertainties
    bounds = [(TRUTH.B0 - 8 * sigmas[0], TRUTH.B0 + 8 * sigmas[0]), (TRUTH.Bx - 8 * sigmas[1], TRUTH.Bx + 8 * sigmas[1])]
    estimate = mle(record, small_line, lorentzian, TRUTH, bounds)
    assert estimate.params == ("B0", "Bx")
    assert estimate.gamma_hat.B0 == pytest.approx(TRUTH.B0, abs=0.05 * sigmas[0])
    assert estimate.gamma_hat.Bx == pytest.approx(TRUTH.Bx, abs=0.05 * sigmas[1])
    assert estimate.gamma_hat.By == TRUTH.By
    assert estimate.loglik >= log_likelihood(record, small_line, TRUTH, lorentzian) - 1e-6


def test_mle_rejects_bad_bounds(lorentzian, small_line):
    record = simulate_shots(small_line, TRUTH, lorentzian, 100, seed=1)
    with pytest.raises(DomainError):
        mle(record, small_line, lorentzian, TRUTH, [(0.0, 0.01)])
    with pytest.raises(DomainError):
        mle(record, small_line, lorentzian, TRUTH, [(0.01, 0.01), (0.0, 0.01)])


def test_single_row_drops_vertical_gradient(lorentzian):
    array = TubeArray.grid(3, 1, 1.0e6)
    assert estimable_parameters(array, fim_array(array, TRUTH, lorentzian)) == ("B0", "Bx")


def test_single_tube_estimates_only_offset(lorentzian):
    array = line_array(1)
    assert estimable_parameters(array, fim_array(array, TRUTH, lorentzian)) == ("B0",)


def test_study_requires_two_trials(lorentzian, small_line):
    with pytest.raises(DomainError):
        crlb_saturation_study(small_line, TRUTH, lorentzian, N_list=(100,), trials=1)


def test_study_attaches_covariance_and_bound(lorentzian, small_line):
    study = crlb_saturation_study(small_line, TRUTH, lorentzian, N_list=(500,), trials=12, seed=3, bootstrap=0)
    cov = study.covariances[500]
    assert cov.shape == (2, 2)
    assert np.allclose(cov, cov.T)
    assert np.linalg.eigvalsh(cov).min() >= -1e-12 * np.trace(cov)
    for estimate in study.estimates[500]:
        assert estimate.empirical_cov is cov
        assert estimate.crlb_ref.params == ("B0", "Bx")
        assert estimate.crlb_ref.uncertainties == pytest.approx(
            crlb(fim_array(small_line, TRUTH, lorentzian), 500, ("B0", "Bx")).uncertainties
        )
    assert all(math.isnan(row.ci_lo) for row in study.rows)


def test_study_is_deterministic(lorentzian, small_line):
    first = crlb_saturation_study(small_line, TRUTH, lorentzian, N_list=(500,), trials=4, seed=9, bootstrap=0)
    second = crlb_saturation_study(small_line, TRUTH, lorentzian, N_list=(500,), trials=4, seed=9, bootstrap=0)
    assert np.array_equal(first.covariances[500], second.covariances[500])
    assert [row.ratio for row in first.rows] == [row.ratio for row in second.rows]


@pytest.mark.slow
def test_variance_approaches_bound_for_many_shots():
    response = LorentzianResponse(0.0123, 0.02)
    study = crlb_saturation_study(
        line_array(5),
        TRUTH,
        response,
        N_list=(1000, 10000),
        trials=500,
        seed=20180101,
        bootstrap=200,
    )
    assert study.params == ("B0", "Bx")
    assert len(study.rows) == 4
    for row in study.rows:
        assert row.ratio >= 0.8
        assert row.ci_lo <= row.ratio <= row.ci_hi
        assert math.isfinite(row.bias)
        assert row.lr_median < 5.0
        assert row.converged > 0.9 * row.trial_count
    for row in study.rows[-2:]:
        assert row.ratio < 1.25
    for cov in study.covariances.values():
        assert np.linalg.eigvalsh(cov).min() >= -1e-12 * np.trace(cov)
