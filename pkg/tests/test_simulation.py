import math

import numpy as np
import pytest
from scipy import integrate

from cepfda.errors import InvalidArgumentError
from cepfda.simulation import (
    METHODS,
    Ar2GroupSpec,
    ExperimentConfig,
    ExperimentReport,
    analytic_ma1_cepstrum,
    analytic_ma1_group_moments,
    ar2_log_spectrum,
    gen_conditional_ar2,
    gen_conditional_ma1,
    ma1_log_spectrum,
    study_group_specs,
    run_experiment,
    simulate_ar2,
    simulate_ma1,
    study_settings,
)
from cepfda.cepstral import cepstral_matrix


def _acf(X, h):
    X = X - X.mean(axis=1, keepdims=True)
    return np.sum(X[:, h:] * X[:, :-h], axis=1) / np.sum(X * X, axis=1)


def _autocov(X, h):
    return np.mean(X[:, h:] * X[:, :-h], axis=1)


class TestMA1Generator:
    def test_white_noise_range(self, rng):
        X, theta = simulate_ma1(1.0, (0.0, 0.0), 500, 500, rng)
        assert np.all(theta == 0)
        assert abs(np.mean(_acf(X, 1))) < 0.02

    def test_fixed_theta_lag1(self, rng):
        X, _ = simulate_ma1(1.0, (0.5, 0.5), 500, 500, rng)
        assert abs(np.mean(_acf(X, 1)) - 0.4) < 0.02

    @pytest.mark.parametrize("h", [2, 3, 5])
    def test_no_autocovariance_beyond_lag_one(self, rng, h):
        X, _ = simulate_ma1(1.0, (0.0, 1.0), 500, 500, rng)
        assert abs(np.mean(_autocov(X, h))) < 0.02

    def test_variance(self, rng):
        X, theta = simulate_ma1(2.0, (0.2, 0.8), 400, 400, rng)
        assert abs(np.mean(X**2) - 2.0 * np.mean(1 + theta**2)) < 0.05

    @pytest.mark.parametrize("rng_range", [(-0.1, 0.5), (0.5, 0.2), (0.3, 1.2)])
    def test_invalid_range(self, rng, rng_range):
        with pytest.raises(InvalidArgumentError):
            simulate_ma1(1.0, rng_range, 3, 16, rng)

    def test_epochs(self, rng):
        eps = gen_conditional_ma1(1.0, (0, 1), 4, 32, rng, group="g")
        assert len(eps) == 4 and eps[0].group == "g" and eps[0].N == 32


class TestAR2Generator:
    def test_corner_check(self):
        with pytest.raises(InvalidArgumentError):
            Ar2GroupSpec((0.5, 1.2), (0.0, 0.1))
        with pytest.raises(InvalidArgumentError):
            Ar2GroupSpec((0.0, 0.1), (-1.0, -0.5))
        with pytest.raises(InvalidArgumentError):
            Ar2GroupSpec((0.0, 0.1), (0.0, 0.1), (0.0, 1.0))
        Ar2GroupSpec((1.4, 1.4), (-0.75, -0.75))

    def test_study_groups_are_stationary(self):
        specs = study_group_specs((0.1, 10.0))
        assert len(specs) == 3 and all(s.sigma2 == (0.1, 10.0) for s in specs)
        assert len(list(study_settings())) == 27

    def test_degenerate_is_white_noise(self, rng):
        X = simulate_ar2(Ar2GroupSpec((0, 0), (0, 0), (1.0, 1.0)), 200, 500, rng)
        assert abs(X.var() - 1.0) < 0.05

    @pytest.mark.parametrize("phi", [(0.5, -0.3), (1.2, -0.3), (-0.4, 0.2)])
    def test_spectrum_integral_matches_sample_variance(self, rng, phi):
        p1, p2 = phi
        X = simulate_ar2(Ar2GroupSpec((p1, p1), (p2, p2), (1.0, 1.0)), 200, 2000, rng)
        spec_var = np.mean(np.exp(ar2_log_spectrum(p1, p2, 1.0, 1 << 14)))
        gamma0 = (1 - p2) / ((1 + p2) * ((1 - p2) ** 2 - p1**2))
        assert abs(spec_var - gamma0) < 1e-10
        assert abs(X.var() / spec_var - 1) < 0.02

    def test_log_spectrum_values(self):
        np.testing.assert_array_equal(ar2_log_spectrum(0, 0, 1.0, 16), 0.0)
        assert math.isclose(ar2_log_spectrum(0.5, 0, 1.0, [0.0])[0], math.log(4), rel_tol=1e-14)
        with pytest.raises(InvalidArgumentError):
            ar2_log_spectrum(1.0, 0.5, 1.0, 8)

    def test_burn_in_removes_start_up(self, rng):
        spec = Ar2GroupSpec((1.5, 1.5), (-0.75, -0.75))
        X = simulate_ar2(spec, 400, 40, rng)
        v = X.var(axis=0)
        assert abs(v[0] / v[-10:].mean() - 1) < 0.25

    def test_epochs(self, rng):
        eps = gen_conditional_ar2(study_group_specs()[0], 3, 64, rng, group=2)
        assert [e.group for e in eps] == [2, 2, 2]


class TestAnalyticOracles:
    def test_white_noise_cepstrum(self):
        np.testing.assert_array_equal(analytic_ma1_cepstrum(0.0, 1.0, 6), 0.0)

    def test_half_theta(self):
        c = analytic_ma1_cepstrum(0.5, 1.0, 3)
        np.testing.assert_allclose(c[1:], [math.sqrt(2) * 0.5, -math.sqrt(2) * 0.125], rtol=1e-14)
        assert math.isclose(analytic_ma1_cepstrum(0.5, 4.0, 1)[0], math.log(4))

    @pytest.mark.parametrize("theta", [0.1, 0.45, 0.8])
    def test_dense_grid_quadrature(self, theta):
        grid = cepstral_matrix(ma1_log_spectrum(theta, 2.0, 8192)[None, :], 13)[0]
        assert np.max(np.abs(grid - analytic_ma1_cepstrum(theta, 2.0, 13))) < 1e-8

    def test_non_invertible(self):
        with pytest.raises(InvalidArgumentError):
            analytic_ma1_cepstrum(1.0, 1.0, 4)

    def test_unit_interval_closed_forms(self):
        a, G = analytic_ma1_group_moments(6, sigma2=3.0)
        ell = np.arange(1, 6)
        assert math.isclose(a[0], math.log(3.0))
        np.testing.assert_allclose(a[1:], (-1.0) ** (ell + 1) * math.sqrt(2) / (ell * (ell + 1)))
        l, m = np.meshgrid(ell, ell, indexing="ij")
        expected = 2 * (-1.0) ** (l + m) / ((l + m + 1) * (l + 1) * (m + 1))
        np.testing.assert_allclose(G[1:, 1:], expected, rtol=1e-13)
        assert np.all(G[0] == 0) and np.all(G[:, 0] == 0)
        assert math.isclose(a[1], math.sqrt(2) / 2) and math.isclose(G[1, 1], 1 / 6)

    @pytest.mark.parametrize("rng_range", [(0.0, 1.0), (0.3, 1.0), (0.2, 0.6)])
    def test_moments_by_numerical_integration(self, rng_range):
        lo, hi = rng_range
        L = 5
        a, G = analytic_ma1_group_moments(L, theta_range=rng_range)

        def expect(fn):
            return integrate.quad(fn, lo, hi, epsabs=1e-13)[0] / (hi - lo)

        c = lambda t, l: (-1.0) ** (l + 1) * math.sqrt(2) * t**l / l
        for l in range(1, L):
            assert abs(expect(lambda t: c(t, l)) - a[l]) < 1e-12
            for m in range(1, L):
                cov = expect(lambda t: c(t, l) * c(t, m)) - a[l] * a[m]
                assert abs(cov - G[l, m]) < 1e-12

    def test_point_mass_range_has_zero_covariance(self):
        a, G = analytic_ma1_group_moments(4, theta_range=(0.5, 0.5))
        np.testing.assert_allclose(G, 0.0, atol=1e-15)
        np.testing.assert_allclose(a, analytic_ma1_cepstrum(0.5, 1.0, 4))


def _small_config(**kw):
    base = dict(n_per_group=6, N=64, reps=3, test_per_group=5, L_grid=(2, 3), seed=99)
    base.update(kw)
    return ExperimentConfig(**base)


class TestExperiment:
    def test_deterministic(self):
        a = run_experiment(_small_config())
        b = run_experiment(_small_config())
        assert a.rates == b.rates
        assert set(a.rates) == set(METHODS)
        for m in METHODS:
            assert all(0 <= r <= 100 for r in a.rates[m])

    def test_independent_of_worker_count(self):
        a = run_experiment(_small_config(reps=2), workers=1)
        b = run_experiment(_small_config(reps=2), workers=2)
        assert a.rates == b.rates

    def test_seed_changes_result(self):
        a = run_experiment(_small_config(reps=4, seed=1))
        b = run_experiment(_small_config(reps=4, seed=2))
        assert a.rates != b.rates

    def test_failed_reps_are_recorded(self):
        rep = run_experiment(_small_config(L_grid=(2, 30)))
        assert rep.failures("cepstral-multitaper") == 3
        assert math.isnan(rep.mean("cepstral-direct"))
        assert rep.failures("kl") == 0
        assert "error" in rep.details[0]["cepstral-multitaper"]

    def test_summary_and_row(self):
        rep = run_experiment(_small_config(methods=("kl", "chernoff")))
        s = rep.summary()
        assert set(s) == {"kl", "chernoff"} and s["kl"]["sd"] >= 0
        assert rep.table_row().startswith("[0.3, 3]  n_j=6  N=64")
        assert "alpha" in rep.details[0]["chernoff"]

    def test_progress_callback(self):
        seen = []
        run_experiment(_small_config(reps=2, methods=("kl",)), progress=lambda i, n: seen.append((i, n)))
        assert seen == [(1, 2), (2, 2)]

    def test_config_round_trip_and_validation(self):
        cfg = _small_config()
        assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg
        with pytest.raises(InvalidArgumentError):
            _small_config(reps=0)
        with pytest.raises(InvalidArgumentError):
            _small_config(methods=("qda",))
        with pytest.raises(InvalidArgumentError):
            _small_config(group_specs=study_group_specs()[:1])

    def test_report_sd_single_rep(self):
        rep = ExperimentReport(_small_config(reps=1), {m: [50.0] for m in METHODS})
        assert rep.sd("kl") == 0.0 and rep.mean("kl") == 50.0


@pytest.mark.slow
def test_variance_range_insensitivity():
    """Cepstral rates for sigma2 in [0.1, 10] and [0.9, 1.1] differ by under 2 points."""
    methods = ("cepstral-multitaper", "cepstral-direct", "cepstral-smoothed")
    wide = run_experiment(ExperimentConfig(study_group_specs((0.1, 10.0)), methods=methods))
    narrow = run_experiment(ExperimentConfig(study_group_specs((0.9, 1.1)), methods=methods))
    print(wide.table_row())
    print(narrow.table_row())
    for m in methods:
        assert abs(wide.mean(m) - narrow.mean(m)) < 2.0
