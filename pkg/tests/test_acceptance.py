"""Acceptance criteria, one test per criterion.

Each test records a ``PASS``/``FAIL``/``SKIP`` line that is printed in the
terminal summary (and immediately, when run with ``-s``).
"""

import math
import os
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.linalg import eigh

from cepfda.cepstral import LabeledCepstralCorpus, cepstral_matrix, corpus_from_epochs
from cepfda.dataio import gait_preprocess, load_model, read_gait_directory, save_model
from cepfda.discriminant import classify, fit_arrays, leave_one_out, select_L_cv
from cepfda.simulation import (
    METHODS,
    ExperimentConfig,
    analytic_ma1_cepstrum,
    analytic_ma1_group_moments,
    ma1_log_spectrum,
    study_group_specs,
    run_experiment,
    simulate_ma1,
)
from cepfda.spectral import EstimatorConfig, sine_tapers

from conftest import ACCEPTANCE_LINES

CEPSTRAL = ("cepstral-multitaper", "cepstral-direct", "cepstral-smoothed")


def record(number, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  criterion {number}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def skip(number, reason):
    line = f"SKIP  criterion {number}: {reason}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    pytest.skip(reason)


@pytest.fixture(scope="module")
def table_cells():
    """The two simulated settings, 100 reps each, default seed."""
    t0 = time.perf_counter()
    main = run_experiment(ExperimentConfig(study_group_specs((0.3, 3.0)), 50, 500, reps=100))
    t_main = time.perf_counter() - t0
    small = run_experiment(ExperimentConfig(study_group_specs((0.3, 3.0)), 15, 250, reps=100))
    return {"main": main, "small": small, "seconds": t_main}


def test_criterion_1_ma1_cepstral_oracle():
    t0 = time.perf_counter()
    worst = 0.0
    for theta in (0.3, 0.6, 0.9):
        c = cepstral_matrix(ma1_log_spectrum(theta, 1.0, 8192)[None, :], 13)[0]
        worst = max(worst, np.max(np.abs(c - analytic_ma1_cepstrum(theta, 1.0, 13))))
    dt = time.perf_counter() - t0
    record(1, worst < 1e-6 and dt < 1.0,
           f"max |grid - analytic| = {worst:.2e} (tol 1e-6), {dt:.2f} s (limit 1 s)")


def test_criterion_2_ma1_population_moments():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    theta = rng.uniform(0.0, 1.0, 2000)
    C = np.vstack([analytic_ma1_cepstrum(t, 1.0, 5) for t in theta])
    a, G = analytic_ma1_group_moments(5)
    mean_err = np.max(np.abs(C.mean(axis=0) - a))
    cov_err = np.max(np.abs(np.cov(C, rowvar=False) - G))
    dt = time.perf_counter() - t0
    record(2, mean_err < 0.02 and cov_err < 0.02 and dt < 10.0,
           f"mean err {mean_err:.4f}, covariance err {cov_err:.4f} (tol 0.02), {dt:.2f} s")


def test_criterion_3_table_cells(table_cells):
    rep = table_cells["main"]
    mt, kl = rep.mean("cepstral-multitaper"), rep.mean("kl")
    ok_mt = abs(mt - 95.5) <= 1.8
    ok_kl = abs(kl - 85.3) <= 3.5
    dt = table_cells["seconds"]
    record(3, ok_mt and ok_kl and dt < 600,
           f"sigma2 [0.3,3], n_j=50, N=500, 100 reps: multitaper {mt:.1f} "
           f"(target 95.5 +/- 1.8), KL {kl:.1f} (target 85.3 +/- 3.5), {dt:.0f} s")


def test_criterion_4_method_ordering(table_cells):
    parts, ok = [], True
    for key in ("main", "small"):
        rep = table_cells[key]
        m = {k: rep.mean(k) for k in METHODS}
        good = (m["cepstral-multitaper"] >= m["cepstral-direct"]
                and min(m[k] for k in CEPSTRAL) >= max(m["kl"], m["chernoff"]))
        ok &= good
        c = rep.config
        parts.append(f"n_j={c.n_per_group},N={c.N}: " + " ".join(f"{m[k]:.1f}" for k in METHODS)
                     + ("" if good else " (violated)"))
    record(4, ok, "rates mt/direct/smoothed/chernoff/kl; " + "; ".join(parts))


def _timed(fn):
    t0 = time.perf_counter()
    ok = fn()
    return ok, time.perf_counter() - t0


def test_criterion_5_invariance_suite(tmp_path):
    rng = np.random.default_rng(5)

    def additive():
        C = rng.integers(-64, 64, size=(32, 4)) / 8.0
        labels = [j for j in range(4) for _ in range(8)]
        shift = rng.integers(-16, 16, size=4) / 4.0
        a, b = fit_arrays(C, labels), fit_arrays(C + shift, labels)
        T = rng.integers(-64, 64, size=(200, 4)) / 8.0
        same_obj = all(np.array_equal(classify(a, t).objectives, classify(b, t + shift).objectives)
                       for t in T)
        return np.array_equal(a.weights, b.weights) and same_obj

    def tapers():
        return all(np.max(np.abs(sine_tapers(N, R).h @ sine_tapers(N, R).h.T - np.eye(R))) < 1e-10
                   for N, R in ((8, 8), (100, 7), (257, 257), (1024, 16)))

    C = np.vstack([rng.normal(size=3) * 2 + rng.normal(size=(12, 3)) for _ in range(4)])
    labels = [j for j in range(4) for _ in range(12)]
    model = fit_arrays(C, labels)

    def gamma_norm():
        P = model.weights @ model.pooled_within @ model.weights.T
        return np.max(np.abs(P - np.eye(model.Q))) < 1e-8

    def explicit_inverse():
        ok = True
        for L in (1, 2, 3):
            m = fit_arrays(C[:, :L], labels)
            ev = np.sort(np.linalg.eigvals(np.linalg.inv(m.pooled_within) @ m.between).real)[::-1]
            ok &= np.max(np.abs(ev[: m.Q] - m.eigenvalues)) < 1e-8
        return ok

    def round_trip():
        save_model(model, tmp_path / "m.json")
        back = load_model(tmp_path / "m.json")
        V = rng.normal(scale=3, size=(100, 3))
        return all(np.array_equal(classify(model, v).objectives, classify(back, v).objectives)
                   and classify(model, v).predicted == classify(back, v).predicted for v in V)

    checks = {"additive constant": additive, "taper orthonormality": tapers,
              "unit Gamma-norm": gamma_norm, "Cholesky vs inverse": explicit_inverse,
              "save/load": round_trip}
    results = {name: _timed(fn) for name, fn in checks.items()}
    ok = all(r[0] and r[1] < 1.0 for r in results.values())
    record(5, ok, ", ".join(f"{k} {'ok' if v[0] else 'FAILED'} ({v[1]:.2f} s)"
                            for k, v in results.items()))


def _oracle_weight(L, ranges):
    mom = [analytic_ma1_group_moments(L, theta_range=r) for r in ranges]
    abar = 0.5 * (mom[0][0] + mom[1][0])
    Gamma = 0.5 * (mom[0][1] + mom[1][1])
    Lam = sum(0.5 * np.outer(a - abar, a - abar) for a, _ in mom)
    _, V = eigh(Lam[1:, 1:], Gamma[1:, 1:])
    y = np.r_[0.0, V[:, -1]]
    return y / math.sqrt(y @ Gamma @ y), Gamma


def test_criterion_6_empirical_consistency():
    L, ranges = 4, ((0.0, 1.0), (0.3, 1.0))
    y_star, Gamma = _oracle_weight(L, ranges)
    est = EstimatorConfig("multitaper", 7)
    rng = np.random.default_rng(6)
    t0 = time.perf_counter()
    medians, pop = [], []
    for n, N in ((50, 256), (200, 1024), (800, 4096)):
        errs, perrs = [], []
        for _ in range(50):
            X = np.vstack([simulate_ma1(1.0, r, n // 2, N, rng)[0] for r in ranges])
            C = cepstral_matrix(est.log_spectra(X), L)
            m = fit_arrays(C, [0] * (n // 2) + [1] * (n // 2))
            y = m.weights[0]
            d = min((y - y_star, y + y_star), key=lambda v: v @ m.pooled_within @ v)
            errs.append(math.sqrt(d @ m.pooled_within @ d))
            perrs.append(math.sqrt(d @ Gamma @ d))
        medians.append(float(np.median(errs)))
        pop.append(float(np.median(perrs)))
    dt = time.perf_counter() - t0
    ok = medians[0] > medians[1] > medians[2] and dt < 300
    record(6, ok, "median Gamma-hat-norm error " + " > ".join(f"{v:.3f}" for v in medians)
           + " (population-Gamma norm " + ", ".join(f"{v:.3f}" for v in pop) + f"), {dt:.0f} s")


def test_criterion_7_gait_soft_target():
    root = os.environ.get("CEPFDA_GAIT_DIR", "")
    if not root or not Path(root).is_dir():
        skip(7, "no local gait data (set CEPFDA_GAIT_DIR)")
    records = read_gait_directory(root)
    epochs = [gait_preprocess(r) for r in records]
    est = EstimatorConfig("multitaper", 7)
    cv = select_L_cv(epochs, est, candidates=range(1, 9))
    corpus = corpus_from_epochs(epochs, est, cv.best_L)
    pred = leave_one_out(corpus)
    correct = sum(p == g for p, g in zip(pred, corpus.labels))
    record(7, cv.best_L == 4 and correct >= 30,
           f"{len(epochs)} epochs, L* = {cv.best_L} (target 4), {correct}/{len(epochs)} "
           "correct (target >= 30)")


def test_criterion_8_chance_level():
    spec = study_group_specs((0.3, 3.0))[0]
    rep = run_experiment(ExperimentConfig((spec, spec, spec), 50, 500, reps=100))
    rates = {m: rep.mean(m) for m in METHODS}
    ok = all(abs(r - 100 / 3) <= 6 and 28 <= r <= 39 for r in rates.values())
    record(8, ok, "identical groups: " + ", ".join(f"{m} {r:.1f}" for m, r in rates.items())
           + " (target 33.3 +/- 6)")
