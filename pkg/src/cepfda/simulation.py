"""Conditional MA(1)/AR(2) populations, analytic oracles and the Monte Carlo runner."""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.signal import lfilter

from .baselines import DEFAULT_ALPHAS, loo_information_errors, measure_matrix
from .cepstral import cepstral_matrix
from .discriminant import _objectives, fit_arrays, select_L_cv
from .cepstral import LabeledCepstralCorpus
from .errors import CepfdaError, InvalidArgumentError
from .spectral import EstimatorConfig, TimeSeriesEpoch, _multitaper_power, _smoothed_power

__all__ = [
    "Ar2GroupSpec",
    "ExperimentConfig",
    "ExperimentReport",
    "METHODS",
    "study_group_specs",
    "study_settings",
    "gen_conditional_ma1",
    "gen_conditional_ar2",
    "simulate_ma1",
    "simulate_ar2",
    "ar2_log_spectrum",
    "ma1_log_spectrum",
    "analytic_ma1_cepstrum",
    "analytic_ma1_group_moments",
    "run_experiment",
]

log = logging.getLogger(__name__)

METHODS = ("cepstral-multitaper", "cepstral-direct", "cepstral-smoothed", "chernoff", "kl")
BURN_IN = 500


def _check_range(name, r, lo=-math.inf, hi=math.inf):
    a, b = float(r[0]), float(r[1])
    if not (lo <= a <= b <= hi):
        raise InvalidArgumentError(f"{name} range {r} must satisfy {lo} <= lo <= hi <= {hi}")
    return a, b


def _ar2_stationary(phi1, phi2) -> bool:
    return phi2 + phi1 < 1 and phi2 - phi1 < 1 and abs(phi2) < 1


@dataclass(frozen=True)
class Ar2GroupSpec:
    """Uniform ranges for ``(phi1, phi2, sigma2)`` of one group."""

    phi1: tuple
    phi2: tuple
    sigma2: tuple = (1.0, 1.0)

    def __post_init__(self):
        p1 = _check_range("phi1", self.phi1)
        p2 = _check_range("phi2", self.phi2)
        s2 = _check_range("sigma2", self.sigma2, 0.0)
        if s2[0] <= 0:
            raise InvalidArgumentError("innovation variance must be positive")
        # the stationarity triangle is convex, so checking the corners suffices
        for a in p1:
            for b in p2:
                if not _ar2_stationary(a, b):
                    raise InvalidArgumentError(
                        f"AR(2) corner (phi1={a}, phi2={b}) is not stationary")
        object.__setattr__(self, "phi1", p1)
        object.__setattr__(self, "phi2", p2)
        object.__setattr__(self, "sigma2", s2)


def study_group_specs(sigma2=(0.3, 3.0)) -> tuple:
    """The three AR(2) groups of the simulation study with a shared variance range."""
    return (
        Ar2GroupSpec((0.05, 0.7), (-0.12, -0.06), sigma2),
        Ar2GroupSpec((0.01, 1.2), (-0.36, -0.25), sigma2),
        Ar2GroupSpec((0.12, 1.5), (-0.75, -0.56), sigma2),
    )


def study_settings():
    """All 27 (sigma2 range, n_j, N) combinations of the full study."""
    for s2 in ((0.1, 10.0), (0.3, 3.0), (0.9, 1.1)):
        for nj in (15, 50, 100):
            for N in (250, 500, 1000):
                yield s2, nj, N


def simulate_ma1(sigma2, theta_range, n, N, rng) -> tuple[np.ndarray, np.ndarray]:
    """``(n, N)`` conditional MA(1) draws and the ``theta`` of each row."""
    lo, hi = _check_range("theta", theta_range, 0.0, 1.0)
    if sigma2 <= 0:
        raise InvalidArgumentError("innovation variance must be positive")
    theta = rng.uniform(lo, hi, size=n)
    eps = rng.normal(0.0, math.sqrt(sigma2), size=(n, N + 1))
    return eps[:, 1:] + theta[:, None] * eps[:, :-1], theta


def gen_conditional_ma1(sigma2, theta_range, n, N, rng, group=None) -> list[TimeSeriesEpoch]:
    X, _ = simulate_ma1(sigma2, theta_range, n, N, rng)
    return [TimeSeriesEpoch(x, f"{group}-{k}", group) for k, x in enumerate(X)]


def simulate_ar2(spec: Ar2GroupSpec, n, N, rng, burn_in=BURN_IN) -> np.ndarray:
    """``(n, N)`` conditional AR(2) draws started from zeros after ``burn_in`` steps."""
    if not isinstance(spec, Ar2GroupSpec):
        spec = Ar2GroupSpec(*spec)
    phi1 = rng.uniform(*spec.phi1, size=n)
    phi2 = rng.uniform(*spec.phi2, size=n)
    s2 = rng.uniform(*spec.sigma2, size=n)
    eps = rng.standard_normal((n, N + burn_in)) * np.sqrt(s2)[:, None]
    X = np.empty((n, N))
    for k in range(n):
        X[k] = lfilter([1.0], [1.0, -phi1[k], -phi2[k]], eps[k])[burn_in:]
    return X


def gen_conditional_ar2(spec: Ar2GroupSpec, n, N, rng, group=None,
                        burn_in=BURN_IN) -> list[TimeSeriesEpoch]:
    X = simulate_ar2(spec, n, N, rng, burn_in)
    return [TimeSeriesEpoch(x, f"{group}-{k}", group) for k, x in enumerate(X)]


def ar2_log_spectrum(phi1, phi2, sigma2, G) -> np.ndarray:
    """``log sigma2 - log|1 - phi1 e^{-2 pi i lam} - phi2 e^{-4 pi i lam}|^2``.

    ``G`` is a grid size (evaluated at ``g / G``) or an array of frequencies.
    """
    if not _ar2_stationary(phi1, phi2):
        raise InvalidArgumentError(f"AR(2) parameters ({phi1}, {phi2}) are not stationary")
    lam = np.arange(G) / G if np.ndim(G) == 0 else np.asarray(G, float)
    z = np.exp(-2j * np.pi * lam)
    return math.log(sigma2) - np.log(np.abs(1.0 - phi1 * z - phi2 * z**2) ** 2)


def ma1_log_spectrum(theta, sigma2, G) -> np.ndarray:
    lam = np.arange(G) / G if np.ndim(G) == 0 else np.asarray(G, float)
    return np.log(sigma2 * (1.0 + theta**2 + 2.0 * theta * np.cos(2.0 * np.pi * lam)))


def analytic_ma1_cepstrum(theta, sigma2, L) -> np.ndarray:
    """``c_0 = log sigma2``, ``c_l = (-1)^{l+1} sqrt(2) theta^l / l``."""
    if not 0.0 <= theta < 1.0:
        raise InvalidArgumentError(f"MA(1) theta must lie in [0, 1) for invertibility, got {theta}")
    ell = np.arange(1, L)
    c = np.empty(L)
    c[0] = math.log(sigma2)
    c[1:] = (-1.0) ** (ell + 1) * math.sqrt(2.0) * theta**ell / ell
    return c


def _uniform_power_moment(k, lo, hi):
    if hi == lo:
        return lo**k
    return (hi ** (k + 1) - lo ** (k + 1)) / ((k + 1) * (hi - lo))


def analytic_ma1_group_moments(L, sigma2=1.0, theta_range=(0.0, 1.0)):
    """Mean cepstrum and cepstral covariance when ``theta ~ Uni(lo, hi)``.

    For the unit interval these reduce to ``a_l = (-1)^{l+1} sqrt 2 / (l(l+1))``
    and ``Gamma(l, m) = 2 (-1)^{l+m} / ((l+m+1)(l+1)(m+1))``.
    """
    lo, hi = _check_range("theta", theta_range, 0.0, 1.0)
    a = np.zeros(L)
    a[0] = math.log(sigma2)
    G = np.zeros((L, L))
    for l in range(1, L):
        a[l] = (-1.0) ** (l + 1) * math.sqrt(2.0) * _uniform_power_moment(l, lo, hi) / l
        for m in range(1, L):
            cov = _uniform_power_moment(l + m, lo, hi) - (
                _uniform_power_moment(l, lo, hi) * _uniform_power_moment(m, lo, hi))
            G[l, m] = 2.0 * (-1.0) ** (l + m) * cov / (l * m)
    return a, G


@dataclass(frozen=True)
class ExperimentConfig:
    group_specs: tuple = field(default_factory=study_group_specs)
    n_per_group: int = 50
    N: int = 500
    reps: int = 100
    test_per_group: int = 50
    seed: int = 20240101
    methods: tuple = METHODS
    tapers: int = 7
    L_grid: tuple = tuple(range(2, 9))
    alphas: tuple = DEFAULT_ALPHAS
    burn_in: int = BURN_IN

    def __post_init__(self):
        specs = tuple(s if isinstance(s, Ar2GroupSpec) else Ar2GroupSpec(*s)
                      for s in self.group_specs)
        object.__setattr__(self, "group_specs", specs)
        if len(specs) < 2:
            raise InvalidArgumentError("at least two groups are required")
        for name in ("n_per_group", "N", "reps", "test_per_group", "tapers"):
            if int(getattr(self, name)) < 1:
                raise InvalidArgumentError(f"{name} must be positive")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise InvalidArgumentError(f"unknown methods {sorted(unknown)}")
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "L_grid", tuple(int(L) for L in self.L_grid))
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["group_specs"] = [asdict(s) for s in self.group_specs]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        d["group_specs"] = tuple(Ar2GroupSpec(tuple(s["phi1"]), tuple(s["phi2"]), tuple(s["sigma2"]))
                                 for s in d["group_specs"])
        for k in ("methods", "L_grid", "alphas"):
            d[k] = tuple(d[k])
        return cls(**d)


@dataclass
class ExperimentReport:
    """Percent-correct rates per method; ``rates[m][r]`` is NaN for a failed rep."""

    config: ExperimentConfig
    rates: dict
    details: list = field(default_factory=list)

    def mean(self, method) -> float:
        r = np.asarray(self.rates[method], float)
        r = r[~np.isnan(r)]
        return float(r.mean()) if r.size else math.nan

    def sd(self, method) -> float:
        r = np.asarray(self.rates[method], float)
        r = r[~np.isnan(r)]
        return float(r.std(ddof=1)) if r.size > 1 else 0.0

    def failures(self, method) -> int:
        return int(np.count_nonzero(np.isnan(np.asarray(self.rates[method], float))))

    def summary(self) -> dict:
        return {m: {"mean": self.mean(m), "sd": self.sd(m), "failures": self.failures(m)}
                for m in self.config.methods}

    def table_row(self) -> str:
        c = self.config
        s2 = c.group_specs[0].sigma2
        cells = "  ".join(f"{self.mean(m):5.1f} ({self.sd(m):.1f})" for m in c.methods)
        return f"[{s2[0]:g}, {s2[1]:g}]  n_j={c.n_per_group}  N={c.N}  {cells}"


def _draw_sample(config: ExperimentConfig, rng, n_each):
    X = np.vstack([simulate_ar2(s, n_each, config.N, rng, config.burn_in)
                   for s in config.group_specs])
    codes = np.repeat(np.arange(len(config.group_specs)), n_each)
    return X, codes


def _cepstral_rate(G_train, G_test, y_train, y_test, config):
    J = len(config.group_specs)
    Lmax = max(config.L_grid)
    C_train = cepstral_matrix(G_train, Lmax)
    C_test = cepstral_matrix(G_test, Lmax)
    corpus = LabeledCepstralCorpus(C_train, tuple(y_train.tolist()), config.N)
    L = select_L_cv(corpus, candidates=config.L_grid).best_L
    model = fit_arrays(C_train[:, :L], y_train, groups=range(J))
    pred = np.argmin(_objectives(model, C_test[:, :L]), axis=1)
    return 100.0 * np.mean(pred == y_test), L


def _template_rate(F_train, F_test, y_train, y_test, J, measure, alpha):
    T = np.vstack([F_train[y_train == j].mean(axis=0) for j in range(J)])
    pred = np.argmin(measure_matrix(F_test, T, measure, alpha), axis=1)
    return 100.0 * np.mean(pred == y_test)


def _run_rep(config: ExperimentConfig, seed_seq) -> tuple[dict, dict]:
    rng = np.random.default_rng(seed_seq)
    J = len(config.group_specs)
    X_train, y_train = _draw_sample(config, rng, config.n_per_group)
    X_test, y_test = _draw_sample(config, rng, config.test_per_group)
    M = config.N // 2 + 1
    rates, info = {}, {}

    smoothed = {}

    def smooth():
        if not smoothed:
            smoothed["train"] = _smoothed_power(X_train, "auto", False)[0]
            smoothed["test"] = _smoothed_power(X_test, "auto", False)[0]
        return smoothed["train"], smoothed["test"]

    for method in config.methods:
        try:
            if method.startswith("cepstral-"):
                if method == "cepstral-multitaper":
                    P_tr = _multitaper_power(X_train, config.tapers, False)
                    P_te = _multitaper_power(X_test, config.tapers, False)
                elif method == "cepstral-direct":
                    P_tr = _multitaper_power(X_train, 1, False)
                    P_te = _multitaper_power(X_test, 1, False)
                else:
                    P_tr, P_te = smooth()
                rate, L = _cepstral_rate(np.log(P_tr), np.log(P_te), y_train, y_test, config)
                info[method] = {"L": int(L)}
            else:
                F_tr, F_te = (P[:, :M] for P in smooth())
                alpha = 0.5
                if method == "chernoff":
                    errs = loo_information_errors(F_tr, y_train, J, "chernoff", config.alphas)
                    best = min(range(len(config.alphas)),
                               key=lambda i: (errs[i], abs(config.alphas[i] - 0.5), config.alphas[i]))
                    alpha = config.alphas[best]
                    info[method] = {"alpha": alpha}
                rate = _template_rate(F_tr, F_te, y_train, y_test, J, method, alpha)
            rates[method] = float(rate)
        except (CepfdaError, np.linalg.LinAlgError, FloatingPointError) as exc:
            log.warning("method %s failed: %s", method, exc)
            rates[method] = math.nan
            info[method] = {"error": str(exc)}
    return rates, info


def _worker_count(workers):
    if workers is None:
        workers = int(os.environ.get("CEPFDA_THREADS", "1") or 1)
    return max(1, int(workers))


def run_experiment(config: ExperimentConfig, workers: int | None = None,
                   progress=None) -> ExperimentReport:
    """Monte Carlo classification rates for every configured method.

    Each replicate gets its own child of ``SeedSequence(config.seed)`` so the
    result does not depend on ``workers``.
    """
    children = np.random.SeedSequence(config.seed).spawn(config.reps)
    workers = _worker_count(workers)
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_run_rep, [config] * config.reps, children))
    else:
        results = []
        for r, child in enumerate(children):
            results.append(_run_rep(config, child))
            if progress is not None:
                progress(r + 1, config.reps)
    rates = {m: [res[0][m] for res in results] for m in config.methods}
    return ExperimentReport(config, rates, [res[1] for res in results])
