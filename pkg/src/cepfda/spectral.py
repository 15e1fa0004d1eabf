"""Sine tapers and log-spectrum estimation on the Fourier grid ``m / N``.

Three estimators are provided, all built on the tapered periodogram

    I_m = | sum_t h_t X_t exp(-2 pi i m t / N) |^2,   t = 1..N

* multitaper: ``log(mean_r I_rm)`` over the first ``R`` sine tapers
* direct: the log of the first-taper periodogram
* smoothed: the log of the first-taper periodogram after a circular
  modified Daniell smoother, span chosen by GCV when ``span="auto"``

By default the periodogram omits the ``1/N`` normalisation so that it
targets the spectrum itself when the tapers are orthonormal.  Pass
``scale_by_n=True`` to divide by ``N``; every log-spectrum then shifts
by ``-log N``, which only moves the zeroth cepstral coefficient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np

from .errors import DegenerateSpectrumError, InvalidArgumentError

__all__ = [
    "TimeSeriesEpoch",
    "TaperBank",
    "LogSpectrumEstimate",
    "EstimatorConfig",
    "sine_tapers",
    "tapered_periodogram",
    "multitaper_log_spectrum",
    "direct_log_spectrum",
    "smoothed_log_spectrum",
    "modified_daniell_weights",
    "smooth_circular",
    "gcv_span",
    "gcv_candidates",
    "dft_reference",
]

MIN_LENGTH = 8
ESTIMATOR_KINDS = ("multitaper", "direct", "smoothed")

Span = Union[int, str]


@dataclass(frozen=True, eq=False)
class TimeSeriesEpoch:
    """One real-valued series with an optional group label."""

    values: np.ndarray
    id: str = ""
    group: object = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1:
            raise InvalidArgumentError(f"epoch {self.id!r}: values must be one-dimensional")
        if v.size < MIN_LENGTH:
            raise InvalidArgumentError(
                f"epoch {self.id!r}: length {v.size} is below the minimum of {MIN_LENGTH}"
            )
        if not np.all(np.isfinite(v)):
            raise InvalidArgumentError(f"epoch {self.id!r}: values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def N(self) -> int:
        return self.values.size

    def __len__(self):
        return self.values.size


@dataclass(frozen=True, eq=False)
class TaperBank:
    """``R`` orthonormal tapers of length ``N`` stored row-wise."""

    h: np.ndarray

    @property
    def N(self) -> int:
        return self.h.shape[1]

    @property
    def R(self) -> int:
        return self.h.shape[0]

    def __getitem__(self, r):
        return self.h[r]


@dataclass(frozen=True, eq=False)
class LogSpectrumEstimate:
    values: np.ndarray
    N: int
    estimator: str

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@lru_cache(maxsize=64)
def _sine_taper_matrix(N: int, R: int) -> np.ndarray:
    t = np.arange(1, N + 1)
    r = np.arange(1, R + 1)[:, None]
    h = math.sqrt(2.0 / (N + 1)) * np.sin(np.pi * r * t / (N + 1))
    h.setflags(write=False)
    return h


def sine_tapers(N: int, R: int) -> TaperBank:
    """Return the first ``R`` sine tapers of length ``N``.

    ``h[r-1, t-1] = sqrt(2/(N+1)) sin(pi t r / (N+1))`` for ``r = 1..R``.
    """
    N, R = int(N), int(R)
    if N < 1:
        raise InvalidArgumentError(f"taper length must be >= 1, got {N}")
    if R < 1 or R > N:
        raise InvalidArgumentError(f"taper count must satisfy 1 <= R <= N={N}, got {R}")
    return TaperBank(_sine_taper_matrix(N, R))


def _values(x) -> np.ndarray:
    if isinstance(x, TimeSeriesEpoch):
        return x.values
    return np.asarray(x, dtype=float)


def _half_to_full(half: np.ndarray, N: int) -> np.ndarray:
    """Expand ordinates ``0..N//2`` to the full grid using ``I_m = I_{N-m}``."""
    tail = half[..., 1 : N - N // 2][..., ::-1]
    return np.concatenate([half, tail], axis=-1)


def _symmetrize(full: np.ndarray) -> np.ndarray:
    N = full.shape[-1]
    return _half_to_full(full[..., : N // 2 + 1], N)


def dft_reference(x) -> np.ndarray:
    """O(N^2) transform ``sum_t x_t exp(-2 pi i m t / N)``, ``t = 1..N``.

    Kept for checking the FFT path; not used in estimation.
    """
    x = np.asarray(x, dtype=float)
    N = x.size
    m = np.arange(N)[:, None]
    t = np.arange(1, N + 1)[None, :]
    return np.exp(-2j * np.pi * m * t / N) @ x


def _tapered_power(X: np.ndarray, h: np.ndarray, scaled: bool) -> np.ndarray:
    """Periodograms of every row of ``X`` under every taper row of ``h``.

    ``X`` has shape ``(..., N)`` and ``h`` shape ``(R, N)``; the result has
    shape ``(..., R, N)`` on the full grid.
    """
    N = X.shape[-1]
    spec = np.fft.rfft(X[..., None, :] * h, axis=-1)
    power = spec.real**2 + spec.imag**2
    if scaled:
        power /= N
    return _half_to_full(power, N)


def tapered_periodogram(epoch, taper, *, scale_by_n: bool = False,
                        method: str = "fft") -> np.ndarray:
    """Periodogram of ``epoch`` under a single taper, on ``m = 0..N-1``.

    ``method="direct"`` evaluates the transform by explicit summation.
    """
    x = _values(epoch)
    h = np.asarray(taper, dtype=float)
    if h.ndim != 1 or h.size != x.size:
        raise InvalidArgumentError(
            f"taper length {h.size} does not match series length {x.size}"
        )
    if method == "fft":
        return _tapered_power(x, h[None, :], scale_by_n)[0]
    if method == "direct":
        d = dft_reference(h * x)
        power = d.real**2 + d.imag**2
        if scale_by_n:
            power /= x.size
        return power
    raise InvalidArgumentError(f"unknown transform method {method!r}")


def _safe_log(power: np.ndarray, jitter: float, what: str) -> np.ndarray:
    if jitter:
        power = power + jitter
    if np.any(power <= 0.0):
        bad = np.argwhere(power <= 0.0)[0]
        raise DegenerateSpectrumError(
            f"{what}: zero power at frequency index {int(bad[-1])}"
        )
    return np.log(power)


def _multitaper_power(X: np.ndarray, R: int, scaled: bool) -> np.ndarray:
    h = sine_tapers(X.shape[-1], R).h
    return _tapered_power(X, h, scaled).mean(axis=-2)


def multitaper_log_spectrum(epoch, R: int = 7, *, scale_by_n: bool = False,
                            jitter: float = 0.0) -> LogSpectrumEstimate:
    x = _values(epoch)
    if R < 1:
        raise InvalidArgumentError(f"taper count must be >= 1, got {R}")
    power = _multitaper_power(x, R, scale_by_n)
    return LogSpectrumEstimate(_safe_log(power, jitter, "multitaper spectrum"),
                               x.size, f"multitaper({R})")


def direct_log_spectrum(epoch, *, scale_by_n: bool = False,
                        jitter: float = 0.0) -> LogSpectrumEstimate:
    """Log of the first sine-tapered periodogram."""
    x = _values(epoch)
    power = _multitaper_power(x, 1, scale_by_n)
    return LogSpectrumEstimate(_safe_log(power, jitter, "direct spectrum"),
                               x.size, "direct")


def modified_daniell_weights(span: int) -> np.ndarray:
    """Kernel weights for an odd span; endpoints get half weight."""
    span = int(span)
    if span < 1 or span % 2 == 0:
        raise InvalidArgumentError(f"span must be an odd positive integer, got {span}")
    if span == 1:
        return np.ones(1)
    k = span // 2
    w = np.full(span, 1.0 / (2 * k))
    w[0] = w[-1] = 1.0 / (4 * k)
    return w


def smooth_circular(power: np.ndarray, span: int) -> np.ndarray:
    """Circular modified Daniell smoothing along the last axis."""
    w = modified_daniell_weights(span)
    power = np.asarray(power, dtype=float)
    N = power.shape[-1]
    if span > N:
        raise InvalidArgumentError(f"span {span} exceeds series length {N}")
    k = span // 2
    out = w[k] * power
    for j in range(1, k + 1):
        out = out + w[k + j] * (np.roll(power, j, axis=-1) + np.roll(power, -j, axis=-1))
    return out


def gcv_candidates(N: int) -> np.ndarray:
    """Odd spans ``3, 5, ..., 2 floor(sqrt N) + 1``."""
    return np.arange(3, 2 * math.isqrt(int(N)) + 2, 2)


def _half_index(N: int) -> np.ndarray:
    i = np.arange(N)
    return np.minimum(i, N - i)


@lru_cache(maxsize=256)
def _smoother_trace(N: int, span: int) -> float:
    """Trace of the circular smoother seen as a map on the half grid.

    Full-grid index ``i`` folds onto half-grid index ``min(i, N - i)``, so
    the diagonal element for output ``m`` collects every kernel weight whose
    source folds back onto ``m``.
    """
    M = N // 2 + 1
    w = modified_daniell_weights(span)
    k = span // 2
    fold = _half_index(N)
    m = np.arange(M)
    tr = 0.0
    for j in range(-k, k + 1):
        tr += w[k + j] * np.count_nonzero(fold[(m + j) % N] == m)
    return float(tr)


def _gcv_scores(power: np.ndarray, spans: np.ndarray, criterion: str = "deviance") -> np.ndarray:
    """GCV score of each candidate span for each row of ``power``.

    ``criterion="deviance"`` uses the gamma deviance
    ``I/f - log(I/f) - 1`` suited to periodogram ordinates; ``"rss"`` uses
    squared residuals.  Both are averaged over the half grid and divided by
    ``(1 - tr(S)/M)^2``.
    """
    if criterion not in ("deviance", "rss"):
        raise InvalidArgumentError(f"unknown GCV criterion {criterion!r}")
    N = power.shape[-1]
    M = N // 2 + 1
    target = power[..., :M]
    scores = np.empty(power.shape[:-1] + (len(spans),))
    # running box sum over offsets -k..k, extended one step per candidate
    box = power.copy()
    k_done = 0
    for c, span in enumerate(spans):
        k = int(span) // 2
        while k_done < k:
            k_done += 1
            box = box + np.roll(power, k_done, axis=-1) + np.roll(power, -k_done, axis=-1)
        edge = np.roll(power, k, axis=-1) + np.roll(power, -k, axis=-1)
        fit = (box - 0.5 * edge)[..., :M] / (2 * k)
        if criterion == "deviance":
            r = target / fit
            loss = np.mean(r - np.log(r) - 1.0, axis=-1)
        else:
            loss = np.mean((target - fit) ** 2, axis=-1)
        scores[..., c] = loss / (1.0 - _smoother_trace(N, int(span)) / M) ** 2
    return scores


def _gcv_spans(power: np.ndarray, criterion: str = "deviance") -> np.ndarray:
    N = power.shape[-1]
    if N < 16:
        raise InvalidArgumentError(f"GCV span selection needs N >= 16, got {N}")
    if np.any(power[..., : N // 2 + 1] <= 0):
        raise DegenerateSpectrumError("GCV needs strictly positive periodogram ordinates")
    spans = gcv_candidates(N)
    # argmin returns the first minimiser, i.e. the smaller span on ties
    return spans[np.argmin(_gcv_scores(power, spans, criterion), axis=-1)]


def gcv_span(epoch, criterion: str = "deviance") -> int:
    """Span of the first-taper periodogram smoother minimising GCV."""
    x = _values(epoch)
    power = _multitaper_power(x, 1, False)
    return int(_gcv_spans(power, criterion))


def _smoothed_power(X: np.ndarray, span: Span, scaled: bool) -> tuple[np.ndarray, np.ndarray]:
    power = _multitaper_power(X, 1, scaled)
    N = X.shape[-1]
    if span == "auto":
        spans = np.atleast_1d(_gcv_spans(power))
    else:
        span = int(span)
        if span < 1 or span % 2 == 0 or span > N:
            raise InvalidArgumentError(f"span must be odd with 1 <= span <= N={N}, got {span}")
        spans = np.full(power.shape[:-1] or (1,), span)
    power2 = power.reshape(-1, N)
    out = np.empty_like(power2)
    for s in np.unique(spans):
        rows = np.flatnonzero(spans.reshape(-1) == s)
        out[rows] = smooth_circular(power2[rows], int(s))
    return _symmetrize(out).reshape(power.shape), spans.reshape(power.shape[:-1])


def smoothed_log_spectrum(epoch, span: Span = "auto", *, scale_by_n: bool = False,
                          jitter: float = 0.0) -> LogSpectrumEstimate:
    x = _values(epoch)
    power, spans = _smoothed_power(x, span, scale_by_n)
    s = int(spans)
    return LogSpectrumEstimate(_safe_log(power, jitter, "smoothed spectrum"),
                               x.size, f"smoothed({s})")


@dataclass(frozen=True)
class EstimatorConfig:
    """Which log-spectrum estimator to apply to each epoch.

    ``kind`` is one of ``"multitaper"``, ``"direct"`` or ``"smoothed"``.
    """

    kind: str = "multitaper"
    tapers: int = 7
    span: Span = "auto"
    scale_by_n: bool = False
    jitter: float = 0.0

    def __post_init__(self):
        if self.kind not in ESTIMATOR_KINDS:
            raise InvalidArgumentError(f"unknown estimator {self.kind!r}")
        if self.kind == "multitaper" and int(self.tapers) < 1:
            raise InvalidArgumentError(f"taper count must be >= 1, got {self.tapers}")
        if self.kind == "smoothed" and self.span != "auto":
            s = int(self.span)
            if s < 1 or s % 2 == 0:
                raise InvalidArgumentError(f"span must be odd and positive, got {self.span}")
        if self.jitter < 0:
            raise InvalidArgumentError("jitter must be non-negative")

    @property
    def label(self) -> str:
        if self.kind == "multitaper":
            return f"multitaper({self.tapers})"
        if self.kind == "smoothed":
            return f"smoothed({self.span})"
        return "direct"

    def log_spectra(self, X) -> np.ndarray:
        """Log-spectra of every row of a 2-D array of equal-length series."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.kind == "multitaper":
            power = _multitaper_power(X, int(self.tapers), self.scale_by_n)
        elif self.kind == "direct":
            power = _multitaper_power(X, 1, self.scale_by_n)
        else:
            power, _ = _smoothed_power(X, self.span, self.scale_by_n)
        return _safe_log(power, self.jitter, f"{self.label} spectrum")

    def estimate(self, epoch) -> LogSpectrumEstimate:
        if self.kind == "multitaper":
            return multitaper_log_spectrum(epoch, int(self.tapers),
                                           scale_by_n=self.scale_by_n, jitter=self.jitter)
        if self.kind == "direct":
            return direct_log_spectrum(epoch, scale_by_n=self.scale_by_n,
                                       jitter=self.jitter)
        return smoothed_log_spectrum(epoch, self.span, scale_by_n=self.scale_by_n,
                                     jitter=self.jitter)
