"""Nearest-template classifiers based on spectral information measures.

Each series is summarised by its GCV-smoothed first-taper periodogram.  A
group template is the arithmetic mean of its members' smoothed spectra and
a new series goes to the template with the smallest disparity

    KL:        mean_m { f/g - log(f/g) - 1 }
    Chernoff:  mean_m { log(alpha f/g + 1 - alpha) - alpha log(f/g) }

taken over the non-redundant ordinates ``m = 0..N//2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cepstral import _label_key, _stack_epochs
from .errors import InvalidArgumentError
from .spectral import Span, _smoothed_power, _values

__all__ = [
    "SpectrumEstimate",
    "GroupSpectrumTemplate",
    "DEFAULT_ALPHAS",
    "smoothed_spectrum",
    "smoothed_spectra",
    "build_templates",
    "kl_measure",
    "chernoff_measure",
    "measure_matrix",
    "classify_information",
    "tune_chernoff_alpha",
    "loo_information_errors",
]

DEFAULT_ALPHAS = tuple(np.round(np.arange(1, 10) / 10, 1))


@dataclass(frozen=True, eq=False)
class SpectrumEstimate:
    values: np.ndarray
    N: int

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size != self.N:
            raise InvalidArgumentError("spectrum must have one value per grid point")
        if not np.all(v > 0):
            raise InvalidArgumentError("spectrum values must be strictly positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def half(self) -> np.ndarray:
        return self.values[: self.N // 2 + 1]


@dataclass(frozen=True, eq=False)
class GroupSpectrumTemplate:
    group: object
    template: np.ndarray
    N: int
    count: int = 0

    def __post_init__(self):
        v = np.array(self.template, dtype=float)
        if v.size != self.N or not np.all(v > 0):
            raise InvalidArgumentError(f"template for group {self.group!r} must be positive")
        v.setflags(write=False)
        object.__setattr__(self, "template", v)

    @property
    def half(self) -> np.ndarray:
        return self.template[: self.N // 2 + 1]


def smoothed_spectrum(epoch, span: Span = "auto") -> SpectrumEstimate:
    x = _values(epoch)
    power, _ = _smoothed_power(x, span, False)
    return SpectrumEstimate(power, x.size)


def smoothed_spectra(X, span: Span = "auto") -> np.ndarray:
    """Smoothed spectra of each row of a 2-D array, full grid."""
    power, _ = _smoothed_power(np.atleast_2d(np.asarray(X, float)), span, False)
    return power


def build_templates(spectra: Sequence[SpectrumEstimate], labels) -> list[GroupSpectrumTemplate]:
    if len(spectra) != len(labels) or not spectra:
        raise InvalidArgumentError("need one label per spectrum and at least one spectrum")
    Ns = {s.N for s in spectra}
    if len(Ns) != 1:
        raise InvalidArgumentError("spectra have differing grid lengths")
    F = np.vstack([s.values for s in spectra])
    labels = list(labels)
    out = []
    for g in sorted(set(labels), key=_label_key):
        rows = [i for i, lab in enumerate(labels) if lab == g]
        out.append(GroupSpectrumTemplate(g, F[rows].mean(axis=0), F.shape[1], len(rows)))
    return out


def _half(x) -> np.ndarray:
    if isinstance(x, SpectrumEstimate):
        return x.half
    if isinstance(x, GroupSpectrumTemplate):
        return x.half
    v = np.asarray(x, dtype=float)
    return v


def _check_pair(f, g):
    if f.shape[-1] != g.shape[-1]:
        raise InvalidArgumentError("spectra are on different grids")
    if np.any(f <= 0) or np.any(g <= 0):
        raise InvalidArgumentError("information measures need strictly positive spectra")


def kl_measure(f, g) -> float:
    """Kullback-Leibler spectral disparity of ``f`` from template ``g``."""
    f, g = _half(f), _half(g)
    _check_pair(f, g)
    r = f / g
    return float(np.mean(r - np.log(r) - 1.0))


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise InvalidArgumentError(f"Chernoff alpha must lie in (0, 1), got {alpha}")


def chernoff_measure(f, g, alpha: float = 0.5) -> float:
    _check_alpha(alpha)
    f, g = _half(f), _half(g)
    _check_pair(f, g)
    r = f / g
    return float(np.mean(np.log1p(alpha * (r - 1.0)) - alpha * np.log(r)))


def measure_matrix(F, G, measure: str = "kl", alpha: float = 0.5) -> np.ndarray:
    """Disparities of each half-grid spectrum row of ``F`` from each row of ``G``.

    ``F`` is ``(n, M)`` or ``(n, k, M)``; ``G`` is ``(J, M)`` or broadcastable.
    """
    F = np.asarray(F, float)
    G = np.asarray(G, float)
    r = F[..., None, :] / G if F.ndim == 2 else F / G
    logr = np.log(r)
    if measure == "kl":
        return np.mean(r - logr - 1.0, axis=-1)
    if measure == "chernoff":
        _check_alpha(alpha)
        return np.mean(np.log1p(alpha * (r - 1.0)) - alpha * logr, axis=-1)
    raise InvalidArgumentError(f"unknown information measure {measure!r}")


def classify_information(test, templates: Sequence[GroupSpectrumTemplate],
                         measure: str = "kl", alpha: float = 0.5):
    """Group of the template nearest to ``test``; ties go to the earlier template."""
    if not templates:
        raise InvalidArgumentError("no templates supplied")
    f = _half(test)
    G = np.vstack([_half(t) for t in templates])
    if G.shape[1] != f.shape[-1]:
        raise InvalidArgumentError("test spectrum and templates are on different grids")
    _check_pair(f, G)
    d = measure_matrix(f[None, :], G, measure, alpha)[0]
    return templates[int(np.argmin(d))].group


def loo_information_errors(F, codes, J, measure="kl", alphas=(0.5,)) -> np.ndarray:
    """Leave-one-out misclassification counts, one per alpha.

    ``F`` holds half-grid spectra row-wise.  The held-out series' own
    template is recomputed without it; the others are unchanged.
    """
    F = np.asarray(F, float)
    codes = np.asarray(codes)
    n = F.shape[0]
    counts = np.bincount(codes, minlength=J).astype(float)
    if np.any(counts < 2):
        raise InvalidArgumentError("leave-one-out needs at least 2 series per group")
    sums = np.vstack([F[codes == j].sum(axis=0) for j in range(J)])
    T = np.broadcast_to(sums / counts[:, None], (n, J, F.shape[1])).copy()
    rows = np.arange(n)
    T[rows, codes] = (sums[codes] - F) / (counts[codes] - 1)[:, None]
    out = []
    for a in alphas:
        d = measure_matrix(F[:, None, :], T, measure, a)
        out.append(int(np.count_nonzero(np.argmin(d, axis=1) != codes)))
    return np.array(out)


def tune_chernoff_alpha(training, labels=None, alphas: Sequence[float] = DEFAULT_ALPHAS,
                        span: Span = "auto") -> float:
    """Leave-one-out choice of the Chernoff ``alpha``.

    ``training`` is a list of labelled epochs, or a 2-D array of full-grid
    smoothed spectra with ``labels`` given separately.  Ties favour 0.5,
    then the smaller alpha.
    """
    alphas = [float(a) for a in alphas]
    if not alphas:
        raise InvalidArgumentError("empty alpha grid")
    for a in alphas:
        _check_alpha(a)
    if labels is None:
        labels = [e.group for e in training]
        F = smoothed_spectra(_stack_epochs(training), span)
    else:
        F = np.asarray(training, float)
    groups = sorted(set(labels), key=_label_key)
    codes = np.array([groups.index(g) for g in labels])
    N = F.shape[1]
    errs = loo_information_errors(F[:, : N // 2 + 1], codes, len(groups), "chernoff", alphas)
    best = min(range(len(alphas)), key=lambda i: (errs[i], abs(alphas[i] - 0.5), alphas[i]))
    return alphas[best]
