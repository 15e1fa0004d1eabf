"""Truncated cosine-series (cepstral) coefficients of log-spectra."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import InvalidArgumentError
from .spectral import EstimatorConfig, LogSpectrumEstimate, TimeSeriesEpoch

__all__ = [
    "CepstralVector",
    "LabeledCepstralCorpus",
    "cepstral_coefficients",
    "cepstral_matrix",
    "corpus_from_epochs",
    "max_truncation",
]


def max_truncation(N: int) -> int:
    return N // 2 + 1


@dataclass(frozen=True, eq=False)
class CepstralVector:
    coefficients: np.ndarray
    source_N: int
    group: object = None
    id: str = ""

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=float)
        if c.ndim != 1 or c.size < 1:
            raise InvalidArgumentError("cepstral vector needs at least one coefficient")
        if c.size > max_truncation(self.source_N):
            raise InvalidArgumentError(
                f"L={c.size} exceeds floor(N/2)+1={max_truncation(self.source_N)}"
            )
        if not np.all(np.isfinite(c)):
            raise InvalidArgumentError("cepstral coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @property
    def L(self) -> int:
        return self.coefficients.size


@lru_cache(maxsize=32)
def _cosine_basis(N: int, L: int) -> np.ndarray:
    """``(N, L)`` matrix with columns 1 and ``sqrt(2) cos(2 pi m l / N)``, scaled by 1/N."""
    m = np.arange(N)[:, None]
    ell = np.arange(L)[None, :]
    # reduce m*l mod N first so the cosine argument stays in [0, 2 pi)
    B = np.sqrt(2.0) * np.cos(2.0 * np.pi * ((m * ell) % N) / N)
    B[:, 0] = 1.0
    B /= N
    B.setflags(write=False)
    return B


def cepstral_matrix(log_spectra: np.ndarray, L: int) -> np.ndarray:
    """Cepstral coefficients ``0..L-1`` of each row of ``log_spectra``."""
    G = np.asarray(log_spectra, dtype=float)
    N = G.shape[-1]
    L = int(L)
    if L < 1 or L > max_truncation(N):
        raise InvalidArgumentError(
            f"truncation L must satisfy 1 <= L <= {max_truncation(N)}, got {L}"
        )
    return G @ _cosine_basis(N, L)


def cepstral_coefficients(spec, L: int, group=None) -> CepstralVector:
    """First ``L`` cepstral coefficients of a log-spectrum on the full grid.

    ``c_0`` is the grid mean of the log-spectrum and
    ``c_l = N^-1 sum_m gamma_m sqrt(2) cos(2 pi m l / N)``.
    """
    values = spec.values if isinstance(spec, LogSpectrumEstimate) else np.asarray(spec, float)
    c = cepstral_matrix(values, L)
    return CepstralVector(c, values.size, group)


@dataclass(frozen=True, eq=False)
class LabeledCepstralCorpus:
    """Labelled cepstral vectors sharing one truncation level.

    ``matrix`` is ``(n, L)``; ``labels`` holds the group of each row.
    """

    matrix: np.ndarray
    labels: tuple
    source_N: int
    ids: tuple = ()

    def __post_init__(self):
        C = np.array(self.matrix, dtype=float)
        if C.ndim != 2 or C.shape[0] == 0:
            raise InvalidArgumentError("corpus must contain at least one vector")
        labels = tuple(self.labels)
        if len(labels) != C.shape[0]:
            raise InvalidArgumentError("one label is required per vector")
        if any(g is None for g in labels):
            raise InvalidArgumentError("every vector in a corpus must be labelled")
        C.setflags(write=False)
        object.__setattr__(self, "matrix", C)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "ids", tuple(self.ids) or tuple(str(i) for i in range(len(labels))))

    @classmethod
    def from_vectors(cls, vectors: Sequence[CepstralVector]) -> "LabeledCepstralCorpus":
        if not vectors:
            raise InvalidArgumentError("corpus must contain at least one vector")
        Ls = {v.L for v in vectors}
        if len(Ls) != 1:
            raise InvalidArgumentError(f"vectors have differing truncation levels {sorted(Ls)}")
        return cls(np.vstack([v.coefficients for v in vectors]),
                   tuple(v.group for v in vectors), vectors[0].source_N,
                   tuple(v.id for v in vectors))

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def L(self) -> int:
        return self.matrix.shape[1]

    @property
    def groups(self) -> list:
        return sorted(set(self.labels), key=_label_key)

    @property
    def J(self) -> int:
        return len(set(self.labels))

    @property
    def counts(self) -> dict:
        c = Counter(self.labels)
        return {g: c[g] for g in self.groups}

    def vector(self, i: int) -> CepstralVector:
        return CepstralVector(self.matrix[i], self.source_N, self.labels[i], self.ids[i])

    def truncate(self, L: int) -> "LabeledCepstralCorpus":
        if L < 1 or L > self.L:
            raise InvalidArgumentError(f"cannot truncate L={self.L} corpus to {L}")
        return LabeledCepstralCorpus(self.matrix[:, :L], self.labels, self.source_N, self.ids)


def _label_key(g):
    # ints sort numerically, everything else by string; mixed types stay deterministic
    return (0, g, "") if isinstance(g, (int, np.integer)) else (1, 0, str(g))


def _stack_epochs(epochs: Sequence[TimeSeriesEpoch]) -> np.ndarray:
    if not epochs:
        raise InvalidArgumentError("no epochs supplied")
    lengths = {e.N for e in epochs}
    if len(lengths) != 1:
        raise InvalidArgumentError(f"epochs have mixed lengths {sorted(lengths)}")
    return np.vstack([e.values for e in epochs])


def corpus_from_epochs(epochs: Sequence[TimeSeriesEpoch], estimator: EstimatorConfig,
                       L: int) -> LabeledCepstralCorpus:
    """Estimate log-spectra of labelled epochs and truncate their cepstra at ``L``."""
    X = _stack_epochs(epochs)
    for e in epochs:
        if e.group is None:
            raise InvalidArgumentError(f"epoch {e.id!r} has no group label")
    C = cepstral_matrix(estimator.log_spectra(X), L)
    return LabeledCepstralCorpus(C, tuple(e.group for e in epochs), X.shape[1],
                                 tuple(e.id for e in epochs))
