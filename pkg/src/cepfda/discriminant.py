"""Fisher's discriminant analysis of truncated cepstral vectors.

The weights solve the generalised symmetric eigenproblem
``Lambda y = tau Gamma y`` with ``Gamma`` the prior-weighted pooled
within-group covariance and ``Lambda`` the prior-weighted between-group
scatter.  It is reduced to an ordinary symmetric problem through the
Cholesky factor of ``Gamma``; ``Gamma`` is never inverted explicitly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .cepstral import (
    CepstralVector,
    LabeledCepstralCorpus,
    _label_key,
    _stack_epochs,
    cepstral_matrix,
    max_truncation,
)
from .errors import IllConditionedError, InvalidArgumentError
from .spectral import EstimatorConfig, TimeSeriesEpoch

__all__ = [
    "DiscriminantModel",
    "ClassificationResult",
    "CVResult",
    "fit",
    "fit_arrays",
    "scores",
    "classify",
    "classify_matrix",
    "weight_function",
    "select_L_cv",
    "loo_predictions",
    "leave_one_out",
]

log = logging.getLogger(__name__)

RANK_TOL = 1e-10
# eigenvalues below this are treated as zero even when tau_1 itself is tiny
ABS_EIG_TOL = 1e-12
COND_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class DiscriminantModel:
    """Fitted cepstral discriminant model.

    ``weights`` is ``(Q, L)`` with rows normalised to unit ``Gamma``-norm,
    ``eigenvalues`` are sorted decreasingly, and ``groups`` fixes the order
    of the group axis in ``priors``, ``group_means`` and the objectives.
    """

    groups: tuple
    priors: np.ndarray
    group_means: np.ndarray
    pooled_within: np.ndarray
    between: np.ndarray
    weights: np.ndarray
    eigenvalues: np.ndarray
    counts: tuple = ()
    source_N: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def L(self) -> int:
        return self.group_means.shape[1]

    @property
    def J(self) -> int:
        return len(self.groups)

    @property
    def Q(self) -> int:
        return self.weights.shape[0]

    @property
    def group_mean_scores(self) -> np.ndarray:
        """``(J, Q)`` discriminant scores of the group means."""
        return self.group_means @ self.weights.T


@dataclass(frozen=True, eq=False)
class ClassificationResult:
    predicted: object
    predicted_index: int
    objectives: np.ndarray
    scores: np.ndarray
    tie: bool = False
    priors_only: bool = False


def _group_codes(labels, groups=None):
    groups = list(groups) if groups is not None else sorted(set(labels), key=_label_key)
    index = {g: j for j, g in enumerate(groups)}
    try:
        codes = np.array([index[g] for g in labels], dtype=int)
    except KeyError as exc:
        raise InvalidArgumentError(f"label {exc.args[0]!r} is not a known group") from None
    return codes, groups


def _check_priors(priors, J):
    p = np.asarray(priors, dtype=float)
    if p.shape != (J,) or np.any(p <= 0) or not np.isclose(p.sum(), 1.0, atol=1e-12):
        raise InvalidArgumentError(f"priors must be {J} positive values summing to 1")
    return p


def _eigen_reduce(Gamma, Lambda, J):
    """Solve ``Lambda y = tau Gamma y`` via ``Gamma = C C^T``.

    Returns ``(weights (Q, L), eigenvalues (Q,))``.
    """
    ev = np.linalg.eigvalsh(Gamma)
    ratio = ev[0] / ev[-1] if ev[-1] > 0 else 0.0
    if not ev[-1] > 0 or ratio <= COND_TOL:
        raise IllConditionedError(
            f"pooled within-group covariance is singular: smallest/largest eigenvalue "
            f"ratio {ratio:.3e} <= {COND_TOL:g}", ratio)
    C = np.linalg.cholesky(Gamma)
    tmp = solve_triangular(C, Lambda, lower=True)
    M = solve_triangular(C, tmp.T, lower=True)
    M = 0.5 * (M + M.T)
    tau, V = np.linalg.eigh(M)
    tau, V = tau[::-1], V[:, ::-1]
    keep = (tau > RANK_TOL * tau[0]) & (tau > ABS_EIG_TOL)
    Q = min(int(np.count_nonzero(keep)), J - 1)
    Y = solve_triangular(C.T, V[:, :Q], lower=False).T
    norms = np.sqrt(np.einsum("ql,lm,qm->q", Y, Gamma, Y))
    Y = Y / norms[:, None]
    idx = np.argmax(np.abs(Y), axis=1)
    signs = np.sign(Y[np.arange(Q), idx])
    Y = Y * signs[:, None]
    return Y, tau[:Q].copy()


def fit_arrays(C, labels, priors=None, groups=None) -> DiscriminantModel:
    """Fit from an ``(n, L)`` coefficient matrix and matching labels."""
    C = np.asarray(C, dtype=float)
    if C.ndim != 2:
        raise InvalidArgumentError("coefficient matrix must be two-dimensional")
    codes, groups = _group_codes(labels, groups)
    J = len(groups)
    if J < 2:
        raise InvalidArgumentError("at least two groups are required")
    counts = np.bincount(codes, minlength=J)
    if np.any(counts < 2):
        small = [groups[j] for j in np.flatnonzero(counts < 2)]
        raise InvalidArgumentError(f"groups {small} have fewer than 2 members")
    n = C.shape[0]
    pi = counts / n if priors is None else _check_priors(priors, J)

    A = np.vstack([C[codes == j].mean(axis=0) for j in range(J)])
    abar = pi @ A
    D = A - abar
    Lambda = (D * pi[:, None]).T @ D
    Gamma = np.zeros((C.shape[1], C.shape[1]))
    for j in range(J):
        B = C[codes == j] - A[j]
        Gamma += pi[j] * (B.T @ B) / (counts[j] - 1)
    Gamma = 0.5 * (Gamma + Gamma.T)
    Lambda = 0.5 * (Lambda + Lambda.T)

    W, tau = _eigen_reduce(Gamma, Lambda, J)
    return DiscriminantModel(tuple(groups), pi, A, Gamma, Lambda, W, tau,
                             tuple(int(c) for c in counts))


def fit(corpus: LabeledCepstralCorpus, priors=None) -> DiscriminantModel:
    """Fit the discriminant model to a labelled cepstral corpus.

    ``priors`` default to the group proportions ``n_j / n``.
    """
    model = fit_arrays(corpus.matrix, corpus.labels, priors)
    object.__setattr__(model, "source_N", corpus.source_N)
    return model


def _coeffs(model: DiscriminantModel, vector) -> np.ndarray:
    c = vector.coefficients if isinstance(vector, CepstralVector) else np.asarray(vector, float)
    if c.shape[-1] != model.L:
        raise InvalidArgumentError(f"vector has L={c.shape[-1]} but the model has L={model.L}")
    return c


def scores(model: DiscriminantModel, vector) -> np.ndarray:
    """Discriminant scores ``y_q^T c`` for ``q = 1..Q``."""
    return model.weights @ _coeffs(model, vector)


def _objectives(model: DiscriminantModel, C: np.ndarray) -> np.ndarray:
    """``(n, J)`` objectives ``sum_q ((c - a_j)^T y_q)^2 - 2 log pi_j``."""
    diff = C[:, None, :] - model.group_means[None, :, :]
    proj = diff @ model.weights.T
    return np.sum(proj**2, axis=-1) - 2.0 * np.log(model.priors)


def classify(model: DiscriminantModel, vector) -> ClassificationResult:
    """Assign a cepstral vector to the group with the smallest objective."""
    c = _coeffs(model, vector)
    obj = _objectives(model, c[None, :])[0]
    best = float(obj.min())
    near = np.flatnonzero(np.isclose(obj, best, rtol=1e-12, atol=1e-12))
    j = int(near[0])
    if model.Q == 0:
        log.debug("model has no discriminants; classifying by priors alone")
    return ClassificationResult(model.groups[j], j, obj, model.weights @ c,
                                tie=near.size > 1, priors_only=model.Q == 0)


def classify_matrix(model: DiscriminantModel, C) -> np.ndarray:
    """Predicted group indices (into ``model.groups``) for each row of ``C``."""
    C = np.atleast_2d(_coeffs(model, C))
    return np.argmin(_objectives(model, C), axis=1)


def weight_function(model: DiscriminantModel, q: int, G: int) -> np.ndarray:
    """Log-spectral weight function of discriminant ``q`` (1-based) on ``g / G``."""
    if not 1 <= q <= model.Q:
        raise InvalidArgumentError(f"discriminant index must be in 1..{model.Q}, got {q}")
    if G < 1:
        raise InvalidArgumentError("grid size must be positive")
    y = model.weights[q - 1]
    lam = np.arange(G) / G
    ell = np.arange(1, model.L)
    basis = np.sqrt(2.0) * np.cos(2.0 * np.pi * np.outer(lam, ell))
    return y[0] + basis @ y[1:]


def loo_predictions(C, codes, J, priors=None):
    """Leave-one-out predicted group index for every row of ``C``.

    All ``n`` held-out fits are formed at once by downdating the full-sample
    group sums and scatter matrices.  Returns ``(pred, valid)`` where
    ``valid`` is False when any held-out pooled covariance is singular.
    """
    C = np.asarray(C, dtype=float)
    codes = np.asarray(codes)
    n, L = C.shape
    counts = np.bincount(codes, minlength=J).astype(float)
    A = np.vstack([C[codes == j].mean(axis=0) for j in range(J)])
    S = np.zeros((J, L, L))
    for j in range(J):
        B = C[codes == j] - A[j]
        S[j] = B.T @ B

    rows = np.arange(n)
    cnt = np.broadcast_to(counts, (n, J)).copy()
    cnt[rows, codes] -= 1
    means = np.broadcast_to(A, (n, J, L)).copy()
    ng = counts[codes]
    means[rows, codes] = (ng[:, None] * A[codes] - C) / (ng - 1)[:, None]
    dev = C - A[codes]
    scat = np.broadcast_to(S, (n, J, L, L)).copy()
    scat[rows, codes] -= (ng / (ng - 1))[:, None, None] * dev[:, :, None] * dev[:, None, :]

    pi = cnt / (n - 1) if priors is None else np.broadcast_to(priors, (n, J))
    Gamma = np.einsum("ij,ijlm->ilm", pi / (cnt - 1), scat)
    Gamma = 0.5 * (Gamma + np.swapaxes(Gamma, 1, 2))
    abar = np.einsum("ij,ijl->il", pi, means)
    D = means - abar[:, None, :]
    Lambda = np.einsum("ij,ijl,ijm->ilm", pi, D, D)

    ev = np.linalg.eigvalsh(Gamma)
    if np.any(~(ev[:, -1] > 0)) or np.any(ev[:, 0] / ev[:, -1] <= COND_TOL):
        return np.full(n, -1), False
    Ch = np.linalg.cholesky(Gamma)
    Cinv = np.linalg.inv(Ch)
    M = Cinv @ Lambda @ np.swapaxes(Cinv, 1, 2)
    M = 0.5 * (M + np.swapaxes(M, 1, 2))
    tau, V = np.linalg.eigh(M)
    tau, V = tau[:, ::-1], V[:, :, ::-1]
    keep = (tau > RANK_TOL * tau[:, :1]) & (tau > ABS_EIG_TOL)
    Q = np.minimum(keep.sum(axis=1), J - 1)
    mask = np.arange(L)[None, :] < Q[:, None]
    # weights as columns: y = C^{-T} v, zeroed beyond each fit's own Q
    Y = np.swapaxes(Cinv, 1, 2) @ (V * mask[:, None, :])
    diff = C[:, None, :] - means
    proj = diff @ Y
    obj = np.sum(proj**2, axis=-1) - 2.0 * np.log(pi)
    return np.argmin(obj, axis=1), True


@dataclass(frozen=True)
class CVResult:
    best_L: int
    candidates: tuple
    errors: tuple  # misclassification count per candidate, None when invalid
    n: int


def select_L_cv(epochs_or_corpus, estimator: EstimatorConfig | None = None,
                candidates: Sequence[int] = tuple(range(2, 9)), priors=None) -> CVResult:
    """Choose the truncation level minimising leave-one-out misclassifications.

    Accepts either labelled epochs (with an estimator config) or a corpus
    whose truncation is at least the largest candidate.  Ties go to the
    smaller ``L``; candidates whose held-out fits are singular are skipped.
    """
    candidates = tuple(int(L) for L in candidates)
    if not candidates:
        raise InvalidArgumentError("no candidate truncation levels given")
    if isinstance(epochs_or_corpus, LabeledCepstralCorpus):
        corpus = epochs_or_corpus
        N = corpus.source_N
        if max(candidates) > corpus.L:
            raise InvalidArgumentError(
                f"corpus has L={corpus.L} but candidates go up to {max(candidates)}")
        C, labels = corpus.matrix, corpus.labels
    else:
        epochs: Sequence[TimeSeriesEpoch] = epochs_or_corpus
        if estimator is None:
            raise InvalidArgumentError("an estimator config is required for raw epochs")
        X = _stack_epochs(epochs)
        N = X.shape[1]
        labels = tuple(e.group for e in epochs)
        if any(g is None for g in labels):
            raise InvalidArgumentError("every epoch must carry a group label")
        Lmax = max(candidates)
        if Lmax > max_truncation(N):
            raise InvalidArgumentError(f"candidate L={Lmax} exceeds floor(N/2)+1")
        C = cepstral_matrix(estimator.log_spectra(X), Lmax)

    codes, groups = _group_codes(labels)
    J, n = len(groups), len(labels)
    counts = np.bincount(codes, minlength=J)
    if J < 2 or np.any(counts < 3):
        raise InvalidArgumentError("cross-validation needs >= 2 groups with >= 3 members each")
    limit = min(max_truncation(N) if N else n, n - J - 1)
    bad = [L for L in candidates if not 1 <= L <= limit]
    if bad:
        raise InvalidArgumentError(f"candidates {bad} outside 1..{limit}")
    if priors is not None:
        priors = _check_priors(priors, J)

    errors = []
    for L in candidates:
        pred, valid = loo_predictions(C[:, :L], codes, J, priors)
        if not valid:
            log.info("L=%d skipped: singular held-out covariance", L)
        errors.append(int(np.count_nonzero(pred != codes)) if valid else None)
    scored = [(e, candidates[i], i) for i, e in enumerate(errors) if e is not None]
    if not scored:
        raise IllConditionedError("every candidate truncation level is singular")
    best = min(scored)[2]
    return CVResult(candidates[best], candidates, tuple(errors), n)


def leave_one_out(corpus: LabeledCepstralCorpus, priors=None) -> list:
    """Predicted label for each vector from a fit that excludes it."""
    codes, groups = _group_codes(corpus.labels)
    pred, valid = loo_predictions(corpus.matrix, codes, len(groups), priors)
    if not valid:
        raise IllConditionedError("a held-out pooled covariance is singular")
    return [groups[j] for j in pred]
