"""Multilabel classifiers: ridge, KNN, linear SVM and ML-kNN.

Single-label base learners are lifted to multilabel predictors by binary
relevance (independent model per label) or a classifier chain (each label's
model sees the bits of earlier labels: true bits while training, predicted
bits at inference). ML-kNN (Zhang & Zhou's Bayesian k-NN) is inherently
multilabel and used directly. Callers are expected to z-score features
first; intercept/bias columns are added internally where needed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit

__all__ = [
    "HyperGrid",
    "Prediction",
    "Scaler",
    "fit_scaler",
    "RidgeLearner",
    "train_ridge",
    "KNNLearner",
    "knn_predict",
    "SVMLearner",
    "train_svm",
    "MLKNN",
    "BinaryRelevance",
    "ClassifierChain",
    "ksmallest_stable",
    "squared_distances",
]


def _grid(start, step, count):
    return tuple(round(start + step * i, 10) for i in range(count))


@dataclass(frozen=True)
class HyperGrid:
    """Hyperparameter search space (defaults reproduce the study grids)."""

    ridge_lambdas: tuple = _grid(0.25, 0.25, 8)  # 0.25 .. 2
    knn_neighbors: tuple = tuple(range(5, 31, 5))  # 5 .. 30
    svm_costs: tuple = _grid(0.2, 0.2, 10)  # 0.2 .. 2
    mlknn_k: int = 15
    feature_counts: tuple = tuple(range(5, 41, 5))  # 5 .. 40


@dataclass(frozen=True)
class Prediction:
    """Binary label matrix plus confidence scores when the model ranks."""

    bits: np.ndarray
    confidence: np.ndarray | None
    model_tag: str


@dataclass(frozen=True)
class Scaler:
    mean: np.ndarray
    std: np.ndarray

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.std


def fit_scaler(X) -> Scaler:
    X = np.asarray(X, dtype=float)
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    return Scaler(mean=mean, std=np.where(std > 0, std, 1.0))


# ---------------------------------------------------------------------------
# distances shared by the neighborhood models


def squared_distances(A, B) -> np.ndarray:
    """Pairwise squared Euclidean distances, clipped at zero."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    d2 = (A**2).sum(axis=1)[:, None] + (B**2).sum(axis=1)[None, :] - 2.0 * (A @ B.T)
    return np.maximum(d2, 0.0)


def k_candidates(D: np.ndarray, kmax: int):
    """(indices, distances) of the kmax+1 smallest per row, (d, idx)-sorted.

    The k-nearest sets for any k <= kmax are prefixes; a prefix is exact iff
    distances[k-1] < distances[k] (no tie across the boundary).
    """
    nq, nt = D.shape
    if kmax + 1 >= nt:
        cand = np.argsort(D, axis=1, kind="stable")
        return cand, np.take_along_axis(D, cand, axis=1)
    part = np.sort(np.argpartition(D, kmax, axis=1)[:, : kmax + 1], axis=1)
    pd = np.take_along_axis(D, part, axis=1)
    order = np.argsort(pd, axis=1, kind="stable")
    return np.take_along_axis(part, order, axis=1), np.take_along_axis(pd, order, axis=1)


def ksmallest_stable(D: np.ndarray, k: int, cands=None) -> np.ndarray:
    """Indices of the k smallest entries per row, ties broken by column index.

    Exact under ties: rows where a tie crosses the k-boundary of the
    candidate list fall back to a full stable sort. Precomputed
    ``k_candidates`` output may be passed to serve several k values.
    """
    nq, nt = D.shape
    k = min(k, nt)
    if k >= nt:
        return np.argsort(D, axis=1, kind="stable")[:, :k]
    cand, cand_d = k_candidates(D, k) if cands is None else cands
    sel = cand[:, :k]
    bad = cand_d[:, k - 1] >= cand_d[:, k]
    if np.any(bad):
        sel = sel.copy()
        sel[bad] = np.argsort(D[bad], axis=1, kind="stable")[:, :k]
    return sel


@njit(cache=True)
def _sqacc(D2, A, B):
    """D2 += pairwise squared distances between rows of A and B."""
    n, m = D2.shape
    d = A.shape[1]
    for i in range(n):
        for j in range(m):
            s = 0.0
            for q in range(d):
                diff = A[i, q] - B[j, q]
                s += diff * diff
            D2[i, j] += s


def sqdist_accumulate(D2, A, B) -> np.ndarray:
    """In-place D2 += squared distances; allocates D2 when None."""
    A = np.ascontiguousarray(A)
    B = np.ascontiguousarray(B)
    if D2 is None:
        D2 = np.zeros((A.shape[0], B.shape[0]))
    _sqacc(D2, A, B)
    return D2


# ---------------------------------------------------------------------------
# ridge regression


@dataclass(frozen=True)
class RidgeModel:
    beta: np.ndarray  # intercept first
    lam: float

    def score(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return self.beta[0] + X @ self.beta[1:]


def train_ridge(X, y, lam: float) -> RidgeModel:
    """Solve the penalized normal equations with an unpenalized intercept."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    A = np.concatenate([np.ones((n, 1)), X], axis=1)
    G = A.T @ A
    G[1:, 1:] += lam * np.eye(d)
    beta = np.linalg.solve(G, A.T @ y)
    return RidgeModel(beta=beta, lam=lam)


class RidgeLearner:
    has_confidence = True

    def __init__(self, lam: float):
        self.lam = lam
        self.model: RidgeModel | None = None

    def fit(self, X, y):
        self.model = train_ridge(X, y, self.lam)
        return self

    def score(self, X) -> np.ndarray:
        return self.model.score(X)

    def predict_bits(self, X) -> np.ndarray:
        return (self.score(X) >= 0.5).astype(np.int8)


# ---------------------------------------------------------------------------
# k-nearest neighbors


def knn_predict(train_X, train_Y, query_X, k: int):
    """Per-label neighbor-vote scores and >=0.5 bits."""
    train_X = np.asarray(train_X, dtype=float)
    if k < 1 or k > train_X.shape[0]:
        raise ValueError("neighbor count must be in [1, n_train]")
    D = squared_distances(query_X, train_X)
    neigh = ksmallest_stable(D, k)
    scores = np.asarray(train_Y, dtype=float)[neigh].mean(axis=1)
    return scores, (scores >= 0.5).astype(np.int8)


class KNNLearner:
    has_confidence = True

    def __init__(self, k: int):
        self.k = k
        self.train_X = None
        self.train_y = None

    def fit(self, X, y):
        if self.k > len(X):
            raise ValueError("neighbor count exceeds training size")
        self.train_X = np.asarray(X, dtype=float)
        self.train_y = np.asarray(y, dtype=float)
        return self

    def score(self, X) -> np.ndarray:
        D = squared_distances(X, self.train_X)
        neigh = ksmallest_stable(D, self.k)
        return self.train_y[neigh].mean(axis=1)

    def predict_bits(self, X) -> np.ndarray:
        return (self.score(X) >= 0.5).astype(np.int8)


# ---------------------------------------------------------------------------
# linear SVM by dual coordinate descent (L1 hinge loss)


@njit(cache=True, fastmath=True, inline="always")
def _row_dot(w, X, i, d):
    m = 0.0
    for j in range(d):
        m += w[j] * X[i, j]
    return m


@njit(cache=True, fastmath=True, inline="always")
def _row_axpy(w, X, i, step, d):
    for j in range(d):
        w[j] += step * X[i, j]


@njit(cache=True)
def _primal_value(X, y, C, w):
    n, d = X.shape
    wsq = 0.0
    for j in range(d):
        wsq += w[j] * w[j]
    hinge = 0.0
    for i in range(n):
        v = 1.0 - y[i] * _row_dot(w, X, i, d)
        if v > 0.0:
            hinge += v
    return 0.5 * wsq + C * hinge


@njit(cache=True)
def _dcd_epochs(X, y, C, alpha, w, qii, max_epochs, tol):
    """Dual coordinate descent with projected-gradient shrinking.

    Permutes the active set with a fixed xorshift state (deterministic),
    shrinks bound-stuck variables, and certifies convergence by the duality
    gap between the best primal iterate seen and the running dual value
    (the dual is O(d) per epoch, so certification is checked every epoch).
    On return ``w`` holds the best primal iterate. Returns
    (epochs, gap, converged).
    """
    n, d = X.shape
    active = np.arange(n)
    n_active = n
    pg_max_old = np.inf
    pg_min_old = -np.inf
    inner_tol = 0.1
    state = np.uint64(88172645463325252)

    asum = 0.0
    for i in range(n):
        asum += alpha[i]
    p_best = _primal_value(X, y, C, w)
    w_best = w.copy()
    gap = np.inf
    since_primal = 0

    for epoch in range(max_epochs):
        # Fisher-Yates shuffle of the active prefix with xorshift64
        for s in range(n_active - 1, 0, -1):
            state ^= state << np.uint64(13)
            state ^= state >> np.uint64(7)
            state ^= state << np.uint64(17)
            r = int(state % np.uint64(s + 1))
            tmp = active[s]
            active[s] = active[r]
            active[r] = tmp

        pg_max = -np.inf
        pg_min = np.inf
        s = 0
        while s < n_active:
            i = active[s]
            g = y[i] * _row_dot(w, X, i, d) - 1.0
            pg = 0.0
            if alpha[i] == 0.0:
                if g > pg_max_old:
                    n_active -= 1
                    active[s] = active[n_active]
                    active[n_active] = i
                    continue
                if g < 0.0:
                    pg = g
            elif alpha[i] == C:
                if g < pg_min_old:
                    n_active -= 1
                    active[s] = active[n_active]
                    active[n_active] = i
                    continue
                if g > 0.0:
                    pg = g
            else:
                pg = g
            if pg > pg_max:
                pg_max = pg
            if pg < pg_min:
                pg_min = pg
            if pg != 0.0:
                a_old = alpha[i]
                a_new = a_old - g / qii[i]
                if a_new < 0.0:
                    a_new = 0.0
                elif a_new > C:
                    a_new = C
                if a_new != a_old:
                    _row_axpy(w, X, i, (a_new - a_old) * y[i], d)
                    alpha[i] = a_new
                    asum += a_new - a_old
            s += 1

        # duality certificate: best primal seen vs running dual value
        wsq = 0.0
        for j in range(d):
            wsq += w[j] * w[j]
        dual = asum - 0.5 * wsq
        since_primal += 1
        threshold = tol * (1.0 + abs(p_best))
        if p_best - dual <= threshold or since_primal >= 5:
            p_now = _primal_value(X, y, C, w)
            if p_now < p_best:
                p_best = p_now
                for j in range(d):
                    w_best[j] = w[j]
            since_primal = 0
            gap = p_best - dual
            if gap <= tol * (1.0 + abs(p_best)):
                for j in range(d):
                    w[j] = w_best[j]
                return epoch + 1, gap, True

        if pg_max - pg_min <= inner_tol or n_active == 0:
            # inner problem converged: widen the active set and tighten
            n_active = n
            pg_max_old = np.inf
            pg_min_old = -np.inf
            inner_tol = max(inner_tol * 0.1, 1e-12)
        else:
            pg_max_old = pg_max if pg_max > 0.0 else np.inf
            pg_min_old = pg_min if pg_min < 0.0 else -np.inf

    wsq = 0.0
    for j in range(d):
        wsq += w[j] * w[j]
    dual = asum - 0.5 * wsq
    p_now = _primal_value(X, y, C, w)
    if p_now < p_best:
        p_best = p_now
        for j in range(d):
            w_best[j] = w[j]
    gap = p_best - dual
    for j in range(d):
        w[j] = w_best[j]
    return max_epochs, gap, gap <= tol * (1.0 + abs(p_best))


@dataclass
class SVMModel:
    w: np.ndarray  # bias weight last
    C: float
    converged: bool
    alpha: np.ndarray = field(repr=False, default=None)

    def margin(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return X @ self.w[:-1] + self.w[-1]

    def predict_bits(self, X) -> np.ndarray:
        return (self.margin(X) >= 0.0).astype(np.int8)


def train_svm(
    X,
    y,
    C: float,
    tol: float = 1e-4,
    max_epochs: int = 1000,
    warm_alpha: np.ndarray | None = None,
    warn: bool = True,
) -> SVMModel:
    """Soft-margin linear SVM; labels in {0,1} or {-1,+1}.

    A regularized bias column is appended internally. Optimized in the dual
    with cyclic coordinate descent until the relative duality gap falls
    below ``tol``; hitting the epoch cap returns the best iterate with
    ``converged=False``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    y = np.where(y > 0, 1.0, -1.0)
    n, d = X.shape
    A = np.ascontiguousarray(np.concatenate([X, np.ones((n, 1))], axis=1))
    alpha = np.zeros(n) if warm_alpha is None else np.clip(warm_alpha, 0.0, C).copy()
    w = (A * (alpha * y)[:, None]).sum(axis=0)
    qii = (A**2).sum(axis=1)
    qii = np.where(qii > 0, qii, 1.0)
    _, _, converged = _dcd_epochs(A, y, float(C), alpha, w, qii, max_epochs, tol)
    if not converged and warn:
        warnings.warn("SVM dual coordinate descent hit the epoch cap", RuntimeWarning)
    return SVMModel(w=w, C=float(C), converged=converged, alpha=alpha)


class SVMLearner:
    has_confidence = False  # sign-only output

    def __init__(self, C: float, tol: float = 1e-4, max_epochs: int = 1000):
        self.C = C
        self.tol = tol
        self.max_epochs = max_epochs
        self.model: SVMModel | None = None

    def fit(self, X, y):
        self.model = train_svm(
            X, y, self.C, tol=self.tol, max_epochs=self.max_epochs, warn=False
        )
        return self

    def score(self, X) -> np.ndarray:
        return self.model.margin(X)

    def predict_bits(self, X) -> np.ndarray:
        return self.model.predict_bits(X)


# ---------------------------------------------------------------------------
# ML-kNN


def mlknn_tables(Y, deltas, k: int, s: float = 1.0):
    """Priors and neighbor-count likelihood tables from training statistics.

    ``deltas[i, l]`` is how many of instance i's k neighbors carry label l.
    """
    Y = np.asarray(Y, dtype=np.int64)
    m, L = Y.shape
    prior1 = (s + Y.sum(axis=0)) / (2 * s + m)
    c1 = np.zeros((L, k + 1))
    c0 = np.zeros((L, k + 1))
    for l in range(L):
        on = Y[:, l] == 1
        c1[l] = np.bincount(deltas[on, l], minlength=k + 1)
        c0[l] = np.bincount(deltas[~on, l], minlength=k + 1)
    cond1 = (s + c1) / (s * (k + 1) + c1.sum(axis=1, keepdims=True))
    cond0 = (s + c0) / (s * (k + 1) + c0.sum(axis=1, keepdims=True))
    return prior1, 1.0 - prior1, cond1, cond0


def mlknn_posterior(tables, deltas) -> tuple[np.ndarray, np.ndarray]:
    """(bits, posterior) for query neighbor counts under fitted tables."""
    prior1, prior0, cond1, cond0 = tables
    L = cond1.shape[0]
    labels = np.arange(L)[None, :]
    p1 = prior1[None, :] * cond1[labels, deltas]
    p0 = prior0[None, :] * cond0[labels, deltas]
    posterior = p1 / (p1 + p0)
    return (p1 >= p0).astype(np.int8), posterior


class MLKNN:
    """Bayesian multilabel k-NN (Zhang & Zhou) with Laplace smoothing."""

    has_confidence = True

    def __init__(self, k: int = 15, s: float = 1.0):
        self.k = k
        self.s = s

    def fit(self, X, Y):
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=np.int64)
        if self.k < 1 or self.k > X.shape[0] - 1:
            raise ValueError("neighbor count must be in [1, n_train - 1]")
        self.train_X = X
        self.train_Y = Y
        D = squared_distances(X, X)
        np.fill_diagonal(D, np.inf)
        neigh = ksmallest_stable(D, self.k)
        deltas = Y[neigh].sum(axis=1)
        self.tables = mlknn_tables(Y, deltas, self.k, self.s)
        return self

    def predict(self, X) -> Prediction:
        X = np.asarray(X, dtype=float)
        D = squared_distances(X, self.train_X)
        neigh = ksmallest_stable(D, self.k)
        deltas = self.train_Y[neigh].sum(axis=1)
        bits, posterior = mlknn_posterior(self.tables, deltas)
        return Prediction(
            bits=bits, confidence=posterior, model_tag=f"mlknn(k={self.k})"
        )


# ---------------------------------------------------------------------------
# multilabel wrappers


class _ConstantModel:
    """Fallback when a training label column is constant."""

    has_confidence = True

    def __init__(self, value: int):
        self.value = int(value)

    def fit(self, X, y):
        return self

    def score(self, X) -> np.ndarray:
        return np.full(len(X), float(self.value))

    def predict_bits(self, X) -> np.ndarray:
        return np.full(len(X), self.value, dtype=np.int8)


def _fit_single(factory, X, y):
    y = np.asarray(y)
    if y.min() == y.max():
        return _ConstantModel(int(y.flat[0]))
    return factory().fit(X, y)


class BinaryRelevance:
    """One independent base model per label."""

    def __init__(self, factory):
        self.factory = factory
        self.models = []

    def fit(self, X, Y):
        Y = np.asarray(Y)
        self.models = [_fit_single(self.factory, X, Y[:, j]) for j in range(Y.shape[1])]
        return self

    def predict(self, X) -> Prediction:
        bits = np.stack([m.predict_bits(X) for m in self.models], axis=1)
        if all(m.has_confidence for m in self.models):
            conf = np.stack([m.score(X) for m in self.models], axis=1)
        else:
            conf = None
        return Prediction(bits=bits, confidence=conf, model_tag="br")


class ClassifierChain:
    """Chain over labels in a fixed order (defaults to label index order).

    Label j's model is trained on the features augmented with the *true*
    bits of labels earlier in the chain; at inference the chain propagates
    its own predictions sequentially.
    """

    def __init__(self, factory, order=None):
        self.factory = factory
        self.order = order
        self.models = []

    def fit(self, X, Y):
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y)
        L = Y.shape[1]
        order = list(self.order) if self.order is not None else list(range(L))
        if sorted(order) != list(range(L)):
            raise ValueError("chain order must be a permutation of the labels")
        self.order = order
        self.models = []
        prev = np.zeros((len(X), 0))
        for j in order:
            aug = np.concatenate([X, prev], axis=1)
            self.models.append(_fit_single(self.factory, aug, Y[:, j]))
            prev = np.concatenate([prev, Y[:, [j]].astype(float)], axis=1)
        return self

    def predict(self, X) -> Prediction:
        X = np.asarray(X, dtype=float)
        L = len(self.models)
        bits = np.zeros((len(X), L), dtype=np.int8)
        conf = np.zeros((len(X), L))
        has_conf = all(m.has_confidence for m in self.models)
        prev = np.zeros((len(X), 0))
        for model, j in zip(self.models, self.order):
            aug = np.concatenate([X, prev], axis=1)
            b = model.predict_bits(aug)
            bits[:, j] = b
            if has_conf:
                conf[:, j] = model.score(aug)
            prev = np.concatenate([prev, b[:, None].astype(float)], axis=1)
        return Prediction(
            bits=bits, confidence=conf if has_conf else None, model_tag="cc"
        )
