"""Feature ranking for multilabel targets.

Mutual-information methods (MLMIM, MLJMI, MLMRMR, normalized-MI MIFS) work
on floor-discretized columns with plug-in entropy estimates in bits and sum
their per-label criteria over the labels. F-Score ranks by the two-class
Fisher score summed over labels. RFS minimizes the jointly L2,1-regularized
residual (Nie et al.'s robust feature selection) by iteratively reweighted
least squares and ranks by weight-row norm. All methods are deterministic;
score ties fall back to feature-name order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DiscretizedColumn",
    "FeatureRanking",
    "floor_discretize",
    "entropy_bits",
    "mutual_information",
    "rank_features",
    "rfs_rank",
    "rfs_irls",
    "mi_report",
    "SELECTION_METHODS",
]

SELECTION_METHODS = ("MLMIM", "MLJMI", "MLMRMR", "MIFS", "FSCORE", "RFS")


@dataclass(frozen=True)
class FeatureRanking:
    """Ordered selection of m features with their criterion scores."""

    method: str
    features: tuple[str, ...]
    scores: tuple[float, ...]
    m: int
    converged: bool = True


def floor_discretize(values) -> np.ndarray:
    """Integer codes by flooring raw values (binary columns pass through)."""
    return np.floor(np.asarray(values, dtype=float)).astype(np.int64)


class DiscretizedColumn:
    """A floor-discretized column with compact codes for fast joint counts."""

    def __init__(self, values):
        raw = floor_discretize(values)
        _, self.codes = np.unique(raw, return_inverse=True)
        self.arity = int(self.codes.max()) + 1 if self.codes.size else 0

    def __len__(self):
        return len(self.codes)


def _as_column(x) -> DiscretizedColumn:
    return x if isinstance(x, DiscretizedColumn) else DiscretizedColumn(x)


def entropy_bits(x) -> float:
    col = _as_column(x)
    n = len(col)
    if n == 0:
        return 0.0
    counts = np.bincount(col.codes, minlength=col.arity)
    p = counts[counts > 0] / n
    return float(-(p * np.log2(p)).sum())


def _joint_codes(a: DiscretizedColumn, b: DiscretizedColumn):
    joint = a.codes.astype(np.int64) * b.arity + b.codes
    u, inv = np.unique(joint, return_inverse=True)
    return inv, len(u)


def mutual_information(x, y) -> float:
    """Plug-in mutual information in bits between two discretized columns."""
    a, b = _as_column(x), _as_column(y)
    if len(a) != len(b):
        raise ValueError("columns must have equal length")
    n = len(a)
    if n == 0:
        raise ValueError("columns must be non-empty")
    joint = a.codes.astype(np.int64) * b.arity + b.codes
    uj, cj = np.unique(joint, return_counts=True)
    pa = np.bincount(a.codes, minlength=a.arity) / n
    pb = np.bincount(b.codes, minlength=b.arity) / n
    pj = cj / n
    ia = uj // b.arity
    ib = uj % b.arity
    val = (pj * np.log2(pj / (pa[ia] * pb[ib]))).sum()
    return float(max(val, 0.0))


def _pairwise_column(a: DiscretizedColumn, b: DiscretizedColumn) -> DiscretizedColumn:
    out = DiscretizedColumn.__new__(DiscretizedColumn)
    out.codes, out.arity = _joint_codes(a, b)
    return out


def _argbest(scores: np.ndarray, names, candidates) -> int:
    """Candidate with maximal score; exact ties resolve to the smallest name."""
    cand = list(candidates)
    best = max(scores[c] for c in cand)
    tied = [c for c in cand if scores[c] == best]
    return min(tied, key=lambda c: names[c])


def _relevance(cols, ycols) -> np.ndarray:
    return np.array(
        [sum(mutual_information(c, y) for y in ycols) for c in cols]
    )


def _greedy(method, cols, ycols, names, m):
    F = len(cols)
    rel = _relevance(cols, ycols)
    ent = np.array([entropy_bits(c) for c in cols])
    selected: list[int] = []
    scores: list[float] = []
    remaining = set(range(F))
    acc = np.zeros(F)  # accumulated redundancy / joint relevance

    first = _argbest(rel, names, remaining)
    selected.append(first)
    scores.append(float(rel[first]))
    remaining.discard(first)

    while len(selected) < m and remaining:
        s = selected[-1]
        crit = np.full(F, -np.inf)
        for f in remaining:
            if method == "MLJMI":
                pair = _pairwise_column(cols[f], cols[s])
                acc[f] += sum(mutual_information(pair, y) for y in ycols)
                crit[f] = acc[f]
            elif method == "MLMRMR":
                acc[f] += mutual_information(cols[f], cols[s])
                crit[f] = rel[f] - acc[f] / len(selected)
            else:  # MIFS (normalized-MI redundancy)
                denom = min(ent[f], ent[s])
                acc[f] += mutual_information(cols[f], cols[s]) / denom if denom > 0 else 0.0
                crit[f] = rel[f] - acc[f] / len(selected)
        nxt = _argbest(crit, names, remaining)
        selected.append(nxt)
        scores.append(float(crit[nxt]))
        remaining.discard(nxt)
    return selected, scores


def _fisher_scores(X, Y) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    scores = np.zeros(X.shape[1])
    for l in range(Y.shape[1]):
        pos = Y[:, l] == 1
        neg = ~pos
        if not pos.any() or not neg.any():
            continue
        mu_p, mu_n = X[pos].mean(axis=0), X[neg].mean(axis=0)
        var = X[pos].var(axis=0) + X[neg].var(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            f = np.where(var > 0, (mu_p - mu_n) ** 2 / var, 0.0)
        scores += np.nan_to_num(f)
    return scores


def rank_features(method: str, X, Y, m: int, names: list[str]) -> FeatureRanking:
    """Select m features with the given method.

    MI methods see floor-discretized raw values; FSCORE sees raw values;
    RFS expects z-scored X (see :func:`rfs_rank`).
    """
    method = method.upper()
    if method not in SELECTION_METHODS:
        raise ValueError(f"unknown selection method {method!r}")
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y)
    if m > X.shape[1]:
        raise ValueError("cannot select more features than available")
    if method == "RFS":
        return rfs_rank(X, Y, m=m, names=names)
    if method == "FSCORE":
        scores = _fisher_scores(X, Y)
        order = sorted(range(len(names)), key=lambda f: (-scores[f], names[f]))[:m]
        return FeatureRanking(
            method="FSCORE",
            features=tuple(names[f] for f in order),
            scores=tuple(float(scores[f]) for f in order),
            m=m,
        )

    cols = [DiscretizedColumn(X[:, f]) for f in range(X.shape[1])]
    ycols = [DiscretizedColumn(Y[:, l]) for l in range(Y.shape[1])]
    if method == "MLMIM":
        rel = _relevance(cols, ycols)
        order = sorted(range(len(names)), key=lambda f: (-rel[f], names[f]))[:m]
        return FeatureRanking(
            method="MLMIM",
            features=tuple(names[f] for f in order),
            scores=tuple(float(rel[f]) for f in order),
            m=m,
        )
    selected, scores = _greedy(method, cols, ycols, names, m)
    return FeatureRanking(
        method=method,
        features=tuple(names[f] for f in selected),
        scores=tuple(scores),
        m=m,
    )


def rfs_irls(X, Y, gamma: float = 1.0, tol: float = 1e-6, max_iter: int = 100):
    """IRLS for min_W sum_i ||(XW-Y)_i|| + gamma * sum_j ||W_j||.

    Returns (W, objective history, converged). The smoothed objective is
    non-increasing across iterations (majorize-minimize).
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n, d = X.shape
    eps = 1e-12

    W, *_ = np.linalg.lstsq(X, Y, rcond=None)

    def objective(W):
        e = X @ W - Y
        row_e = np.sqrt((e**2).sum(axis=1) + eps)
        row_w = np.sqrt((W**2).sum(axis=1) + eps)
        return float(row_e.sum() + gamma * row_w.sum())

    history = [objective(W)]
    converged = False
    for _ in range(max_iter):
        e = X @ W - Y
        de = 0.5 / np.sqrt((e**2).sum(axis=1) + eps)
        dw = 0.5 / np.sqrt((W**2).sum(axis=1) + eps)
        Xw = X * de[:, None]
        A = X.T @ Xw + gamma * np.diag(dw)
        W = np.linalg.solve(A, Xw.T @ Y)
        history.append(objective(W))
        if abs(history[-2] - history[-1]) <= tol * max(1.0, abs(history[-2])):
            converged = True
            break
    return W, history, converged


def rfs_rank(
    X,
    Y,
    gamma: float = 1.0,
    m: int | None = None,
    names: list[str] | None = None,
) -> FeatureRanking:
    """Rank features by the row norms of the RFS weight matrix."""
    X = np.asarray(X, dtype=float)
    if names is None:
        names = [f"f{i}" for i in range(X.shape[1])]
    if m is None:
        m = X.shape[1]
    W, _history, converged = rfs_irls(X, Y, gamma=gamma)
    norms = np.sqrt((W**2).sum(axis=1))
    order = sorted(range(len(names)), key=lambda f: (-norms[f], names[f]))[:m]
    return FeatureRanking(
        method="RFS",
        features=tuple(names[f] for f in order),
        scores=tuple(float(norms[f]) for f in order),
        m=m,
        converged=converged,
    )


def mi_report(ranking: FeatureRanking, X, Y, names: list[str]):
    """Discretized MI of each selected feature against the joint label vector."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y)
    ycols = [DiscretizedColumn(Y[:, l]) for l in range(Y.shape[1])]
    joint = ycols[0]
    for y in ycols[1:]:
        joint = _pairwise_column(joint, y)
    index = {name: i for i, name in enumerate(names)}
    out = []
    for rank, feat in enumerate(ranking.features, start=1):
        col = DiscretizedColumn(X[:, index[feat]])
        out.append(
            {
                "rank": rank,
                "feature": feat,
                "score": float(ranking.scores[rank - 1]),
                "mi_bits": mutual_information(col, joint),
            }
        )
    return out
