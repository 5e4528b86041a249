"""Multilabel evaluation metrics and the majority-class baseline.

Y is the true binary label matrix, Z the predicted one (instances x labels).
Instance-level set metrics use the conventions: an empty union counts as a
perfect match (accuracy 1) and an empty denominator in precision/recall
contributes 1 when the other side is empty too, else 0. AUC is the macro
average over labels of the fraction of (positive, negative) pairs ranked
correctly, ties counting for the positive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "accuracy",
    "subset_accuracy",
    "precision",
    "recall",
    "f_measure",
    "auc_macro",
    "majority_class",
    "majority_vector",
    "mc_baselines",
    "per_aoi_accuracy",
    "EvalReport",
]


def _check(Y, Z):
    Y = np.asarray(Y)
    Z = np.asarray(Z)
    if Y.shape != Z.shape:
        raise ValueError(f"shape mismatch: {Y.shape} vs {Z.shape}")
    if Y.ndim != 2:
        raise ValueError("expected 2-D label matrices")
    return Y.astype(bool), Z.astype(bool)


def accuracy(Y, Z) -> float:
    """Mean Jaccard overlap |Y & Z| / |Y | Z| (empty/empty counts 1)."""
    Y, Z = _check(Y, Z)
    inter = (Y & Z).sum(axis=1)
    union = (Y | Z).sum(axis=1)
    per = np.where(union > 0, inter / np.maximum(union, 1), 1.0)
    return float(per.mean())


def subset_accuracy(Y, Z) -> float:
    """Fraction of instances whose entire label vector is exact."""
    Y, Z = _check(Y, Z)
    return float((Y == Z).all(axis=1).mean())


def precision(Y, Z) -> float:
    Y, Z = _check(Y, Z)
    inter = (Y & Z).sum(axis=1)
    pred = Z.sum(axis=1)
    true = Y.sum(axis=1)
    per = np.where(pred > 0, inter / np.maximum(pred, 1), (true == 0).astype(float))
    return float(per.mean())


def recall(Y, Z) -> float:
    Y, Z = _check(Y, Z)
    inter = (Y & Z).sum(axis=1)
    pred = Z.sum(axis=1)
    true = Y.sum(axis=1)
    per = np.where(true > 0, inter / np.maximum(true, 1), (pred == 0).astype(float))
    return float(per.mean())


def f_measure(Y, Z) -> float:
    """Harmonic mean of the aggregate precision and recall (0 when both 0)."""
    p = precision(Y, Z)
    r = recall(Y, Z)
    if p + r == 0:
        return 0.0
    return 2.0 * p * r / (p + r)


def auc_macro(Y, confidence) -> float:
    """Macro AUC from ranking scores.

    Per label, the fraction of (positive, negative) instance pairs with
    score(pos) >= score(neg); labels without both classes are excluded.
    Returns NaN when no label has both classes.
    """
    Y = np.asarray(Y).astype(bool)
    if confidence is None:
        raise ValueError("model provides no confidence scores")
    R = np.asarray(confidence, dtype=float)
    if R.shape != Y.shape:
        raise ValueError(f"shape mismatch: {Y.shape} vs {R.shape}")
    vals = []
    for l in range(Y.shape[1]):
        pos = R[Y[:, l], l]
        neg = R[~Y[:, l], l]
        if pos.size == 0 or neg.size == 0:
            continue
        neg_sorted = np.sort(neg)
        good = np.searchsorted(neg_sorted, pos, side="right").sum()
        vals.append(good / (pos.size * neg.size))
    return float(np.mean(vals)) if vals else float("nan")


def majority_class(bits) -> tuple[int, float]:
    """Modal class of one label column and its frequency (ties pick 1)."""
    bits = np.asarray(bits).astype(int).ravel()
    if bits.size == 0:
        raise ValueError("empty label column")
    ones = int(bits.sum())
    zeros = bits.size - ones
    if ones >= zeros:
        return 1, ones / bits.size
    return 0, zeros / bits.size


def majority_vector(Y) -> tuple[np.ndarray, float]:
    """Modal full label vector and its frequency (ties pick the lexicographically
    largest vector, consistent with preferring class 1 per label)."""
    Y = np.asarray(Y).astype(np.int8)
    if Y.size == 0:
        raise ValueError("empty label matrix")
    rows, counts = np.unique(Y, axis=0, return_counts=True)
    top = counts.max()
    tied = rows[counts == top]
    best = max(tuple(int(v) for v in row) for row in tied)
    return np.array(best, dtype=np.int8), float(top / Y.shape[0])


def per_aoi_accuracy(Y, Z) -> np.ndarray:
    """Binary accuracy per label: fraction of windows with bit j correct."""
    Y, Z = _check(Y, Z)
    return (Y == Z).mean(axis=0)


def mc_baselines(Y) -> dict:
    """Majority-class reference: per-AOI ratios, modal vector, and the
    metrics achieved by constantly predicting the modal vector."""
    Y = np.asarray(Y).astype(np.int8)
    per_aoi = [majority_class(Y[:, j]) for j in range(Y.shape[1])]
    vec, vec_ratio = majority_vector(Y)
    Z = np.tile(vec, (Y.shape[0], 1))
    return {
        "per_aoi_class": [c for c, _ in per_aoi],
        "per_aoi_ratio": [r for _, r in per_aoi],
        "vector": vec,
        "vector_ratio": vec_ratio,
        "accuracy": accuracy(Y, Z),
        "subset_accuracy": subset_accuracy(Y, Z),
    }


@dataclass(frozen=True)
class EvalReport:
    """Across-fold mean and standard deviation per metric.

    ``auc``/``precision`` may be (nan, nan) for sign-only models.
    ``per_aoi`` is the across-fold mean binary accuracy per AOI.
    """

    auc: tuple[float, float]
    exact: tuple[float, float]
    fscore: tuple[float, float]
    acc: tuple[float, float]
    pre: tuple[float, float]
    per_aoi: tuple[float, ...]

    @staticmethod
    def from_folds(fold_metrics: list[dict]) -> "EvalReport":
        def agg(key):
            vals = np.array([m[key] for m in fold_metrics], dtype=float)
            if np.isnan(vals).any():
                return (float("nan"), float("nan"))
            return (float(vals.mean()), float(vals.std()))

        per = np.array([m["per_aoi"] for m in fold_metrics], dtype=float)
        return EvalReport(
            auc=agg("auc"),
            exact=agg("exact"),
            fscore=agg("fscore"),
            acc=agg("acc"),
            pre=agg("pre"),
            per_aoi=tuple(float(v) for v in per.mean(axis=0)),
        )


def fold_metrics(Y, prediction) -> dict:
    """All metrics of one fold for one model's prediction."""
    Z = prediction.bits
    conf = prediction.confidence
    return {
        "auc": auc_macro(Y, conf) if conf is not None else float("nan"),
        "exact": subset_accuracy(Y, Z),
        "fscore": f_measure(Y, Z),
        "acc": accuracy(Y, Z),
        "pre": precision(Y, Z) if conf is not None else float("nan"),
        "per_aoi": per_aoi_accuracy(Y, Z),
    }
