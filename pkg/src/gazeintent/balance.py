"""MLSMOTE oversampling for multilabel training sets.

Minority labels (imbalance ratio above the mean) seed synthetic instances:
each instance bearing such a label is interpolated, feature by feature,
toward one of its k nearest neighbors among instances sharing the label.
Labels of the synthetic instance follow the ranking rule: active iff active
in strictly more than half of {seed} + neighbors. Follows Charte et al.'s
MLSMOTE; this variant is single-pass (imbalance measures and the neighbor
pool are fixed at the input state) and skips seeds with no same-label
neighbor, so clones are never emitted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["Dataset", "ImbalanceStats", "imbalance_stats", "mlsmote"]


@dataclass(frozen=True)
class Dataset:
    """Feature matrix, binary label matrix and per-row provenance."""

    X: np.ndarray
    Y: np.ndarray
    synthetic: np.ndarray = None

    def __post_init__(self):
        if self.X.shape[0] != self.Y.shape[0]:
            raise ValueError("X and Y row counts differ")
        if self.synthetic is None:
            object.__setattr__(
                self, "synthetic", np.zeros(self.X.shape[0], dtype=bool)
            )

    @property
    def n_instances(self) -> int:
        return self.X.shape[0]

    @property
    def n_labels(self) -> int:
        return self.Y.shape[1]


@dataclass(frozen=True)
class ImbalanceStats:
    """IRLbl per label (inf for absent labels) and the mean of finite ones."""

    irlbl: np.ndarray
    mean_ir: float


def imbalance_stats(Y: np.ndarray) -> ImbalanceStats:
    freq = np.asarray(Y).sum(axis=0).astype(float)
    top = freq.max() if freq.size else 0.0
    with np.errstate(divide="ignore"):
        irlbl = np.where(freq > 0, top / np.maximum(freq, 1e-300), np.inf)
    finite = irlbl[np.isfinite(irlbl)]
    mean_ir = float(finite.mean()) if finite.size else 0.0
    return ImbalanceStats(irlbl=irlbl, mean_ir=mean_ir)


def _zscore(X):
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    return (X - mu) / sd


def mlsmote(train: Dataset, k: int = 5, seed: int = 0) -> Dataset:
    """Oversample minority labels of a training set.

    Deterministic for a fixed seed; real rows are passed through untouched
    and synthetic rows are flagged in ``synthetic``.
    """
    if k < 1:
        raise ValueError("neighbor count must be >= 1")
    X = np.asarray(train.X, dtype=float)
    Y = np.asarray(train.Y)
    rng = np.random.default_rng(seed)

    stats = imbalance_stats(Y)
    minority = [
        j
        for j in range(Y.shape[1])
        if np.isfinite(stats.irlbl[j]) and stats.irlbl[j] > stats.mean_ir
    ]

    Z = _zscore(X)
    new_X, new_Y = [], []
    for j in minority:
        bag = np.flatnonzero(Y[:, j] == 1)
        if bag.size < 2:
            continue  # no same-label neighbor: never clone
        Zb = Z[bag]
        d2 = ((Zb[:, None, :] - Zb[None, :, :]) ** 2).sum(axis=2)
        for si, s in enumerate(bag):
            order = np.argsort(d2[si], kind="stable")
            order = order[order != si][: k]
            ref_local = order[rng.integers(order.size)]
            ref = bag[ref_local]
            coeff = rng.uniform(size=X.shape[1])
            new_X.append(X[s] + coeff * (X[ref] - X[s]))
            members = np.concatenate([[s], bag[order]])
            votes = Y[members].sum(axis=0)
            new_Y.append((votes * 2 > members.size).astype(Y.dtype))

    if not new_X:
        return Dataset(X=X, Y=Y, synthetic=train.synthetic.copy())
    Xa = np.vstack([X, np.array(new_X)])
    Ya = np.vstack([Y, np.array(new_Y)])
    flags = np.concatenate([train.synthetic, np.ones(len(new_X), dtype=bool)])
    return Dataset(X=Xa, Y=Ya, synthetic=flags)
