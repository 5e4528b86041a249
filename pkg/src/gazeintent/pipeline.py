"""Experiment orchestration: cross-validated grid search over the model zoo.

The flow per run: load corpus -> detect fixations -> window + label ->
balance users into K folds -> per fold: fit the heat model on training
sessions, oversample the training set, rank features, sweep every
(model family x selection method x feature count x hyperparameter)
combination and score it on the untouched test fold -> aggregate across
folds and pick the configuration maximizing mean accuracy (ties: subset
accuracy, then precision).

Everything trained (heat model, oversampling, scaler, rankings, models) is
a function of training rows only; grid search evaluates on test folds
without a nested validation split, which reproduces the published protocol
(see README for the caveat). Runs are deterministic for a fixed seed.
"""

from __future__ import annotations

import json
import sys
import time
from collections import defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .balance import Dataset, mlsmote
from .classify import (
    HyperGrid,
    Prediction,
    Scaler,
    _dcd_epochs,
    fit_scaler,
    k_candidates,
    ksmallest_stable,
    mlknn_posterior,
    mlknn_tables,
    sqdist_accumulate,
)
from .features import (
    SessionContext,
    build_context,
    extract_session_features,
    feature_names,
    fit_heat_model,
    heat_column_indices,
)
from .folds import FoldAssignment, FoldProblem, assign_folds, fold_csv_rows
from .gaze import Layout
from .io import (
    MalformedFileError,
    load_events_csv,
    load_gaze_csv,
    load_layout,
    write_csv,
)
from .metrics import EvalReport, fold_metrics, mc_baselines
from .selection import SELECTION_METHODS, mi_report, rank_features

__all__ = [
    "ExperimentConfig",
    "ConfigError",
    "RunResult",
    "load_config",
    "run_experiment",
    "sensitivity_sweep",
    "timing_report",
    "emit_reports",
    "load_metrics_csv",
]

MODEL_FAMILIES = ("RR-BR", "RR-CC", "KNN-BR", "KNN-CC", "SVM-BR", "SVM-CC", "MLKNN")


class ConfigError(ValueError):
    """Configuration violates the experiment's parameter contracts."""


@dataclass(frozen=True)
class ExperimentConfig:
    gaze_csv: str
    events_csv: str
    layout: str
    tau_s: float = 5.0
    k_folds: int = 10
    seed: int = 0
    models: tuple = MODEL_FAMILIES
    selection_methods: tuple = SELECTION_METHODS
    grid: HyperGrid = field(default_factory=HyperGrid)
    fold_mode: str = "heuristic"
    mlsmote_k: int = 5
    dispersion_px: float = 30.0
    min_fixation_ms: float = 100.0
    blink_gap_ms: float = 75.0

    def validate(self):
        if self.tau_s <= 0:
            raise ConfigError("tau must be positive")
        if self.k_folds < 2:
            raise ConfigError("cross-validation requires at least 2 folds")
        for m in self.models:
            if m not in MODEL_FAMILIES:
                raise ConfigError(f"unknown model family {m!r}")
        for s in self.selection_methods:
            if s not in SELECTION_METHODS:
                raise ConfigError(f"unknown selection method {s!r}")
        g = self.grid
        if not g.feature_counts or any(
            (not float(m).is_integer()) or m < 1 for m in g.feature_counts
        ):
            raise ConfigError("feature counts must be positive integers")
        if not g.ridge_lambdas or any(v <= 0 for v in g.ridge_lambdas):
            raise ConfigError("ridge lambdas must be positive")
        if not g.svm_costs or any(v <= 0 for v in g.svm_costs):
            raise ConfigError("svm costs must be positive")
        if not g.knn_neighbors or any(k < 1 for k in g.knn_neighbors):
            raise ConfigError("knn neighbor counts must be >= 1")
        if g.mlknn_k < 1:
            raise ConfigError("mlknn k must be >= 1")
        if self.mlsmote_k < 1:
            raise ConfigError("mlsmote k must be >= 1")
        if self.fold_mode not in ("exact", "heuristic"):
            raise ConfigError("fold_mode must be 'exact' or 'heuristic'")
        return self

    def to_dict(self) -> dict:
        return {
            "gaze_csv": self.gaze_csv,
            "events_csv": self.events_csv,
            "layout": self.layout,
            "tau": self.tau_s,
            "folds": self.k_folds,
            "seed": self.seed,
            "models": list(self.models),
            "selection_methods": list(self.selection_methods),
            "feature_counts": list(self.grid.feature_counts),
            "ridge_lambdas": list(self.grid.ridge_lambdas),
            "knn_neighbors": list(self.grid.knn_neighbors),
            "svm_costs": list(self.grid.svm_costs),
            "mlknn_k": self.grid.mlknn_k,
            "fold_mode": self.fold_mode,
            "mlsmote_k": self.mlsmote_k,
            "dispersion_px": self.dispersion_px,
            "min_fixation_ms": self.min_fixation_ms,
            "blink_gap_ms": self.blink_gap_ms,
        }


def load_config(path_or_dict, overrides: dict | None = None) -> ExperimentConfig:
    """Config from a JSON file (or dict), with optional CLI overrides."""
    if isinstance(path_or_dict, (str, Path)):
        path = Path(path_or_dict)
        if not path.exists():
            raise FileNotFoundError(path)
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise MalformedFileError(f"{path}: invalid JSON ({exc})") from None
    else:
        doc = dict(path_or_dict)
    doc.update(overrides or {})
    try:
        grid = HyperGrid(
            ridge_lambdas=tuple(doc.get("ridge_lambdas", HyperGrid.ridge_lambdas)),
            knn_neighbors=tuple(doc.get("knn_neighbors", HyperGrid.knn_neighbors)),
            svm_costs=tuple(doc.get("svm_costs", HyperGrid.svm_costs)),
            mlknn_k=int(doc.get("mlknn_k", HyperGrid.mlknn_k)),
            feature_counts=tuple(doc.get("feature_counts", HyperGrid.feature_counts)),
        )
        cfg = ExperimentConfig(
            gaze_csv=doc["gaze_csv"],
            events_csv=doc["events_csv"],
            layout=doc["layout"],
            tau_s=float(doc.get("tau", 5.0)),
            k_folds=int(doc.get("folds", 10)),
            seed=int(doc.get("seed", 0)),
            models=tuple(doc.get("models", MODEL_FAMILIES)),
            selection_methods=tuple(doc.get("selection_methods", SELECTION_METHODS)),
            grid=grid,
            fold_mode=doc.get("fold_mode", "heuristic"),
            mlsmote_k=int(doc.get("mlsmote_k", 5)),
            dispersion_px=float(doc.get("dispersion_px", 30.0)),
            min_fixation_ms=float(doc.get("min_fixation_ms", 100.0)),
            blink_gap_ms=float(doc.get("blink_gap_ms", 75.0)),
        )
    except KeyError as exc:
        raise ConfigError(f"config misses required key {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg.validate()


# ---------------------------------------------------------------------------
# data preparation


@dataclass
class PreparedData:
    layout: Layout
    contexts: list[SessionContext]
    names: list[str]
    heat_cols: np.ndarray
    X: np.ndarray  # (N, D) heat columns zeroed
    Y: np.ndarray  # (N, L)
    row_user: np.ndarray
    row_session: np.ndarray
    row_windex: np.ndarray
    users: list[str]

    @property
    def n_labels(self) -> int:
        return self.layout.n


def prepare_data(cfg: ExperimentConfig) -> PreparedData:
    for p in (cfg.gaze_csv, cfg.events_csv, cfg.layout):
        if not Path(p).exists():
            raise FileNotFoundError(p)
    layout = load_layout(cfg.layout)
    signals = load_gaze_csv(cfg.gaze_csv)
    events = load_events_csv(cfg.events_csv)
    return prepare_from_objects(cfg, layout, signals, events)


def prepare_from_objects(cfg, layout, signals, events) -> PreparedData:
    contexts = []
    for key in sorted(signals):
        ctx = build_context(
            signals[key],
            layout,
            events.get(key, []),
            cfg.tau_s,
            dispersion_px=cfg.dispersion_px,
            min_duration_ms=cfg.min_fixation_ms,
            blink_gap_ms=cfg.blink_gap_ms,
        )
        contexts.append(ctx)
    names = feature_names(layout)
    heat_cols = heat_column_indices(names, layout.n)

    mats, labels, row_user, row_session, row_windex = [], [], [], [], []
    for ctx in contexts:
        W = ctx.windowed.n_windows
        if W == 0:
            continue
        mats.append(extract_session_features(ctx))
        labels.append(ctx.windowed.label_matrix())
        row_user += [ctx.signal.user_id] * W
        row_session += [ctx.signal.session_id] * W
        row_windex += list(range(1, W + 1))
    if not mats:
        raise ValueError("corpus has no windows at this tau")
    X = np.vstack(mats)
    Y = np.vstack(labels)
    users = sorted({u for u in row_user})
    return PreparedData(
        layout=layout,
        contexts=contexts,
        names=names,
        heat_cols=heat_cols,
        X=X,
        Y=Y,
        row_user=np.array(row_user),
        row_session=np.array(row_session),
        row_windex=np.array(row_windex),
        users=users,
    )


def make_fold_problem(prep: PreparedData, k: int) -> FoldProblem:
    counts = [int((prep.row_user == u).sum()) for u in prep.users]
    return FoldProblem(user_ids=tuple(prep.users), window_counts=tuple(counts), k=k)


def fill_heat(prep: PreparedData, train_sessions) -> np.ndarray:
    """Copy of the feature matrix with Heat columns from a train-fit model."""
    model = fit_heat_model(train_sessions, prep.n_labels)
    X = prep.X.copy()
    max_w = model.support.size
    ratios = np.zeros((prep.n_labels, max_w + 1))
    ok = model.support > 0
    ratios[:, :max_w][:, ok] = model.counts[:, ok] / model.support[ok]
    idx = np.minimum(prep.row_windex - 1, max_w)  # out-of-range rows hit the zero pad
    valid = prep.row_windex - 1 < max_w
    vals = np.where(valid[None, :], ratios[:, idx], 0.0)
    X[:, prep.heat_cols] = vals.T
    return X


@dataclass
class FoldArtifacts:
    """Everything fitted from one training fold (test rows never seen)."""

    fold: int
    heat_X: np.ndarray  # full matrix with this fold's heat values
    train_rows: np.ndarray
    aug: Dataset
    scaler: Scaler
    rankings: dict
    sel_cols: dict  # method -> column index array (ranking order)


def _fold_seed(seed: int, fold: int) -> int:
    return int(np.random.SeedSequence(entropy=(seed, 17, fold)).generate_state(1)[0])


def fit_fold_artifacts(
    prep: PreparedData, cfg: ExperimentConfig, fold: int, train_users
) -> FoldArtifacts:
    train_users = set(train_users)
    train_rows = np.flatnonzero(np.isin(prep.row_user, list(train_users)))
    train_sessions = [
        c.windowed for c in prep.contexts if c.signal.user_id in train_users
    ]
    heat_X = fill_heat(prep, train_sessions)
    raw = Dataset(X=heat_X[train_rows], Y=prep.Y[train_rows])
    aug = mlsmote(raw, k=cfg.mlsmote_k, seed=_fold_seed(cfg.seed, fold))
    scaler = fit_scaler(aug.X)
    m_max = max(cfg.grid.feature_counts)
    name_to_col = {n: i for i, n in enumerate(prep.names)}
    rankings = {}
    sel_cols = {}
    for method in cfg.selection_methods:
        if method == "RFS":
            r = rank_features("RFS", scaler.transform(aug.X), aug.Y, m_max, prep.names)
        else:
            r = rank_features(method, aug.X, aug.Y, m_max, prep.names)
        rankings[method] = r
        sel_cols[method] = np.array([name_to_col[f] for f in r.features])
    return FoldArtifacts(
        fold=fold,
        heat_X=heat_X,
        train_rows=train_rows,
        aug=aug,
        scaler=scaler,
        rankings=rankings,
        sel_cols=sel_cols,
    )


# ---------------------------------------------------------------------------
# per-family grid evaluation (one fold)


def _ridge_eval(Xtr, Ytr, Xte, Yte, lambdas, chain: bool, out, tag, meth, m):
    ntr, d = Xtr.shape
    L = Ytr.shape[1]
    ones_tr = np.ones((ntr, 1))
    ones_te = np.ones((len(Xte), 1))
    if not chain:
        A = np.concatenate([ones_tr, Xtr], axis=1)
        G0 = A.T @ A
        B = A.T @ Ytr
        Ate = np.concatenate([ones_te, Xte], axis=1)
        pen = np.eye(d + 1)
        pen[0, 0] = 0.0
        for lam in lambdas:
            beta = np.linalg.solve(G0 + lam * pen, B)
            scores = Ate @ beta
            bits = (scores >= 0.5).astype(np.int8)
            out[(tag, meth, m, lam)].append(
                fold_metrics(Yte, Prediction(bits, scores, tag))
            )
    else:
        A = np.concatenate([ones_tr, Xtr, Ytr[:, : L - 1].astype(float)], axis=1)
        G0 = A.T @ A
        B = A.T @ Ytr
        for lam in lambdas:
            betas = []
            for j in range(L):
                dj = 1 + d + j
                pen = np.eye(dj)
                pen[0, 0] = 0.0
                betas.append(np.linalg.solve(G0[:dj, :dj] + lam * pen, B[:dj, j]))
            bits = np.zeros((len(Xte), L), dtype=np.int8)
            scores = np.zeros((len(Xte), L))
            prev = np.empty((len(Xte), 0))
            base = np.concatenate([ones_te, Xte], axis=1)
            for j in range(L):
                aug = np.concatenate([base, prev], axis=1)
                s = aug @ betas[j]
                scores[:, j] = s
                bits[:, j] = s >= 0.5
                prev = np.concatenate([prev, bits[:, [j]].astype(float)], axis=1)
            out[(tag, meth, m, lam)].append(
                fold_metrics(Yte, Prediction(bits, scores, tag))
            )


def _knn_eval(D2, Ytr, Yte, ks, out, tag, meth, m):
    kmax = min(max(ks), D2.shape[1])
    cands = k_candidates(D2, kmax)
    Ytr_f = Ytr.astype(float)
    for k in ks:
        if k > D2.shape[1]:
            continue
        sel = ksmallest_stable(D2, k, cands=cands)
        scores = Ytr_f[sel].mean(axis=1)
        bits = (scores >= 0.5).astype(np.int8)
        out[(tag, meth, m, k)].append(fold_metrics(Yte, Prediction(bits, scores, tag)))


def _knn_cc_eval(D2_base, Ytr, Yte, ks, out, tag, meth, m):
    L = Ytr.shape[1]
    nte, ntr = D2_base.shape
    Ytr_f = Ytr.astype(float)
    cands0 = k_candidates(D2_base, min(max(ks), ntr))
    d2 = np.empty_like(D2_base)
    ibuf = np.empty_like(D2_base)
    for k in ks:
        if k > ntr:
            continue
        np.copyto(d2, D2_base)
        bits = np.zeros((nte, L), dtype=np.int8)
        scores = np.zeros((nte, L))
        for j in range(L):
            # chain step 0 sees the base distances: share its candidates
            sel = ksmallest_stable(d2, k, cands=cands0 if j == 0 else None)
            s = Ytr_f[sel, j].mean(axis=1)
            scores[:, j] = s
            bits[:, j] = s >= 0.5
            if j < L - 1:
                np.subtract(bits[:, [j]].astype(float), Ytr_f[None, :, j], out=ibuf)
                np.square(ibuf, out=ibuf)
                d2 += ibuf
        out[(tag, meth, m, k)].append(fold_metrics(Yte, Prediction(bits, scores, tag)))


def _svm_fit_ws(A, y_pm, costs, bank, bkey, fallback_key=None, tol=1e-4, max_epochs=1000):
    """Weights per cost; warm starts along the cost grid, across the nested
    feature-count ladder (``bank``) and from a sibling problem's solution
    (``fallback_key``, e.g. the BR model warming the chained one)."""
    qii = (A**2).sum(axis=1)
    qii = np.where(qii > 0, qii, 1.0)
    ws = {}
    prev_alpha = None
    for C in sorted(costs):
        seed_alpha = bank.get((bkey, C))
        if seed_alpha is None and fallback_key is not None:
            seed_alpha = bank.get((fallback_key, C))
        if seed_alpha is None:
            seed_alpha = prev_alpha
        if seed_alpha is None:
            alpha = np.zeros(A.shape[0])
        else:
            alpha = np.clip(seed_alpha, 0.0, C)
        w = (A * (alpha * y_pm)[:, None]).sum(axis=0)
        _dcd_epochs(A, y_pm, float(C), alpha, w, qii, max_epochs, tol)
        bank[(bkey, C)] = alpha
        prev_alpha = alpha
        ws[C] = w.copy()
    return ws


def _svm_eval(Xtr, Ytr, Xte, Yte, costs, chain: bool, out, tag, meth, m, bank):
    ntr, d = Xtr.shape
    L = Ytr.shape[1]
    per_cost_bits = {C: np.zeros((len(Xte), L), dtype=np.int8) for C in costs}
    if not chain:
        A0 = np.ascontiguousarray(np.concatenate([Xtr, np.ones((ntr, 1))], axis=1))
        for j in range(L):
            col = Ytr[:, j]
            if col.min() == col.max():
                for C in costs:
                    per_cost_bits[C][:, j] = int(col.flat[0])
                continue
            y_pm = np.where(col > 0, 1.0, -1.0)
            ws = _svm_fit_ws(A0, y_pm, costs, bank, ("br", j))
            for C in costs:
                w = ws[C]
                per_cost_bits[C][:, j] = (Xte @ w[:d] + w[d]) >= 0.0
        for C in costs:
            out[(tag, meth, m, C)].append(
                fold_metrics(Yte, Prediction(per_cost_bits[C], None, tag))
            )
    else:
        weights = {}  # (j, C) -> w over [features, chain bits, bias]
        const = {}
        for j in range(L):
            col = Ytr[:, j]
            if col.min() == col.max():
                const[j] = int(col.flat[0])
                continue
            A = np.ascontiguousarray(
                np.concatenate(
                    [Xtr, Ytr[:, :j].astype(float), np.ones((ntr, 1))], axis=1
                )
            )
            y_pm = np.where(col > 0, 1.0, -1.0)
            # label 0 has no chain features: identical to the BR problem
            bkey = ("br", j) if j == 0 else ("cc", j)
            ws = _svm_fit_ws(A, y_pm, costs, bank, bkey, fallback_key=("br", j))
            for C in costs:
                weights[(j, C)] = ws[C]
        for C in costs:
            bits = np.zeros((len(Xte), L), dtype=np.int8)
            prev = np.empty((len(Xte), 0))
            for j in range(L):
                if j in const:
                    bits[:, j] = const[j]
                else:
                    w = weights[(j, C)]
                    margin = Xte @ w[:d] + prev @ w[d : d + j] + w[-1]
                    bits[:, j] = margin >= 0.0
                prev = np.concatenate([prev, bits[:, [j]].astype(float)], axis=1)
            out[(tag, meth, m, C)].append(
                fold_metrics(Yte, Prediction(bits, None, tag))
            )


def _mlknn_eval(D2tr, D2te, Ytr, Yte, k, out, meth, m):
    if k > D2tr.shape[0] - 1:
        return
    neigh_tr = ksmallest_stable(D2tr, k)
    deltas_tr = Ytr[neigh_tr].sum(axis=1)
    tables = mlknn_tables(Ytr, deltas_tr, k)
    neigh_te = ksmallest_stable(D2te, k)
    deltas_te = Ytr[neigh_te].sum(axis=1)
    bits, posterior = mlknn_posterior(tables, deltas_te)
    out[("MLKNN", meth, m, k)].append(
        fold_metrics(Yte, Prediction(bits, posterior, "MLKNN"))
    )


def evaluate_fold(prep, cfg, art: FoldArtifacts, test_rows, out):
    """Score every grid point on one fold, appending into ``out``."""
    grid = cfg.grid
    Xtr_full = art.scaler.transform(art.aug.X)
    Xte_full = art.scaler.transform(art.heat_X[test_rows])
    Ytr = np.asarray(art.aug.Y, dtype=np.int64)
    Yte = prep.Y[test_rows]
    counts = sorted(grid.feature_counts)

    for meth in cfg.selection_methods:
        cols = art.sel_cols[meth]
        Xtr40 = Xtr_full[:, cols]
        Xte40 = Xte_full[:, cols]
        want_rr = {"RR-BR", "RR-CC"} & set(cfg.models)
        want_knn = {"KNN-BR", "KNN-CC"} & set(cfg.models)
        want_svm = {"SVM-BR", "SVM-CC"} & set(cfg.models)
        want_mlk = "MLKNN" in cfg.models

        D2te = None
        D2tr = None
        svm_bank: dict = {}
        prev_m = 0
        for m in counts:
            if m > len(cols):
                continue
            Xtr_m = np.ascontiguousarray(Xtr40[:, :m])
            Xte_m = np.ascontiguousarray(Xte40[:, :m])
            if want_knn or want_mlk:
                D2te = sqdist_accumulate(D2te, Xte40[:, prev_m:m], Xtr40[:, prev_m:m])
            if want_mlk:
                first = D2tr is None
                D2tr = sqdist_accumulate(D2tr, Xtr40[:, prev_m:m], Xtr40[:, prev_m:m])
                if first:
                    np.fill_diagonal(D2tr, np.inf)
            prev_m = m

            if "RR-BR" in cfg.models:
                _ridge_eval(Xtr_m, Ytr, Xte_m, Yte, grid.ridge_lambdas, False, out, "RR-BR", meth, m)
            if "RR-CC" in cfg.models:
                _ridge_eval(Xtr_m, Ytr, Xte_m, Yte, grid.ridge_lambdas, True, out, "RR-CC", meth, m)
            if "KNN-BR" in cfg.models:
                _knn_eval(D2te, Ytr, Yte, grid.knn_neighbors, out, "KNN-BR", meth, m)
            if "KNN-CC" in cfg.models:
                _knn_cc_eval(D2te, Ytr, Yte, grid.knn_neighbors, out, "KNN-CC", meth, m)
            if "SVM-BR" in cfg.models:
                _svm_eval(Xtr_m, Ytr, Xte_m, Yte, grid.svm_costs, False, out, "SVM-BR", meth, m, svm_bank)
            if "SVM-CC" in cfg.models:
                _svm_eval(Xtr_m, Ytr, Xte_m, Yte, grid.svm_costs, True, out, "SVM-CC", meth, m, svm_bank)
            if want_mlk:
                _mlknn_eval(D2tr, D2te, Ytr, Yte, grid.mlknn_k, out, meth, m)


# ---------------------------------------------------------------------------
# run + selection of the best configuration


@dataclass
class RunResult:
    config: dict
    fold_problem: FoldProblem
    fold_assignment: FoldAssignment
    per_config: dict  # key -> EvalReport
    best_key: tuple
    best_per_family: dict  # family -> key
    mc: dict
    mi_rows: list
    n_windows: int
    fold_test_windows: list


def _sort_value(v):
    return -1.0 if (v is None or (isinstance(v, float) and np.isnan(v))) else v


def _selection_rank(report: EvalReport):
    return (
        _sort_value(report.acc[0]),
        _sort_value(report.exact[0]),
        _sort_value(report.pre[0]),
    )


def run_experiment(cfg: ExperimentConfig, prep: PreparedData | None = None) -> RunResult:
    cfg.validate()
    if prep is None:
        prep = prepare_data(cfg)
    if max(cfg.grid.feature_counts) > len(prep.names):
        raise ConfigError(
            f"grid asks for {max(cfg.grid.feature_counts)} features, "
            f"layout yields {len(prep.names)}"
        )
    problem = make_fold_problem(prep, cfg.k_folds)
    assignment = assign_folds(problem, mode=cfg.fold_mode, seed=cfg.seed)
    user_fold = dict(zip(problem.user_ids, assignment.fold_of))

    raw = defaultdict(list)
    fold_test_windows = []
    mi_rows = []
    fold_store = []  # (fold, rankings, aug) for the MI report
    for fold in range(1, cfg.k_folds + 1):
        test_users = [u for u in prep.users if user_fold[u] == fold]
        train_users = [u for u in prep.users if user_fold[u] != fold]
        if not test_users or not train_users:
            continue
        test_rows = np.flatnonzero(np.isin(prep.row_user, test_users))
        if test_rows.size == 0:
            continue
        art = fit_fold_artifacts(prep, cfg, fold, train_users)
        evaluate_fold(prep, cfg, art, test_rows, raw)
        fold_test_windows.append(int(test_rows.size))
        fold_store.append((fold, art.rankings, art.aug))

    per_config = {key: EvalReport.from_folds(folds) for key, folds in raw.items()}
    ordered = sorted(per_config.keys(), key=lambda k: (k[0], k[1], k[2], str(k[3])))
    best_key = max(ordered, key=lambda k: _selection_rank(per_config[k]))
    best_per_family = {}
    for fam in cfg.models:
        fam_keys = [k for k in ordered if k[0] == fam]
        if fam_keys:
            best_per_family[fam] = max(
                fam_keys, key=lambda k: _selection_rank(per_config[k])
            )

    # MI report for the winning configuration's per-fold selections
    _, meth, m, _ = best_key
    for fold, rankings, aug in fold_store:
        sub = replace_m(rankings[meth], m)
        for row in mi_report(sub, aug.X, aug.Y, prep.names):
            mi_rows.append({"fold": fold, **row})

    return RunResult(
        config=cfg.to_dict(),
        fold_problem=problem,
        fold_assignment=assignment,
        per_config=per_config,
        best_key=best_key,
        best_per_family=best_per_family,
        mc=mc_baselines(prep.Y),
        mi_rows=mi_rows,
        n_windows=int(prep.Y.shape[0]),
        fold_test_windows=fold_test_windows,
    )


def replace_m(ranking, m):
    from .selection import FeatureRanking

    return FeatureRanking(
        method=ranking.method,
        features=ranking.features[:m],
        scores=ranking.scores[:m],
        m=m,
        converged=ranking.converged,
    )


def sensitivity_sweep(cfg: ExperimentConfig, taus=(3.0, 5.0, 10.0, 15.0, 20.0)) -> dict:
    """Full experiment per window length; returns {tau: RunResult}."""
    results = {}
    for tau in taus:
        results[float(tau)] = run_experiment(replace(cfg, tau_s=float(tau)))
    return results


# ---------------------------------------------------------------------------
# timing


TIMING_DEFAULTS = {
    "RR-BR": ("RFS", 30, 1.75),
    "RR-CC": ("RFS", 30, 1.75),
    "KNN-BR": ("MLMIM", 10, 20),
    "KNN-CC": ("MLJMI", 10, 15),
    "SVM-BR": ("MLMIM", 40, 0.2),
    "SVM-CC": ("RFS", 30, 0.4),
    "MLKNN": ("MLMIM", 10, 15),
}


def _time_family(family, Xtr, Ytr, Xte, param, repeats):
    """Median wall-clock train/test seconds over ``repeats`` runs."""
    train_ts, test_ts = [], []
    for _ in range(repeats):
        t0 = time.perf_counter()
        model = _fit_family(family, Xtr, Ytr, param)
        t1 = time.perf_counter()
        _predict_family(family, model, Xtr, Ytr, Xte, param)
        t2 = time.perf_counter()
        train_ts.append(t1 - t0)
        test_ts.append(t2 - t1)
    return float(np.median(train_ts)), float(np.median(test_ts))


def _fit_family(family, Xtr, Ytr, param):
    from .classify import (
        BinaryRelevance,
        ClassifierChain,
        KNNLearner,
        MLKNN,
        RidgeLearner,
        SVMLearner,
    )

    L = Ytr.shape[1]
    if family.startswith("RR"):
        factory = lambda: RidgeLearner(param)
    elif family.startswith("KNN"):
        factory = lambda: KNNLearner(int(param))
    elif family.startswith("SVM"):
        factory = lambda: SVMLearner(param)
    else:
        return MLKNN(k=int(param)).fit(Xtr, Ytr)
    wrapper = (
        ClassifierChain(factory) if family.endswith("-CC") else BinaryRelevance(factory)
    )
    return wrapper.fit(Xtr, Ytr)


def _predict_family(family, model, Xtr, Ytr, Xte, param):
    return model.predict(Xte)


def timing_report(
    cfg: ExperimentConfig,
    taus=None,
    repeats: int = 3,
    configs: dict | None = None,
) -> dict:
    """Wall-clock train/test per model family, per fold, per window length.

    Feature extraction is timed separately. Rows carry the per-window mean
    prediction time and whether it stays under the window length.
    """
    cfg.validate()
    taus = [cfg.tau_s] if taus is None else [float(t) for t in taus]
    configs = dict(TIMING_DEFAULTS, **(configs or {}))
    rows = []
    extraction_rows = []
    for tau in taus:
        tau_cfg = replace(cfg, tau_s=tau)
        t0 = time.perf_counter()
        prep = prepare_data(tau_cfg)
        t1 = time.perf_counter()
        extraction_rows.append(
            {
                "tau": tau,
                "total_s": t1 - t0,
                "n_windows": int(prep.Y.shape[0]),
                "per_window_ms": 1000.0 * (t1 - t0) / max(prep.Y.shape[0], 1),
            }
        )
        problem = make_fold_problem(prep, tau_cfg.k_folds)
        assignment = assign_folds(problem, mode=tau_cfg.fold_mode, seed=tau_cfg.seed)
        user_fold = dict(zip(problem.user_ids, assignment.fold_of))
        needed = {configs[f][0] for f in cfg.models}
        tau_cfg = replace(tau_cfg, selection_methods=tuple(sorted(needed)))

        stats = {f: {"train": [], "test": [], "n_test": []} for f in cfg.models}
        for fold in range(1, tau_cfg.k_folds + 1):
            test_users = [u for u in prep.users if user_fold[u] == fold]
            train_users = [u for u in prep.users if user_fold[u] != fold]
            if not test_users or not train_users:
                continue
            test_rows = np.flatnonzero(np.isin(prep.row_user, test_users))
            if test_rows.size == 0:
                continue
            art = fit_fold_artifacts(prep, tau_cfg, fold, train_users)
            Xtr_full = art.scaler.transform(art.aug.X)
            Xte_full = art.scaler.transform(art.heat_X[test_rows])
            Ytr = np.asarray(art.aug.Y, dtype=np.int64)
            for family in cfg.models:
                meth, m, param = configs[family]
                cols = art.sel_cols[meth][: min(m, len(art.sel_cols[meth]))]
                tr, te = _time_family(
                    family, Xtr_full[:, cols], Ytr, Xte_full[:, cols], param, repeats
                )
                stats[family]["train"].append(tr)
                stats[family]["test"].append(te)
                stats[family]["n_test"].append(test_rows.size)
        for family in cfg.models:
            tr = np.array(stats[family]["train"])
            te = np.array(stats[family]["test"])
            nt = np.array(stats[family]["n_test"], dtype=float)
            if tr.size == 0:
                continue
            per_window_s = float((te / nt).mean())
            rows.append(
                {
                    "tau": tau,
                    "model": family,
                    "train_mean_s": float(tr.mean()),
                    "train_sd_s": float(tr.std()),
                    "test_mean_s": float(te.mean()),
                    "test_sd_s": float(te.std()),
                    "test_windows_mean": float(nt.mean()),
                    "per_window_ms": 1000.0 * per_window_s,
                    "within_budget": bool(per_window_s < tau),
                }
            )
    return {"rows": rows, "extraction": extraction_rows, "repeats": repeats}


# ---------------------------------------------------------------------------
# report emission


def _fmt(v, digits=6):
    if v is None or (isinstance(v, float) and np.isnan(v)):
        return "-"
    return f"{v:.{digits}f}"


def _mean_sd(pair):
    if pair is None or np.isnan(pair[0]):
        return "-"
    return f"{pair[0]:.3f} ({pair[1]:.3f})"


def emit_reports(result, out_dir) -> list[str]:
    """Write the result bundle; returns the file names written.

    Accepts a RunResult, a sweep dict {tau: RunResult}, or a timing dict.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    if isinstance(result, dict) and "rows" in result:  # timing bundle
        write_csv(
            out / "timing.csv",
            [
                "tau", "model", "train_mean_s", "train_sd_s", "test_mean_s",
                "test_sd_s", "test_windows_mean", "per_window_ms", "within_budget",
            ],
            [
                [
                    r["tau"], r["model"], _fmt(r["train_mean_s"]), _fmt(r["train_sd_s"]),
                    _fmt(r["test_mean_s"]), _fmt(r["test_sd_s"]),
                    _fmt(r["test_windows_mean"], 1), _fmt(r["per_window_ms"], 3),
                    int(r["within_budget"]),
                ]
                for r in result["rows"]
            ],
        )
        write_csv(
            out / "extraction_timing.csv",
            ["tau", "total_s", "n_windows", "per_window_ms"],
            [
                [r["tau"], _fmt(r["total_s"]), r["n_windows"], _fmt(r["per_window_ms"], 3)]
                for r in result["extraction"]
            ],
        )
        _write_manifest(out, {"kind": "timing", "repeats": result["repeats"]})
        return ["timing.csv", "extraction_timing.csv", "manifest.json"]

    if isinstance(result, dict):  # sweep bundle {tau: RunResult}
        series = []
        for tau in sorted(result):
            sub = result[tau]
            tau_dir = out / f"tau_{tau:g}"
            written += [f"tau_{tau:g}/{name}" for name in emit_reports(sub, tau_dir)]
            for fam, key in sorted(sub.best_per_family.items()):
                rep = sub.per_config[key]
                series.append(
                    [
                        tau, fam, key[1], key[2], str(key[3]),
                        _fmt(rep.auc[0], 3), _fmt(rep.exact[0], 3), _fmt(rep.fscore[0], 3),
                        _fmt(rep.acc[0], 3), _fmt(rep.pre[0], 3),
                    ]
                )
        write_csv(
            out / "sweep_series.csv",
            ["tau", "model", "selection", "n_features", "param",
             "auc", "exact", "fscore", "acc", "pre"],
            series,
        )
        _write_manifest(out, {"kind": "sweep", "taus": sorted(result)})
        return written + ["sweep_series.csv", "manifest.json"]

    # single run bundle
    n = len(result.mc["per_aoi_ratio"])
    header = ["model", "selection", "n_features", "param",
              "AUC", "Exact", "Fscore", "Acc", "Pre"] + [
        f"AOI {j}" for j in range(1, n + 1)
    ]
    rows = []
    for fam in sorted(result.best_per_family):
        key = result.best_per_family[fam]
        rep = result.per_config[key]
        rows.append(
            [fam, key[1], key[2], str(key[3]),
             _mean_sd(rep.auc), _mean_sd(rep.exact), _mean_sd(rep.fscore),
             _mean_sd(rep.acc), _mean_sd(rep.pre)]
            + [f"{v:.3f}" for v in rep.per_aoi]
        )
    rows.append(
        ["MC", "-", "-", "-", "-",
         f"{result.mc['vector_ratio']:.3f} (0.000)", "-",
         f"{result.mc['accuracy']:.3f} (0.000)", "-"]
        + [f"{r:.3f}" for r in result.mc["per_aoi_ratio"]]
    )
    write_csv(out / "metrics.csv", header, rows)

    cfg_rows = []
    for key in sorted(
        result.per_config, key=lambda k: (k[0], k[1], k[2], str(k[3]))
    ):
        rep = result.per_config[key]
        cfg_rows.append(
            [key[0], key[1], key[2], str(key[3]),
             _fmt(rep.auc[0]), _fmt(rep.auc[1]), _fmt(rep.exact[0]), _fmt(rep.exact[1]),
             _fmt(rep.fscore[0]), _fmt(rep.fscore[1]), _fmt(rep.acc[0]), _fmt(rep.acc[1]),
             _fmt(rep.pre[0]), _fmt(rep.pre[1])]
        )
    write_csv(
        out / "configs.csv",
        ["model", "selection", "n_features", "param",
         "auc_mean", "auc_sd", "exact_mean", "exact_sd", "fscore_mean", "fscore_sd",
         "acc_mean", "acc_sd", "pre_mean", "pre_sd"],
        cfg_rows,
    )

    header, rows = fold_csv_rows(result.fold_problem, result.fold_assignment)
    write_csv(out / "folds.csv", header, rows)

    write_csv(
        out / "mi.csv",
        ["fold", "rank", "feature", "score", "mi_bits"],
        [
            [r["fold"], r["rank"], r["feature"], _fmt(r["score"]), _fmt(r["mi_bits"])]
            for r in result.mi_rows
        ],
    )

    best = {
        "model": result.best_key[0],
        "selection": result.best_key[1],
        "n_features": result.best_key[2],
        "param": result.best_key[3],
        "metrics": {
            "auc": result.per_config[result.best_key].auc,
            "exact": result.per_config[result.best_key].exact,
            "fscore": result.per_config[result.best_key].fscore,
            "acc": result.per_config[result.best_key].acc,
            "pre": result.per_config[result.best_key].pre,
            "per_aoi": result.per_config[result.best_key].per_aoi,
        },
        "mc": {
            "per_aoi_ratio": result.mc["per_aoi_ratio"],
            "vector_ratio": result.mc["vector_ratio"],
            "accuracy": result.mc["accuracy"],
            "subset_accuracy": result.mc["subset_accuracy"],
        },
        "n_windows": result.n_windows,
        "fold_test_windows": result.fold_test_windows,
    }
    (Path(out) / "best_config.json").write_text(
        json.dumps(best, indent=2, sort_keys=True, default=_json_default) + "\n"
    )
    _write_manifest(out, {"kind": "run", "config": result.config})
    return ["metrics.csv", "configs.csv", "folds.csv", "mi.csv",
            "best_config.json", "manifest.json"]


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def _write_manifest(out_dir, extra: dict):
    import numba

    manifest = {
        "gazeintent": __version__,
        "numpy": np.__version__,
        "numba": numba.__version__,
        "python": sys.version.split()[0],
    }
    manifest.update(extra)
    (Path(out_dir) / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True, default=_json_default) + "\n"
    )


def load_metrics_csv(path):
    """Parse back the Table-5-shaped metrics file."""
    import csv as _csv

    rows = []
    with open(path, newline="") as fh:
        reader = _csv.DictReader(fh)
        for rec in reader:
            parsed = dict(rec)
            for key in ("AUC", "Exact", "Fscore", "Acc", "Pre"):
                val = rec[key]
                if val == "-":
                    parsed[key] = None
                else:
                    mean, sd = val.split(" (")
                    parsed[key] = (float(mean), float(sd.rstrip(")")))
            rows.append(parsed)
    return rows
