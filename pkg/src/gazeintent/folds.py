"""Balanced assignment of users to cross-validation folds.

Each user u carries P_u windows and must land in exactly one of K folds so
that the total absolute deviation of fold loads from their mean is minimal:

    minimize  sum_k |x_k - mean|,   x_k = sum of P_u over users in fold k.

The mean is sum(P)/K regardless of the assignment, so the integer program
reduces to balanced number partitioning. ``exact`` mode solves it with
branch and bound (LPT incumbent, overload lower bound, fold-symmetry
breaking) plus a second pass that makes the returned fold vector the
lexicographically smallest among optimal ones. ``heuristic`` mode runs LPT
greedy with move/swap local search over seeded restarts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "FoldProblem",
    "FoldAssignment",
    "OracleLimitError",
    "assign_folds",
    "greedy_lpt",
    "verify_optimal",
    "brute_force_optimum",
    "linearized_objective",
    "fold_csv_rows",
]


class OracleLimitError(ValueError):
    """Instance too large for the exhaustive oracle."""


@dataclass(frozen=True)
class FoldProblem:
    user_ids: tuple[str, ...]
    window_counts: tuple[int, ...]
    k: int

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError("fold count must be positive")
        if len(self.user_ids) != len(self.window_counts):
            raise ValueError("one window count per user required")
        if not self.user_ids:
            raise ValueError("at least one user required")
        if any(p <= 0 for p in self.window_counts):
            raise ValueError("window counts must be positive")

    @property
    def n(self) -> int:
        return len(self.user_ids)

    @property
    def mean_load(self) -> float:
        return sum(self.window_counts) / self.k


@dataclass(frozen=True)
class FoldAssignment:
    """fold_of[u] is the 1-based fold of user u (problem order)."""

    fold_of: tuple[int, ...]
    loads: tuple[float, ...]
    mean_load: float
    objective: float


def _objective(loads: np.ndarray, mean: float) -> float:
    return float(np.abs(loads - mean).sum())


def linearized_objective(loads, mean: float) -> float:
    """Objective through the auxiliary-variable linearization.

    Each fold gets a variable bounded below by both (x_k - mean) and
    -(x_k - mean); at the optimum of the relaxation the variable sits at
    |x_k - mean|, so the sum reproduces the absolute-deviation objective.
    """
    loads = np.asarray(loads, dtype=float)
    u = np.maximum(loads - mean, -(loads - mean))
    return float(u.sum())


def _build(problem: FoldProblem, fold_of) -> FoldAssignment:
    loads = np.zeros(problem.k)
    for u, f in enumerate(fold_of):
        loads[f - 1] += problem.window_counts[u]
    mean = problem.mean_load
    return FoldAssignment(
        fold_of=tuple(int(f) for f in fold_of),
        loads=tuple(float(v) for v in loads),
        mean_load=mean,
        objective=_objective(loads, mean),
    )


def greedy_lpt(problem: FoldProblem, order: np.ndarray | None = None) -> FoldAssignment:
    """Longest-processing-time greedy: heaviest user to the lightest fold."""
    p = np.asarray(problem.window_counts, dtype=float)
    if order is None:
        order = np.lexsort((np.arange(problem.n), -p))
    loads = np.zeros(problem.k)
    fold_of = [0] * problem.n
    for u in order:
        f = int(np.argmin(loads))
        fold_of[u] = f + 1
        loads[f] += p[u]
    return _build(problem, fold_of)


def _local_search(problem: FoldProblem, assignment: FoldAssignment) -> FoldAssignment:
    """Best-improvement moves and pair swaps until a local optimum."""
    p = np.asarray(problem.window_counts, dtype=float)
    mean = problem.mean_load
    fold_of = np.array(assignment.fold_of) - 1
    loads = np.array(assignment.loads)

    improved = True
    while improved:
        improved = False
        best_delta = -1e-9
        best_action = None
        dev = np.abs(loads - mean)
        for u in range(problem.n):
            src = fold_of[u]
            for dst in range(problem.k):
                if dst == src:
                    continue
                delta = (
                    dev[src]
                    + dev[dst]
                    - abs(loads[src] - p[u] - mean)
                    - abs(loads[dst] + p[u] - mean)
                )
                if delta > best_delta:
                    best_delta = delta
                    best_action = ("move", u, dst)
        for u in range(problem.n):
            for v in range(u + 1, problem.n):
                fu, fv = fold_of[u], fold_of[v]
                if fu == fv:
                    continue
                d = p[u] - p[v]
                delta = (
                    dev[fu]
                    + dev[fv]
                    - abs(loads[fu] - d - mean)
                    - abs(loads[fv] + d - mean)
                )
                if delta > best_delta:
                    best_delta = delta
                    best_action = ("swap", u, v)
        if best_action is not None and best_delta > 1e-9:
            improved = True
            if best_action[0] == "move":
                _, u, dst = best_action
                loads[fold_of[u]] -= p[u]
                loads[dst] += p[u]
                fold_of[u] = dst
            else:
                _, u, v = best_action
                fu, fv = fold_of[u], fold_of[v]
                loads[fu] += p[v] - p[u]
                loads[fv] += p[u] - p[v]
                fold_of[u], fold_of[v] = fv, fu
    return _build(problem, fold_of + 1)


def _heuristic(problem: FoldProblem, restarts: int, seed: int) -> FoldAssignment:
    best = _local_search(problem, greedy_lpt(problem))
    rng = np.random.default_rng(seed)
    for _ in range(max(0, restarts - 1)):
        order = rng.permutation(problem.n)
        cand = _local_search(problem, greedy_lpt(problem, order=order))
        if cand.objective < best.objective - 1e-12:
            best = cand
    return best


class _BnB:
    """Depth-first branch and bound over users sorted by descending weight.

    ``symmetric=True`` enables fold-symmetry breaking (each user may open at
    most one fresh fold); only valid when all folds start empty.
    """

    def __init__(self, p_sorted, k, mean, symmetric=True):
        self.p = p_sorted
        self.k = k
        self.mean = mean
        self.symmetric = symmetric

    def lower_bound(self, loads) -> float:
        # folds already above the mean can only move further up
        over = loads - self.mean
        return 2.0 * over[over > 0].sum()

    def solve(self, incumbent_obj, loads=None, target=None):
        """Minimize; with ``target`` set, early-exit at the first completion
        reaching it. Returns (best objective, fold vector) or
        (incumbent_obj, None) when nothing qualified.
        """
        n = len(self.p)
        if loads is None:
            loads = np.zeros(self.k)
        best_obj = incumbent_obj
        best_vec = None
        path = np.zeros(n, dtype=np.int64)

        def dfs(i, used):
            nonlocal best_obj, best_vec
            if i == n:
                obj = _objective(loads, self.mean)
                if obj < best_obj - 1e-9 or (
                    target is not None and best_vec is None and obj <= best_obj + 1e-9
                ):
                    best_obj = min(best_obj, obj)
                    best_vec = path.copy()
                return
            if self.lower_bound(loads) > best_obj + 1e-9:
                return
            limit = min(self.k, used + 1) if self.symmetric else self.k
            for f in range(limit):
                loads[f] += self.p[i]
                path[i] = f
                dfs(i + 1, max(used, f + 1))
                loads[f] -= self.p[i]
                if target is not None and best_vec is not None:
                    return

        dfs(0, 0)
        return best_obj, best_vec


def _exact(problem: FoldProblem) -> FoldAssignment:
    p = np.asarray(problem.window_counts, dtype=float)
    mean = problem.mean_load
    order = np.lexsort((np.arange(problem.n), -p))
    incumbent = _local_search(problem, greedy_lpt(problem))

    solver = _BnB(p[order], problem.k, mean)
    opt_obj, vec = solver.solve(incumbent.objective + 1e-9)
    if vec is None:
        opt_obj = incumbent.objective

    # lexicographic tie-break: fix users in original order to the smallest
    # fold id that still admits an optimal completion
    fixed = np.zeros(problem.n, dtype=np.int64)
    loads = np.zeros(problem.k)
    for u in range(problem.n):
        rest_p = p[u + 1 :]
        rest_order = np.argsort(-rest_p, kind="stable")
        tail = _BnB(rest_p[rest_order], problem.k, mean, symmetric=False)
        chosen = None
        for f in range(problem.k):
            loads[f] += p[u]
            if rest_p.size == 0:
                ok = _objective(loads, mean) <= opt_obj + 1e-9
            else:
                _, completion = tail.solve(opt_obj, loads=loads.copy(), target=opt_obj)
                ok = completion is not None
            if ok:
                chosen = f
                break
            loads[f] -= p[u]
        assert chosen is not None, "optimal completion lost"
        fixed[u] = chosen + 1
    return _build(problem, fixed)


def assign_folds(
    problem: FoldProblem,
    mode: str = "exact",
    restarts: int = 8,
    seed: int = 0,
) -> FoldAssignment:
    """Solve the fold-balancing problem.

    ``exact`` proves optimality (viable for a few dozen users); ``heuristic``
    is LPT + local search over ``restarts`` seeded orders and never returns a
    worse objective than plain greedy. Folds may stay empty when K exceeds
    the number of users.
    """
    if mode == "exact":
        return _exact(problem)
    if mode == "heuristic":
        return _heuristic(problem, restarts, seed)
    raise ValueError(f"unknown mode {mode!r}")


_ORACLE_MAX_N = 14
_ORACLE_MAX_K = 4


def brute_force_optimum(problem: FoldProblem) -> FoldAssignment:
    """Exhaustive minimum over all K^N assignments (lex-smallest argmin).

    Enumeration order makes ties resolve to the lexicographically smallest
    fold vector, matching the exact solver's tie-break.
    """
    if problem.n > _ORACLE_MAX_N or problem.k > _ORACLE_MAX_K:
        raise OracleLimitError(
            f"oracle limited to N<={_ORACLE_MAX_N}, K<={_ORACLE_MAX_K}"
        )
    p = np.asarray(problem.window_counts, dtype=float)
    n, k = problem.n, problem.k
    mean = problem.mean_load
    total = k**n
    chunk = 1 << 18
    best_obj = np.inf
    best_idx = -1
    powers = k ** np.arange(n - 1, -1, -1, dtype=np.int64)
    for lo in range(0, total, chunk):
        idx = np.arange(lo, min(lo + chunk, total), dtype=np.int64)
        digits = (idx[:, None] // powers[None, :]) % k
        loads = np.zeros((len(idx), k))
        for f in range(k):
            loads[:, f] = (digits == f) @ p
        obj = np.abs(loads - mean).sum(axis=1)
        i = int(np.argmin(obj))
        if obj[i] < best_obj - 1e-12:
            best_obj = float(obj[i])
            best_idx = int(idx[i])
    digits = (best_idx // powers) % k
    return _build(problem, digits + 1)


def verify_optimal(problem: FoldProblem, assignment: FoldAssignment) -> bool:
    """True iff the assignment's objective equals the exhaustive minimum."""
    best = brute_force_optimum(problem)
    return abs(assignment.objective - best.objective) <= 1e-9


def fold_csv_rows(problem: FoldProblem, assignment: FoldAssignment):
    header = ["user_id", "fold"]
    rows = [
        [problem.user_ids[u], assignment.fold_of[u]] for u in range(problem.n)
    ]
    return header, rows
