"""Per-window predictive features.

Three families are emitted for every window t, all computed from data
recorded strictly before the window opens:

* fixation history - per-AOI recency/lag indicators, per-component visit
  statistics, the AOI/component the previous window ended in, and the
  population-level visit frequency (heat) fitted on training sessions only;
* visual kinematics - position / velocity / acceleration statistics of the
  raw gaze trace inside the previous window (finite differences over the
  actual timestamps);
* oculomotor function - count / duration statistics of fixations and
  amplitude statistics of saccades accumulated so far.

Causality is strict: a fixation still in progress when window t opens is
truncated to its observed samples (and dropped if the observed part is
shorter than the minimum fixation duration), exactly as if detection had run
on the signal prefix. Column order is canonical: families in the order
above, alphabetical (ASCII) within each family.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gaze import GazeSignal, InteractionEvent, Layout, detect_fixations, hit_test, page_state_at
from .windows import WindowedSession, resolve_fixations, window_session

__all__ = [
    "SessionContext",
    "build_context",
    "HeatModel",
    "fit_heat_model",
    "heat_feature",
    "feature_names",
    "heat_column_indices",
    "extract_session_features",
    "fixation_history_features",
    "kinematics_features",
    "oculomotor_features",
]


@dataclass(frozen=True)
class SessionContext:
    """Everything feature extraction needs about one session."""

    signal: GazeSignal
    layout: Layout
    events: tuple[InteractionEvent, ...]
    windowed: WindowedSession
    xs: np.ndarray  # valid samples only
    ys: np.ndarray
    ts: np.ndarray
    fixations: tuple
    resolved: tuple  # (aoi_id | None, comp_id | None) per fixation
    min_duration_ms: float

    @property
    def tau_ms(self) -> float:
        return self.windowed.tau_s * 1000.0


def build_context(
    signal: GazeSignal,
    layout: Layout,
    events,
    tau_s: float,
    dispersion_px: float = 30.0,
    min_duration_ms: float = 100.0,
    blink_gap_ms: float = 75.0,
) -> SessionContext:
    """Detect fixations, resolve them to AOIs/components and window the session."""
    events = list(events)
    fixations = detect_fixations(signal, dispersion_px, min_duration_ms, blink_gap_ms)
    resolved = resolve_fixations(fixations, layout, events)
    windowed = window_session(signal, fixations, layout, events, tau_s)
    x, y, t, valid = signal.arrays()
    return SessionContext(
        signal=signal,
        layout=layout,
        events=tuple(events),
        windowed=windowed,
        xs=x[valid],
        ys=y[valid],
        ts=t[valid],
        fixations=tuple(fixations),
        resolved=tuple(resolved),
        min_duration_ms=min_duration_ms,
    )


# ---------------------------------------------------------------------------
# heat model (population visit frequency per window index, training data only)


@dataclass(frozen=True)
class HeatModel:
    """Per-AOI visit frequency at each window index across training sessions.

    ``support[t-1]`` is the number of training sessions that actually have a
    window t; indices beyond every training session yield 0.
    """

    counts: np.ndarray  # (n_aois, max_index)
    support: np.ndarray  # (max_index,)

    def value(self, aoi: int, window_index: int) -> float:
        t = window_index - 1
        if t < 0 or t >= self.support.size or self.support[t] == 0:
            return 0.0
        return float(self.counts[aoi - 1, t] / self.support[t])

    def row(self, window_index: int) -> np.ndarray:
        """Heat of every AOI at one window index."""
        t = window_index - 1
        if t < 0 or t >= self.support.size or self.support[t] == 0:
            return np.zeros(self.counts.shape[0])
        return self.counts[:, t] / self.support[t]


def fit_heat_model(sessions: list[WindowedSession], n_aois: int) -> HeatModel:
    max_w = max((s.n_windows for s in sessions), default=0)
    counts = np.zeros((n_aois, max_w))
    support = np.zeros(max_w)
    for s in sessions:
        w = s.n_windows
        if w == 0:
            continue
        support[:w] += 1
        counts[:, :w] += s.label_matrix().T
    return HeatModel(counts=counts, support=support)


def heat_feature(model: HeatModel, aoi: int, window_index: int) -> float:
    return model.value(aoi, window_index)


# ---------------------------------------------------------------------------
# canonical feature naming


def _history_names(layout: Layout) -> list[str]:
    names = []
    for j in range(1, layout.n + 1):
        names += [
            f"AOI_{j}_tslv",
            f"AOI_{j}_r1",
            f"AOI_{j}_r2",
            f"AOI_{j}_r3",
            f"AOI_{j}_end_r1",
            f"Heat_AOI_{j}",
        ]
    names.append("End_r1")
    for c in layout.components:
        names += [
            f"{c.name}_his",
            f"{c.name}_end",
            f"{c.name}_end_r1",
            f"{c.name}_tslv",
            f"{c.name}_atv",
            f"{c.name}_atbv",
        ]
    return sorted(names)


_KINEMATIC_NAMES = sorted(
    [
        "coordX", "coordY",
        "MeanX", "MeanY", "StdX", "StdY",
        "VelX", "VelY", "MeanVelX", "MeanVelY", "StdVelX", "StdVelY",
        "AclX", "AclY", "MeanAclX", "MeanAclY", "StdAclX", "StdAclY",
    ]
)

_OCULOMOTOR_NAMES = sorted(
    ["NFix", "TPromFix", "TMaxFix", "TMinFix", "NSac", "APromSac", "AMaxSac", "AMinSac"]
)


def feature_names(layout: Layout) -> list[str]:
    """Canonical column order: history family, kinematics, oculomotor."""
    return _history_names(layout) + _KINEMATIC_NAMES + _OCULOMOTOR_NAMES


def heat_column_indices(names: list[str], n_aois: int) -> np.ndarray:
    """Column index of Heat_AOI_j for j = 1..n (AOI order)."""
    return np.array([names.index(f"Heat_AOI_{j}") for j in range(1, n_aois + 1)])


# ---------------------------------------------------------------------------
# extraction


class _SessionScan:
    """One forward pass over a session's windows with incremental history.

    Fixations are committed once fully observed (end <= window open); the
    at-most-one fixation straddling the cut is evaluated per window from its
    observed samples without touching the committed state.
    """

    def __init__(self, ctx: SessionContext):
        self.ctx = ctx
        lay = ctx.layout
        F = len(ctx.fixations)
        self.onset = np.array([f.t_start for f in ctx.fixations])
        self.end = np.array([f.t_end for f in ctx.fixations])
        self.dur = np.array([f.duration for f in ctx.fixations])
        self.cx = np.array([f.cx for f in ctx.fixations])
        self.cy = np.array([f.cy for f in ctx.fixations])
        self.spans = [f.sample_span for f in ctx.fixations]
        self.aoi = np.array([a or 0 for a, _ in ctx.resolved], dtype=int)
        self.comp = np.array([c or 0 for _, c in ctx.resolved], dtype=int)
        # saccade amplitude between consecutive fixations
        self.amp = np.hypot(np.diff(self.cx), np.diff(self.cy)) if F > 1 else np.zeros(0)

        n = lay.n
        C = len(lay.components)
        W = ctx.windowed.n_windows
        self.n, self.C, self.W = n, C, W

        # committed-history state
        self.done = 0
        self.fix_count = 0
        self.dur_sum = 0.0
        self.dur_max = -np.inf
        self.dur_min = np.inf
        self.sac_count = 0
        self.amp_sum = 0.0
        self.amp_max = -np.inf
        self.amp_min = np.inf
        self.aoi_last = np.full(n + 1, -1.0)
        self.c_count = np.zeros(C + 1, dtype=int)
        self.c_dur = np.zeros(C + 1)
        self.c_last = np.full(C + 1, -1.0)
        self.c_gap = np.zeros(C + 1)
        self.c_ngap = np.zeros(C + 1, dtype=int)
        self.wbits = np.zeros((W + 1, n + 1), dtype=np.int8)  # committed label bits

        names = feature_names(lay)
        self.names = names
        self.col = {name: i for i, name in enumerate(names)}

    def _commit(self, i):
        onset, dur = self.onset[i], self.dur[i]
        self.fix_count += 1
        self.dur_sum += dur
        self.dur_max = max(self.dur_max, dur)
        self.dur_min = min(self.dur_min, dur)
        if i >= 1:
            a = self.amp[i - 1]
            self.sac_count += 1
            self.amp_sum += a
            self.amp_max = max(self.amp_max, a)
            self.amp_min = min(self.amp_min, a)
        j = self.aoi[i]
        if j:
            self.aoi_last[j] = onset
        c = self.comp[i]
        if c:
            if self.c_last[c] >= 0:
                self.c_gap[c] += onset - self.c_last[c]
                self.c_ngap[c] += 1
            self.c_count[c] += 1
            self.c_dur[c] += dur
            self.c_last[c] = onset
        w = int(onset // self.ctx.tau_ms) + 1
        if j and w <= self.W:
            self.wbits[w, j] = 1

    def _straddler(self, t_open):
        """(index, trunc_dur, cx, cy, aoi, comp) of the qualifying in-progress
        fixation at the cut, or None."""
        i = self.done
        if i >= len(self.onset) or self.onset[i] >= t_open:
            return None
        lo, hi = self.spans[i]
        ts = self.ctx.ts
        cut = lo + int(np.searchsorted(ts[lo:hi], t_open, side="left"))
        if cut <= lo:
            return None
        tdur = float(ts[cut - 1] - ts[lo])
        if tdur < self.ctx.min_duration_ms:
            return None
        tcx = float(self.ctx.xs[lo:cut].mean())
        tcy = float(self.ctx.ys[lo:cut].mean())
        state = page_state_at(
            list(self.ctx.events), self.onset[i], max_scroll=self.ctx.layout.max_scroll
        )
        aoi, comp = hit_test(tcx, tcy, self.ctx.layout, state)
        return i, tdur, tcx, tcy, (aoi or 0), (comp or 0)

    def run(self) -> np.ndarray:
        ctx = self.ctx
        lay = ctx.layout
        tau = ctx.tau_ms
        X = np.zeros((self.W, len(self.names)))
        col = self.col
        comp_names = [c.name for c in lay.components]

        for t in range(1, self.W + 1):
            t_open = (t - 1) * tau
            while self.done < len(self.onset) and self.end[self.done] <= t_open:
                self._commit(self.done)
                self.done += 1
            s = self._straddler(t_open)
            row = X[t - 1]

            # --- oculomotor family
            nf = self.fix_count + (1 if s else 0)
            if nf:
                dsum = self.dur_sum + (s[1] if s else 0.0)
                dmax = max(self.dur_max, s[1]) if s else self.dur_max
                dmin = min(self.dur_min, s[1]) if s else self.dur_min
                row[col["NFix"]] = nf
                row[col["TPromFix"]] = dsum / nf
                row[col["TMaxFix"]] = dmax
                row[col["TMinFix"]] = dmin
            ns = self.sac_count
            asum, amax, amin = self.amp_sum, self.amp_max, self.amp_min
            if s and self.fix_count >= 1:
                a = float(np.hypot(s[2] - self.cx[self.done - 1], s[3] - self.cy[self.done - 1]))
                ns += 1
                asum += a
                amax = max(amax, a)
                amin = min(amin, a)
            if ns:
                row[col["NSac"]] = ns
                row[col["APromSac"]] = asum / ns
                row[col["AMaxSac"]] = amax
                row[col["AMinSac"]] = amin

            # --- history family: per-AOI
            s_w = int(self.onset[s[0]] // tau) + 1 if s else 0
            for j in range(1, self.n + 1):
                last = self.aoi_last[j]
                if s and s[4] == j:
                    last = max(last, self.onset[s[0]])
                if last >= 0:
                    row[col[f"AOI_{j}_tslv"]] = t_open - last
                for q in (1, 2, 3):
                    if t - q >= 1:
                        bit = self.wbits[t - q, j]
                        if s and s[4] == j and s_w == t - q:
                            bit = 1
                        row[col[f"AOI_{j}_r{q}"]] = bit

            # --- terminal fixation of the previous window
            term_aoi = term_comp = 0
            if s:
                term_aoi, term_comp = s[4], s[5]
            elif self.done >= 1 and self.end[self.done - 1] > t_open - tau and t >= 2:
                term_aoi = self.aoi[self.done - 1]
                term_comp = self.comp[self.done - 1]
            if term_aoi:
                row[col[f"AOI_{term_aoi}_end_r1"]] = 1
                row[col["End_r1"]] = term_aoi

            # --- history family: per-component
            for cid in range(1, self.C + 1):
                name = comp_names[cid - 1]
                cnt = self.c_count[cid]
                dsum = self.c_dur[cid]
                last = self.c_last[cid]
                gaps, ngap = self.c_gap[cid], self.c_ngap[cid]
                if s and s[5] == cid:
                    if last >= 0:
                        gaps += self.onset[s[0]] - last
                        ngap += 1
                    cnt += 1
                    dsum += s[1]
                    last = self.onset[s[0]]
                if cnt:
                    row[col[f"{name}_his"]] = 1
                    row[col[f"{name}_tslv"]] = t_open - last
                    row[col[f"{name}_atv"]] = dsum / cnt
                if ngap:
                    row[col[f"{name}_atbv"]] = gaps / ngap
                if term_comp == cid:
                    row[col[f"{name}_end"]] = cid
                    row[col[f"{name}_end_r1"]] = 1

            # --- kinematics over the previous window's raw samples
            self._kinematics(row, t_open - tau, t_open)
        return X

    def _kinematics(self, row, lo_ms, hi_ms):
        ts = self.ctx.ts
        col = self.col
        lo = int(np.searchsorted(ts, max(lo_ms, 0.0), side="left"))
        hi = int(np.searchsorted(ts, hi_ms, side="left"))
        if hi <= lo or lo_ms < 0:
            return
        x = self.ctx.xs[lo:hi]
        y = self.ctx.ys[lo:hi]
        t = ts[lo:hi]
        row[col["coordX"]] = x[-1]
        row[col["coordY"]] = y[-1]
        row[col["MeanX"]] = x.mean()
        row[col["MeanY"]] = y.mean()
        row[col["StdX"]] = x.std()
        row[col["StdY"]] = y.std()
        if len(x) < 2:
            return
        dt = np.diff(t)
        vx = np.diff(x) / dt * 1000.0
        vy = np.diff(y) / dt * 1000.0
        row[col["VelX"]] = vx[-1]
        row[col["VelY"]] = vy[-1]
        row[col["MeanVelX"]] = vx.mean()
        row[col["MeanVelY"]] = vy.mean()
        row[col["StdVelX"]] = vx.std()
        row[col["StdVelY"]] = vy.std()
        if len(vx) < 2:
            return
        dt2 = np.diff(t[1:])
        ax = np.diff(vx) / dt2 * 1000.0
        ay = np.diff(vy) / dt2 * 1000.0
        row[col["AclX"]] = ax[-1]
        row[col["AclY"]] = ay[-1]
        row[col["MeanAclX"]] = ax.mean()
        row[col["MeanAclY"]] = ay.mean()
        row[col["StdAclX"]] = ax.std()
        row[col["StdAclY"]] = ay.std()


def extract_session_features(ctx: SessionContext) -> np.ndarray:
    """Feature matrix (windows x features) in canonical column order.

    Heat_AOI_* columns are left at zero; they depend on the training fold and
    are filled by the caller from a fitted :class:`HeatModel`.
    """
    return _SessionScan(ctx).run()


def _window_dict(ctx: SessionContext, t: int, names_filter) -> dict[str, float]:
    if not 1 <= t <= ctx.windowed.n_windows:
        raise ValueError(f"window index {t} out of range")
    X = extract_session_features(ctx)
    names = feature_names(ctx.layout)
    return {
        name: float(X[t - 1, i]) for i, name in enumerate(names) if names_filter(name)
    }


def fixation_history_features(ctx: SessionContext, t: int) -> dict[str, float]:
    """History-family features of window t (heat columns excluded: fold data)."""
    kin = set(_KINEMATIC_NAMES) | set(_OCULOMOTOR_NAMES)
    return _window_dict(
        ctx, t, lambda n: n not in kin and not n.startswith("Heat_AOI_")
    )


def kinematics_features(ctx: SessionContext, t: int) -> dict[str, float]:
    return _window_dict(ctx, t, lambda n: n in set(_KINEMATIC_NAMES))


def oculomotor_features(ctx: SessionContext, t: int) -> dict[str, float]:
    return _window_dict(ctx, t, lambda n: n in set(_OCULOMOTOR_NAMES))
