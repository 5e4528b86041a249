"""Time-window segmentation and per-window visit-intention labels.

A session of total length T ms is cut into floor(T / tau) consecutive
windows of tau seconds; the trailing residue is discarded. The label vector
of a window has bit j set iff some fixation with onset inside the window
resolves to AOI j under the page state at that onset.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gaze import (
    Fixation,
    GazeSignal,
    InteractionEvent,
    Layout,
    hit_test,
    page_state_at,
)

__all__ = [
    "TimeWindow",
    "VisitIntentionVector",
    "WindowedSession",
    "segment",
    "resolve_fixations",
    "label_window",
    "window_session",
    "labels_csv_rows",
]


@dataclass(frozen=True)
class TimeWindow:
    """Window index (1-based) and its [t_open, t_close) bounds in ms."""

    index: int
    t_open: float
    t_close: float


@dataclass(frozen=True)
class VisitIntentionVector:
    """Binary activation per AOI for one window."""

    window: int
    bits: tuple[int, ...]


def segment(duration_ms: float, tau_s: float) -> list[TimeWindow]:
    """Cut [0, duration) into floor(duration/tau) windows of tau seconds."""
    if tau_s <= 0:
        raise ValueError("window length must be positive")
    tau_ms = tau_s * 1000.0
    count = int(np.floor(duration_ms / tau_ms))
    return [
        TimeWindow(index=t, t_open=(t - 1) * tau_ms, t_close=t * tau_ms)
        for t in range(1, count + 1)
    ]


def resolve_fixations(
    fixations: list[Fixation],
    layout: Layout,
    events: list[InteractionEvent],
) -> list[tuple[int | None, int | None]]:
    """(aoi_id, component_id) per fixation: centroid under the onset page state."""
    out = []
    for f in fixations:
        state = page_state_at(events, f.t_start, max_scroll=layout.max_scroll)
        out.append(hit_test(f.cx, f.cy, layout, state))
    return out


def label_window(
    fixations: list[Fixation],
    layout: Layout,
    events: list[InteractionEvent],
    window: TimeWindow,
    resolved: list[tuple[int | None, int | None]] | None = None,
) -> VisitIntentionVector:
    """Visit-intention bits for one window (fixations assigned by onset)."""
    if resolved is None:
        resolved = resolve_fixations(fixations, layout, events)
    bits = [0] * layout.n
    for f, (aoi, _comp) in zip(fixations, resolved):
        if window.t_open <= f.t_start < window.t_close and aoi is not None:
            bits[aoi - 1] = 1
    return VisitIntentionVector(window=window.index, bits=tuple(bits))


@dataclass(frozen=True)
class WindowedSession:
    """One session segmented into windows with ground-truth labels.

    ``fixation_slices`` holds, per window, the indices of fixations whose
    onset falls inside it. ``terminal`` holds per window the (aoi, component)
    of the last fixation intersecting it (None, None when idle).
    """

    user_id: str
    session_id: str
    tau_s: float
    windows: tuple[TimeWindow, ...]
    labels: tuple[VisitIntentionVector, ...]
    fixation_slices: tuple[tuple[int, ...], ...]
    terminal: tuple[tuple[int | None, int | None], ...]

    @property
    def n_windows(self) -> int:
        return len(self.windows)

    def label_matrix(self) -> np.ndarray:
        return np.array([lv.bits for lv in self.labels], dtype=np.int8)


def window_session(
    signal: GazeSignal,
    fixations: list[Fixation],
    layout: Layout,
    events: list[InteractionEvent],
    tau_s: float,
) -> WindowedSession:
    """Segment a session and label every window."""
    windows = segment(signal.duration_ms, tau_s)
    resolved = resolve_fixations(fixations, layout, events)
    onsets = np.array([f.t_start for f in fixations])
    ends = np.array([f.t_end for f in fixations])

    labels = []
    slices = []
    terminal = []
    for w in windows:
        labels.append(label_window(fixations, layout, events, w, resolved))
        inside = np.nonzero((onsets >= w.t_open) & (onsets < w.t_close))[0]
        slices.append(tuple(int(i) for i in inside))
        touching = np.nonzero((onsets < w.t_close) & (ends > w.t_open))[0]
        if touching.size:
            terminal.append(resolved[int(touching[-1])])
        else:
            terminal.append((None, None))
    return WindowedSession(
        user_id=signal.user_id,
        session_id=signal.session_id,
        tau_s=tau_s,
        windows=tuple(windows),
        labels=tuple(labels),
        fixation_slices=tuple(slices),
        terminal=tuple(terminal),
    )


def labels_csv_rows(sessions: list[WindowedSession], n_aois: int):
    """Rows for the label export: user_id,session_id,window,aoi_1..aoi_n."""
    header = ["user_id", "session_id", "window"] + [
        f"aoi_{j}" for j in range(1, n_aois + 1)
    ]
    rows = []
    for s in sessions:
        for lv in s.labels:
            rows.append([s.user_id, s.session_id, lv.window, *lv.bits])
    return header, rows
