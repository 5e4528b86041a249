"""Gaze signal model: fixation/saccade detection and AOI hit-testing.

A recorded interaction is a sequence of timestamped gaze points over a web
page whose on-screen appearance changes with scrolling and dynamic elements
(drop-down menu, registration pop-up). This module detects fixations with a
dispersion-threshold (I-DT) filter, derives saccades between them, replays
interaction events into page states, and resolves screen points to the page
component and area of interest (AOI) visible at that moment.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GazeSample",
    "GazeSignal",
    "Fixation",
    "Saccade",
    "InteractionEvent",
    "Component",
    "AOIDef",
    "PageState",
    "Layout",
    "EmptySignalError",
    "MalformedSignalError",
    "MalformedEventsError",
    "detect_fixations",
    "truncate_fixations",
    "derive_saccades",
    "page_state_at",
    "hit_test",
]

EVENT_KINDS = ("scroll", "click", "popup_open", "popup_close", "menu_open", "menu_close")

AOI_BEHAVIORS = ("static", "scroll_locked", "overlay")


class EmptySignalError(ValueError):
    """Raised when an operation needs at least one gaze sample."""


class MalformedSignalError(ValueError):
    """Raised when sample timestamps are not strictly increasing."""


class MalformedEventsError(ValueError):
    """Raised when an interaction-event log is not ordered by time."""


@dataclass(frozen=True)
class GazeSample:
    """One tracker sample: screen position in px, time in ms, validity flag."""

    x: float
    y: float
    t: float
    valid: bool = True


@dataclass(frozen=True)
class GazeSignal:
    """The visual record of one complete interaction of one user."""

    user_id: str
    session_id: str
    samples: tuple[GazeSample, ...]
    sample_rate: float = 120.0

    def __post_init__(self):
        if not self.samples:
            raise EmptySignalError("signal has no samples")
        ts = [s.t for s in self.samples]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise MalformedSignalError("sample timestamps must be strictly increasing")
        if ts[0] < 0:
            raise MalformedSignalError("negative timestamp")

    @property
    def duration_ms(self) -> float:
        return self.samples[-1].t

    def arrays(self):
        """Samples as (x, y, t, valid) float/bool arrays."""
        n = len(self.samples)
        x = np.empty(n)
        y = np.empty(n)
        t = np.empty(n)
        v = np.empty(n, dtype=bool)
        for i, s in enumerate(self.samples):
            x[i], y[i], t[i], v[i] = s.x, s.y, s.t, s.valid
        return x, y, t, v


@dataclass(frozen=True)
class Fixation:
    """A quasi-stationary gaze interval with its centroid.

    ``sample_span`` is the half-open index range into the originating
    signal's sample array (valid samples spanned by the fixation).
    """

    cx: float
    cy: float
    t_start: float
    duration: float
    sample_span: tuple[int, int]

    @property
    def t_end(self) -> float:
        return self.t_start + self.duration


@dataclass(frozen=True)
class Saccade:
    """Jump between two consecutive fixations."""

    from_fix: int
    to_fix: int
    amplitude: float
    duration: float


@dataclass(frozen=True)
class InteractionEvent:
    """Logged page interaction. ``payload`` is a scroll delta in px for
    scroll events, otherwise a target component name (may be empty)."""

    t: float
    kind: str
    payload: float | str | None = None

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")


@dataclass(frozen=True)
class Component:
    """A page section with its own function: rect in page coordinates."""

    id: int
    name: str
    rect: tuple[float, float, float, float]  # (x, y, w, h)
    dynamic: bool = False

    def __post_init__(self):
        if self.rect[2] <= 0 or self.rect[3] <= 0:
            raise ValueError(f"component {self.name!r} has non-positive area")

    def contains(self, px: float, py: float) -> bool:
        x, y, w, h = self.rect
        return x <= px < x + w and y <= py < y + h


@dataclass(frozen=True)
class AOIDef:
    """Area of interest: a group of components observed as one region.

    behavior:
      static        tested in page coordinates (moves with scroll)
      scroll_locked pinned to the screen (tested in screen coordinates)
      overlay       visible only while the pop-up is active; occludes
                    whatever its rect covers on screen
    """

    id: int
    member_components: tuple[int, ...]
    behavior: str = "static"

    def __post_init__(self):
        if self.behavior not in AOI_BEHAVIORS:
            raise ValueError(f"unknown AOI behavior {self.behavior!r}")


@dataclass(frozen=True)
class PageState:
    """Replayed interaction state at one instant."""

    scroll_y: float = 0.0
    popup_active: bool = False
    menu_open: bool = False
    t: float = 0.0


@dataclass(frozen=True)
class Layout:
    """Page geometry: components plus the AOI definitions over them."""

    page_size: tuple[float, float]
    viewport_size: tuple[float, float]
    components: tuple[Component, ...]
    aois: tuple[AOIDef, ...]

    _comp_by_id: dict = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        ids = [a.id for a in self.aois]
        if ids != list(range(1, len(ids) + 1)):
            raise ValueError("AOI ids must be contiguous from 1")
        names = [c.name for c in self.components]
        if len(set(names)) != len(names):
            raise ValueError("component names must be unique")
        by_id = {c.id: c for c in self.components}
        if len(by_id) != len(self.components):
            raise ValueError("component ids must be unique")
        for a in self.aois:
            for cid in a.member_components:
                if cid not in by_id:
                    raise ValueError(f"AOI {a.id} references unknown component {cid}")
        object.__setattr__(self, "_comp_by_id", by_id)

    @property
    def n(self) -> int:
        """Number of AOIs."""
        return len(self.aois)

    @property
    def max_scroll(self) -> float:
        return max(0.0, self.page_size[1] - self.viewport_size[1])

    def component(self, cid: int) -> Component:
        return self._comp_by_id[cid]

    def component_by_name(self, name: str) -> Component:
        for c in self.components:
            if c.name == name:
                return c
        raise KeyError(name)

    def aoi_rects(self, aoi: AOIDef) -> list[tuple[float, float, float, float]]:
        return [self.component(cid).rect for cid in aoi.member_components]


# ---------------------------------------------------------------------------
# fixation detection (I-DT)


def _dispersion(xs, ys, lo, hi) -> float:
    """I-DT window dispersion: (max x - min x) + (max y - min y)."""
    wx = xs[lo:hi]
    wy = ys[lo:hi]
    return (wx.max() - wx.min()) + (wy.max() - wy.min())


def detect_fixations(
    signal: GazeSignal,
    dispersion_px: float = 30.0,
    min_duration_ms: float = 100.0,
    blink_gap_ms: float = 75.0,
) -> list[Fixation]:
    """Dispersion-threshold (I-DT) fixation detection.

    Invalid samples are skipped; a gap between consecutive valid samples
    longer than ``blink_gap_ms`` splits the running candidate (shorter
    invalid gaps are bridged). Candidates below ``min_duration_ms`` are
    dropped. Returned ``sample_span`` indexes the *valid* samples only.
    """
    if dispersion_px <= 0:
        raise ValueError("dispersion_px must be positive")
    if min_duration_ms < 0:
        raise ValueError("min_duration_ms must be non-negative")
    x, y, t, valid = signal.arrays()
    return _idt(x[valid], y[valid], t[valid], dispersion_px, min_duration_ms, blink_gap_ms)


def _idt(xs, ys, ts, dispersion_px, min_duration_ms, blink_gap_ms) -> list[Fixation]:
    n = len(ts)
    if n == 0:
        return []
    fixations: list[Fixation] = []
    lo = 0

    def emit(lo, hi):
        dur = ts[hi - 1] - ts[lo]
        if dur >= min_duration_ms:
            fixations.append(
                Fixation(
                    cx=float(xs[lo:hi].mean()),
                    cy=float(ys[lo:hi].mean()),
                    t_start=float(ts[lo]),
                    duration=float(dur),
                    sample_span=(lo, hi),
                )
            )

    hi = lo + 1
    while lo < n:
        # grow the window while it stays compact and has no blink-length gap
        while (
            hi < n
            and ts[hi] - ts[hi - 1] <= blink_gap_ms
            and _dispersion(xs, ys, lo, hi + 1) <= dispersion_px
        ):
            hi += 1
        gap_split = hi < n and ts[hi] - ts[hi - 1] > blink_gap_ms
        if ts[hi - 1] - ts[lo] >= min_duration_ms:
            emit(lo, hi)
            lo = hi
            hi = lo + 1
        elif gap_split or hi >= n:
            # nothing starting inside a gap-bounded short window can get longer
            lo = hi
            hi = lo + 1
        else:
            # short window broken by dispersion: dropping the first sample may
            # let the window extend, so slide instead of jumping
            lo += 1
            hi = max(hi, lo + 1)
    return fixations


def truncate_fixations(
    fixations: list[Fixation],
    signal: GazeSignal,
    t_cut: float,
    min_duration_ms: float = 100.0,
) -> list[Fixation]:
    """Fixation stream as it was known at ``t_cut``.

    Keeps fixations that ended by the cut; a fixation straddling the cut is
    rebuilt from its samples observed strictly before the cut (I-DT grows
    windows greedily, so this equals detection on the truncated signal).
    """
    x, y, t, valid = signal.arrays()
    return _truncate(fixations, x[valid], y[valid], t[valid], t_cut, min_duration_ms)


def _truncate(fixations, xs, ys, ts, t_cut, min_duration_ms):
    out = []
    for f in fixations:
        if f.t_end <= t_cut:
            out.append(f)
        elif f.t_start < t_cut:
            lo, hi = f.sample_span
            hi_cut = lo + int(np.searchsorted(ts[lo:hi], t_cut, side="left"))
            if hi_cut - lo >= 1:
                dur = ts[hi_cut - 1] - ts[lo]
                if dur >= min_duration_ms:
                    out.append(
                        Fixation(
                            cx=float(xs[lo:hi_cut].mean()),
                            cy=float(ys[lo:hi_cut].mean()),
                            t_start=float(ts[lo]),
                            duration=float(dur),
                            sample_span=(lo, hi_cut),
                        )
                    )
    return out


def derive_saccades(fixations: list[Fixation]) -> list[Saccade]:
    """Saccades between consecutive fixations: centroid distance + time gap."""
    out = []
    for i in range(len(fixations) - 1):
        a, b = fixations[i], fixations[i + 1]
        out.append(
            Saccade(
                from_fix=i,
                to_fix=i + 1,
                amplitude=float(np.hypot(b.cx - a.cx, b.cy - a.cy)),
                duration=float(b.t_start - a.t_end),
            )
        )
    return out


# ---------------------------------------------------------------------------
# page-state replay


def page_state_at(
    events: list[InteractionEvent],
    t: float,
    max_scroll: float | None = None,
) -> PageState:
    """Replay events with timestamp <= t from the initial page state.

    Scroll payloads are deltas; scroll_y is clamped to [0, max_scroll]
    when a page height is known, else to >= 0.
    """
    last = -np.inf
    scroll_y = 0.0
    popup = False
    menu = False
    for ev in events:
        if ev.t < last:
            raise MalformedEventsError("event log not ordered by time")
        last = ev.t
        if ev.t > t:
            continue
        if ev.kind == "scroll":
            scroll_y += float(ev.payload)
            scroll_y = max(0.0, scroll_y)
            if max_scroll is not None:
                scroll_y = min(scroll_y, max_scroll)
        elif ev.kind == "popup_open":
            popup = True
        elif ev.kind == "popup_close":
            popup = False
        elif ev.kind == "menu_open":
            menu = True
        elif ev.kind == "menu_close":
            menu = False
        # clicks change no state tracked here
    return PageState(scroll_y=scroll_y, popup_active=popup, menu_open=menu, t=t)


# ---------------------------------------------------------------------------
# hit testing


def _rects_intersect(a, b) -> bool:
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    return ax < bx + bw and bx < ax + aw and ay < by + bh and by < ay + ah


def _aoi_contains(layout: Layout, aoi: AOIDef, px: float, py: float, state: PageState) -> bool:
    """Point-in-AOI test in the AOI's own coordinate frame (screen point in)."""
    if aoi.behavior == "static":
        qx, qy = px, py + state.scroll_y
    else:  # scroll_locked and overlay are pinned to the screen
        qx, qy = px, py
    return any(
        layout.component(cid).contains(qx, qy) for cid in aoi.member_components
    )


def _occluded(layout: Layout, aoi: AOIDef, overlay: AOIDef, state: PageState) -> bool:
    """Whether the active overlay geometrically covers part of this AOI on screen."""
    over_rects = layout.aoi_rects(overlay)
    for cid in aoi.member_components:
        rect = layout.component(cid).rect
        if aoi.behavior == "static":
            x, y, w, h = rect
            rect = (x, y - state.scroll_y, w, h)
        if any(_rects_intersect(rect, o) for o in over_rects):
            return True
    return False


def hit_test(
    px: float,
    py: float,
    layout: Layout,
    state: PageState,
) -> tuple[int | None, int | None]:
    """Resolve a screen point to ``(aoi_id, component_id)``.

    The active overlay captures everything inside its rect and deactivates
    any AOI whose on-screen region it touches; untouched AOIs keep working.
    Points on no AOI are whitespace (component may still resolve).
    """
    overlay = next((a for a in layout.aois if a.behavior == "overlay"), None)

    aoi_hit: int | None = None
    if state.popup_active and overlay is not None:
        if _aoi_contains(layout, overlay, px, py, state):
            aoi_hit = overlay.id
        else:
            for aoi in layout.aois:
                if aoi.behavior == "overlay":
                    continue
                if _occluded(layout, aoi, overlay, state):
                    continue
                if _aoi_contains(layout, aoi, px, py, state):
                    aoi_hit = aoi.id
                    break
    else:
        for aoi in layout.aois:
            if aoi.behavior == "overlay":
                continue
            if _aoi_contains(layout, aoi, px, py, state):
                aoi_hit = aoi.id
                break

    comp_hit = _component_at(layout, px, py, state)
    return aoi_hit, comp_hit


def _component_frame(layout: Layout, cid: int) -> str:
    """Coordinate frame of a component: behavior of its enclosing AOI, if any."""
    for aoi in layout.aois:
        if cid in aoi.member_components:
            return aoi.behavior
    return "static"


def _component_at(layout: Layout, px: float, py: float, state: PageState) -> int | None:
    overlay_cids = {
        cid for a in layout.aois if a.behavior == "overlay" for cid in a.member_components
    }
    if state.popup_active:
        for cid in overlay_cids:
            if layout.component(cid).contains(px, py):
                return cid
    # open-menu panels, then screen-pinned components, then page content
    def layer(comp):
        if comp.dynamic:
            return 0
        return 1 if _component_frame(layout, comp.id) == "scroll_locked" else 2

    for want_layer in (0, 1, 2):
        for comp in layout.components:
            if comp.id in overlay_cids or layer(comp) != want_layer:
                continue
            if comp.dynamic and not state.menu_open:
                # non-overlay dynamic components belong to the drop-down menu
                continue
            locked = _component_frame(layout, comp.id) == "scroll_locked"
            onscreen = locked or comp.dynamic
            qx, qy = (px, py) if onscreen else (px, py + state.scroll_y)
            if comp.contains(qx, qy):
                return comp.id
    return None
