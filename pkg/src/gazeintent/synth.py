"""Synthetic gaze-session generator.

Simulates a user walking over the page AOIs with a Markov chain (state 0 is
whitespace), dwelling in each area for a lognormal time and planting a
sequence of fixation anchors inside the area's visible region. Samples come
out at the tracker rate with Gaussian jitter around the current anchor,
together with the interaction events (scrolls that bring the target into
view, pop-up open/close, occasional menu toggles and blinks). Fully
deterministic per (seed, user, session): each session owns an independent
random stream.

The default profile is shaped so a cohort reproduces the reference summary
statistics (~79 s mean recording, ~0.22 s mean detected fixation) and so
window labels genuinely depend on the previous window's AOI and the gaze
position, which is what makes the prediction task learnable.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from .gaze import GazeSample, GazeSignal, InteractionEvent, Layout

__all__ = ["BehaviorProfile", "default_profile", "generate_session", "generate_cohort"]


@dataclass(frozen=True)
class BehaviorProfile:
    """Markov-walk parameters over states 0..n (0 = whitespace)."""

    transition: np.ndarray  # (n+1, n+1), rows sum to 1
    dwell_mean_s: np.ndarray  # per state
    dwell_sigma: float  # lognormal shape shared across states
    fix_mean_s: float  # anchor-hold lognormal mean
    fix_sigma: float
    jitter_px: float
    scroll_extra_prob: float  # spontaneous scroll at a transition
    scroll_step_px: float
    menu_open_prob: float  # per transition
    blink_prob: float  # per anchor
    duration_mean_s: float
    duration_sigma: float
    duration_range_s: tuple[float, float]
    sample_rate: float = 120.0

    def __post_init__(self):
        T = np.asarray(self.transition, dtype=float)
        if T.ndim != 2 or T.shape[0] != T.shape[1]:
            raise ValueError("transition matrix must be square")
        if np.any(T < 0) or not np.allclose(T.sum(axis=1), 1.0, atol=1e-9):
            raise ValueError("transition rows must be non-negative and sum to 1")
        if len(self.dwell_mean_s) != T.shape[0]:
            raise ValueError("one dwell mean per state required")
        if self.jitter_px < 0 or self.blink_prob < 0 or self.scroll_extra_prob < 0:
            raise ValueError("rates must be non-negative")


_DEFAULT_TRANSITION = np.array(
    [
        # to:  white  AOI1  AOI2  AOI3  AOI4  AOI5  AOI6
        [0.10, 0.08, 0.30, 0.22, 0.15, 0.12, 0.03],  # from whitespace
        [0.10, 0.25, 0.25, 0.18, 0.10, 0.09, 0.03],  # from AOI 1 (menu bar)
        [0.08, 0.06, 0.40, 0.25, 0.10, 0.08, 0.03],  # from AOI 2
        [0.08, 0.05, 0.20, 0.40, 0.15, 0.09, 0.03],  # from AOI 3
        [0.08, 0.05, 0.10, 0.20, 0.35, 0.19, 0.03],  # from AOI 4
        [0.08, 0.05, 0.08, 0.15, 0.25, 0.36, 0.03],  # from AOI 5
        [0.15, 0.10, 0.25, 0.20, 0.12, 0.13, 0.05],  # from AOI 6 (pop-up)
    ]
)


def default_profile(layout: Layout) -> BehaviorProfile:
    if layout.n != _DEFAULT_TRANSITION.shape[0] - 1:
        raise ValueError("default profile is shaped for the 6-AOI layout")
    return BehaviorProfile(
        transition=_DEFAULT_TRANSITION.copy(),
        dwell_mean_s=np.array([1.8, 2.2, 4.0, 4.0, 3.2, 3.2, 3.0]),
        dwell_sigma=0.45,
        fix_mean_s=0.22,
        fix_sigma=0.50,
        jitter_px=3.0,
        scroll_extra_prob=0.05,
        scroll_step_px=120.0,
        menu_open_prob=0.02,
        blink_prob=0.04,
        duration_mean_s=78.8,
        duration_sigma=0.60,
        duration_range_s=(16.5, 399.0),
        sample_rate=120.0,
    )


def _lognormal(rng, mean, sigma):
    return float(rng.lognormal(np.log(mean) - 0.5 * sigma**2, sigma))


def _whitespace_rects(layout: Layout):
    in_aoi = {cid for a in layout.aois for cid in a.member_components}
    rects = [
        c.rect for c in layout.components if c.id not in in_aoi and not c.dynamic
    ]
    return rects or [(0, 0, layout.page_size[0], layout.page_size[1])]


class _Walk:
    def __init__(self, layout: Layout, profile: BehaviorProfile, rng):
        self.lay = layout
        self.prof = profile
        self.rng = rng
        self.scroll = 0.0
        self.popup = False
        self.menu = False
        self.events: list[InteractionEvent] = []
        self.white = _whitespace_rects(layout)
        self.overlay = next((a for a in layout.aois if a.behavior == "overlay"), None)

    def _emit(self, t, kind, payload=None):
        self.events.append(InteractionEvent(t=t, kind=kind, payload=payload))

    def _scroll_to(self, t, target_y_page, rect_h):
        """Scroll so the page band [target_y, +rect_h] sits inside the view."""
        vh = self.lay.viewport_size[1]
        lo = target_y_page + rect_h - vh + 40.0
        hi = target_y_page - 40.0
        if lo <= self.scroll <= max(lo, hi):
            return
        want = min(max(target_y_page + rect_h / 2 - vh / 2, 0.0), self.lay.max_scroll)
        delta = round(want - self.scroll)
        if delta:
            self._emit(t, "scroll", float(delta))
            self.scroll += float(delta)

    def region_for(self, state: int, t: float):
        """Pick the anchor rect for a state, in screen coordinates, emitting
        whatever events are needed to make it visible."""
        rng = self.rng
        if self.popup and (self.overlay is None or state != self.overlay.id):
            self._emit(t, "popup_close")
            self.popup = False
        if state == 0:
            rect = self.white[rng.integers(len(self.white))]
            self._scroll_to(t, rect[1], rect[3])
            x, y, w, h = rect
            return (x, y - self.scroll, w, h)
        aoi = self.lay.aois[state - 1]
        if aoi.behavior == "overlay":
            if not self.popup:
                self._emit(t, "click", "Sub_Butt")
                self._emit(t, "popup_open")
                self.popup = True
            rect = self.lay.component(aoi.member_components[rng.integers(len(aoi.member_components))]).rect
            return rect  # overlay rects are screen coordinates
        if aoi.behavior == "scroll_locked":
            cid = aoi.member_components[rng.integers(len(aoi.member_components))]
            return self.lay.component(cid).rect  # screen coordinates
        cid = aoi.member_components[rng.integers(len(aoi.member_components))]
        rect = self.lay.component(cid).rect
        self._scroll_to(t, rect[1], rect[3])
        x, y, w, h = rect
        return (x, y - self.scroll, w, h)


def generate_session(
    layout: Layout,
    profile: BehaviorProfile,
    seed: int,
    user_id: str,
    session_id: str = "s1",
    duration_s: float | None = None,
):
    """One synthetic session: returns (GazeSignal, event log)."""
    # crc32 keys keep the stream assignment stable across processes
    user_key = zlib.crc32(user_id.encode())
    sess_key = zlib.crc32(session_id.encode())
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(user_key, sess_key))
    )
    if duration_s is None:
        lo, hi = profile.duration_range_s
        duration_s = min(max(_lognormal(rng, profile.duration_mean_s, profile.duration_sigma), lo), hi)
    duration_ms = duration_s * 1000.0
    tick = 1000.0 / profile.sample_rate

    walk = _Walk(layout, profile, rng)
    samples: list[GazeSample] = []
    state = 0
    k = 0  # global tick counter; sample times are k * tick
    margin = max(profile.jitter_px * 2.0, 8.0)

    while k * tick < duration_ms:
        t_now = k * tick
        state = int(rng.choice(len(profile.transition), p=profile.transition[state]))
        if rng.random() < profile.menu_open_prob and not walk.menu:
            walk._emit(t_now, "menu_open")
            walk.menu = True
        elif walk.menu and rng.random() < 0.5:
            walk._emit(t_now, "menu_close")
            walk.menu = False
        if rng.random() < profile.scroll_extra_prob and state != 0 and not walk.popup:
            delta = float(rng.choice([-1.0, 1.0]) * profile.scroll_step_px)
            new = min(max(walk.scroll + delta, 0.0), layout.max_scroll)
            if new != walk.scroll:
                walk._emit(t_now, "scroll", float(round(new - walk.scroll)))
                walk.scroll = new
        rect = walk.region_for(state, t_now)
        dwell_ms = _lognormal(rng, profile.dwell_mean_s[state], profile.dwell_sigma) * 1000.0
        dwell_end = min(t_now + dwell_ms, duration_ms)

        anchor = None
        while k * tick < dwell_end:
            x0, y0, w, h = rect
            ax_lo, ax_hi = x0 + margin, x0 + w - margin
            ay_lo, ay_hi = y0 + margin, y0 + h - margin
            if ax_hi <= ax_lo:
                ax_lo, ax_hi = x0, x0 + w
            if ay_hi <= ay_lo:
                ay_lo, ay_hi = y0, y0 + h
            for _ in range(8):
                cand = (rng.uniform(ax_lo, ax_hi), rng.uniform(ay_lo, ay_hi))
                if anchor is None or np.hypot(cand[0] - anchor[0], cand[1] - anchor[1]) >= 60.0:
                    break
            anchor = cand
            hold_ms = _lognormal(rng, profile.fix_mean_s, profile.fix_sigma) * 1000.0
            hold_ms = min(max(hold_ms, 50.0), 3300.0)
            n_ticks = max(int(round(hold_ms / tick)), 2)
            blink = rng.random() < profile.blink_prob
            for i in range(n_ticks):
                t_s = k * tick
                if t_s >= duration_ms:
                    break
                jx = rng.normal(0.0, profile.jitter_px)
                jy = rng.normal(0.0, profile.jitter_px)
                samples.append(
                    GazeSample(
                        x=float(np.clip(anchor[0] + jx, 0, layout.viewport_size[0] - 1)),
                        y=float(np.clip(anchor[1] + jy, 0, layout.viewport_size[1] - 1)),
                        t=t_s,
                        valid=True,
                    )
                )
                k += 1
            if blink:
                n_blink = int(rng.integers(10, 16))  # ~100 ms of lost tracking
                for _ in range(n_blink):
                    t_s = k * tick
                    if t_s >= duration_ms:
                        break
                    samples.append(GazeSample(x=0.0, y=0.0, t=t_s, valid=False))
                    k += 1
            k += 2  # brief saccade with no committed samples

    signal = GazeSignal(
        user_id=user_id, session_id=session_id, samples=tuple(samples),
        sample_rate=profile.sample_rate,
    )
    return signal, walk.events


def generate_cohort(
    layout: Layout,
    profile: BehaviorProfile,
    n_users: int,
    sessions_per_user: int,
    seed: int = 0,
):
    """N x S sessions keyed by (user_id, session_id) in the CSV map shapes."""
    signals = {}
    events = {}
    for u in range(1, n_users + 1):
        for s in range(1, sessions_per_user + 1):
            user_id = f"u{u:03d}"
            session_id = f"s{s}"
            sig, evs = generate_session(layout, profile, seed, user_id, session_id)
            signals[(user_id, session_id)] = sig
            events[(user_id, session_id)] = evs
    return signals, events
