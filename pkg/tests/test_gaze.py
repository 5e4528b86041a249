import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gazeintent.gaze import (
    EmptySignalError,
    Fixation,
    GazeSample,
    GazeSignal,
    InteractionEvent,
    MalformedEventsError,
    MalformedSignalError,
    PageState,
    derive_saccades,
    detect_fixations,
    hit_test,
    page_state_at,
    truncate_fixations,
)
from gazeintent.io import load_sample_layout


def make_signal(points, user="u", session="s"):
    return GazeSignal(user, session, tuple(GazeSample(x, y, t, v) for x, y, t, v in points))


def cluster(x, y, t0, dur_ms, n, spread=0.0):
    """n samples around (x, y) spanning dur_ms starting at t0."""
    out = []
    for i in range(n):
        dx = spread * np.cos(2.19 * i)
        dy = spread * np.sin(2.19 * i)
        out.append((x + dx, y + dy, t0 + dur_ms * i / (n - 1), True))
    return out


class TestDetectFixations:
    def test_single_stationary_cluster(self):
        sig = make_signal(cluster(100, 200, 0, 125, 15, spread=4.0))
        fx = detect_fixations(sig, dispersion_px=30, min_duration_ms=100)
        assert len(fx) == 1
        assert fx[0].sample_span == (0, 15)
        assert fx[0].duration == pytest.approx(125)

    def test_short_cluster_filtered(self):
        sig = make_signal(cluster(100, 200, 0, 90, 12))
        assert detect_fixations(sig, 30, 100) == []

    def test_two_clusters_with_transit(self):
        pts = cluster(100, 100, 0, 150, 16)
        pts += [(100 + 60 * (i + 1), 100 + 60 * (i + 1), 160 + 10 * i, True) for i in range(4)]
        pts += cluster(400, 400, 210, 150, 16)
        fx = detect_fixations(make_signal(pts), 30, 100)
        assert len(fx) == 2
        assert fx[0].cx == pytest.approx(100, abs=2)
        assert fx[0].cy == pytest.approx(100, abs=2)
        assert fx[1].cx == pytest.approx(400, abs=2)
        assert fx[1].cy == pytest.approx(400, abs=2)

    def test_empty_signal_rejected(self):
        with pytest.raises(EmptySignalError):
            GazeSignal("u", "s", ())

    def test_non_monotonic_timestamps_rejected(self):
        with pytest.raises(MalformedSignalError):
            make_signal([(0, 0, 10, True), (0, 0, 5, True)])

    def test_blink_gap_splits(self):
        pts = cluster(100, 100, 0, 120, 14)
        pts += cluster(100, 100, 320, 120, 14)  # 200 ms hole: beyond blink gap
        fx = detect_fixations(make_signal(pts), 30, 100, blink_gap_ms=75)
        assert len(fx) == 2

    def test_short_invalid_gap_bridged(self):
        pts = cluster(100, 100, 0, 60, 8)
        pts += [(500, 500, 70, False), (480, 470, 78, False)]  # blink junk
        pts += cluster(100, 100, 90, 60, 8)
        fx = detect_fixations(make_signal(pts), 30, 100, blink_gap_ms=75)
        assert len(fx) == 1
        assert fx[0].duration >= 100

    def test_fixation_inside_drifty_lead(self):
        # a compact 110 ms cluster preceded by samples that break dispersion
        # only together: sliding must still find the embedded fixation
        pts = [(60, 100, 0, True), (75, 100, 8, True)]
        pts += cluster(100, 100, 16, 110, 14, spread=3)
        fx = detect_fixations(make_signal(pts), dispersion_px=30, min_duration_ms=100)
        assert len(fx) == 1

    def test_dispersion_invariant(self):
        rng = np.random.default_rng(7)
        pts = []
        t = 0.0
        for _ in range(40):
            cx, cy = rng.uniform(0, 800, 2)
            n = rng.integers(3, 30)
            for _ in range(n):
                pts.append((cx + rng.uniform(-9, 9), cy + rng.uniform(-9, 9), t, True))
                t += 1000 / 120
        sig = make_signal(pts)
        x, y, tt, v = sig.arrays()
        for f in detect_fixations(sig, 30, 100):
            lo, hi = f.sample_span
            disp = (x[lo:hi].max() - x[lo:hi].min()) + (y[lo:hi].max() - y[lo:hi].min())
            assert disp <= 30 + 1e-9
            assert f.duration >= 100
            assert x[lo:hi].min() <= f.cx <= x[lo:hi].max()
            assert y[lo:hi].min() <= f.cy <= y[lo:hi].max()


class TestTruncate:
    def test_prefix_equivalence(self):
        rng = np.random.default_rng(3)
        pts = []
        t = 0.0
        for _ in range(30):
            cx, cy = rng.uniform(0, 800, 2)
            for _ in range(rng.integers(5, 40)):
                pts.append((cx + rng.uniform(-8, 8), cy + rng.uniform(-8, 8), t, True))
                t += 1000 / 120
        sig = make_signal(pts)
        fx = detect_fixations(sig, 30, 100)
        for cut in (500.0, 1234.5, 3000.0, t / 2):
            prefix_pts = [p for p in pts if p[2] < cut]
            if not prefix_pts:
                continue
            direct = detect_fixations(make_signal(prefix_pts), 30, 100)
            trunc = truncate_fixations(fx, sig, cut, 100)
            assert len(direct) == len(trunc)
            for a, b in zip(direct, trunc):
                assert a.t_start == pytest.approx(b.t_start)
                assert a.duration == pytest.approx(b.duration)
                assert a.cx == pytest.approx(b.cx)
                assert a.cy == pytest.approx(b.cy)


class TestSaccades:
    def test_zero_for_single_fixation(self):
        assert derive_saccades([Fixation(0, 0, 0, 100, (0, 1))]) == []

    def test_three_four_five(self):
        f1 = Fixation(0, 0, 0, 100, (0, 1))
        f2 = Fixation(3, 4, 200, 100, (1, 2))
        sacs = derive_saccades([f1, f2])
        assert len(sacs) == 1
        assert sacs[0].amplitude == pytest.approx(5.0)
        assert sacs[0].duration == pytest.approx(100)

    @given(st.integers(min_value=0, max_value=12))
    def test_count_invariant(self, n):
        fx = [Fixation(i, i, 300.0 * i, 100, (i, i + 1)) for i in range(n)]
        assert len(derive_saccades(fx)) == max(0, n - 1)


class TestPageState:
    def test_initial_state(self):
        st0 = page_state_at([], 1000)
        assert st0.scroll_y == 0 and not st0.popup_active and not st0.menu_open

    def test_event_after_query_ignored(self):
        evs = [InteractionEvent(1000, "scroll", 200.0)]
        assert page_state_at(evs, 500).scroll_y == 0

    def test_popup_interval(self):
        evs = [InteractionEvent(1000, "popup_open"), InteractionEvent(3000, "popup_close")]
        assert page_state_at(evs, 2000).popup_active
        assert not page_state_at(evs, 3000).popup_active

    def test_scroll_clamping(self):
        evs = [InteractionEvent(0, "scroll", -300.0), InteractionEvent(10, "scroll", 5000.0)]
        assert page_state_at(evs, 5).scroll_y == 0
        assert page_state_at(evs, 20, max_scroll=976).scroll_y == 976

    def test_unordered_log_rejected(self):
        evs = [InteractionEvent(100, "click", "x"), InteractionEvent(50, "click", "x")]
        with pytest.raises(MalformedEventsError):
            page_state_at(evs, 200)

    @given(
        st.lists(
            st.tuples(
                st.floats(min_value=0, max_value=10000),
                st.sampled_from(["scroll", "popup_open", "popup_close", "menu_open", "menu_close"]),
            ),
            max_size=20,
        ),
        st.floats(min_value=0, max_value=10000),
        st.floats(min_value=0, max_value=10000),
    )
    @settings(max_examples=60)
    def test_monotone_consistency(self, raw, t1, t2):
        t1, t2 = sorted((t1, t2))
        evs = [
            InteractionEvent(t, k, 100.0 if k == "scroll" else None)
            for t, k in sorted(raw, key=lambda e: e[0])
        ]
        # replay to t2 equals replay of events <= t1 continued to t2
        full = page_state_at(evs, t2)
        early = [e for e in evs if e.t <= t1]
        late = [e for e in evs if e.t > t1]
        resumed = page_state_at(early + late, t2)
        assert full == resumed


class TestHitTest:
    def setup_method(self):
        self.layout = load_sample_layout()

    def test_direct_containment(self):
        aoi, comp = hit_test(200, 200, self.layout, PageState())
        assert aoi == 2

    def test_popup_occludes_and_captures(self):
        popup = PageState(popup_active=True)
        aoi, _ = hit_test(200, 200, self.layout, popup)  # AOI 2 intersects popup
        assert aoi is None
        aoi, comp = hit_test(500, 400, self.layout, popup)
        assert aoi == 6
        assert self.layout.component(comp).name == "Reg_Popup"

    def test_whitespace_component_hit(self):
        aoi, comp = hit_test(1100, 30, self.layout, PageState())
        assert aoi is None
        assert self.layout.component(comp).name == "Sub_Butt"

    def test_scroll_locked_menu(self):
        for scroll in (0, 300, 976):
            aoi, comp = hit_test(600, 100, self.layout, PageState(scroll_y=scroll))
            assert aoi == 1
            assert self.layout.component(comp).name == "Bar_Menu"

    def test_static_aoi_scrolls(self):
        # Banner_1 sits at page y in [1020, 1350): off-screen at scroll 0 bottom area
        aoi, _ = hit_test(100, 200, self.layout, PageState(scroll_y=1000))
        assert aoi == 4

    def test_overlay_never_hits_when_closed(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            px = rng.uniform(0, 1280)
            py = rng.uniform(0, 1024)
            scroll = rng.uniform(0, 976)
            aoi, _ = hit_test(px, py, self.layout, PageState(scroll_y=scroll))
            assert aoi != 6

    def test_deterministic(self):
        state = PageState(scroll_y=123.0, popup_active=True)
        results = {hit_test(640, 500, self.layout, state) for _ in range(5)}
        assert len(results) == 1

    def test_menu_component_requires_menu_open(self):
        closed = hit_test(200, 300, self.layout, PageState())
        opened = hit_test(200, 300, self.layout, PageState(menu_open=True))
        assert self.layout.component(opened[1]).name == "Menu_Panel"
        assert closed[1] != opened[1]
