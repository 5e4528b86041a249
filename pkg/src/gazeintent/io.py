"""File formats: gaze CSV, events CSV, JSON layout, and tabular exports.

Gaze CSV header:   user_id,session_id,t_ms,x_px,y_px,valid
Events CSV header: user_id,session_id,t_ms,kind,payload
Layout file: JSON with page/viewport size, components (name, rect, dynamic
flag) and AOIs (id, behavior, member components by name).
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .gaze import (
    AOIDef,
    Component,
    GazeSample,
    GazeSignal,
    InteractionEvent,
    Layout,
)

GAZE_HEADER = ["user_id", "session_id", "t_ms", "x_px", "y_px", "valid"]
EVENTS_HEADER = ["user_id", "session_id", "t_ms", "kind", "payload"]


class MalformedFileError(ValueError):
    """A data file does not match its documented schema."""


def _check_header(row, expected, path):
    if row != expected:
        raise MalformedFileError(
            f"{path}: expected header {','.join(expected)!r}, got {','.join(row)!r}"
        )


def load_gaze_csv(path) -> dict[tuple[str, str], GazeSignal]:
    """Load gaze signals keyed by (user_id, session_id)."""
    path = Path(path)
    groups: dict[tuple[str, str], list[GazeSample]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedFileError(f"{path}: empty file") from None
        _check_header(header, GAZE_HEADER, path)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 6:
                raise MalformedFileError(f"{path}:{lineno}: expected 6 fields")
            user, session, t, x, y, valid = row
            try:
                sample = GazeSample(
                    x=float(x), y=float(y), t=float(t), valid=_parse_bool(valid)
                )
            except ValueError as exc:
                raise MalformedFileError(f"{path}:{lineno}: {exc}") from None
            groups.setdefault((user, session), []).append(sample)
    signals = {}
    for (user, session), samples in groups.items():
        signals[(user, session)] = GazeSignal(
            user_id=user, session_id=session, samples=tuple(samples)
        )
    return signals


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true"):
        return True
    if t in ("0", "false"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def write_gaze_csv(path, signals: dict[tuple[str, str], GazeSignal]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(GAZE_HEADER)
        for (user, session) in sorted(signals):
            for s in signals[(user, session)].samples:
                w.writerow(
                    [user, session, _fmt(s.t), _fmt(s.x), _fmt(s.y), int(s.valid)]
                )


def load_events_csv(path) -> dict[tuple[str, str], list[InteractionEvent]]:
    """Load interaction-event logs keyed by (user_id, session_id)."""
    path = Path(path)
    logs: dict[tuple[str, str], list[InteractionEvent]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedFileError(f"{path}: empty file") from None
        _check_header(header, EVENTS_HEADER, path)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise MalformedFileError(f"{path}:{lineno}: expected 5 fields")
            user, session, t, kind, payload = row
            try:
                value: float | str | None
                if kind == "scroll":
                    value = float(payload)
                else:
                    value = payload or None
                ev = InteractionEvent(t=float(t), kind=kind, payload=value)
            except ValueError as exc:
                raise MalformedFileError(f"{path}:{lineno}: {exc}") from None
            logs.setdefault((user, session), []).append(ev)
    return logs


def write_events_csv(path, logs: dict[tuple[str, str], list[InteractionEvent]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(EVENTS_HEADER)
        for (user, session) in sorted(logs):
            for ev in logs[(user, session)]:
                payload = "" if ev.payload is None else ev.payload
                if ev.kind == "scroll":
                    payload = _fmt(float(payload))
                w.writerow([user, session, _fmt(ev.t), ev.kind, payload])


def load_layout(path) -> Layout:
    path = Path(path)
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise MalformedFileError(f"{path}: invalid JSON ({exc})") from None
    try:
        components = tuple(
            Component(
                id=i + 1,
                name=c["name"],
                rect=tuple(float(v) for v in c["rect"]),
                dynamic=bool(c.get("dynamic", False)),
            )
            for i, c in enumerate(doc["components"])
        )
        by_name = {c.name: c.id for c in components}
        aois = tuple(
            AOIDef(
                id=int(a["id"]),
                member_components=tuple(by_name[name] for name in a["members"]),
                behavior=a.get("behavior", "static"),
            )
            for a in doc["aois"]
        )
        return Layout(
            page_size=tuple(float(v) for v in doc["page_size"]),
            viewport_size=tuple(float(v) for v in doc["viewport_size"]),
            components=components,
            aois=aois,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedFileError(f"{path}: bad layout ({exc})") from None


def sample_layout_path() -> Path:
    """Bundled 6-AOI news-page layout."""
    return Path(__file__).parent / "data" / "news_page.json"


def load_sample_layout() -> Layout:
    return load_layout(sample_layout_path())


def _fmt(v: float) -> str:
    """Stable numeric formatting: integral values print without exponent."""
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def write_csv(path, header: list[str], rows) -> None:
    """Small deterministic CSV writer used by the exporters."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow(
                [_fmt(v) if isinstance(v, float) else v for v in row]
            )
