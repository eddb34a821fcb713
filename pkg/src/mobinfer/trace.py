"""Contact traces: events, validation, per-pair interval index and CSV I/O."""

from __future__ import annotations

import bisect
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable

import numpy as np

from mobinfer.errors import DomainError, TraceParseError, TraceValidationError

CONTACT_HEADER = "id_a,id_b,t_start,t_end"


@dataclass(frozen=True)
class ContactEvent:
    """One contact between two nodes over the half-open interval [t_start, t_end)."""

    node_a: int
    node_b: int
    t_start: float
    t_end: float

    def __post_init__(self):
        if self.node_a == self.node_b:
            raise TraceValidationError(f"self-contact for node {self.node_a}")
        if self.node_a > self.node_b:
            a, b = self.node_b, self.node_a
            object.__setattr__(self, "node_a", a)
            object.__setattr__(self, "node_b", b)
        if self.node_a < 0:
            raise TraceValidationError(f"negative node id {self.node_a}")
        if not self.t_start < self.t_end:
            raise TraceValidationError(
                f"event ({self.node_a},{self.node_b}) has t_start={self.t_start} >= t_end={self.t_end}"
            )

    @property
    def pair(self) -> tuple[int, int]:
        return (self.node_a, self.node_b)

    def sort_key(self):
        return (self.t_start, self.node_a, self.node_b)


def _pair(i: int, j: int) -> tuple[int, int]:
    if i == j:
        raise DomainError(f"pair query needs two distinct nodes, got {i} twice")
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class ContactTrace:
    """Immutable, canonical contact trace.

    Events are sorted by ``(t_start, node_a, node_b)``. Per pair, intervals
    are disjoint and non-adjacent. Construction merges adjacent intervals and
    rejects overlapping ones.
    """

    node_count: int
    duration: float
    events: tuple[ContactEvent, ...] = ()
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.node_count <= 0:
            raise TraceValidationError(f"node_count must be positive, got {self.node_count}")
        if self.duration < 0:
            raise TraceValidationError(f"duration must be non-negative, got {self.duration}")

        by_pair: dict[tuple[int, int], list[ContactEvent]] = {}
        for ev in self.events:
            if ev.node_b >= self.node_count:
                raise TraceValidationError(
                    f"node id {ev.node_b} out of range for node_count={self.node_count}"
                )
            if ev.t_start < 0 or ev.t_end > self.duration:
                raise TraceValidationError(
                    f"event {ev.pair} [{ev.t_start}, {ev.t_end}) outside [0, {self.duration}]"
                )
            by_pair.setdefault(ev.pair, []).append(ev)

        merged: list[ContactEvent] = []
        index = {}
        for pair, evs in by_pair.items():
            evs.sort(key=ContactEvent.sort_key)
            out = [evs[0]]
            for ev in evs[1:]:
                last = out[-1]
                if ev.t_start < last.t_end:
                    raise TraceValidationError(
                        f"overlapping contacts for pair {pair}: "
                        f"[{last.t_start}, {last.t_end}) and [{ev.t_start}, {ev.t_end})"
                    )
                if ev.t_start == last.t_end:
                    out[-1] = ContactEvent(pair[0], pair[1], last.t_start, ev.t_end)
                else:
                    out.append(ev)
            merged.extend(out)
            index[pair] = ([e.t_start for e in out], [e.t_end for e in out])

        merged.sort(key=ContactEvent.sort_key)
        object.__setattr__(self, "events", tuple(merged))
        object.__setattr__(self, "_index", index)

    def pairs(self) -> list[tuple[int, int]]:
        """Pairs with at least one event, in ascending order."""
        return sorted(self._index)

    def intervals(self, i: int, j: int) -> tuple[list[float], list[float]]:
        """Sorted (starts, ends) for the pair; empty lists when the pair never meets."""
        return self._index.get(_pair(i, j), ([], []))

    def _check_time(self, t: float):
        if not 0 <= t <= self.duration:
            raise DomainError(f"t={t} outside trace duration [0, {self.duration}]")


def contacts_at(trace: ContactTrace, t: float) -> set[tuple[int, int]]:
    trace._check_time(t)
    out = set()
    for pair, (starts, ends) in trace._index.items():
        k = bisect.bisect_right(starts, t) - 1
        if k >= 0 and t < ends[k]:
            out.add(pair)
    return out


def current_contact_end(trace: ContactTrace, i: int, j: int, t: float) -> float | None:
    """End of the contact between ``i`` and ``j`` that contains ``t``, else None."""
    pair = _pair(i, j)
    trace._check_time(t)
    starts, ends = trace._index.get(pair, ([], []))
    k = bisect.bisect_right(starts, t) - 1
    if k >= 0 and t < ends[k]:
        return ends[k]
    return None


def next_contact_start(trace: ContactTrace, i: int, j: int, t: float) -> float | None:
    """Start of the next contact between ``i`` and ``j`` strictly after ``t``.

    Returns None when the pair is in contact at ``t`` or never meets again.
    """
    pair = _pair(i, j)
    trace._check_time(t)
    starts, ends = trace._index.get(pair, ([], []))
    k = bisect.bisect_right(starts, t)
    if k > 0 and t < ends[k - 1]:
        return None
    if k < len(starts):
        return starts[k]
    return None


class ContactSchedule:
    """Sweeps a contact trace forward in time, yielding the per-step matrices.

    Gives the same answers as ``contacts_at`` / ``next_contact_start`` but in
    amortized O(changes) per query. Query times must not decrease.
    """

    def __init__(self, trace: ContactTrace):
        self.n = trace.node_count
        pairs = trace.pairs()
        self._a = np.array([p[0] for p in pairs], dtype=int)
        self._b = np.array([p[1] for p in pairs], dtype=int)
        self._intervals = [trace.intervals(a, b) for a, b in pairs]
        self._ptr = np.zeros(len(pairs), dtype=int)
        self._start = np.array([iv[0][0] for iv in self._intervals], dtype=float)
        self._end = np.array([iv[1][0] for iv in self._intervals], dtype=float)
        self._t = -math.inf

    def at(self, t: float):
        if t < self._t:
            raise DomainError("ContactSchedule queries must be non-decreasing in time")
        self._t = t
        for p in np.nonzero(self._end <= t)[0].tolist():
            starts, ends = self._intervals[p]
            k = int(self._ptr[p])
            while k < len(ends) and ends[k] <= t:
                k += 1
            self._ptr[p] = k
            if k < len(ends):
                self._start[p], self._end[p] = starts[k], ends[k]
            else:
                self._start[p] = self._end[p] = math.inf
        live = self._start <= t
        in_contact = np.zeros((self.n, self.n), bool)
        in_contact[self._a[live], self._b[live]] = True
        in_contact[self._b[live], self._a[live]] = True
        next_start = np.full((self.n, self.n), np.inf)
        wait = ~live
        next_start[self._a[wait], self._b[wait]] = self._start[wait]
        next_start[self._b[wait], self._a[wait]] = self._start[wait]
        return in_contact, next_start


def _open_text(source) -> tuple[IO[str], bool]:
    if isinstance(source, (str, Path)):
        return open(source, "r", newline=""), True
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(source.decode("utf-8")), True
    if isinstance(source, io.TextIOBase):
        return source, False
    return io.TextIOWrapper(source, encoding="utf-8", newline=""), False


def parse_contact_rows(lines: Iterable[str]) -> list[ContactEvent]:
    it = iter(lines)
    header = next(it, None)
    if header is None or header.strip() != CONTACT_HEADER:
        raise TraceParseError(f"expected header {CONTACT_HEADER!r}, got {header!r}", line=1)
    events = []
    for lineno, raw in enumerate(it, start=2):
        line = raw.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise TraceParseError(f"expected 4 fields, got {len(parts)}: {line!r}", line=lineno)
        try:
            a, b = int(parts[0]), int(parts[1])
            t0, t1 = float(parts[2]), float(parts[3])
        except ValueError as exc:
            raise TraceParseError(str(exc), line=lineno) from None
        try:
            events.append(ContactEvent(a, b, t0, t1))
        except TraceValidationError as exc:
            raise TraceValidationError(f"line {lineno}: {exc}") from None
    return events


def load_contact_trace(
    source, node_count: int | None = None, duration: float | None = None
) -> ContactTrace:
    """Read a contact CSV from a path, bytes, or a byte/text stream.

    Missing ``node_count`` / ``duration`` default to the companion ``.meta``
    file next to a path source, then to the smallest values the events allow.
    """
    if isinstance(source, (str, Path)):
        meta = read_meta(Path(source))
        if node_count is None and "node_count" in meta:
            node_count = int(meta["node_count"])
        if duration is None and "duration" in meta:
            duration = float(meta["duration"])
    fh, close = _open_text(source)
    try:
        events = parse_contact_rows(fh)
    finally:
        if close:
            fh.close()
    if node_count is None:
        node_count = max((e.node_b for e in events), default=0) + 1
    if duration is None:
        duration = max((e.t_end for e in events), default=0.0)
    return ContactTrace(node_count, duration, tuple(events))


def format_contact_trace(trace: ContactTrace) -> str:
    lines = [CONTACT_HEADER]
    for e in trace.events:
        lines.append(f"{e.node_a},{e.node_b},{e.t_start!r},{e.t_end!r}")
    return "\n".join(lines) + "\n"


def meta_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta")


def read_meta(path: Path) -> dict[str, str]:
    mp = meta_path(Path(path))
    if not mp.exists():
        return {}
    from mobinfer.config import parse_key_values

    return parse_key_values(mp.read_text())


def save_contact_trace(trace: ContactTrace, path) -> None:
    """Write the CSV and its companion ``<path>.meta`` (node_count, duration)."""
    path = Path(path)
    path.write_text(format_contact_trace(trace))
    meta_path(path).write_text(f"node_count={trace.node_count}\nduration={trace.duration!r}\n")
