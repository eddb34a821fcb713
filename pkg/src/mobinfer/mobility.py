"""Movement traces on the plane or a torus, and the distances between nodes."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from mobinfer.errors import DomainError, TraceParseError, TraceValidationError

MOVEMENT_HEADER = "t,node_id,x,y"
SPEED_EPS = 1e-9


@dataclass(frozen=True)
class Geometry:
    kind: str = "plane"
    width: float | None = None
    height: float | None = None

    def __post_init__(self):
        if self.kind == "plane":
            if self.width is not None or self.height is not None:
                raise TraceValidationError("plane geometry takes no dimensions")
        elif self.kind == "torus":
            if not (self.width and self.height and self.width > 0 and self.height > 0):
                raise TraceValidationError(
                    f"torus dimensions must be positive, got {self.width}x{self.height}"
                )
        else:
            raise TraceValidationError(f"unknown geometry kind {self.kind!r}")

    @classmethod
    def torus(cls, width: float, height: float) -> Geometry:
        return cls("torus", float(width), float(height))

    @property
    def is_torus(self) -> bool:
        return self.kind == "torus"

    def wrap(self, xy: np.ndarray) -> np.ndarray:
        """Canonical coordinates: identity on the plane, [0,w) x [0,h) on the torus."""
        if not self.is_torus:
            return xy
        out = np.mod(xy, (self.width, self.height))
        # np.mod can round tiny negatives up to exactly w
        out[..., 0][out[..., 0] >= self.width] = 0.0
        out[..., 1][out[..., 1] >= self.height] = 0.0
        return out

    def displacement(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        """Vector from ``p`` to ``q``; the minimum image on the torus."""
        d = np.asarray(q, dtype=float) - np.asarray(p, dtype=float)
        if self.is_torus:
            box = np.array([self.width, self.height])
            d = d - box * np.round(d / box)
        return d

    def describe(self) -> str:
        if self.is_torus:
            return f"torus,{self.width!r},{self.height!r}"
        return "plane"


def distance(geometry: Geometry, p, q) -> float:
    """Euclidean distance on the plane, minimum-image distance on the torus."""
    dx, dy = geometry.displacement(p, q)
    return math.hypot(dx, dy)


def pairwise_distances(geometry: Geometry, positions: np.ndarray) -> np.ndarray:
    """(..., N, 2) positions -> (..., N, N) distance matrices."""
    d = positions[..., None, :, :] - positions[..., :, None, :]
    if geometry.is_torus:
        box = np.array([geometry.width, geometry.height])
        d = d - box * np.round(d / box)
    return np.sqrt(np.sum(d * d, axis=-1))


@dataclass(frozen=True, eq=False)
class MovementTrace:
    """Positions of ``node_count`` nodes sampled every ``dt`` seconds.

    ``frames`` has shape (F, N, 2); frame k is time k*dt. Stored read-only.
    """

    frames: np.ndarray
    dt: float
    geometry: Geometry = Geometry()

    def __post_init__(self):
        frames = np.array(self.frames, dtype=float)
        if frames.ndim != 3 or frames.shape[2] != 2 or frames.shape[0] < 1:
            raise TraceValidationError(f"frames must have shape (F, N, 2), got {frames.shape}")
        if not self.dt > 0:
            raise TraceValidationError(f"dt must be positive, got {self.dt}")
        if not np.all(np.isfinite(frames)):
            raise TraceValidationError("non-finite coordinates in movement trace")
        if self.geometry.is_torus:
            box = np.array([self.geometry.width, self.geometry.height])
            if np.any(frames < 0) or np.any(frames >= box):
                raise TraceValidationError("torus coordinates must lie in [0, w) x [0, h)")
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)

    @property
    def node_count(self) -> int:
        return self.frames.shape[1]

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]

    @property
    def duration(self) -> float:
        return frame_time(self.frame_count - 1, self.dt)

    def times(self) -> np.ndarray:
        return np.round(np.arange(self.frame_count) * self.dt, 9)

    def __eq__(self, other):
        if not isinstance(other, MovementTrace):
            return NotImplemented
        return (
            self.dt == other.dt
            and self.geometry == other.geometry
            and self.frames.shape == other.frames.shape
            and np.array_equal(self.frames, other.frames)
        )


def frame_time(k: int, dt: float) -> float:
    """Time of frame ``k``, rounded to the nanosecond so grids line up exactly."""
    return round(k * dt, 9)


def max_speed_violations(trace: MovementTrace, v_max: float) -> list[tuple[int, int]]:
    """(node, frame) pairs where the move from frame k to k+1 exceeds v_max*dt."""
    if trace.frame_count < 2:
        raise DomainError("max_speed_violations needs at least 2 frames")
    d = trace.geometry.displacement(trace.frames[:-1], trace.frames[1:])
    step = np.sqrt(np.sum(d * d, axis=-1))
    frame_idx, node_idx = np.nonzero(step > v_max * trace.dt + SPEED_EPS)
    return sorted(zip(node_idx.tolist(), frame_idx.tolist()))


def positions_at(trace: MovementTrace, t: float) -> np.ndarray:
    if not 0 <= t <= trace.duration + 1e-9:
        raise DomainError(f"t={t} outside [0, {trace.duration}]")
    k = int(round(t / trace.dt))
    return trace.frames[min(k, trace.frame_count - 1)]


def format_movement_trace(trace: MovementTrace) -> str:
    buf = io.StringIO()
    buf.write(
        f"# geometry={trace.geometry.describe()},dt={trace.dt!r},n={trace.node_count}\n"
    )
    buf.write(MOVEMENT_HEADER + "\n")
    for k, t in enumerate(trace.times()):
        ts = repr(float(t))
        for i, (x, y) in enumerate(trace.frames[k].tolist()):
            buf.write(f"{ts},{i},{x!r},{y!r}\n")
    return buf.getvalue()


def save_movement_trace(trace: MovementTrace, path) -> None:
    Path(path).write_text(format_movement_trace(trace))


def _parse_preamble(line: str) -> dict[str, list[str]]:
    body = line.lstrip("#").strip()
    out: dict[str, list[str]] = {}
    key = None
    for tok in body.split(","):
        tok = tok.strip()
        if "=" in tok:
            key, val = tok.split("=", 1)
            out[key] = [val]
        elif key is not None:
            out[key].append(tok)
        else:
            raise TraceParseError(f"bad preamble token {tok!r}", line=1)
    return out


def parse_movement_trace(text: str) -> MovementTrace:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise TraceParseError("missing '# geometry=...' preamble", line=1)
    meta = _parse_preamble(lines[0])
    try:
        geo = meta["geometry"]
        if geo[0] == "torus":
            geometry = Geometry.torus(float(geo[1]), float(geo[2]))
        else:
            geometry = Geometry(geo[0])
        dt = float(meta["dt"][0])
        n = int(meta["n"][0])
    except (KeyError, IndexError, ValueError) as exc:
        raise TraceParseError(f"incomplete preamble: {exc}", line=1) from None
    if len(lines) < 2 or lines[1].strip() != MOVEMENT_HEADER:
        raise TraceParseError(f"expected header {MOVEMENT_HEADER!r}", line=2)

    rows = []
    for lineno, raw in enumerate(lines[2:], start=3):
        if not raw.strip():
            continue
        parts = raw.split(",")
        if len(parts) != 4:
            raise TraceParseError(f"expected 4 fields, got {len(parts)}", line=lineno)
        try:
            rows.append((float(parts[0]), int(parts[1]), float(parts[2]), float(parts[3])))
        except ValueError as exc:
            raise TraceParseError(str(exc), line=lineno) from None
    if len(rows) % n:
        raise TraceValidationError(f"{len(rows)} rows is not a multiple of n={n}")
    arr = np.array(rows, dtype=float).reshape(-1, n, 4) if rows else np.empty((0, n, 4))
    expected_ids = np.arange(n)
    for k, block in enumerate(arr):
        if not np.array_equal(block[:, 1], expected_ids):
            raise TraceValidationError(f"frame {k}: rows must list node ids 0..{n - 1} in order")
        if not np.all(block[:, 0] == block[0, 0]):
            raise TraceValidationError(f"frame {k}: mixed timestamps")
    return MovementTrace(arr[:, :, 2:4], dt, geometry)


def load_movement_trace(path) -> MovementTrace:
    return parse_movement_trace(Path(path).read_text())
