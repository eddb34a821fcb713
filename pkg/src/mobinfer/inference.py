"""Mobility inference by online force-directed layout of the contact graph.

Every node is a unit-mass particle. Current contacts pull on each other with
a spring, every pair closer than ``d_max`` repels, drag damps velocities, and
pairs that will meet soon already feel a spring whose strength grows
exponentially as the contact approaches. Positions are integrated with
semi-implicit Euler, and the velocity is clamped to ``v_max`` so the output
never exceeds the speed limit.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from mobinfer.errors import (
    ConfigError,
    DomainError,
    SimulationError,
    TraceParseError,
    TraceValidationError,
)
from mobinfer.mobility import Geometry, MovementTrace, frame_time
from mobinfer.trace import ContactSchedule, ContactTrace, contacts_at, next_contact_start


def balance_repulsion(K: float, l0: float, eps0: float, alpha: float, d_eq: float) -> float:
    """Repulsion intensity G for which spring and repulsion cancel at ``d_eq``."""
    return K * (d_eq - l0) * (d_eq + eps0) ** alpha


@dataclass(frozen=True)
class InferenceParams:
    """Force and integration constants.

    ``l0``, ``G`` and ``d_max`` default to r/2, the value balancing spring and
    repulsion at 3r/4, and 3r. ``D``, ``mass``, ``dt`` and the integrator are
    not fixed by the method itself; the defaults here are our own choices.
    ``record_interval`` sets the output frame spacing (defaults to ``dt``).
    """

    r: float = 100.0
    v_max: float = 10.0
    K: float = 30.0
    l0: float | None = None
    G: float | None = None
    eps0: float = 1.0
    alpha: float = 1.5
    d_max: float | None = None
    D: float = 2.0
    tau: float = 5.0
    mass: float = 1.0
    dt: float = 0.1
    clamp_speed: bool = True
    anticipation_cutoff: float = 5.0
    seed: int = 0
    record_interval: float | None = None
    geometry: str = "plane"

    def __post_init__(self):
        object.__setattr__(self, "_space", self._parse_geometry())
        if self.l0 is None:
            object.__setattr__(self, "l0", self.r / 2)
        if self.d_max is None:
            object.__setattr__(self, "d_max", 3 * self.r)
        if self.G is None:
            g = balance_repulsion(self.K, self.l0, self.eps0, self.alpha, 0.75 * self.r)
            object.__setattr__(self, "G", g)
        if self.record_interval is None:
            object.__setattr__(self, "record_interval", self.dt)
        positive = ("r", "v_max", "K", "l0", "G", "eps0", "alpha", "d_max", "D", "tau",
                    "mass", "dt", "anticipation_cutoff", "record_interval")
        for name in positive:
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be positive and finite, got {v}")
        if not self.l0 < self.r:
            raise ConfigError(f"need l0 < r, got l0={self.l0}, r={self.r}")
        if not self.d_max > self.r:
            raise ConfigError(f"need d_max > r, got d_max={self.d_max}, r={self.r}")
        m = self.record_interval / self.dt
        if abs(m - round(m)) > 1e-9 * max(1.0, m) or round(m) < 1:
            raise ConfigError("record_interval must be a positive multiple of dt")

    @property
    def space(self) -> Geometry:
        """Geometry the layout lives in: ``plane`` or ``torus,<width>,<height>``."""
        return self._space

    def _parse_geometry(self) -> Geometry:
        parts = [p.strip() for p in self.geometry.split(",")]
        try:
            if parts[0] == "torus" and len(parts) == 3:
                return Geometry.torus(float(parts[1]), float(parts[2]))
            if parts == ["plane"]:
                return Geometry()
        except (ValueError, TraceValidationError):
            pass
        raise ConfigError(f"bad geometry {self.geometry!r}; use plane or torus,<w>,<h>")

    @property
    def record_stride(self) -> int:
        return int(round(self.record_interval / self.dt))


@dataclass(frozen=True)
class NodeConstraint:
    kind: str = "free"
    x: float | None = None
    y: float | None = None
    role: str | None = None

    def __post_init__(self):
        if self.kind == "free":
            return
        if self.kind == "anchor":
            if self.x is None or self.y is None or not (math.isfinite(self.x) and math.isfinite(self.y)):
                raise ConfigError("anchor needs finite x and y")
        elif self.kind == "axis":
            if self.y is None or not math.isfinite(self.y):
                raise ConfigError("axis constraint needs a finite y")
            if self.role not in ("head", "tail"):
                raise ConfigError(f"axis role must be head or tail, got {self.role!r}")
        else:
            raise ConfigError(f"unknown constraint kind {self.kind!r}")

    @classmethod
    def anchor(cls, x: float, y: float) -> NodeConstraint:
        return cls("anchor", float(x), float(y))

    @classmethod
    def axis(cls, y: float, role: str) -> NodeConstraint:
        return cls("axis", None, float(y), role)


@dataclass(frozen=True)
class NodeState:
    position: np.ndarray
    velocity: np.ndarray = dataclasses.field(default_factory=lambda: np.zeros(2))
    node_id: int = 0


# -- pair directions -------------------------------------------------------

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def pair_direction(i: int, j: int, seed: int = 0) -> np.ndarray:
    """Deterministic unit vector from ``i`` towards ``j`` for coincident nodes.

    Antisymmetric: ``pair_direction(j, i) == -pair_direction(i, j)``.
    """
    lo, hi = (i, j) if i < j else (j, i)
    h = _splitmix64(_splitmix64(_splitmix64(seed & _MASK64) ^ lo) ^ hi)
    angle = (h >> 11) * (2.0 * math.pi / (1 << 53))
    u = np.array([math.cos(angle), math.sin(angle)])
    return u if i < j else -u


def pair_directions(n: int, seed: int = 0) -> np.ndarray:
    """(N, N, 2) table of ``pair_direction(i, j, seed)``; zero on the diagonal."""
    out = np.zeros((n, n, 2))
    for i in range(n):
        for j in range(i + 1, n):
            u = pair_direction(i, j, seed)
            out[i, j] = u
            out[j, i] = -u
    return out


def _unit(i_state: NodeState, k_state: NodeState, params: InferenceParams) -> tuple[float, np.ndarray]:
    diff = params.space.displacement(i_state.position, k_state.position)
    d = math.hypot(diff[0], diff[1])
    if d > 0:
        return d, diff / d
    return 0.0, pair_direction(i_state.node_id, k_state.node_id, params.seed)


# -- single-pair forces ----------------------------------------------------

def attraction_force(i_state: NodeState, k_state: NodeState, params: InferenceParams) -> np.ndarray:
    """Spring pull of contact ``k`` on ``i``: K (d - l0) along the unit vector i->k."""
    d, u = _unit(i_state, k_state, params)
    return params.K * (d - params.l0) * u


def repulsion_force(i_state: NodeState, j_state: NodeState, params: InferenceParams) -> np.ndarray:
    d, u = _unit(i_state, j_state, params)
    if d >= params.d_max:
        return np.zeros(2)
    return -params.G / (d + params.eps0) ** params.alpha * u


def drag_force(i_state: NodeState, params: InferenceParams) -> np.ndarray:
    return -params.D * np.asarray(i_state.velocity, float)


def anticipation_factor(time_to_contact, tau: float):
    """exp(-(t_ik - t)/tau): 1 at contact onset, decaying into the past."""
    return np.exp(-np.asarray(time_to_contact) / tau)


def anticipation_force(
    i_state: NodeState, k_state: NodeState, t: float, t_ik: float, params: InferenceParams
) -> np.ndarray:
    """Spring pull towards a future contact ``k`` that starts at ``t_ik``."""
    if t >= t_ik:
        raise DomainError(f"anticipation needs t < t_ik, got t={t}, t_ik={t_ik}")
    lead = t_ik - t
    if lead > params.anticipation_cutoff * params.tau:
        return np.zeros(2)
    return attraction_force(i_state, k_state, params) * float(anticipation_factor(lead, params.tau))


# -- vectorized kernel -----------------------------------------------------

def net_forces(
    pos: np.ndarray,
    vel: np.ndarray,
    in_contact: np.ndarray,
    next_start: np.ndarray,
    t: float,
    params: InferenceParams,
    directions: np.ndarray,
) -> np.ndarray:
    """Total force on every node.

    ``in_contact`` is a symmetric (N, N) bool matrix; ``next_start`` holds the
    next contact start for pairs not in contact (inf when there is none).
    """
    n = len(pos)
    diff = pos[None, :, :] - pos[:, None, :]
    space = params.space
    if space.is_torus:
        box = np.array([space.width, space.height])
        diff -= box * np.round(diff / box)
    d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    with np.errstate(invalid="ignore", divide="ignore"):
        u = diff / d[:, :, None]
    coincident = d == 0
    u[coincident] = directions[coincident]

    spring = params.K * (d - params.l0)
    mag = np.where(in_contact, spring, 0.0)

    lead = next_start - t
    ahead = ~in_contact & (lead <= params.anticipation_cutoff * params.tau)
    if ahead.any():
        mag = mag + np.where(ahead, spring * anticipation_factor(np.where(ahead, lead, 0.0), params.tau), 0.0)

    rep = params.G / (d + params.eps0) ** params.alpha
    rep[d >= params.d_max] = 0.0
    rep[np.arange(n), np.arange(n)] = 0.0
    mag = mag - rep

    force = np.einsum("ij,ijk->ik", mag, u) - params.D * vel
    return force


# -- constraints -----------------------------------------------------------

@dataclass(frozen=True)
class _Layout:
    anchored: np.ndarray
    axis: np.ndarray
    free: np.ndarray
    anchor_xy: np.ndarray
    axis_y: np.ndarray
    head: int | None
    tail: int | None


def _layout(constraints: dict[int, NodeConstraint] | None, n: int) -> _Layout:
    constraints = constraints or {}
    anchored = np.zeros(n, bool)
    axis = np.zeros(n, bool)
    anchor_xy = np.zeros((n, 2))
    axis_y = np.zeros(n)
    head = tail = None
    for node, c in constraints.items():
        if not 0 <= node < n:
            raise ConfigError(f"constraint for node {node} outside 0..{n - 1}")
        if c.kind == "anchor":
            anchored[node] = True
            anchor_xy[node] = (c.x, c.y)
        elif c.kind == "axis":
            axis[node] = True
            axis_y[node] = c.y
            if c.role == "head":
                if head is not None:
                    raise ConfigError("more than one head node")
                head = node
            else:
                if tail is not None:
                    raise ConfigError("more than one tail node")
                tail = node
    return _Layout(anchored, axis, ~(anchored | axis), anchor_xy, axis_y, head, tail)


def _keep_axis_order(pos: np.ndarray, layout: _Layout, l0: float) -> None:
    if not layout.free.any():
        return
    xs = pos[layout.free, 0]
    if layout.head is not None:
        front = xs.max()
        if front > pos[layout.head, 0]:
            pos[layout.head, 0] = front + l0
    if layout.tail is not None:
        back = xs.min()
        if back < pos[layout.tail, 0]:
            pos[layout.tail, 0] = back - l0


def _advance(pos, vel, force, layout: _Layout, params: InferenceParams):
    if not np.all(np.isfinite(force)):
        bad = np.nonzero(~np.all(np.isfinite(force), axis=1))[0].tolist()
        raise SimulationError(
            f"non-finite force on nodes {bad}: positions {pos[bad].tolist()}, "
            f"velocities {vel[bad].tolist()}"
        )
    vel = vel + force * (params.dt / params.mass)
    vel[layout.axis, 1] = 0.0
    vel[layout.anchored] = 0.0
    if params.clamp_speed:
        speed = np.sqrt(np.einsum("ij,ij->i", vel, vel))
        over = speed > params.v_max
        vel[over] *= (params.v_max / speed[over])[:, None]
    pos = pos + vel * params.dt
    pos[layout.anchored] = layout.anchor_xy[layout.anchored]
    pos[layout.axis, 1] = layout.axis_y[layout.axis]
    _keep_axis_order(pos, layout, params.l0)
    pos = params.space.wrap(pos)
    return pos, vel


def _contact_matrices(trace: ContactTrace, t: float):
    n = trace.node_count
    in_contact = np.zeros((n, n), bool)
    next_start = np.full((n, n), np.inf)
    for a, b in contacts_at(trace, t):
        in_contact[a, b] = in_contact[b, a] = True
    for a, b in trace.pairs():
        s = next_contact_start(trace, a, b, t)
        if s is not None:
            next_start[a, b] = next_start[b, a] = s
    return in_contact, next_start


def step(
    positions: np.ndarray,
    velocities: np.ndarray,
    trace: ContactTrace,
    constraints: dict[int, NodeConstraint] | None,
    t: float,
    params: InferenceParams,
) -> tuple[np.ndarray, np.ndarray]:
    """Advance all nodes from ``t`` to ``t + dt``; returns new (positions, velocities)."""
    if t + params.dt > trace.duration + 1e-9:
        raise DomainError(f"step from t={t} runs past the trace end {trace.duration}")
    pos = np.asarray(positions, float)
    vel = np.asarray(velocities, float)
    n = trace.node_count
    layout = _layout(constraints, n)
    in_contact, next_start = _contact_matrices(trace, t)
    force = net_forces(pos, vel, in_contact, next_start, t, params, pair_directions(n, params.seed))
    return _advance(pos, vel, force, layout, params)


def initial_layout(
    n: int,
    params: InferenceParams,
    constraints: dict[int, NodeConstraint] | None = None,
    initial_positions=None,
) -> np.ndarray:
    """Starting positions: given ones verbatim, else uniform in a sqrt(N)*r square at the origin."""
    layout = _layout(constraints, n)
    if initial_positions is not None:
        pos = np.array(initial_positions, dtype=float)
        if pos.shape != (n, 2):
            raise ConfigError(f"initial positions must have shape ({n}, 2), got {pos.shape}")
    else:
        side = math.sqrt(n) * params.r
        rng = np.random.default_rng(params.seed)
        pos = rng.uniform(-side / 2, side / 2, size=(n, 2))
    pos[layout.anchored] = layout.anchor_xy[layout.anchored]
    pos[layout.axis, 1] = layout.axis_y[layout.axis]
    _keep_axis_order(pos, layout, params.l0)
    return params.space.wrap(pos)


def infer(
    trace: ContactTrace,
    constraints: dict[int, NodeConstraint] | None = None,
    initial_positions=None,
    params: InferenceParams | None = None,
) -> MovementTrace:
    """Infer a movement trace covering [0, trace.duration] in ``params.space``.

    Frames are written every ``params.record_interval`` seconds.
    """
    params = params or InferenceParams()
    n = trace.node_count
    layout = _layout(constraints, n)
    pos = initial_layout(n, params, constraints, initial_positions)
    vel = np.zeros((n, 2))
    directions = pair_directions(n, params.seed)
    schedule = ContactSchedule(trace)

    n_steps = int(math.floor(trace.duration / params.dt + 1e-9))
    stride = params.record_stride
    frames = [pos.copy()]
    for k in range(n_steps):
        t = frame_time(k, params.dt)
        in_contact, next_start = schedule.at(t)
        force = net_forces(pos, vel, in_contact, next_start, t, params, directions)
        pos, vel = _advance(pos, vel, force, layout, params)
        if (k + 1) % stride == 0:
            frames.append(pos.copy())
    return MovementTrace(np.array(frames), params.record_interval, params.space)


# -- constraint files ------------------------------------------------------

CONSTRAINT_HEADER = "node_id,kind,x,y,role"


def _opt_float(s: str) -> float | None:
    s = s.strip()
    return None if s in ("", "-") else float(s)


def parse_constraints(text: str) -> dict[int, NodeConstraint]:
    """Parse the ``node_id,kind,x,y,role`` CSV. Unlisted nodes are free."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or ",".join(c.strip() for c in rows[0]) != CONSTRAINT_HEADER:
        raise TraceParseError(f"expected header {CONSTRAINT_HEADER!r}", line=1)
    out: dict[int, NodeConstraint] = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or not "".join(row).strip():
            continue
        if len(row) != 5:
            raise TraceParseError(f"expected 5 fields, got {len(row)}", line=lineno)
        try:
            node = int(row[0])
            kind = row[1].strip()
            x, y = _opt_float(row[2]), _opt_float(row[3])
        except ValueError as exc:
            raise TraceParseError(str(exc), line=lineno) from None
        role = row[4].strip()
        role = None if role in ("", "-") else role
        if node in out:
            raise ConfigError(f"line {lineno}: node {node} constrained twice")
        if kind == "anchor":
            out[node] = NodeConstraint("anchor", x, y, None)
        elif kind == "axis":
            out[node] = NodeConstraint("axis", None, y, role)
        else:
            raise ConfigError(f"line {lineno}: unknown constraint kind {kind!r}")
    _layout(out, max(out, default=-1) + 1)
    return out


def load_constraints(path) -> dict[int, NodeConstraint]:
    return parse_constraints(Path(path).read_text())


def format_constraints(constraints: dict[int, NodeConstraint]) -> str:
    lines = [CONSTRAINT_HEADER]
    for node in sorted(constraints):
        c = constraints[node]
        x = "-" if c.x is None else repr(c.x)
        y = "-" if c.y is None else repr(c.y)
        lines.append(f"{node},{c.kind},{x},{y},{c.role or '-'}")
    return "\n".join(lines) + "\n"
