"""Network-level planar model of the formation and its discrete-time stepping.

The two planar axes are decoupled and share every system matrix, so state
arrays are stored as ``(2, 2N)``: row 0 is the x axis, row 1 the y axis, and
each row is ``col(p_1..p_N, v_1..v_N)``.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import numerics
from .errors import DimensionError, DomainError
from .topology import Topology, laplacian

GRAVITY = 9.81
AXES = ("x", "y")


@dataclass(frozen=True)
class ControlGains:
    alpha: float = 1.0
    gamma: float = 2.0

    def __post_init__(self):
        if not self.alpha > 0 or not self.gamma > 0:
            raise DomainError(f"gains must be positive, got alpha={self.alpha}, gamma={self.gamma}")


@dataclass(frozen=True)
class FormationSpec:
    """Desired planar setpoints, one (x, y) row per agent."""

    setpoints: np.ndarray

    def __post_init__(self):
        p = np.array(self.setpoints, dtype=float)
        if p.ndim != 2 or p.shape[1] != 2:
            raise DimensionError(f"setpoints must be N x 2, got {p.shape}")
        if not np.all(np.isfinite(p)):
            raise DomainError("setpoints must be finite")
        p.setflags(write=False)
        object.__setattr__(self, "setpoints", p)

    @property
    def n_agents(self):
        return self.setpoints.shape[0]

    def relative(self, i, j):
        """p*_ij = p*_i - p*_j for 1-based agents."""
        return self.setpoints[i - 1] - self.setpoints[j - 1]

    def reference(self):
        """Per-axis stacked reference x* = col(p*, 0), shape (2, 2N)."""
        n = self.n_agents
        xs = np.zeros((2, 2 * n))
        xs[:, :n] = self.setpoints.T
        return xs


def assemble_dynamics(gains, topo):
    """Closed-loop matrix [[0, I], [-alpha L, -gamma I]] for one axis."""
    n = topo.n_agents
    L = laplacian(topo)
    A = np.zeros((2 * n, 2 * n))
    A[:n, n:] = np.eye(n)
    A[n:, :n] = -gains.alpha * L
    A[n:, n:] = -gains.gamma * np.eye(n)
    return A


def assemble_attack_input(compromised, n_agents):
    agents = list(compromised)
    if not agents:
        raise DomainError("compromised set must be nonempty")
    B = np.zeros((2 * n_agents, len(agents)))
    for k, i in enumerate(agents):
        if not 1 <= i <= n_agents:
            raise DomainError(f"compromised agent {i} out of range 1..{n_agents}")
        B[n_agents + i - 1, k] = 1.0
    return B


def assemble_measurement(Mp, Mv, n_agents):
    """Selection rows: positions of Mp, then velocities of Mv (ascending)."""
    rows = []
    for i in sorted(Mp):
        if not 1 <= i <= n_agents:
            raise DomainError(f"measured position index {i} out of range 1..{n_agents}")
        r = np.zeros(2 * n_agents)
        r[i - 1] = 1.0
        rows.append(r)
    for i in sorted(Mv):
        if not 1 <= i <= n_agents:
            raise DomainError(f"measured velocity index {i} out of range 1..{n_agents}")
        r = np.zeros(2 * n_agents)
        r[n_agents + i - 1] = 1.0
        rows.append(r)
    return np.array(rows).reshape(len(rows), 2 * n_agents)


def measurement_labels(Mp, Mv):
    return [f"p{i}" for i in sorted(Mp)] + [f"v{i}" for i in sorted(Mv)]


class Discretization(NamedTuple):
    Ad: np.ndarray
    Bd_formation: np.ndarray
    Bd_attack: np.ndarray


@dataclass(frozen=True)
class NetworkModel:
    gains: ControlGains
    modes: dict
    compromised: tuple
    Mp: tuple
    Mv: tuple
    Ts: float
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if 1 not in self.modes:
            raise DomainError("mode table must define mode 1")
        sizes = {t.n_agents for t in self.modes.values()}
        if len(sizes) != 1:
            raise DimensionError("all modes must have the same agent count")
        if not self.Ts > 0:
            raise DomainError("Ts must be positive")
        object.__setattr__(self, "compromised", tuple(self.compromised))
        object.__setattr__(self, "Mp", tuple(sorted(self.Mp)))
        object.__setattr__(self, "Mv", tuple(sorted(self.Mv)))
        n = self.n_agents
        if self.compromised:
            B = assemble_attack_input(self.compromised, n)
        else:
            B = np.zeros((2 * n, 0))
        object.__setattr__(self, "B_attack", B)
        object.__setattr__(self, "C", assemble_measurement(self.Mp, self.Mv, n))

    @property
    def n_agents(self):
        return next(iter(self.modes.values())).n_agents

    def A(self, mode=1):
        return assemble_dynamics(self.gains, self.modes[mode])

    def B_formation(self, mode=1):
        return -self.A(mode)

    def discrete(self, mode=1, dos=frozenset()):
        """ZOH matrices for `mode`, optionally with DoS targets cut off."""
        key = (mode, frozenset(dos))
        if key not in self._cache:
            topo = self.modes[mode]
            if dos:
                from .attacks import apply_dos

                topo = apply_dos(topo, dos)
            self._cache[key] = discretize_topology(self.gains, topo, self.B_attack, self.Ts)
        return self._cache[key]


def discretize_topology(gains, topo, B_attack, Ts):
    A = assemble_dynamics(gains, topo)
    n2 = A.shape[0]
    inputs = np.hstack([-A, B_attack])
    Ad, Bd = numerics.zoh_discretize(A, inputs, Ts)
    return Discretization(Ad, Bd[:, :n2], Bd[:, n2:])


@dataclass(frozen=True)
class PlantState:
    x: np.ndarray
    k: int = 0
    time: float = 0.0
    mode: int = 1

    def positions(self):
        n = self.x.shape[1] // 2
        return self.x[:, :n].T

    def velocities(self):
        n = self.x.shape[1] // 2
        return self.x[:, n:].T


def initial_state(positions, velocities=None):
    p = np.asarray(positions, dtype=float)
    v = np.zeros_like(p) if velocities is None else np.asarray(velocities, dtype=float)
    if p.shape != v.shape or p.ndim != 2 or p.shape[1] != 2:
        raise DimensionError("positions and velocities must both be N x 2")
    return PlantState(np.hstack([p.T, v.T]))


@dataclass(frozen=True)
class NoiseSpec:
    """Uniform measurement noise on [-amplitude, amplitude], seeded."""

    amplitude: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.amplitude >= 0:
            raise DomainError("noise amplitude must be >= 0")

    def generator(self):
        return np.random.default_rng(self.seed)

    def sample(self, rng, shape):
        if self.amplitude == 0.0:
            return np.zeros(shape)
        return rng.uniform(-self.amplitude, self.amplitude, size=shape)


def control_input(state, topo, spec, gains):
    """Nominal consensus input u_n for each agent, shape (N, 2)."""
    n = topo.n_agents
    L = laplacian(topo)
    p = state.x[:, :n]
    v = state.x[:, n:]
    pstar = spec.setpoints.T
    u = -gains.alpha * (p - pstar) @ L.T - gains.gamma * v
    return u.T


def attitude_setpoints(u, g=GRAVITY):
    """Pitch/roll commands (rad) realizing planar accelerations u = (u_x, u_y)."""
    if not g > 0:
        raise DomainError("gravitational acceleration must be positive")
    u = np.asarray(u, dtype=float)
    return u[..., 0] / g, -u[..., 1] / g


def step(state, model, x_star, u_attack=None, u_sensor=None, noise=None, dos=frozenset()):
    """Advance one sample; returns (next_state, transmitted measurement y).

    y is taken from the current state: y = C x - u_sensor + noise.
    """
    disc = model.discrete(state.mode, dos)
    n_att = model.B_attack.shape[1]
    x = state.x
    nxt = x @ disc.Ad.T + x_star @ disc.Bd_formation.T
    if u_attack is not None:
        ua = np.asarray(u_attack, dtype=float).reshape(2, -1)
        if ua.shape[1] != n_att:
            raise DimensionError(f"attack vector has {ua.shape[1]} channels, model has {n_att}")
        nxt = nxt + ua @ disc.Bd_attack.T
    y = x @ model.C.T
    if u_sensor is not None:
        y = y - np.asarray(u_sensor, dtype=float).reshape(y.shape)
    if noise is not None:
        y = y + noise
    new = PlantState(nxt, state.k + 1, (state.k + 1) * model.Ts, state.mode)
    return new, y


def formation_error(state, spec):
    """(max relative-position error, max speed), axes combined by Euclidean norm."""
    p = state.positions() - spec.setpoints
    diff = p[:, None, :] - p[None, :, :]
    pos_err = float(np.max(np.linalg.norm(diff, axis=2)))
    speed = float(np.max(np.linalg.norm(state.velocities(), axis=1)))
    return pos_err, speed
