"""Residual monitors: central observer, onboard local observers, thresholds, structural checks."""

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from . import numerics
from .errors import DetectabilityError, DimensionError, DomainError, PreconditionError
from .plant import assemble_measurement, measurement_labels
from .topology import neighbors

CENTRAL_ID = 0
DEFAULT_ENVELOPE_HORIZON = 15.0
DEFAULT_DECAY_MARGIN = 0.25
OMEGA_SAFETY = 1.2
MIN_EPSILON_FLOOR = 1e-6


@dataclass(frozen=True)
class MonitorConfig:
    """Observer gain plus threshold constants for one monitor.

    `modes` lists the plant modes the observer may be driven with; the
    central monitor only ever uses mode 1.
    """

    monitor_id: int
    H: np.ndarray
    C: np.ndarray
    labels: tuple
    k_bar: np.ndarray
    lambda_bar: np.ndarray
    omega_bar: float
    epsilon_floor: float
    modes: tuple = (1,)

    def __post_init__(self):
        if not self.epsilon_floor > 0:
            raise DomainError("epsilon_floor must be positive")
        if not self.omega_bar >= 0:
            raise DomainError("omega_bar must be non-negative")
        if self.H.shape != (self.C.shape[1], self.C.shape[0]):
            raise DimensionError(f"gain shape {self.H.shape} does not match C {self.C.shape}")

    @property
    def is_central(self):
        return self.monitor_id == CENTRAL_ID

    def thresholds(self, t):
        return threshold_value(self, slice(None), t)


@dataclass(frozen=True)
class MonitorState:
    x_hat: np.ndarray
    residual: np.ndarray
    alarmed: frozenset = frozenset()
    alarm_time: float = None

    @property
    def alarm(self):
        return self.alarm_time is not None


class DetectionEvent(NamedTuple):
    monitor_id: int
    time: float
    axis: str
    component: str
    residual: float
    threshold: float

    def as_record(self):
        return {
            "time": self.time,
            "monitor_id": self.monitor_id,
            "axis": self.axis,
            "component": self.component,
            "residual": self.residual,
            "threshold": self.threshold,
        }


def initial_monitor_state(cfg):
    n2 = cfg.C.shape[1]
    return MonitorState(np.zeros((2, n2)), np.zeros((2, cfg.C.shape[0])))


def local_measurement_matrix(topo, i):
    """Positions of agent i and its neighbors, then agent i's velocity."""
    Mp = sorted(neighbors(topo, i) | {i})
    C = assemble_measurement(Mp, [i], topo.n_agents)
    return C, tuple(measurement_labels(Mp, [i]))


def threshold_constants(F, C_row, horizon, Ts=1.0, margin=DEFAULT_DECAY_MARGIN, rho=None):
    """Fit k_bar e^{-lambda_bar k Ts} >= ||C_j F^k|| for k = 0..horizon.

    lambda_bar comes from the spectral radius inflated by `margin` times its
    distance to 1, so the envelope decays a little slower than the error does.
    Passing `rho` overrides the spectral radius (used to share one rate
    across several modes).
    """
    F = numerics.as_matrix(F, "F")
    row = np.atleast_2d(np.asarray(C_row, dtype=float))
    own = numerics.spectral_radius(F)
    if not own < 1.0:
        raise PreconditionError(f"error dynamics not stable (spectral radius {own:.6g})")
    rho = own if rho is None else max(rho, own)
    rho_bar = rho + margin * (1.0 - rho)
    k_bar = 0.0
    M = row
    for k in range(int(horizon) + 1):
        val = float(np.linalg.norm(M))
        if val == 0.0:
            break
        k_bar = max(k_bar, val / rho_bar**k)
        M = M @ F
    return k_bar, -math.log(rho_bar) / Ts


def threshold_value(cfg, j, t):
    if t < 0:
        raise DomainError("threshold time must be non-negative")
    return cfg.k_bar[j] * np.exp(-cfg.lambda_bar[j] * t) * cfg.omega_bar + cfg.epsilon_floor


def hypothesis_test(residuals, thresholds):
    """('H1', violating indices) when any |r_j| > eps_j, else ('H0', empty)."""
    r = np.asarray(residuals, dtype=float)
    eps = np.asarray(thresholds, dtype=float)
    if r.shape != eps.shape:
        raise DimensionError(f"{r.shape[0] if r.ndim else 1} residuals vs {eps.shape} thresholds")
    bad = frozenset(int(j) for j in np.nonzero(np.abs(r) > eps)[0])
    return ("H1", bad) if bad else ("H0", bad)


def default_omega_bar(x0):
    """Safety-inflated bound on the initial estimation error (x_hat(0) = 0)."""
    x0 = np.asarray(x0, dtype=float)
    return OMEGA_SAFETY * float(max(np.linalg.norm(row) for row in x0))


def default_epsilon_floor(noise_amplitude, H):
    return max(3.0 * noise_amplitude * (1.0 + np.linalg.norm(H, np.inf)), MIN_EPSILON_FLOOR)


def _design(monitor_id, model, C, labels, design_modes, check_modes, omega_bar, epsilon_floor, noise_amplitude, horizon):
    H = numerics.stabilizing_gain(model.discrete(design_modes[0]).Ad, C, mode=design_modes[0])
    Fs = []
    for m in check_modes:
        F = model.discrete(m).Ad - H @ C
        rho = numerics.spectral_radius(F)
        if not rho < 1.0:
            who = "central monitor" if monitor_id == CENTRAL_ID else f"local monitor {monitor_id}"
            raise DetectabilityError(f"{who} gain is not stable in mode {m} (spectral radius {rho:.6g})", m)
        Fs.append(F)
    steps = int(round(horizon / model.Ts))
    rho_max = max(numerics.spectral_radius(F) for F in Fs)
    k_bar = np.zeros(C.shape[0])
    lam_bar = np.zeros(C.shape[0])
    for j in range(C.shape[0]):
        for F in Fs:
            kb, lam_bar[j] = threshold_constants(F, C[j], steps, model.Ts, rho=rho_max)
            k_bar[j] = max(k_bar[j], kb)
    if epsilon_floor is None:
        epsilon_floor = default_epsilon_floor(noise_amplitude, H)
    return MonitorConfig(monitor_id, H, C, tuple(labels), k_bar, lam_bar, float(omega_bar), float(epsilon_floor), tuple(check_modes))


def design_central(model, omega_bar, epsilon_floor=None, noise_amplitude=0.0, horizon=DEFAULT_ENVELOPE_HORIZON):
    labels = measurement_labels(model.Mp, model.Mv)
    return _design(CENTRAL_ID, model, model.C, labels, (1,), (1,), omega_bar, epsilon_floor, noise_amplitude, horizon)


def design_local(model, i, omega_bar, epsilon_floor=None, noise_amplitude=0.0, horizon=DEFAULT_ENVELOPE_HORIZON):
    """Local observer for host i: designed on mode 1, checked on every mode."""
    C, labels = local_measurement_matrix(model.modes[1], i)
    modes = tuple(sorted(model.modes))
    return _design(i, model, C, labels, (1,), modes, omega_bar, epsilon_floor, noise_amplitude, horizon)


def _observer_step(cfg, st, y, x_star, disc):
    y = np.asarray(y, dtype=float)
    if y.shape != (2, cfg.C.shape[0]):
        raise DimensionError(f"monitor {cfg.monitor_id} expects y of shape {(2, cfg.C.shape[0])}, got {y.shape}")
    r = y - st.x_hat @ cfg.C.T
    x_next = st.x_hat @ disc.Ad.T + x_star @ disc.Bd_formation.T + r @ cfg.H.T
    return replace(st, x_hat=x_next, residual=r), r


def central_step(cfg, st, y, x_star, model):
    """Predictor update on the fixed mode-1 model; r is taken before the update."""
    return _observer_step(cfg, st, y, x_star, model.discrete(1))


def local_step(cfg, st, y_i, x_star, mode, model):
    if mode not in cfg.modes:
        raise DomainError(f"local monitor {cfg.monitor_id} has no model for mode {mode}")
    return _observer_step(cfg, st, y_i, x_star, model.discrete(mode))


def evaluate(cfg, st, t):
    """Test both axes at time t; returns (new state, list of first-time events)."""
    t = float(t)
    eps = cfg.thresholds(t)
    events = []
    flagged = set(st.alarmed)
    for ax, axis in enumerate(("x", "y")):
        verdict, bad = hypothesis_test(st.residual[ax], eps)
        if verdict == "H0":
            continue
        for j in sorted(bad):
            if (ax, j) in flagged:
                continue
            flagged.add((ax, j))
            events.append(DetectionEvent(cfg.monitor_id, t, axis, cfg.labels[j], float(st.residual[ax, j]), float(eps[j])))
    if not events:
        return st, events
    alarm_time = st.alarm_time if st.alarm_time is not None else t
    return replace(st, alarmed=frozenset(flagged), alarm_time=alarm_time), events


def coverage_check(D, topo):
    covered = set()
    for i in D:
        covered |= neighbors(topo, i)
    return covered == set(range(1, topo.n_agents + 1))


def zda_local_detectability(A, i, topo, augmented=False):
    """A within N^i of the mode-1 graph (or N^i plus the host itself when `augmented`)."""
    hood = neighbors(topo, i)
    if augmented:
        hood = hood | {i}
    return set(A) <= hood
