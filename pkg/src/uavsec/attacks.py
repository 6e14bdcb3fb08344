"""Stealthy attack synthesis: zero-dynamics, covert and DoS + replay."""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize

from . import numerics
from .errors import DimensionError, DomainError, NoUnstableZeroDynamics, PreconditionError
from .topology import Topology

DEFAULT_ZDA_RATE = 0.5
DEFAULT_ZERO_SCAN = 10.0
IMAG_TOL = 1e-8
# Zeros this close to the lower scan bound are treated as lying on it (the
# consensus translation mode puts a zero at exactly lambda = 0).
_EDGE = 1e-7

# Fixed seed for the random pencil compressions; keeps zero lists reproducible.
_COMPRESSION_SEED = 20220621


def _pencil_parts(A, B, C):
    n, p, m = A.shape[0], B.shape[1], C.shape[0]
    M0 = np.zeros((n + m, n + p))
    M0[:n, :n] = -A
    M0[:n, n:] = -B
    M0[n:, :n] = C
    M1 = np.zeros_like(M0)
    M1[:n, :n] = np.eye(n)
    return M0, M1


def pencil(A, B, C, lam):
    M0, M1 = _pencil_parts(A, B, C)
    return lam * M1 + M0


def build_pencil(model, lam, mode=1):
    """[[lam I - A, -B_attack], [C, 0]] for the given mode (mode 1 by default)."""
    return pencil(model.A(mode), model.B_attack, model.C, lam)


def normal_rank(A, B, C):
    M0, M1 = _pencil_parts(A, B, C)
    rng = np.random.default_rng(_COMPRESSION_SEED)
    return max(np.linalg.matrix_rank(lam * M1 + M0) for lam in rng.uniform(0.3, 3.0, size=3))


def null_everywhere(A, B, C):
    """True when the pencil has a right null vector for every lambda."""
    return normal_rank(A, B, C) < B.shape[1] + A.shape[0]


def _rank_gap(M0, M1, lam, r):
    s = np.linalg.svd(lam * M1 + M0, compute_uv=False)
    return s[r - 1] / s[0]


def invariant_zeros(A, B, C, lo=0.0, hi=DEFAULT_ZERO_SCAN, rank_tol=numerics.DEFAULT_RANK_TOL):
    """Real lambda in (lo, hi] where the pencil drops below its normal rank.

    Candidates come from generalized eigenvalues of randomly compressed square
    pencils; each candidate is polished on sigma_r and kept only if it passes
    the rank test sigma_r(P) < rank_tol * sigma_max(P). Returns ascending
    (lambda, unit null vector) pairs.
    """
    A = numerics.as_matrix(A, "A")
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    C = np.asarray(C, dtype=float).reshape(-1, A.shape[0])
    M0, M1 = _pencil_parts(A, B, C)
    r = normal_rank(A, B, C)
    rng = np.random.default_rng(_COMPRESSION_SEED)
    cands = []
    for _ in range(2):
        W = rng.standard_normal((r, M0.shape[0]))
        V = rng.standard_normal((M0.shape[1], r))
        ev = scipy.linalg.eigvals(-(W @ M0 @ V), W @ M1 @ V)
        for lam in ev:
            if not np.isfinite(lam):
                continue
            if abs(lam.imag) > IMAG_TOL * max(1.0, abs(lam.real)):
                continue
            if lo + _EDGE < lam.real <= hi:
                cands.append(float(lam.real))

    found = []
    for lam in sorted(cands):
        width = 1e-6 * max(1.0, abs(lam))
        res = scipy.optimize.minimize_scalar(
            lambda t: _rank_gap(M0, M1, t, r),
            bounds=(lam - width, lam + width),
            method="bounded",
            options={"xatol": 1e-14 * max(1.0, abs(lam))},
        )
        best = res.x if res.fun < _rank_gap(M0, M1, lam, r) else lam
        if not lo + _EDGE < best <= hi:
            continue
        if _rank_gap(M0, M1, best, r) >= rank_tol:
            continue
        if any(abs(best - f) <= 1e-6 * max(1.0, abs(best)) for f in found):
            continue
        found.append(best)

    out = []
    for lam in found:
        _, _, Vt = np.linalg.svd(lam * M1 + M0)
        out.append((lam, Vt[r - 1].copy()))
    return out


def find_invariant_zeros(model, lam_max=DEFAULT_ZERO_SCAN):
    """Positive real invariant zeros of the mode-1 attack pencil."""
    if model.B_attack.shape[1] == 0:
        raise DomainError("model has no compromised agents")
    zeros = invariant_zeros(model.A(1), model.B_attack, model.C, 0.0, lam_max)
    if not zeros:
        raise NoUnstableZeroDynamics(
            f"no unstable zero dynamics: no positive real zero in (0, {lam_max}]", scanned=(0.0, lam_max)
        )
    return zeros


@dataclass(frozen=True)
class ZdaPlan:
    """Exponential actuator attack along a sampled-data zero direction.

    Arrays are per axis: ``u0`` is (2, |A|), ``x0_attack`` is (2, 2N).
    ``lambda_x``/``lambda_y`` are the rates actually injected (u0 e^{lambda k Ts});
    ``lambda_continuous`` records the continuous-time rate they were matched to.
    """

    lambda_x: float
    lambda_y: float
    u0: np.ndarray
    x0_attack: np.ndarray
    compromised: tuple
    designated_agent: int
    Ts: float
    lambda_continuous: tuple = (None, None)
    start_time: float = 0.0

    @property
    def rates(self):
        return np.array([self.lambda_x, self.lambda_y])

    def residuals(self, model):
        """Null-vector relation residuals for both axes."""
        disc = model.discrete(1)
        A1 = model.A(1)
        out = {"sampled": 0.0, "output": 0.0, "continuous": 0.0}
        for ax, lam in enumerate(self.rates):
            x0, u0 = self.x0_attack[ax], self.u0[ax]
            z = math.exp(lam * self.Ts)
            out["sampled"] = max(out["sampled"], float(np.linalg.norm(z * x0 - disc.Ad @ x0 - disc.Bd_attack @ u0)))
            out["output"] = max(out["output"], float(np.linalg.norm(model.C @ x0)))
            lc = self.lambda_continuous[ax] if self.lambda_continuous[ax] is not None else lam
            out["continuous"] = max(out["continuous"], float(np.linalg.norm(lc * x0 - A1 @ x0 - model.B_attack @ u0)))
        return out


def _axis_pair(value, name):
    if value is None:
        return (None, None)
    if np.isscalar(value):
        return (float(value), float(value))
    vals = tuple(float(v) for v in value)
    if len(vals) != 2:
        raise DimensionError(f"{name} must be a scalar or an (x, y) pair")
    return vals


def _continuous_rate(model, requested, lam_max):
    A1, B, C = model.A(1), model.B_attack, model.C
    everywhere = null_everywhere(A1, B, C)
    zeros = [z for z, _ in invariant_zeros(A1, B, C, 0.0, lam_max)]
    if requested is not None:
        if requested <= 0:
            raise DomainError(f"attack rate must be positive, got {requested}")
        if everywhere:
            return requested
        for z in zeros:
            if abs(z - requested) <= 1e-6 * max(1.0, z):
                return z
        raise NoUnstableZeroDynamics(
            f"no unstable zero dynamics at lambda={requested}; zeros in (0, {lam_max}]: {zeros}",
            scanned=(0.0, lam_max),
        )
    if zeros:
        return zeros[0]
    if everywhere:
        return DEFAULT_ZDA_RATE
    raise NoUnstableZeroDynamics(
        f"no unstable zero dynamics: no positive real zero in (0, {lam_max}]", scanned=(0.0, lam_max)
    )


def _sampled_direction(model, lam_c, lam_max):
    """Null vector of the ZOH pencil [[zI - Ad, -Bd], [C, 0]] matched to lam_c."""
    disc = model.discrete(1)
    Ad, Bd, C = disc.Ad, disc.Bd_attack, model.C
    Ts = model.Ts
    z_target = math.exp(lam_c * Ts)
    if null_everywhere(Ad, Bd, C):
        z = z_target
    else:
        zs = [z for z, _ in invariant_zeros(Ad, Bd, C, 1.0, math.exp(lam_max * Ts) * 1.01)]
        if not zs:
            raise NoUnstableZeroDynamics("sampled model has no real zero outside the unit circle")
        z = min(zs, key=lambda v: abs(v - z_target))
    P = pencil(Ad, Bd, C, z)
    _, _, Vt = np.linalg.svd(P)
    v = Vt[-1]
    n = Ad.shape[0]
    return math.log(z) / Ts, v[:n].copy(), v[n:].copy()


def synthesize_zda(model, scale, lam=None, designated_agent=None, lam_max=DEFAULT_ZERO_SCAN):
    """Build a ZDA plan whose designated agent starts offset by `scale` (per axis).

    The rate is the smallest positive real zero of the mode-1 pencil, or `lam`
    when given. When the pencil is column-deficient for every lambda (more
    attacked channels than monitored outputs) any positive rate is admissible
    and `lam` defaults to DEFAULT_ZDA_RATE.
    """
    if model.B_attack.shape[1] == 0:
        raise DomainError("model has no compromised agents")
    scales = _axis_pair(scale, "scale")
    if any(s is None or s == 0.0 or not math.isfinite(s) for s in scales):
        raise DomainError("ZDA scale must be finite and nonzero (zero scale is the trivial attack)")
    rates = _axis_pair(lam, "lambda")
    n = model.n_agents
    comp = model.compromised

    lam_c, lam_d, x0s, u0s = [], [], [], []
    for ax in range(2):
        lc = _continuous_rate(model, rates[ax], lam_max)
        ld, x0, u0 = _sampled_direction(model, lc, lam_max)
        lam_c.append(lc)
        lam_d.append(ld)
        x0s.append(x0)
        u0s.append(u0)

    if designated_agent is None:
        mags = [abs(x0s[0][i - 1]) for i in comp]
        designated_agent = comp[int(np.argmax(mags))]
    elif designated_agent not in comp:
        raise DomainError(f"designated agent {designated_agent} is not compromised")

    X0 = np.zeros((2, 2 * n))
    U0 = np.zeros((2, len(comp)))
    for ax in range(2):
        pivot = x0s[ax][designated_agent - 1]
        if abs(pivot) < 1e-9 * max(1.0, np.max(np.abs(x0s[ax]))):
            raise DomainError(f"agent {designated_agent} does not move along the zero direction")
        factor = scales[ax] / pivot
        X0[ax] = x0s[ax] * factor
        U0[ax] = u0s[ax] * factor
    X0.setflags(write=False)
    U0.setflags(write=False)
    return ZdaPlan(
        lambda_x=lam_d[0],
        lambda_y=lam_d[1],
        u0=U0,
        x0_attack=X0,
        compromised=tuple(comp),
        designated_agent=int(designated_agent),
        Ts=model.Ts,
        lambda_continuous=(lam_c[0], lam_c[1]),
    )


def zda_signal(plan, k):
    if k < 0:
        raise DomainError("step index must be non-negative")
    growth = np.exp(plan.rates * (k * plan.Ts))
    return plan.u0 * growth[:, None]


@dataclass(frozen=True)
class Waveform:
    """Covert actuator waveform; `tau` is time since attack start."""

    kind: str = "zero"
    slope: float = 0.0
    level: float = 0.0
    amplitude: float = 0.0
    frequency: float = 0.0

    KINDS = ("zero", "ramp", "step", "sinusoid")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise DomainError(f"unknown waveform kind {self.kind!r}")

    def __call__(self, tau):
        if tau < 0 or self.kind == "zero":
            return 0.0
        if self.kind == "ramp":
            return self.slope * tau
        if self.kind == "step":
            return self.level
        return self.amplitude * math.sin(2.0 * math.pi * self.frequency * tau)


@dataclass(frozen=True)
class CovertPlan:
    compromised: tuple
    t_a: float
    waveform_x: Waveform
    waveform_y: Waveform

    def __post_init__(self):
        if self.t_a < 0:
            raise DomainError("covert start time must be >= 0")
        if not self.compromised:
            raise DomainError("covert attack needs a compromised agent")


def covert_actuator_signal(plan, k, Ts):
    tau = k * Ts - plan.t_a
    if tau < -1e-12:
        return np.zeros((2, len(plan.compromised)))
    tau = max(tau, 0.0)
    vals = np.array([plan.waveform_x(tau), plan.waveform_y(tau)])
    return np.repeat(vals[:, None], len(plan.compromised), axis=1)


class ShadowSystem:
    """Attacker's mode-1 copy of the attack response, used to cancel it at the output."""

    def __init__(self, model):
        disc = model.discrete(1)
        self.Ad = disc.Ad
        self.Bd = disc.Bd_attack
        self.C = model.C
        self.x = np.zeros((2, model.A(1).shape[0]))

    def sensor_signal(self, u_a):
        """Return u_s = C x_s for the current tick, then absorb u_a."""
        us = self.x @ self.C.T
        self.x = self.x @ self.Ad.T + np.asarray(u_a, dtype=float).reshape(2, -1) @ self.Bd.T
        return us


def covert_sensor_signal(shadow, u_a_k):
    return shadow.sensor_signal(u_a_k)


@dataclass(frozen=True)
class ReplayPlan:
    """DoS on `dos_targets` at t_a, masked by replaying the last `record_window` seconds.

    `drift` is the per-axis acceleration (m/s^2) that a vehicle cut off by
    the DoS experiences; without it an agent resting in formation would not
    move once isolated.
    """

    record_window: float
    t_a: float
    dos_targets: tuple
    drift: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not self.record_window > 0:
            raise DomainError("record window must be positive")
        if not self.t_a > self.record_window:
            raise DomainError(f"replay start t_a={self.t_a} must exceed record window {self.record_window}")
        if not self.dos_targets:
            raise DomainError("replay attack needs at least one DoS target")

    def window_steps(self, Ts):
        return int(round(self.record_window / Ts))

    def start_step(self, Ts):
        return int(round(self.t_a / Ts))


def replay_actuator_signal(plan, k, Ts):
    ua = np.zeros((2, len(plan.dos_targets)))
    if k >= plan.start_step(Ts):
        ua[:] = np.asarray(plan.drift, dtype=float)[:, None]
    return ua


@dataclass
class ReplayBuffer:
    plan: ReplayPlan
    Ts: float
    _frames: dict = field(default_factory=dict, repr=False)

    @property
    def steps(self):
        return self.plan.window_steps(self.Ts)

    @property
    def start(self):
        return self.plan.start_step(self.Ts)

    def observe(self, k, y):
        if self.start - self.steps <= k < self.start:
            self._frames[k] = np.array(y, dtype=float)

    def full(self):
        return len(self._frames) == self.steps

    def recorded(self, k):
        if not self.full():
            raise PreconditionError(f"replay buffer holds {len(self._frames)} of {self.steps} samples")
        idx = self.start - self.steps + (k - self.start) % self.steps
        return self._frames[idx]


def replay_sensor_signal(buffer, y_live, k):
    """u_s that turns the live reading into the recorded one (active for k >= start)."""
    if k < buffer.start:
        return np.zeros_like(np.asarray(y_live, dtype=float))
    return np.asarray(y_live, dtype=float) - buffer.recorded(k)


def apply_dos(topo, targets):
    targets = set(targets)
    kept = frozenset(e for e in topo.edges if not (e[0] in targets or e[1] in targets))
    return Topology(topo.n_agents, kept, topo.mode_id)


def verify_stealthiness(attacked, nominal, tol):
    """Compare transmitted measurements sample by sample.

    Returns (stealthy, first_violation_time).
    """
    ya, yn = np.asarray(attacked.y), np.asarray(nominal.y)
    if ya.shape != yn.shape or attacked.Ts != nominal.Ts:
        raise DimensionError(f"logs do not match: {ya.shape} at Ts={attacked.Ts} vs {yn.shape} at Ts={nominal.Ts}")
    dev = np.max(np.abs(ya - yn).reshape(ya.shape[0], -1), axis=1) if ya.size else np.zeros(ya.shape[0])
    bad = np.nonzero(dev > tol)[0]
    if bad.size == 0:
        return True, None
    return False, float(attacked.times[bad[0]])
