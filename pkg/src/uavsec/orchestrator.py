"""Scenario definition and the tick loop tying plant, attacks and monitors together."""

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import attacks, monitors
from .errors import DomainError
from .plant import ControlGains, FormationSpec, NetworkModel, NoiseSpec, PlantState, formation_error, step
from .topology import SwitchingPlan, active_mode, is_connected

SWITCH_POLICIES = ("none", "scheduled", "triggered")


@dataclass(frozen=True)
class SwitchingPolicy:
    policy: str = "none"
    plan: SwitchingPlan = field(default_factory=SwitchingPlan)
    target: Optional[int] = None

    def __post_init__(self):
        if self.policy not in SWITCH_POLICIES:
            raise DomainError(f"unknown switching policy {self.policy!r}")
        if self.policy == "triggered" and self.target is None:
            raise DomainError("triggered switching needs a target mode")


@dataclass(frozen=True)
class ZdaSpec:
    """ZDA request; `plan` is filled in when a synthesized plan is pinned in the file."""

    compromised: tuple
    scale: tuple = (0.0086, -0.00602)
    lam: Optional[float] = None
    designated_agent: Optional[int] = None
    plan: Optional[attacks.ZdaPlan] = None

    def resolve(self, model):
        if self.plan is not None:
            return self.plan
        return attacks.synthesize_zda(model, self.scale, self.lam, self.designated_agent)


@dataclass(frozen=True)
class Scenario:
    modes: dict
    formation: FormationSpec
    initial_positions: np.ndarray
    initial_velocities: np.ndarray
    gains: ControlGains = field(default_factory=ControlGains)
    switching: SwitchingPolicy = field(default_factory=SwitchingPolicy)
    attack: object = None
    detectors: tuple = ()
    Mp: tuple = ()
    Mv: tuple = ()
    augmented_neighbor_set: bool = False
    epsilon_floor: Optional[float] = None
    omega_bar: Optional[float] = None
    envelope_horizon: float = monitors.DEFAULT_ENVELOPE_HORIZON
    require_coverage: bool = False
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    Ts: float = 0.02
    horizon: float = 10.0

    def __post_init__(self):
        n = self.n_agents
        for mid, topo in sorted(self.modes.items()):
            if topo.n_agents != n:
                raise DomainError(f"mode {mid} has {topo.n_agents} agents, expected {n}")
            if not is_connected(topo):
                raise DomainError(f"mode {mid} is not connected")
        if 1 not in self.modes:
            raise DomainError("mode 1 must be defined")
        used = set(self.switching.plan.mode_ids())
        if self.switching.target is not None:
            used.add(self.switching.target)
        missing = sorted(used - set(self.modes))
        if missing:
            raise DomainError(f"switching references undefined mode(s) {missing}")
        if not self.Ts > 0 or not self.horizon > 0:
            raise DomainError("Ts and horizon must be positive")
        steps = self.horizon / self.Ts
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise DomainError(f"horizon {self.horizon} is not a multiple of Ts {self.Ts}")
        for name in ("initial_positions", "initial_velocities"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != (n, 2):
                raise DomainError(f"{name} must be {n} x 2, got {arr.shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        for i in tuple(self.detectors) + tuple(self.Mp) + tuple(self.Mv):
            if not 1 <= i <= n:
                raise DomainError(f"agent index {i} out of range 1..{n}")
        if not self.Mp and not self.Mv:
            raise DomainError("central monitor needs at least one measured output")
        if self.require_coverage and not monitors.coverage_check(self.detectors, self.modes[1]):
            raise DomainError(f"detector set {sorted(self.detectors)} does not cover every agent in mode 1")

    @property
    def n_agents(self):
        return self.formation.n_agents

    @property
    def n_ticks(self):
        return int(round(self.horizon / self.Ts)) + 1

    def attack_agents(self):
        a = self.attack
        if a is None:
            return ()
        if isinstance(a, attacks.ReplayPlan):
            return tuple(a.dos_targets)
        return tuple(a.compromised)

    def model(self):
        return NetworkModel(self.gains, dict(self.modes), self.attack_agents(), self.Mp, self.Mv, self.Ts)


@dataclass(frozen=True)
class RunLog:
    """Per-tick traces of one run. Arrays are indexed [tick, axis, ...]."""

    Ts: float
    times: np.ndarray
    modes: np.ndarray
    states: np.ndarray
    y: np.ndarray
    monitor_ids: tuple
    labels: dict
    residuals: dict
    thresholds: dict
    events: tuple
    switch_time: Optional[float]
    metadata: dict

    @property
    def n_ticks(self):
        return self.times.size

    def first_alarm(self, monitor_id):
        for ev in self.events:
            if ev.monitor_id == monitor_id:
                return ev.time
        return None

    def formation_errors(self, formation):
        return np.array(
            [formation_error(PlantState(self.states[k]), formation)[0] for k in range(self.n_ticks)]
        )


def _initial_x(s, plan):
    x = np.hstack([s.initial_positions.T, s.initial_velocities.T])
    if plan is not None:
        x = x + plan.x0_attack
    return x


def run_scenario(s, x0_override=None, metadata=None):
    """Simulate `s` tick by tick.

    Tick order: mode, noise, attack signals, plant step, local monitors,
    triggered switch decision, central monitor.
    """
    model = s.model()
    n = s.n_agents
    a = s.attack
    zda_plan = a.resolve(model) if isinstance(a, ZdaSpec) else None
    x0 = _initial_x(s, zda_plan) if x0_override is None else np.asarray(x0_override, dtype=float)

    omega = s.omega_bar if s.omega_bar is not None else monitors.default_omega_bar(x0)
    amp = s.noise.amplitude
    central = monitors.design_central(model, omega, s.epsilon_floor, amp, s.envelope_horizon)
    locals_ = [
        monitors.design_local(model, i, omega, s.epsilon_floor, amp, s.envelope_horizon) for i in sorted(s.detectors)
    ]
    cfgs = locals_ + [central]
    mstates = [monitors.initial_monitor_state(c) for c in cfgs]

    shadow = attacks.ShadowSystem(model) if isinstance(a, attacks.CovertPlan) else None
    replay = attacks.ReplayBuffer(a, s.Ts) if isinstance(a, attacks.ReplayPlan) else None
    dos_targets = frozenset(a.dos_targets) if replay is not None else frozenset()

    K = s.n_ticks
    m = model.C.shape[0]
    x_star = s.formation.reference()
    rng = s.noise.generator()

    # rounded so tick times print cleanly (0.14, not 0.14000000000000001)
    times = np.round(np.arange(K) * s.Ts, 12)
    modes = np.zeros(K, dtype=int)
    states = np.zeros((K, 2, 2 * n))
    ys = np.zeros((K, 2, m))
    res = {c.monitor_id: np.zeros((K, 2, c.C.shape[0])) for c in cfgs}
    thr = {c.monitor_id: np.zeros((K, c.C.shape[0])) for c in cfgs}
    events = []
    switch_time = None
    triggered_mode = 1

    state = PlantState(x0, 0, 0.0, 1)
    for k in range(K):
        t = times[k]
        if s.switching.policy == "scheduled":
            mode = active_mode(s.switching.plan, t)
        elif s.switching.policy == "triggered":
            mode = triggered_mode
        else:
            mode = 1
        state = replace(state, mode=mode)

        n_central = s.noise.sample(rng, (2, m))
        n_local = [s.noise.sample(rng, (2, c.C.shape[0])) for c in locals_]

        u_a, u_s, dos = None, None, frozenset()
        if zda_plan is not None:
            u_a = attacks.zda_signal(zda_plan, k)
        elif shadow is not None:
            u_a = attacks.covert_actuator_signal(a, k, s.Ts)
            u_s = shadow.sensor_signal(u_a)
        elif replay is not None:
            u_a = attacks.replay_actuator_signal(a, k, s.Ts)
            y_live = state.x @ model.C.T + n_central
            replay.observe(k, y_live)
            u_s = attacks.replay_sensor_signal(replay, y_live, k)
            if k >= replay.start:
                dos = dos_targets

        x_now = state.x
        state, y = step(state, model, x_star, u_a, u_s, n_central, dos)
        if replay is not None and k >= replay.start:
            # C x + n - u_s equals the recording only up to rounding; the
            # attacker transmits the stored sample itself
            y = replay.recorded(k).copy()
        modes[k] = mode
        states[k] = x_now
        ys[k] = y

        first_local = False
        for idx, cfg in enumerate(locals_):
            y_i = x_now @ cfg.C.T + n_local[idx]
            st, _ = monitors.local_step(cfg, mstates[idx], y_i, x_star, mode, model)
            st, evs = monitors.evaluate(cfg, st, t)
            mstates[idx] = st
            if evs and st.alarm_time == t:
                first_local = True
            events.extend(evs)
        if s.switching.policy == "triggered" and first_local and switch_time is None:
            triggered_mode = s.switching.target
            switch_time = round((k + 1) * s.Ts, 12)

        st, _ = monitors.central_step(central, mstates[-1], y, x_star, model)
        st, evs = monitors.evaluate(central, st, t)
        mstates[-1] = st
        events.extend(evs)

        for idx, cfg in enumerate(cfgs):
            res[cfg.monitor_id][k] = mstates[idx].residual
            thr[cfg.monitor_id][k] = cfg.thresholds(t)

    if s.switching.policy == "scheduled":
        later = [ts for ts, _ in s.switching.plan.schedule if ts > 0]
        switch_time = later[0] if later else None

    for arr in (times, modes, states, ys):
        arr.setflags(write=False)
    meta = {"seed": s.noise.seed}
    if zda_plan is not None:
        meta["zda_lambda"] = [zda_plan.lambda_x, zda_plan.lambda_y]
    meta.update(metadata or {})
    return RunLog(
        Ts=s.Ts,
        times=times,
        modes=modes,
        states=states,
        y=ys,
        monitor_ids=tuple(c.monitor_id for c in cfgs),
        labels={c.monitor_id: c.labels for c in cfgs},
        residuals=res,
        thresholds=thr,
        events=tuple(events),
        switch_time=switch_time,
        metadata=meta,
    )


def paired_nominal_run(s, metadata=None):
    """Attack-free rerun; for a ZDA the initial state drops the zero-direction offset."""
    if s.attack is None:
        raise DomainError("paired nominal run needs an attack plan")
    x0 = None
    if isinstance(s.attack, ZdaSpec):
        model = s.model()
        plan = s.attack.resolve(model)
        x0 = _initial_x(s, plan) - plan.x0_attack
    nominal = replace(s, attack=None)
    if x0 is None:
        return run_scenario(nominal, metadata=metadata)
    # keep the thresholds of the attacked run so both runs share one omega_bar
    if s.omega_bar is None:
        omega = monitors.default_omega_bar(_initial_x(s, plan))
        nominal = replace(nominal, omega_bar=omega)
    return run_scenario(nominal, x0_override=x0, metadata=metadata)


def detection_report(log, formation=None):
    alarms = {}
    for mid in log.monitor_ids:
        alarms[str(mid)] = log.first_alarm(mid)
    central = log.first_alarm(monitors.CENTRAL_ID)
    local_times = [t for mid, t in alarms.items() if mid != str(monitors.CENTRAL_ID) and t is not None]
    report = {
        "first_alarm": alarms,
        "first_local_alarm": min(local_times) if local_times else None,
        "central_alarm": central,
        "central_stealthy": central is None,
        "switch_time": log.switch_time,
        "event_count": len(log.events),
        "ticks": log.n_ticks,
    }
    if formation is not None:
        errs = log.formation_errors(formation)
        last = PlantState(log.states[-1])
        report["max_formation_error"] = float(errs.max())
        report["final_formation_error"] = float(errs[-1])
        report["final_max_speed"] = formation_error(last, formation)[1]
    return report
