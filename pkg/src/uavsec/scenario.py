"""TOML scenario files: parsing with located diagnostics, emission and digests."""

import hashlib
import json
import sys

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import attacks
from .errors import DimensionError, DomainError, ScenarioError
from .orchestrator import Scenario, SwitchingPolicy, ZdaSpec
from .plant import ControlGains, FormationSpec, NoiseSpec
from .topology import SwitchingPlan, Topology

REQUIRED = ("agents", "formation", "modes", "monitors", "sim")
KEYS = {
    "agents": {"count", "initial_positions", "initial_velocities"},
    "gains": {"alpha", "gamma"},
    "formation": {"setpoints"},
    "modes": {"mode_id", "edges"},
    "switching": {"policy", "schedule", "target"},
    "monitors": {
        "detectors",
        "measured_positions",
        "measured_velocities",
        "augmented_neighbor_set",
        "epsilon_floor",
        "omega_bar",
        "envelope_horizon",
        "require_coverage",
    },
    "sim": {"Ts", "horizon", "noise_amplitude", "seed"},
}
ATTACK_KEYS = {
    "zda": {
        "type",
        "compromised",
        "scale",
        "lambda",
        "designated_agent",
        "lambda_x",
        "lambda_y",
        "lambda_continuous",
        "u0",
        "x0_attack",
    },
    "covert": {"type", "compromised", "t_a", "waveform_x", "waveform_y"},
    "replay": {"type", "dos_targets", "record_window", "t_a", "drift"},
    "none": {"type"},
}
WAVEFORM_KEYS = {"kind", "slope", "level", "amplitude", "frequency"}
PINNED = ("lambda_x", "lambda_y", "u0", "x0_attack")


def _locate(text, path, section, key=None):
    """'path:line' of the key inside its table (or of the table header)."""
    if text is None:
        return str(path) if path else None
    current = None
    header_line = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("["):
            current = line.strip("[]").strip()
            if current == section and header_line is None:
                header_line = lineno
            continue
        if key and current == section and line.split("=", 1)[0].strip() == key:
            return f"{path}:{lineno}"
    if header_line is not None:
        return f"{path}:{header_line}"
    return str(path)


class _Reader:
    def __init__(self, doc, text, path):
        self.doc = doc
        self.text = text
        self.path = path

    def fail(self, msg, section, key=None):
        raise ScenarioError(msg, section, key, _locate(self.text, self.path, section, key))

    def table(self, name, required=True):
        if name not in self.doc:
            if required:
                self.fail("missing section", name)
            return None
        tbl = self.doc[name]
        if not isinstance(tbl, dict):
            self.fail("must be a table", name)
        return tbl

    def check_keys(self, tbl, allowed, section):
        for key in tbl:
            if key not in allowed:
                self.fail(f"unknown key {key!r}", section, key)

    def number(self, tbl, section, key, default=None, kind=float):
        if key not in tbl:
            if default is None:
                self.fail("missing key", section, key)
            return default
        v = tbl[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(f"expected a number, got {v!r}", section, key)
        if kind is int:
            if not isinstance(v, int):
                self.fail(f"expected an integer, got {v!r}", section, key)
            return int(v)
        return float(v)

    def int_list(self, tbl, section, key, default=None):
        if key not in tbl:
            if default is None:
                self.fail("missing key", section, key)
            return default
        v = tbl[key]
        if not isinstance(v, list) or not all(isinstance(i, int) and not isinstance(i, bool) for i in v):
            self.fail(f"expected a list of agent indices, got {v!r}", section, key)
        return tuple(v)

    def matrix(self, tbl, section, key, shape=None, default=None):
        if key not in tbl:
            if default is None:
                self.fail("missing key", section, key)
            return default
        try:
            arr = np.array(tbl[key], dtype=float)
        except (TypeError, ValueError):
            self.fail("expected a numeric array", section, key)
        if shape is not None and arr.shape != shape:
            self.fail(f"expected shape {shape}, got {arr.shape}", section, key)
        return arr


def _waveform(r, spec, key):
    if not isinstance(spec, dict):
        r.fail("waveform must be an inline table", "attack", key)
    for k in spec:
        if k not in WAVEFORM_KEYS:
            r.fail(f"unknown waveform key {k!r}", "attack", key)
    kind = spec.get("kind", "zero")
    try:
        return attacks.Waveform(kind, **{k: float(v) for k, v in spec.items() if k != "kind"})
    except (DomainError, TypeError, ValueError) as exc:
        r.fail(str(exc), "attack", key)


def _attack(r, n, Ts):
    tbl = r.table("attack", required=False)
    if tbl is None:
        return None
    kind = tbl.get("type", "none")
    if kind not in ATTACK_KEYS:
        r.fail(f"unknown attack type {kind!r}", "attack", "type")
    r.check_keys(tbl, ATTACK_KEYS[kind], "attack")
    try:
        if kind == "none":
            return None
        if kind == "zda":
            comp = r.int_list(tbl, "attack", "compromised")
            scale = tbl.get("scale", [0.0086, -0.00602])
            scale = (float(scale), float(scale)) if isinstance(scale, (int, float)) else tuple(float(v) for v in scale)
            lam = r.number(tbl, "attack", "lambda") if "lambda" in tbl else None
            designated = r.number(tbl, "attack", "designated_agent", kind=int) if "designated_agent" in tbl else None
            plan = None
            present = [k for k in PINNED if k in tbl]
            if present and len(present) != len(PINNED):
                r.fail(f"a pinned plan needs all of {PINNED}", "attack", present[0])
            if present:
                lc = tbl.get("lambda_continuous", [tbl["lambda_x"], tbl["lambda_y"]])
                plan = attacks.ZdaPlan(
                    lambda_x=r.number(tbl, "attack", "lambda_x"),
                    lambda_y=r.number(tbl, "attack", "lambda_y"),
                    u0=r.matrix(tbl, "attack", "u0", (2, len(comp))),
                    x0_attack=r.matrix(tbl, "attack", "x0_attack", (2, 2 * n)),
                    compromised=comp,
                    designated_agent=designated or comp[0],
                    Ts=Ts,
                    lambda_continuous=(float(lc[0]), float(lc[1])),
                )
            return ZdaSpec(comp, scale, lam, designated, plan)
        if kind == "covert":
            return attacks.CovertPlan(
                r.int_list(tbl, "attack", "compromised"),
                r.number(tbl, "attack", "t_a"),
                _waveform(r, tbl.get("waveform_x", {}), "waveform_x"),
                _waveform(r, tbl.get("waveform_y", {}), "waveform_y"),
            )
        drift = tuple(float(v) for v in tbl.get("drift", [0.0, 0.0]))
        if len(drift) != 2:
            r.fail("drift must be an (x, y) pair", "attack", "drift")
        return attacks.ReplayPlan(
            r.number(tbl, "attack", "record_window"),
            r.number(tbl, "attack", "t_a"),
            r.int_list(tbl, "attack", "dos_targets"),
            drift,
        )
    except (DomainError, DimensionError) as exc:
        r.fail(str(exc), "attack")


def parse_text(text, path="<scenario>", seed=None):
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"malformed TOML: {exc}", location=str(path)) from exc
    return build_scenario(doc, text, path, seed)


def parse_scenario(path, seed=None):
    """Read and validate a scenario file; `seed` overrides [sim].seed."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc}", location=str(path)) from exc
    return parse_text(text, path, seed)


def build_scenario(doc, text=None, path=None, seed=None):
    r = _Reader(doc, text, path)
    for name in doc:
        if name not in KEYS and name != "attack":
            r.fail("unknown section", name)
    for name in REQUIRED:
        if name not in doc:
            r.fail("missing section", name)
    sim = r.table("sim")
    r.check_keys(sim, KEYS["sim"], "sim")
    Ts = r.number(sim, "sim", "Ts", 0.02)

    agents = r.table("agents")
    r.check_keys(agents, KEYS["agents"], "agents")
    n = r.number(agents, "agents", "count", kind=int)
    if n < 1:
        r.fail("agent count must be positive", "agents", "count")
    pos = r.matrix(agents, "agents", "initial_positions", (n, 2))
    vel = r.matrix(agents, "agents", "initial_velocities", (n, 2), default=np.zeros((n, 2)))

    gains_t = r.table("gains", required=False) or {}
    r.check_keys(gains_t, KEYS["gains"], "gains")
    try:
        gains = ControlGains(r.number(gains_t, "gains", "alpha", 1.0), r.number(gains_t, "gains", "gamma", 2.0))
    except DomainError as exc:
        r.fail(str(exc), "gains")

    form = r.table("formation")
    r.check_keys(form, KEYS["formation"], "formation")
    formation = FormationSpec(r.matrix(form, "formation", "setpoints", (n, 2)))

    raw_modes = doc["modes"]
    if not isinstance(raw_modes, list) or not raw_modes:
        r.fail("expected one or more [[modes]] tables", "modes")
    modes = {}
    for entry in raw_modes:
        r.check_keys(entry, KEYS["modes"], "modes")
        mid = r.number(entry, "modes", "mode_id", kind=int)
        if mid in modes:
            r.fail(f"mode {mid} defined twice", "modes", "mode_id")
        edges = entry.get("edges")
        if not isinstance(edges, list) or not all(isinstance(e, list) and len(e) == 2 for e in edges):
            r.fail(f"mode {mid}: edges must be a list of [i, j] pairs", "modes", "edges")
        try:
            modes[mid] = Topology(n, frozenset(tuple(e) for e in edges), mid)
        except DomainError as exc:
            r.fail(f"mode {mid}: {exc}", "modes", "edges")

    sw = r.table("switching", required=False) or {}
    r.check_keys(sw, KEYS["switching"], "switching")
    try:
        sched = sw.get("schedule", [])
        plan = SwitchingPlan(tuple((float(t), int(m)) for t, m in sched))
        target = r.number(sw, "switching", "target", kind=int) if "target" in sw else None
        switching = SwitchingPolicy(sw.get("policy", "none"), plan, target)
    except (DomainError, TypeError, ValueError) as exc:
        r.fail(str(exc), "switching")

    attack = _attack(r, n, Ts)

    mon = r.table("monitors")
    r.check_keys(mon, KEYS["monitors"], "monitors")
    try:
        noise = NoiseSpec(
            r.number(sim, "sim", "noise_amplitude", 0.0),
            seed if seed is not None else r.number(sim, "sim", "seed", 0, kind=int),
        )
    except DomainError as exc:
        r.fail(str(exc), "sim", "noise_amplitude")
    floor = mon.get("epsilon_floor")
    omega = mon.get("omega_bar")
    try:
        return Scenario(
            modes=modes,
            formation=formation,
            initial_positions=pos,
            initial_velocities=vel,
            gains=gains,
            switching=switching,
            attack=attack,
            detectors=r.int_list(mon, "monitors", "detectors", ()),
            Mp=r.int_list(mon, "monitors", "measured_positions", ()),
            Mv=r.int_list(mon, "monitors", "measured_velocities", ()),
            augmented_neighbor_set=bool(mon.get("augmented_neighbor_set", False)),
            epsilon_floor=None if floor is None else float(floor),
            omega_bar=None if omega is None else float(omega),
            envelope_horizon=r.number(mon, "monitors", "envelope_horizon", 15.0),
            require_coverage=bool(mon.get("require_coverage", False)),
            noise=noise,
            Ts=Ts,
            horizon=r.number(sim, "sim", "horizon", 10.0),
        )
    except (DomainError, DimensionError) as exc:
        msg = str(exc)
        section, key = "scenario", None
        if msg.startswith("mode "):
            section, key = "modes", "edges"
        elif "detector" in msg:
            section, key = "monitors", "detectors"
        elif "horizon" in msg or "Ts" in msg:
            section, key = "sim", "horizon"
        elif "switching" in msg:
            section = "switching"
        r.fail(msg, section, key)


def _floats(a):
    return [[float(v) for v in row] for row in np.asarray(a)]


def scenario_to_dict(s):
    """Plain TOML-ready document for `s`; canonical, so equal scenarios give equal dicts."""
    doc = {
        "agents": {
            "count": s.n_agents,
            "initial_positions": _floats(s.initial_positions),
            "initial_velocities": _floats(s.initial_velocities),
        },
        "gains": {"alpha": float(s.gains.alpha), "gamma": float(s.gains.gamma)},
        "formation": {"setpoints": _floats(s.formation.setpoints)},
        "modes": [
            {"mode_id": mid, "edges": [list(e) for e in s.modes[mid].sorted_edges()]} for mid in sorted(s.modes)
        ],
        "switching": {"policy": s.switching.policy},
        "monitors": {
            "detectors": sorted(s.detectors),
            "measured_positions": sorted(s.Mp),
            "measured_velocities": sorted(s.Mv),
            "augmented_neighbor_set": bool(s.augmented_neighbor_set),
            "envelope_horizon": float(s.envelope_horizon),
            "require_coverage": bool(s.require_coverage),
        },
        "sim": {
            "Ts": float(s.Ts),
            "horizon": float(s.horizon),
            "noise_amplitude": float(s.noise.amplitude),
            "seed": int(s.noise.seed),
        },
    }
    if s.switching.plan.schedule:
        doc["switching"]["schedule"] = [[t, m] for t, m in s.switching.plan.schedule]
    if s.switching.target is not None:
        doc["switching"]["target"] = int(s.switching.target)
    if s.epsilon_floor is not None:
        doc["monitors"]["epsilon_floor"] = float(s.epsilon_floor)
    if s.omega_bar is not None:
        doc["monitors"]["omega_bar"] = float(s.omega_bar)
    a = s.attack
    if isinstance(a, ZdaSpec):
        att = {"type": "zda", "compromised": list(a.compromised), "scale": [float(v) for v in a.scale]}
        if a.lam is not None:
            att["lambda"] = float(a.lam)
        if a.designated_agent is not None:
            att["designated_agent"] = int(a.designated_agent)
        if a.plan is not None:
            att.update(zda_plan_fields(a.plan))
        doc["attack"] = att
    elif isinstance(a, attacks.CovertPlan):
        doc["attack"] = {
            "type": "covert",
            "compromised": list(a.compromised),
            "t_a": float(a.t_a),
            "waveform_x": _waveform_dict(a.waveform_x),
            "waveform_y": _waveform_dict(a.waveform_y),
        }
    elif isinstance(a, attacks.ReplayPlan):
        doc["attack"] = {
            "type": "replay",
            "dos_targets": list(a.dos_targets),
            "record_window": float(a.record_window),
            "t_a": float(a.t_a),
            "drift": [float(v) for v in a.drift],
        }
    return doc


def zda_plan_fields(plan):
    return {
        "lambda_x": float(plan.lambda_x),
        "lambda_y": float(plan.lambda_y),
        "lambda_continuous": [float(v) for v in plan.lambda_continuous],
        "u0": _floats(plan.u0),
        "x0_attack": _floats(plan.x0_attack),
    }


def _waveform_dict(w):
    out = {"kind": w.kind}
    for k in ("slope", "level", "amplitude", "frequency"):
        v = getattr(w, k)
        if v != 0.0:
            out[k] = float(v)
    return out


def emit_scenario(s):
    return tomli_w.dumps(scenario_to_dict(s))


def scenario_digest(s):
    blob = json.dumps(scenario_to_dict(s), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()
