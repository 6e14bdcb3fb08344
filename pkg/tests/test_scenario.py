import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import V_SHAPE, make_scenario
from uavsec import attacks, orchestrator, plant, scenario, topology
from uavsec.errors import ScenarioError

HERE = os.path.dirname(__file__)
SHIPPED = os.path.join(HERE, "..", "scenarios")


def test_minimal_two_agent_file():
    s = scenario.parse_scenario(os.path.join(HERE, "data", "minimal.toml"))
    assert s.n_agents == 2 and s.attack is None and s.detectors == ()
    assert s.gains == plant.ControlGains()


@pytest.mark.parametrize("name", sorted(os.listdir(SHIPPED)))
def test_shipped_scenarios_parse_and_round_trip(name):
    s = scenario.parse_scenario(os.path.join(SHIPPED, name))
    again = scenario.parse_text(scenario.emit_scenario(s))
    assert scenario.scenario_digest(again) == scenario.scenario_digest(s)


def test_default_shaped_scenario_valid():
    s = scenario.parse_scenario(os.path.join(SHIPPED, "zda-revealing-switch.toml"))
    assert s.Mp == (3, 5) and sorted(s.detectors) == [1, 3] and s.require_coverage


def _bad(text, tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text(text)
    with pytest.raises(ScenarioError) as err:
        scenario.parse_scenario(str(p))
    return err.value


MINIMAL = open(os.path.join(HERE, "data", "minimal.toml")).read()


def test_missing_section(tmp_path):
    err = _bad(MINIMAL.replace("[sim]\nTs = 0.02\nhorizon = 5.0\n", ""), tmp_path)
    assert err.section == "sim" and "missing section" in str(err)


def test_unknown_key_located(tmp_path):
    text = MINIMAL.replace("horizon = 5.0", "horizon = 5.0\ncolour = 3")
    err = _bad(text, tmp_path)
    assert err.section == "sim" and err.key == "colour"
    line = text.splitlines().index("colour = 3") + 1
    assert err.location.endswith(f":{line}")


def test_disconnected_mode_named(tmp_path):
    text = MINIMAL.replace("count = 2", "count = 3").replace(
        "[[0.0, 0.0], [2.0, 1.0]]", "[[0.0, 0.0], [2.0, 1.0], [0.0, 1.0]]"
    ).replace("[[0.0, 0.0], [1.0, 0.0]]", "[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]")
    text += "\n[[modes]]\nmode_id = 2\nedges = [[1, 2]]\n"
    text = text.replace("edges = [[1, 2]]\n\n[monitors]", "edges = [[1, 2], [2, 3]]\n\n[monitors]")
    err = _bad(text, tmp_path)
    assert "mode 2" in str(err) and err.section == "modes"


def test_coverage_failure_reported(tmp_path):
    text = open(os.path.join(SHIPPED, "zda-revealing-switch.toml")).read().replace("detectors = [1, 3]", "detectors = [1]")
    err = _bad(text, tmp_path)
    assert err.section == "monitors" and err.key == "detectors"


def test_bad_values(tmp_path):
    assert "integer" in str(_bad(MINIMAL.replace("count = 2", "count = 2.5"), tmp_path))
    assert _bad(MINIMAL.replace("[[1, 2]]", "[[1, 1]]"), tmp_path).section == "modes"
    assert _bad(MINIMAL + '\n[attack]\ntype = "teleport"\n', tmp_path).key == "type"
    assert _bad(MINIMAL + '\n[attack]\ntype = "replay"\ndos_targets = [2]\nrecord_window = 3.0\nt_a = 2.0\n', tmp_path).section == "attack"
    assert _bad(MINIMAL + '\n[switching]\npolicy = "triggered"\ntarget = 9\n', tmp_path).section == "switching"
    assert "malformed" in str(_bad("[agents\n", tmp_path))


def test_seed_override():
    path = os.path.join(SHIPPED, "covert-ramp.toml")
    assert scenario.parse_scenario(path, seed=123).noise.seed == 123


def test_pinned_plan_round_trip(zda_model):
    plan = attacks.synthesize_zda(zda_model, 0.0086)
    s = make_scenario(attack=orchestrator.ZdaSpec((1, 4, 5), (0.0086, 0.0086), designated_agent=4, plan=plan))
    back = scenario.parse_text(scenario.emit_scenario(s))
    assert np.array_equal(back.attack.plan.u0, plan.u0)
    assert np.array_equal(back.attack.plan.x0_attack, plan.x0_attack)
    assert back.attack.plan.lambda_x == plan.lambda_x
    assert scenario.scenario_digest(back) == scenario.scenario_digest(s)


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=5, max_size=5),
    st.floats(0.1, 10.0),
    st.floats(0.0, 0.01),
    st.integers(0, 2**63 - 1),
    st.sampled_from(["none", "zda", "covert", "replay"]),
)
def test_round_trip_digest_property(pos, alpha, amp, seed, kind):
    attack = {
        "none": None,
        "zda": orchestrator.ZdaSpec((1, 4, 5), (0.01, -0.003), 0.5),
        "covert": attacks.CovertPlan((2,), 1.25, attacks.Waveform("sinusoid", amplitude=0.3, frequency=0.4), attacks.Waveform()),
        "replay": attacks.ReplayPlan(1.5, 3.5, (4, 5), (0.05, -0.01)),
    }[kind]
    s = make_scenario(
        initial_positions=np.array(pos),
        gains=plant.ControlGains(alpha, 2.0),
        noise=plant.NoiseSpec(amp, seed),
        attack=attack,
        switching=orchestrator.SwitchingPolicy("scheduled", topology.SwitchingPlan(((1.5, 2), (3.25, 4)))),
    )
    back = scenario.parse_text(scenario.emit_scenario(s))
    assert scenario.scenario_digest(back) == scenario.scenario_digest(s)
    assert scenario.scenario_to_dict(back) == scenario.scenario_to_dict(s)


def test_digest_changes_with_content():
    a = make_scenario()
    b = make_scenario(initial_positions=V_SHAPE + 1e-9)
    assert scenario.scenario_digest(a) != scenario.scenario_digest(b)
