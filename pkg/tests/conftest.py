import numpy as np
import pytest

from uavsec import orchestrator, plant, topology

V_SHAPE = np.array([[0.0, 0.5], [-1.0, -0.5], [-0.5, 0.0], [0.5, 0.0], [1.0, -0.5]])

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        ok = rep.passed and _criteria.get(n, (True, title))[0]
        _criteria[n] = (ok, title)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        ok, title = _criteria[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}")


@pytest.fixture
def modes():
    return topology.default_mode_table()


@pytest.fixture
def zda_model(modes):
    return plant.NetworkModel(plant.ControlGains(), modes, (1, 4, 5), (3, 5), (), 0.02)


def make_scenario(**kw):
    """V-shape five-agent scenario on the default mode table, started in formation."""
    base = dict(
        modes=topology.default_mode_table(),
        formation=plant.FormationSpec(V_SHAPE),
        initial_positions=V_SHAPE,
        initial_velocities=np.zeros((5, 2)),
        detectors=(1, 3),
        Mp=(3, 5),
        augmented_neighbor_set=True,
        Ts=0.02,
        horizon=10.0,
    )
    base.update(kw)
    return orchestrator.Scenario(**base)
