import numpy as np
import pytest

from scenvec.sampler import MidpointStream, SamplerConfig, sample_concrete, sample_lane_geometry
from scenvec.scenario_model import ConcreteScenario, ScenarioKind
from scenvec.simulator import simulate


def quiet_record(kind=ScenarioKind.ACC, **fields):
    """Simulate a hand-built scenario with every noise draw at zero."""
    scenario = ConcreteScenario(kind=kind, **fields)
    lanes = sample_lane_geometry(scenario, rng=MidpointStream())
    return simulate(scenario, lanes, rng=MidpointStream())


def generated(kind, count, master_seed=7):
    config = SamplerConfig(kind, master_seed, count)
    out = []
    for i in range(count):
        s = sample_concrete(config, i)
        out.append(simulate(s, sample_lane_geometry(s)))
    return out


@pytest.fixture(scope="session")
def small_sources():
    return {kind: generated(kind, 40, master_seed=11 + kind.code) for kind in ScenarioKind}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# criterion number -> (passed, detail); filled by test_acceptance and echoed after the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
