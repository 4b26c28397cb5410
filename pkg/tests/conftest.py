import hypothesis
import pytest

from repsample.diversity import enrich_units
from repsample.geomodel import validate_candidates
from repsample.synth import ScenarioSpec, generate_scenario

hypothesis.settings.register_profile("ci", max_examples=50, deadline=None)
hypothesis.settings.load_profile("ci")


@pytest.fixture(scope="session")
def small_candidates():
    """10x10 synthetic grid, enriched, seed 7."""
    sc = generate_scenario(ScenarioSpec(nx=10, ny=10, seed=7))
    return validate_candidates(enrich_units(list(sc.candidates)))


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
