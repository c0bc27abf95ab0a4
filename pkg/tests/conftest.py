import sys
from dataclasses import replace
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from hgawi.atom import mercury_five_level_preset  # noqa: E402
from hgawi.spectra import calibrated, scan  # noqa: E402

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

_CRITERIA = {}


@pytest.fixture(scope="session")
def criterion():
    """Record one acceptance line: criterion(number, passed, detail)."""

    def record(number, passed, detail):
        _CRITERIA[number] = (bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        passed, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def preset5():
    """Five-level mercury configuration with kappa calibrated to T_ref = 0.68."""
    return calibrated(mercury_five_level_preset())


@pytest.fixture(scope="session")
def scenario(preset5):
    from hgawi.cli import apply_scenario

    def make(name, **lasers):
        cfg = apply_scenario(preset5, name)
        for beam, changes in lasers.items():
            cfg = replace(cfg, **{beam: replace(getattr(cfg, beam), **changes)})
        return cfg

    return make


@pytest.fixture(scope="session")
def central_spectra(scenario):
    """Configurations a-d over +-5 MHz (81 points)."""
    return {name: scan(scenario(name), -5e6, 5e6, 81) for name in "abcd"}


@pytest.fixture(scope="session")
def wing_spectra(scenario):
    """Configurations c and d over +-60 MHz (49 points)."""
    return {name: scan(scenario(name), -60e6, 60e6, 49) for name in "cd"}
