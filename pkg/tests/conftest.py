import pytest

from soilradar.radar import PulseShape, RadarConfig

_ACCEPTANCE = []


@pytest.fixture
def radar():
    """Noiseless 5 cm grid over [0, 4) m."""
    return RadarConfig(range_res=0.05, range_end=4.0, noise_sigma=0.0)


@pytest.fixture
def pulse(radar):
    return PulseShape.for_config(radar)


@pytest.fixture
def acceptance():
    """Record one verdict line per acceptance criterion for the terminal summary."""

    def record(number, title, ok, detail=""):
        _ACCEPTANCE.append((number, title, bool(ok), detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        verdict = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{verdict}] {number}. {title}: {detail}")
