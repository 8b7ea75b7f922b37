from fractions import Fraction

import pytest
from hypothesis import settings

from badapprox.danger_lines import WeightPair
from badapprox.exact_arith import GOLDEN, BadTheta

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def golden():
    return BadTheta.from_cf(GOLDEN)


@pytest.fixture(scope="session")
def half():
    return WeightPair(Fraction(1, 2), Fraction(1, 2))


# ---------------------------------------------------------------------------
# acceptance report: one line per criterion at the end of the run

_CRITERIA: dict[str, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    crit = item.get_closest_marker("criterion")
    if crit is None or (rep.when != "call" and not rep.failed):
        return
    detail = "; ".join(v for k, v in item.user_properties if k == "detail")
    status = "PASS" if rep.passed else "FAIL"
    if status == "FAIL" or rep.when == "call":
        _CRITERIA[crit.args[0]] = (status, f"{crit.args[1]} ({rep.duration:.1f}s){': ' + detail if detail else ''}")


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(num, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA, key=int):
        status, text = _CRITERIA[num]
        terminalreporter.write_line(f"criterion {num:>2} {status}  {text}")
