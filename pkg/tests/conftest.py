import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")


def read_csv(path):
    """(header dict, column dict) from a file written by the runner."""
    header, rows = {}, []
    with open(path) as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            header[key] = value
        else:
            body.append(line)
    names = body[0].split(",")
    for line in body[1:]:
        rows.append(line.split(","))
    cols = {}
    for j, name in enumerate(names):
        raw = [r[j] for r in rows]
        try:
            cols[name] = np.array([float(x) if x != "" else math.nan for x in raw])
        except ValueError:
            cols[name] = raw
    return header, cols


def expect_p(amps):
    """<p> = sqrt(2) Im<a> for an amplitude vector."""
    n = np.arange(1, amps.size)
    a_mean = np.vdot(amps[:-1], np.sqrt(n) * amps[1:])
    return math.sqrt(2.0) * a_mean.imag


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- one line per acceptance criterion in the terminal summary ----------------

_CRITERIA = {}


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance.py" not in report.nodeid:
        return
    props = dict(report.user_properties)
    if "criterion" in props:
        _CRITERIA[props["criterion"]] = (report.outcome, props.get("detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        outcome, detail = _CRITERIA[num]
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d}: {status}  {detail}")
