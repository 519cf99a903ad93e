import pytest

from abconv.roofline import HardwareProfile, load_profile


@pytest.fixture
def toy_profile():
    return HardwareProfile("toy", peak_macs_per_s=0.5e12, mem_bandwidth_bytes_per_s=4e9, t_in=32, t_out=16)


@pytest.fixture
def ethos():
    return load_profile("ethos-u65-like")


@pytest.fixture
def jetson():
    return load_profile("jetson-nano-like")


_acceptance = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or report.failed:
        _acceptance.setdefault(report.nodeid, report.outcome)
        if report.failed:
            _acceptance[report.nodeid] = "failed"


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for nodeid, outcome in _acceptance.items():
        name = nodeid.split("::")[-1].removeprefix("test_")
        label, _, rest = name.partition("_")
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{verdict}  {label.upper()} {rest.replace('_', ' ')}")
