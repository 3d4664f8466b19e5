import json

import pytest

from satdtax.corpus import load_dataset
from satdtax.gateway import Gateway, MockProvider
from satdtax.simulate import SimulatedAnalyst, make_synthetic_dataset

_criteria: dict[str, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(cid, text): acceptance criterion implemented by the test")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    cid = getattr(report, "criterion", None)
    if not cid:
        return
    # several tests may back one criterion; the worst outcome wins
    previous = _criteria.get(cid[0], (cid[1], "passed"))[1]
    rank = {"passed": 0, "skipped": 1, "failed": 2}
    outcome = max(previous, report.outcome, key=rank.__getitem__)
    _criteria[cid[0]] = (cid[1], outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker:
        rep.criterion = marker.args


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_criteria, key=lambda c: int(c.lstrip("AC"))):
        text, outcome = _criteria[cid]
        mark = "PASS" if outcome == "passed" else outcome.upper()
        terminalreporter.write_line(f"[{mark}] {cid}: {text}")


def write_lines(path, n, fmt="line {i}"):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(fmt.format(i=i) + "\n" for i in range(1, n + 1)), encoding="utf-8")
    return path


def write_manifest(path, records):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r) + "\n")
    return path


@pytest.fixture
def qs_manifest(tmp_path):
    """88-comment synthetic corpus labeled with 4 main / 9 sub categories."""
    return make_synthetic_dataset(tmp_path / "qs", n=88)


@pytest.fixture
def qs_dataset(qs_manifest):
    return load_dataset(qs_manifest)


@pytest.fixture
def sim_gateway():
    def make(**kw):
        return Gateway(MockProvider(responder=SimulatedAnalyst()), **kw)
    return make
