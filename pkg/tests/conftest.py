import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run long training experiments")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="slow tier; pass --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_CRITERIA = pytest.StashKey[dict]()


class CriterionReport:
    """Collects one pass/fail line per acceptance criterion."""

    def __init__(self, lines: dict, number: int, title: str):
        self._lines, self.number, self.title = lines, number, title
        self.details: list = []
        self.ok = True

    def check(self, ok: bool, detail: str) -> None:
        self.ok = self.ok and bool(ok)
        self.details.append(("" if ok else "FAILED ") + detail)

    def line(self) -> str:
        status = "PASS" if self.ok and self.details else "FAIL"
        detail = "; ".join(self.details) or "did not reach its checks"
        return f"criterion {self.number:>2} {status}  {self.title}: {detail}"


@pytest.fixture
def criterion(request):
    lines = request.config.stash.setdefault(_CRITERIA, {})
    made = []

    def start(number: int, title: str) -> CriterionReport:
        rep = CriterionReport(lines, number, title)
        made.append(rep)
        return rep

    yield start
    for rep in made:
        lines[rep.number] = rep.line()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_CRITERIA, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
