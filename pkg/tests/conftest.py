from collections import OrderedDict

import pytest

# criterion id -> list of (passed, detail); filled by the acceptance module
CRITERIA: "OrderedDict[str, list[tuple[bool, str]]]" = OrderedDict()


@pytest.fixture(scope="session")
def record():
    def _record(criterion: str, passed: bool, detail: str = ""):
        CRITERIA.setdefault(criterion, []).append((bool(passed), detail))
        print(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")

    return _record


@pytest.fixture(scope="session")
def full_sweep():
    """Benchmark grid at full scale, shared by the acceptance checks."""
    from conbias.engine import SweepSpec, monte_carlo

    return monte_carlo(SweepSpec.benchmark(trials=21040, seed=7))


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, results in CRITERIA.items():
        ok = all(p for p, _ in results)
        failed = [d for p, d in results if not p]
        detail = "; ".join(failed) if failed else "; ".join(d for _, d in results if d)
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
