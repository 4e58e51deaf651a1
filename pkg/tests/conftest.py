import numpy as np
import pytest

from sbalanced import core

# Every converged solution produced during the session passes through this
# hook; the acceptance criterion on the Euler identity inspects the log.
EULER_LOG = {"checked": 0, "violations": []}
ACCEPTANCE_RESULTS = {}


def _euler_hook(q, m, s):
    res = np.max(np.abs(core.balance_residual(q, m, s)))
    if res <= 1e-10:
        EULER_LOG["checked"] += 1
        err = abs(core.weighted_moment(q, m, s) - 1.0)
        if err > 1e-8:
            EULER_LOG["violations"].append((float(s), float(res), float(err)))


core.SOLUTION_HOOKS.append(_euler_hook)


@pytest.fixture
def euler_log():
    return EULER_LOG


@pytest.fixture
def record_criterion():
    """Record a criterion verdict; the summary prints one PASS/FAIL line each."""

    def record(number, checks: dict, detail: str = ""):
        passed = all(bool(v) for v in checks.values())
        failed = [k for k, v in checks.items() if not v]
        ACCEPTANCE_RESULTS[number] = (passed, detail if passed else f"failed: {', '.join(failed)}; {detail}")
        return passed, failed

    return record


def pytest_collection_modifyitems(config, items):
    # the Euler-identity criterion summarizes the whole session, so it runs last
    last = [it for it in items if "criterion_08" in it.name]
    rest = [it for it in items if "criterion_08" not in it.name]
    items[:] = rest + last


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"CRITERION {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
