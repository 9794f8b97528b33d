import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "edgepose", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("edgepose")

# nodeid -> criterion label, filled at collection time from acceptance markers.
_CRITERION_BY_NODE: dict[str, str] = {}
_CRITERION_ORDER: list[str] = []


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance(criterion): tags a test as part of a named acceptance criterion"
    )


def pytest_collection_modifyitems(items):
    for item in items:
        marker = item.get_closest_marker("acceptance")
        if marker is None:
            continue
        criterion = marker.kwargs.get("criterion") or item.name
        _CRITERION_BY_NODE[item.nodeid] = criterion
        if criterion not in _CRITERION_ORDER:
            _CRITERION_ORDER.append(criterion)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERION_BY_NODE:
        return
    failures: dict[str, list[str]] = {name: [] for name in _CRITERION_ORDER}
    seen: set[str] = set()
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", None)
            if nodeid not in _CRITERION_BY_NODE or getattr(report, "when", "call") != "call":
                continue
            criterion = _CRITERION_BY_NODE[nodeid]
            seen.add(criterion)
            if outcome != "passed":
                failures[criterion].append(nodeid.rsplit("::", 1)[-1])
    if not seen:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for criterion in _CRITERION_ORDER:
        if criterion not in seen:
            continue
        failed = failures[criterion]
        if failed:
            terminalreporter.write_line(
                f"FAIL  {criterion}  ({', '.join(sorted(failed))})", red=True
            )
        else:
            terminalreporter.write_line(f"PASS  {criterion}", green=True)
