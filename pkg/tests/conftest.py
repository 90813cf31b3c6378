import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=200, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def desk_layout():
    from mmwave_assoc.geometry import make_hex_layout, scaled_torus
    return make_hex_layout(scaled_torus(2, 2, 200.0), 200.0)


# -- acceptance verdicts ----------------------------------------------------------

_VERDICTS: dict[int, list[tuple[bool, str]]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    report = (yield).get_result()
    marker = item.get_closest_marker("criterion")
    # the call phase decides; a broken setup also counts as a failure
    if marker is None or not (report.when == "call" or report.failed):
        return
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    if report.failed and not detail:
        crash = getattr(report.longrepr, "reprcrash", None)
        detail = crash.message if crash else "error"
    _VERDICTS.setdefault(marker.args[0], []).append((report.passed, f"{item.name}: {detail}"))


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(_VERDICTS):
        results = _VERDICTS[n]
        ok = all(passed for passed, _ in results)
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}")
        for _, detail in results:
            terminalreporter.write_line(f"    {detail}")
