import pytest

from fishmap.cli import main

_criteria: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    entry = _criteria.setdefault(number, {"title": title, "ok": True, "ran": False, "notes": []})
    if report.when == "call" or report.failed:
        entry["ran"] = True
        entry["ok"] &= report.passed
    if report.when == "call":
        entry["notes"] += [f"{k}={v}" for k, v in item.user_properties]


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        e = _criteria[number]
        status = "PASS" if e["ok"] and e["ran"] else ("FAIL" if e["ran"] else "NOT RUN")
        notes = f"  [{', '.join(e['notes'])}]" if e["notes"] else ""
        terminalreporter.write_line(f"criterion {number}: {status}  {e['title']}{notes}")


@pytest.fixture(scope="session")
def seed0_inputs(tmp_path_factory):
    """The default seed-0 scenario written by the synth subcommand."""
    out = tmp_path_factory.mktemp("seed0")
    assert main(["synth", "-o", str(out)]) == 0
    return out


def run_args(inputs):
    return [str(inputs / "ais.csv"), str(inputs / "register.csv"), str(inputs / "static_pairs.csv")]
