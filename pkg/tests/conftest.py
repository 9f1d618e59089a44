import pytest

_KEY = pytest.StashKey[dict]()


@pytest.fixture(scope="session")
def verdicts(request):
    """Criterion id -> (passed, detail); printed in the terminal summary."""
    return request.config.stash.setdefault(_KEY, {})


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    found = config.stash.get(_KEY, {})
    if not found:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(found, key=lambda c: int(c[1:])):
        ok, detail = found[cid]
        terminalreporter.write_line(f"{cid} {'PASS' if ok else 'FAIL'}  {detail}")
