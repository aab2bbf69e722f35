import pytest

# one line per acceptance criterion, filled in by tests/test_acceptance.py
CRITERIA = []


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(CRITERIA, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)


@pytest.fixture
def record_criterion():
    def record(number, title, failures, detail=""):
        status = "PASS" if not failures else "FAIL"
        text = f"{status} {number}: {title}"
        if detail:
            text += f" | {detail}"
        if failures:
            text += " | failed: " + "; ".join(failures)
        CRITERIA.append(text)
        print(text)
        return text
    return record
