"""Test session plumbing: prints one PASS/FAIL line per acceptance criterion
at the end of the run."""

import re
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

CRITERIA_LABELS = {
    "01": "clean releases: no phantoms, coverage spans the registry diff",
    "02": "injected phantom files and lines are reported exactly",
    "03": "branch-only lines excluded; bound commits stay in range",
    "04": "reverted changes enlarge the delta beyond the registry diff",
    "05": "attribution matches a brute-force replay oracle",
    "06": "review check matrix",
    "07": "coverage arithmetic and zero-delta exclusion",
    "08": "monorepo registry-to-repository path mapping",
    "09": "failure taxonomy and batch isolation",
    "10": "deterministic JSON output",
}

_PATTERN = re.compile(r"test_acceptance\.py::test_criterion_(\d+)")
_results: dict[str, str] = {}


def pytest_runtest_logreport(report):
    match = _PATTERN.search(report.nodeid)
    if not match:
        return
    num = match.group(1)
    if report.when == "call":
        _results[num] = report.outcome
    elif report.outcome not in ("passed",) and num not in _results:
        _results[num] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for num in sorted(_results):
        label = CRITERIA_LABELS.get(num, "unlabelled")
        status = "PASS" if _results[num] == "passed" else "FAIL"
        terminalreporter.write_line(f"ACCEPTANCE criterion {num} ({label}): {status}")
