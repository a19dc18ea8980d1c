import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))


def pytest_runtest_logreport(report):
    # One visible pass/fail line per acceptance criterion.
    if "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call":
        status = "PASS" if report.passed else "FAIL"
        print(f"\n[acceptance] {name}: {status}")
    elif report.when == "setup" and report.skipped:
        print(f"\n[acceptance] {name}: SKIPPED (excluded by design)")
