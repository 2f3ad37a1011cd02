import sys


def pytest_runtest_logreport(report):
    # one visible pass/fail line per acceptance criterion, bypassing capture
    if report.when == "call" and "test_acceptance" in report.nodeid:
        status = "PASS" if report.passed else "FAIL"
        name = report.nodeid.split("::")[-1]
        sys.__stdout__.write(f"[{status}] {name}\n")
        sys.__stdout__.flush()
