"""Shared pytest configuration.

Collects the outcome of every acceptance test (tests/test_acceptance.py,
functions named ``test_A<N>_...``) and prints one PASS/FAIL line per
criterion at the end of the run.
"""

import re

_CRITERIA = {
    "A1": "exact zeta equals brute-force integration (incl. the 5/8 value)",
    "A2": "no-unit-root spectra match confluent q-Bessel zeros",
    "A3": "degree-one kernel reproduces the explicit eigenvalue list",
    "A4": "rank-one perturbation: Bessel zeros, inverse, orthogonality",
    "A5": "constant-profile kernels match Heine-series zeros",
    "A6": "quadratic-character instance: E zeros, E(0)=1, connection",
    "A7": "Mahler kernel matches lacunary characteristic function",
    "A8": "random symbols: Wronskian zeros, eigenvectors, triangular",
    "A9": "min-kernel determinant identity in exact arithmetic",
    "A10": "character blocks partition the discretized spectrum",
    "A11": "1% parameter perturbations flip each matched criterion",
}

_PATTERN = re.compile(r"test_acceptance\.py::test_(A\d+)_")
_outcomes: dict = {}


def pytest_runtest_logreport(report):
    match = _PATTERN.search(report.nodeid)
    if not match:
        return
    crit = match.group(1)
    if report.when == "call":
        if report.passed:
            _outcomes.setdefault(crit, "PASS")
        elif report.failed:
            _outcomes[crit] = "FAIL"
        elif report.skipped:
            _outcomes.setdefault(crit, "SKIP")
    elif report.failed:  # setup/teardown error
        _outcomes[crit] = "FAIL"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(_outcomes, key=lambda c: int(c[1:])):
        label = _CRITERIA.get(crit, "")
        terminalreporter.write_line(
            f"{crit:>4} {label:<62s} {_outcomes[crit]}")
