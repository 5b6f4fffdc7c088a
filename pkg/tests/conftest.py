import functools

import pytest

from reinhardt import WeightSpec, ball, build_table, closed_form_table, complex_ellipsoid, polydisc
from reinhardt.geometry import unit_disc

DOMAINS = {
    "disc": unit_disc,
    "ball2": lambda: ball(2),
    "polydisc2": lambda: polydisc([1.0, 1.0]),
    "ellipsoid21": lambda: complex_ellipsoid([2.0, 1.0]),
}

WEIGHTS = {
    "one": WeightSpec,
    "pow1": lambda: WeightSpec.power(1.0),
    "pow2": lambda: WeightSpec.power(2.0),
    "exp": lambda: WeightSpec.exponential(1.0, 1.0),
}

POWER_WEIGHTS = ("one", "pow1", "pow2")


@functools.lru_cache(maxsize=None)
def table_for(domain: str, weight: str, degree: int, source: str = "quadrature"):
    """Shared tables; built once per session."""
    d, w = DOMAINS[domain](), WEIGHTS[weight]()
    if source == "closed-form":
        return closed_form_table(d, w, degree)
    return build_table(d, w, degree)


@pytest.fixture(params=sorted(DOMAINS))
def domain_name(request):
    return request.param


@pytest.fixture(params=sorted(WEIGHTS))
def weight_name(request):
    return request.param


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
