import numpy as np
import pytest

from odmts.generator import GenSpec, generate
from odmts.instance import EconomicParams, Trip, build_instance

# (criterion, passed, detail) rows collected by the acceptance module
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


def tiny4_instance(trips=None, theta=0.5):
    """Origin O, destination D and hubs A, B; t = 2 d."""
    dist = np.array([[0, 6, 1, 6],
                     [6, 0, 6, 1],
                     [1, 6, 0, 5],
                     [6, 1, 5, 0]], dtype=float)
    if trips is None:
        trips = [Trip("r", "O", "D", riders=1)]
    econ = EconomicParams(theta=theta, bus_cost_per_mile=1, shuttle_cost_per_mile=1,
                          fare=2.5, buses_per_leg=1, bus_wait=0)
    return build_instance(["O", "D", "A", "B"], ["A", "B"], 2 * dist, dist, trips, econ)


def oracle_family_spec(seed: int, n_hubs: int | None = None) -> GenSpec:
    """Small instances with real choice trade-offs, sized for brute force."""
    return GenSpec(seed=seed, n_stops=12, n_hubs=n_hubs or 2 + seed % 2, n_trips=12,
                   choice_fractions=(0.2, 0.5, 0.75), alphas=(1.6, 1.3, 1.15), box=(8, 8),
                   max_riders=20,
                   econ=dict(theta=(0.001, 0.05, 0.3, 0.7)[seed % 4], buses_per_leg=1,
                             bus_wait=2.0, bus_cost_per_mile=2.0, fare=4.0))


@pytest.fixture
def tiny4():
    return tiny4_instance()


@pytest.fixture(scope="session")
def small3():
    return generate(oracle_family_spec(3, 3))
