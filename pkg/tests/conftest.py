import time
import warnings

import numpy as np
import pytest

from cohprop.cli import bundled_config
from cohprop.reference import FockEngine1D

_RESULTS = []
TIMINGS = {}


class CriterionReport:
    """Collects one pass/fail line per acceptance criterion."""

    def __call__(self, number: int, title: str, passed: bool, detail: str = "") -> bool:
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}"
        if detail:
            line += f"  [{detail}]"
        _RESULTS.append((number, line))
        print(line)
        return passed


@pytest.fixture(scope="session")
def report():
    return CriterionReport()


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_RESULTS, key=lambda x: x[0]):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def quartic_cfg():
    return bundled_config("quartic")


@pytest.fixture(scope="session")
def quartic_problem(quartic_cfg):
    return quartic_cfg.problem()


@pytest.fixture(scope="session")
def quartic_engine(quartic_cfg):
    s = quartic_cfg.system()
    return FockEngine1D(s.hamiltonian, float(s.b[0]), 120)


@pytest.fixture(scope="session")
def quartic_families(quartic_cfg):
    from cohprop.cli import compute_families
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fams = compute_families(quartic_cfg)
    TIMINGS["quartic_families"] = time.perf_counter() - t0
    return fams


@pytest.fixture(scope="session")
def quartic_samples(quartic_cfg, quartic_problem, quartic_engine, quartic_families):
    from cohprop.propagator import assemble_sweep
    P = quartic_problem
    Ts = quartic_cfg.T_grid()
    K = quartic_engine.propagator(P.z_in[0], P.z_out[0], Ts)
    table = {round(float(t), 10): k for t, k in zip(Ts, K)}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return assemble_sweep(P, quartic_families, Ts, quartic_cfg.schedule(), quartic_cfg.contour_policy(),
                              exact=lambda T: table[round(float(T), 10)], tol=1e-6)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
