import numpy as np
import pytest

from cohprop.core import ConfigurationError
from cohprop.systems import fock_oracle, make_system, registered_systems


def _points(rng, n, ndof, scale=2.0):
    for _ in range(n):
        r = rng.uniform(0, scale, (2, ndof))
        ph = rng.uniform(0, 2 * np.pi, (2, ndof))
        yield r[0] * np.exp(1j * ph[0]), r[1] * np.exp(1j * ph[1])


def test_registry_and_unknown_system():
    assert {"quartic", "nelson", "harmonic", "free"} <= set(registered_systems())
    with pytest.raises(ConfigurationError):
        make_system("nope")


@pytest.mark.filterwarnings("ignore::cohprop.systems.TruncationWarning")
@pytest.mark.parametrize("name,n_max,tol,ndof", [("quartic", 60, 1e-9, 1), ("harmonic", 40, 1e-9, 1),
                                                 ("nelson", 40, 1e-8, 2)])
def test_smoothed_hamiltonian_matches_fock_oracle(name, n_max, tol, ndof, rng):
    s = make_system(name)
    for u, v in _points(rng, 20, ndof):
        h = complex(s.H(u, v))
        ref = fock_oracle(s, u, v, n_max)
        assert abs(h - ref) < tol * max(1.0, abs(ref))


def test_real_point_gives_real_energy(rng):
    s = make_system("nelson")
    for _ in range(5):
        u = rng.normal(size=2) + 1j * rng.normal(size=2)
        assert abs(complex(s.H(u, np.conj(u))).imag) < 1e-12


def test_analytic_gradient_matches_differences(rng):
    s = make_system("nelson")
    u = rng.normal(size=2) + 1j * rng.normal(size=2)
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    Hu, Hv = s.gradient(u, v)
    eps = 1e-6
    for k in range(2):
        d = np.zeros(2)
        d[k] = eps
        assert abs((s.H(u + d, v) - s.H(u - d, v)) / (2 * eps) - Hu[k]) < 1e-6
        assert abs((s.H(u, v + d) - s.H(u, v - d)) / (2 * eps) - Hv[k]) < 1e-6


def test_dimension_mismatch_is_rejected():
    s = make_system("quartic")
    with pytest.raises(ConfigurationError):
        s.H(np.zeros(2), np.zeros(2))
