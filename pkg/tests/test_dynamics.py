import numpy as np
import pytest

from cohprop.core import CoherentLabel
from cohprop.dynamics import (DivergedError, IntegratorOptions, boundary_action, integrate,
                              tangent_fd_oracle)
from cohprop.shooting import BoundaryProblem, NewtonOptions, continue_family, refine_root
from cohprop.systems import make_system


def _start(rng, n, scale=1.0):
    u = rng.normal(scale=scale, size=n) + 1j * rng.normal(scale=scale, size=n)
    return u, np.conj(u) + 0.2 * (rng.normal(size=n) + 1j * rng.normal(size=n))


def test_zero_time_is_identity():
    s = make_system("quartic")
    tr = integrate(s, 0.3 + 0.1j, 0.2 - 0.4j, 0.0)
    assert np.allclose(tr.M, np.eye(2))
    assert tr.action_integral == 0 and tr.G == 0


def test_harmonic_flow_is_rotation(rng):
    s = make_system("harmonic", omega=1.0)
    for _ in range(5):
        u0, v0 = _start(rng, 1)
        T = rng.uniform(0, 10)
        tr = integrate(s, u0, v0, T)
        assert abs(tr.uT[0] - u0[0] * np.exp(-1j * T)) < 1e-9
        assert abs(tr.vT[0] - v0[0] * np.exp(1j * T)) < 1e-9
        assert abs(tr.Mvv_scalar - np.exp(1j * T)) < 1e-9


@pytest.mark.parametrize("name", ["quartic", "nelson"])
def test_compiled_path_matches_solve_ivp(name, rng):
    s = make_system(name)
    u0, v0 = _start(rng, s.ndof, 0.5)
    fast = integrate(s, u0, v0, 1.5)
    ref = integrate(s, u0, v0, 1.5, IntegratorOptions(method="DOP853", rtol=1e-11, atol=1e-13))
    assert np.allclose(fast.uT, ref.uT, atol=1e-8)
    assert np.allclose(fast.M, ref.M, atol=1e-7)
    assert abs(fast.action_integral - ref.action_integral) < 1e-8
    assert abs(fast.G - ref.G) < 1e-8
    assert abs(fast.final_phase - ref.final_phase) < 1e-8


@pytest.mark.parametrize("name", ["quartic", "nelson"])
def test_energy_conserved(name, rng):
    s = make_system(name)
    u0, v0 = _start(rng, s.ndof, 0.5)
    assert integrate(s, u0, v0, 2.0).energy_drift < 1e-7


@pytest.mark.parametrize("name", ["quartic", "nelson"])
def test_symplectic_and_variational(name, rng):
    s = make_system(name)
    u0, v0 = _start(rng, s.ndof, 0.5)
    tr = integrate(s, u0, v0, 1.0)
    assert abs(np.linalg.det(tr.M) - 1) < 1e-8
    fd = tangent_fd_oracle(s, u0, v0, 1.0)
    assert np.max(np.abs(tr.M - fd)) < 1e-5 * np.max(np.abs(fd))


def test_divergence_is_reported():
    s = make_system("quartic")
    with pytest.raises(DivergedError) as exc:
        integrate(s, 3j, 3j, 20.0, IntegratorOptions(blowup=1e2))
    assert exc.value.t_escape < 20.0


def test_phase_is_continuous_along_samples(rng):
    s = make_system("quartic")
    u0, v0 = _start(rng, 1, 0.7)
    tr = integrate(s, u0, v0, 3.0)
    assert np.max(np.abs(np.diff(tr.mvv_phase))) < np.pi / 2
    assert abs(np.exp(1j * tr.final_phase) - tr.Mvv_scalar / abs(tr.Mvv_scalar)) < 1e-9


def _quartic_root(T=0.7):
    s = make_system("quartic")
    lab_in = CoherentLabel.from_values([0.0], [-2.0], s.b, hbar=s.hbar)
    lab_out = CoherentLabel.from_values([0.5], [0.5], s.b, hbar=s.hbar)
    P = BoundaryProblem(s, lab_in, lab_out)
    r0 = refine_root(P, 0.01, P.affine_root())
    fam = continue_family(P, r0, np.round(np.arange(0.02, T + 1e-9, 0.02), 10))
    return P, fam.roots[-1]


def test_action_derivative_in_initial_label():
    P, r = _quartic_root()
    s, d = P.system, 1e-5
    b = s.b[0]

    def S(dq):
        li = P.label_in.with_qp(P.label_in.q + dq, P.label_in.p)
        Q = BoundaryProblem(s, li, P.label_out)
        return refine_root(Q, r.T, r.w, NewtonOptions(tol=1e-13)).action

    dS = (S(d) - S(-d)) / (2 * d) * np.sqrt(2) * b
    ref = -1j * s.hbar * r.trajectory.v0[0]
    assert abs(dS - ref) < 1e-5 * abs(ref)


def test_boundary_action_terms():
    P, r = _quartic_root()
    tr = r.trajectory
    S = boundary_action(tr, P.z_in, P.zc_out)
    extra = -0.5j * P.hbar * (tr.uT[0] * P.zc_out[0] + P.z_in[0] * tr.v0[0])
    assert abs(S - tr.action_integral - extra) < 1e-14
