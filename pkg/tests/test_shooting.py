import numpy as np
import pytest

from cohprop.core import CoherentLabel
from cohprop.shooting import (BoundaryProblem, ContinuationOptions, ConvergenceError, NewtonOptions,
                              ParameterError, RootSearchOptions, WGrid, continue_family, locate_caustic,
                              refine_root, root_velocity, scan_wplane, search_roots)
from cohprop.systems import make_system


def test_affine_root_solves_zero_time(quartic_problem):
    P = quartic_problem
    r = refine_root(P, 0.0, P.affine_root())
    assert r.iterations == 0
    assert abs(r.w1 - (0.25 - 1.25j)) < 1e-12


def test_short_time_root_moves_with_analytic_velocity(quartic_problem):
    P = quartic_problem
    w0 = P.affine_root()
    Hu, _ = P.system.gradient(P.z_in, P.zc_out)
    vel = -1j * Hu / P.hbar / P.dv0_dw
    for T in (1e-4, 1e-3, 1e-2):
        r = refine_root(P, T, w0)
        assert np.max(np.abs(r.residual)) < 1e-10
        assert abs(r.w1 - (w0 + T * vel)[0]) < 0.1 * T * abs(vel[0]) + T ** 2


def test_initial_point_keeps_u_fixed(quartic_problem, rng):
    P = quartic_problem
    for w in rng.normal(size=4) + 1j * rng.normal(size=4):
        tr = P.trajectory(w, 0.0)
        assert abs(tr.u0[0] - P.z_in[0]) < 1e-14


def test_mismatched_problem_rejected():
    s = make_system("quartic")
    lab2 = CoherentLabel.from_values([0.0, 0.0], [0.0, 0.0], [1.0, 1.0], hbar=1.0)
    lab1 = CoherentLabel.from_values([0.0], [0.0], [1.0], hbar=1.0)
    with pytest.raises(ParameterError):
        BoundaryProblem(s, lab1, lab2)
    wide = CoherentLabel.from_values([0.0], [0.0], [2.0], hbar=1.0)
    with pytest.raises(ParameterError):
        BoundaryProblem(s, wide, lab1)


def test_newton_failure_is_reported(quartic_problem):
    with pytest.raises(ConvergenceError):
        refine_root(quartic_problem, 0.7, 2.5 + 2.5j, NewtonOptions(max_iter=2, max_step=0.01))


def test_scan_seeds_lead_to_roots(quartic_problem):
    wm = scan_wplane(quartic_problem, 0.7, WGrid(n_alpha=101, n_beta=101))
    assert wm.Qpp.shape == (101, 101)
    found = []
    for s in wm.seeds:
        try:
            found.append(refine_root(quartic_problem, 0.7, s).w1)
        except ConvergenceError:
            pass
    f1 = refine_root(quartic_problem, 0.7, 0.02 - 1.42j).w1
    assert any(abs(w - f1) < 1e-8 for w in found)


def test_root_velocity_matches_differences(quartic_problem):
    P = quartic_problem
    r = refine_root(P, 0.5, 0.1 - 1.4j)
    h = 1e-5
    wp = refine_root(P, 0.5 + h, r.w + root_velocity(P, r) * h).w1
    wm = refine_root(P, 0.5 - h, r.w - root_velocity(P, r) * h).w1
    assert abs((wp - wm) / (2 * h) - root_velocity(P, r)[0]) < 1e-5


def test_continuation_keeps_maslov_phase_continuous(quartic_problem):
    P = quartic_problem
    r0 = refine_root(P, 0.0, P.affine_root())
    fam = continue_family(P, r0, np.round(np.arange(0, 3.0001, 0.02), 10), "f1")
    assert fam.lost_at is None and not fam.gaps
    ph = np.array([r.mvv_phase for r in fam.roots])
    assert np.max(np.abs(np.diff(ph))) < 0.5
    assert all(abs(r.phase_shift / (2 * np.pi) - round(r.phase_shift / (2 * np.pi))) < 1e-12
               for r in fam.roots)


def test_continuation_both_directions_agree(quartic_problem):
    P = quartic_problem
    r = refine_root(P, 1.0, 0.0 - 1.4j)
    Tg = np.round(np.arange(0.6, 1.0001, 0.02), 10)
    back = continue_family(P, r, Tg[::-1], "x")
    assert np.all(np.diff(back.T) > 0)
    fwd = continue_family(P, back.roots[0], Tg, "y")
    assert abs(fwd.roots[-1].w1 - r.w1) < 1e-8


def test_census_finds_three_families(quartic_families):
    ids = [f.id for f in quartic_families]
    assert ids == ["f1", "f2", "f3"]
    f2 = quartic_families[1]
    near = [(r.T, np.abs(r.w1)) for r in f2.roots if 2.0 <= r.T <= 4.5]
    T_min = min(near, key=lambda x: x[1])[0]
    assert abs(T_min - 3.2) <= 0.2


def test_caustic_bracket(quartic_problem, quartic_families):
    f2, f3 = quartic_families[1], quartic_families[2]
    ev = locate_caustic(quartic_problem, f2, f3, threshold=0.8)
    assert 2.5 <= ev.T_star <= 2.9
    assert 2.5 <= ev.T_min_distance <= 2.9
    assert ev.found


def test_random_search_is_deterministic():
    s = make_system("nelson")
    lab = CoherentLabel.from_values([0.72, 0.24], [-0.75, -0.63], s.b, hbar=s.hbar)
    P = BoundaryProblem(s, lab, lab)
    opts = RootSearchOptions(n_seeds=15, seed=3)
    a = search_roots(P, 1.0, opts)
    b = search_roots(P, 1.0, opts)
    assert len(a) == len(b) >= 1
    assert all(np.allclose(x.w, y.w) for x, y in zip(a, b))
    assert all(np.linalg.norm(x.residual) < 1e-10 for x in a)


def test_cutoff_exit_is_not_a_loss(quartic_problem):
    P = quartic_problem
    r = refine_root(P, 0.7, 0.02 - 1.42j)
    fam = continue_family(P, r, np.round(np.arange(0.7, 6.0001, 0.02), 10), "f1",
                          ContinuationOptions(w_cutoff=1.5))
    assert fam.exited_at is not None and fam.lost_at is None
