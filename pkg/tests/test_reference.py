import numpy as np
import pytest

from cohprop.core import CoherentLabel, label_to_z, overlap_normalized
from cohprop.reference import (AccuracyError, DomainError, FockEngine1D, GridEngine2D, ResolutionError,
                               coherent_wavefunction)
from cohprop.systems import PolynomialHamiltonian, make_system


@pytest.fixture(scope="module")
def nelson_grid():
    s = make_system("nelson")
    return s, GridEngine2D(s.hamiltonian, box=((-3.0, 3.0), (-2.0, 4.0)), shape=(256, 256), dt=1e-3)


def _nelson_labels(s):
    lin = CoherentLabel.from_values([0.72, 0.24], [-0.75, -0.63], s.b, hbar=s.hbar)
    lout = CoherentLabel.from_values([0.80, 0.20], [-0.70, -0.60], s.b, hbar=s.hbar)
    return lin, lout


def test_fock_matches_harmonic_closed_form():
    s = make_system("harmonic", omega=1.0)
    eng = FockEngine1D(s.hamiltonian, 1.0, 60)
    zi, zo = 0.3 - 0.5j, 0.4 + 0.2j
    for T in (0.0, 0.7, 3.1, 9.4):
        ref = overlap_normalized(zo, zi * np.exp(-1j * T)) * np.exp(-0.5j * T)
        assert abs(eng.propagator(zi, zo, T) - ref) < 1e-12


def test_fock_zero_time_is_overlap(quartic_engine):
    for zi, zo in [(1.0 - 0.3j, -0.2 + 0.8j), (0.0, 0.5 + 0.5j)]:
        assert abs(quartic_engine.propagator(zi, zo, 0.0) - overlap_normalized(zo, zi)) < 1e-8


def test_fock_semigroup(quartic_engine):
    e = quartic_engine
    zi, zo = -1.414j, 0.5 + 0.5j
    cin, cout = e.number_state(zi), e.number_state(zo)
    for T1, T2 in [(0.3, 0.9), (1.7, 2.4)]:
        composed = np.conj(cout) @ e.evolution_matrix(T1) @ e.evolution_matrix(T2) @ cin
        assert abs(composed - e.propagator(zi, zo, T1 + T2)) < 1e-7


def test_fock_refuses_uncontained_state(quartic_engine):
    with pytest.raises(AccuracyError):
        quartic_engine.propagator(9.0, 0.0, 1.0)


def test_grid_zero_time_is_overlap(nelson_grid):
    s, eng = nelson_grid
    lin, lout = _nelson_labels(s)
    ref = overlap_normalized(label_to_z(lout), label_to_z(lin))
    assert abs(eng.propagator(lin, lout, 0.0) - ref) < 1e-8


def test_grid_semigroup(nelson_grid):
    s, eng = nelson_grid
    lin, lout = _nelson_labels(s)
    T1, T2 = 0.2, 0.3
    fwd = eng.evolve(eng.wavefunction(lin), T2)
    back = eng.evolve(eng.wavefunction(lout), -T1)
    assert abs(eng.overlap(back, fwd) - eng.propagator(lin, lout, T1 + T2)) < 1e-7


def test_grid_conserves_norm(nelson_grid):
    s, eng = nelson_grid
    lin, _ = _nelson_labels(s)
    psi = eng.evolve(eng.wavefunction(lin), 0.4)
    assert abs(eng.overlap(psi, psi) - 1) < 1e-8


def test_grid_matches_harmonic_closed_form():
    hbar = 0.05
    V = np.zeros((3, 3))
    V[2, 0] = V[0, 2] = 0.5
    eng = GridEngine2D(PolynomialHamiltonian(V, hbar=hbar), box=((-2.5, 2.5), (-2.5, 2.5)),
                       shape=(320, 320), dt=1e-3)
    b = [np.sqrt(hbar)] * 2
    lin = CoherentLabel.from_values([0.5, -0.3], [0.2, 0.4], b, hbar=hbar)
    lout = CoherentLabel.from_values([0.4, -0.1], [0.35, 0.3], b, hbar=hbar)
    Ts = np.array([0.25, 0.5])
    K = eng.sweep(lin, lout, Ts)
    zi, zo = label_to_z(lin), label_to_z(lout)
    ref = [overlap_normalized(zo, zi * np.exp(-1j * T)) * np.exp(-1j * T) for T in Ts]
    assert np.max(np.abs(K - ref)) < 1e-6


def test_grid_guards():
    s = make_system("nelson")
    lin, _ = _nelson_labels(s)
    coarse = GridEngine2D(s.hamiltonian, shape=(64, 64))
    with pytest.raises(ResolutionError):
        coarse.wavefunction(lin)
    small = GridEngine2D(s.hamiltonian, box=((0.0, 1.5), (-1.0, 1.0)), shape=(128, 128))
    with pytest.raises(DomainError):
        small.wavefunction(lin)


def test_grid_edge_detection():
    s = make_system("nelson")
    lab = CoherentLabel.from_values([0.0, 0.0], [3.0, 0.0], s.b, hbar=s.hbar)
    eng = GridEngine2D(s.hamiltonian, box=((-1.7, 1.7), (-1.7, 1.7)), shape=(160, 160), dt=1e-3)
    with pytest.raises(DomainError):
        eng.sweep(lab, lab, [1.0])


def test_wavefunction_normalized():
    lab = CoherentLabel.from_values([0.3], [0.4], [0.5], hbar=0.25)
    x = np.linspace(-6, 6, 2048, endpoint=False)
    psi = coherent_wavefunction(lab, [x], 0.25)
    assert abs(np.sum(np.abs(psi) ** 2) * (x[1] - x[0]) - 1) < 1e-12
