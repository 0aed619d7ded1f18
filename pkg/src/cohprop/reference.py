"""Exact coherent-state propagators.

* :class:`FockEngine1D` diagonalizes ``H`` in a truncated number basis.
* :class:`GridEngine2D` evolves a coherent state with the Strang-split
  Fourier method on a rectangular grid and overlaps it with the final state.

Both return the normalized ``K = <z''| exp(-i H T / hbar) |z'>``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import lgamma

import numpy as np
from scipy import fft as sfft

from .core import CoherentLabel, label_to_z
from .systems import PolynomialHamiltonian, fock_hamiltonian


class AccuracyError(RuntimeError):
    """Reference engine not converged at the requested settings."""


class DomainError(RuntimeError):
    """Wavefunction leaked to the edge of the grid."""


class ResolutionError(ValueError):
    pass


def number_amplitudes(z: complex, n_max: int) -> np.ndarray:
    """``<n|z> = exp(-|z|^2/2) z^n / sqrt(n!)`` for n < n_max."""
    n = np.arange(n_max)
    logfac = np.array([0.5 * lgamma(k + 1.0) for k in n])
    if z == 0:
        return (n == 0).astype(complex)
    return np.exp(-0.5 * abs(z) ** 2 + n * np.log(complex(z)) - logfac)


class FockEngine1D:
    """Spectral decomposition of a 1-DOF polynomial Hamiltonian.

    The basis is the number basis of the oscillator with length scale ``b``
    (the coherent-state width), so coherent-state amplitudes are analytic.
    """

    def __init__(self, hamiltonian: PolynomialHamiltonian, b: float, n_max: int = 120,
                 check_convergence: bool = True, n_levels: int = 20):
        if hamiltonian.ndof != 1:
            raise ValueError("FockEngine1D needs a 1-DOF Hamiltonian")
        self.hamiltonian = hamiltonian
        self.b = float(b)
        self.hbar = hamiltonian.hbar
        self.n_max = n_max
        H = fock_hamiltonian(hamiltonian, b, n_max)
        self.eigenvalues, self.eigenvectors = np.linalg.eigh(H)
        self.spectrum_shift = None
        if check_convergence:
            H2 = fock_hamiltonian(hamiltonian, b, n_max + 20)
            e2 = np.linalg.eigvalsh(H2)
            k = min(n_levels, n_max // 4)
            self.spectrum_shift = float(np.max(np.abs(e2[:k] - self.eigenvalues[:k])))

    def amplitudes(self, z) -> np.ndarray:
        """Eigenbasis components ``<phi_j|z>``."""
        z = complex(np.atleast_1d(z)[0])
        c = number_amplitudes(z, self.n_max)
        tail = np.sum(np.abs(c[-10:]) ** 2)
        if tail > 1e-20:
            raise AccuracyError(f"coherent state |z|={abs(z):.3g} not contained in n_max={self.n_max}; "
                                f"try n_max={int(self.n_max * 1.5)}")
        return self.eigenvectors.T @ c

    def propagator(self, z_in, z_out, T) -> np.ndarray | complex:
        """Normalized ``K`` for scalar or array ``T``."""
        a_in = self.amplitudes(z_in)
        a_out = self.amplitudes(z_out)
        w = np.conj(a_out) * a_in
        T = np.asarray(T, float)
        phases = np.exp(-1j * np.multiply.outer(T, self.eigenvalues) / self.hbar)
        K = phases @ w
        return complex(K) if K.ndim == 0 else K

    def evolution_matrix(self, T: float) -> np.ndarray:
        """``exp(-iHT/hbar)`` in the number basis."""
        ph = np.exp(-1j * T * self.eigenvalues / self.hbar)
        return (self.eigenvectors * ph) @ self.eigenvectors.T

    def number_state(self, z) -> np.ndarray:
        """Number-basis components ``<n|z>``; see :meth:`amplitudes` for the accuracy check."""
        self.amplitudes(z)
        return number_amplitudes(complex(np.atleast_1d(z)[0]), self.n_max)


def exact_k_fock(engine: FockEngine1D, z_in, z_out, T):
    return engine.propagator(z_in, z_out, T)


# --------------------------------------------------------------- grid engine

def coherent_wavefunction(label: CoherentLabel, axes, hbar: float, check: bool = True) -> np.ndarray:
    """``<x|z>`` on a tensor grid (list of 1D axes, one per DOF).

    Convention: ``pi^{-1/4} b^{-1/2} exp(-(x-q)^2/2b^2 + i p x/hbar - i p q/2hbar)``
    per DOF, which reproduces the closed-form coherent-state overlap.
    """
    axes = [np.asarray(a, float) for a in axes]
    psi = np.ones([a.size for a in axes], complex)
    for k, x in enumerate(axes):
        q, p, b = label.q[k], label.p[k], label.b[k]
        dx = x[1] - x[0]
        if check:
            if b / dx < 8:
                raise ResolutionError(f"grid too coarse: {b / dx:.1f} points per width (need 8)")
            if q - 8 * b < x[0] - dx / 2 or q + 8 * b > x[-1] + dx / 2:
                raise DomainError(f"grid axis {k} does not cover q +- 8b")
        f = (np.pi * b * b) ** -0.25 * np.exp(-(x - q) ** 2 / (2 * b * b) + 1j * p * x / hbar
                                              - 0.5j * p * q / hbar)
        shape = [1] * len(axes)
        shape[k] = x.size
        psi = psi * f.reshape(shape)
    return psi


@dataclass
class GridEngine2D:
    """Strang-split Fourier propagation for ``P^2/2m + V(Q)`` on a 2D box."""

    hamiltonian: PolynomialHamiltonian
    box: tuple = ((-3.0, 3.0), (-2.0, 4.0))
    shape: tuple = (256, 256)
    dt: float = 5e-4
    tail_tol: float = 1e-10
    norm_tol: float = 1e-8
    strict_resolution: bool = True
    workers: int = 1
    axes: list = field(init=False)

    def __post_init__(self):
        self.hbar = self.hamiltonian.hbar
        self.axes = [np.linspace(lo, hi, n, endpoint=False) for (lo, hi), n in zip(self.box, self.shape)]
        self.dx = np.array([a[1] - a[0] for a in self.axes])
        X, Y = np.meshgrid(*self.axes, indexing="ij")
        from numpy.polynomial import polynomial as npoly
        self.V = npoly.polyval2d(X, Y, self.hamiltonian.potential).real
        ks = [2 * np.pi * np.fft.fftfreq(n, d) for n, d in zip(self.shape, self.dx)]
        KX, KY = np.meshgrid(*ks, indexing="ij")
        self.kinetic = (self.hbar ** 2) * (KX ** 2 + KY ** 2) / (2 * self.hamiltonian.mass)
        self._set_tables(self.dt)
        self._edge = np.zeros(self.shape, bool)
        w = 4
        self._edge[:w, :] = self._edge[-w:, :] = True
        self._edge[:, :w] = self._edge[:, -w:] = True

    def _set_tables(self, dt):
        self._half_v = np.exp(-0.5j * dt * self.V / self.hbar)
        self._kin = np.exp(-1j * dt * self.kinetic / self.hbar)

    @property
    def cell(self) -> float:
        return float(np.prod(self.dx))

    def wavefunction(self, label: CoherentLabel) -> np.ndarray:
        return coherent_wavefunction(label, self.axes, self.hbar, check=self.strict_resolution)

    def overlap(self, bra: np.ndarray, ket: np.ndarray) -> complex:
        return complex(np.vdot(bra, ket) * self.cell)

    def step(self, psi: np.ndarray, n: int) -> np.ndarray:
        for _ in range(n):
            psi = self._half_v * psi
            psi = sfft.ifft2(self._kin * sfft.fft2(psi, workers=self.workers), workers=self.workers)
            psi = self._half_v * psi
        return psi

    def evolve(self, psi: np.ndarray, T: float) -> np.ndarray:
        """``exp(-iHT/hbar) psi`` for either sign of ``T``."""
        sign = 1.0 if T >= 0 else -1.0
        n = int(round(abs(T) / self.dt))
        rem = abs(T) - n * self.dt
        try:
            self._set_tables(sign * self.dt)
            psi = self.step(psi, n)
            if abs(rem) > 1e-14:
                self._set_tables(sign * rem)
                psi = self.step(psi, 1)
        finally:
            self._set_tables(self.dt)
        return psi

    def sweep(self, label_in: CoherentLabel, label_out: CoherentLabel, times) -> np.ndarray:
        """``K(T)`` at every requested time from one sequential evolution."""
        times = np.asarray(times, float)
        order = np.argsort(times)
        psi = self.wavefunction(label_in)
        bra = self.wavefunction(label_out)
        norm0 = self.overlap(psi, psi).real
        out = np.empty(times.size, complex)
        t = 0.0
        self.max_tail = 0.0
        self.norm_drift = 0.0
        for idx in order:
            target = times[idx]
            nsteps = int(round((target - t) / self.dt))
            rem = (target - t) - nsteps * self.dt
            psi = self.step(psi, nsteps)
            t += nsteps * self.dt
            if abs(rem) > 1e-14:
                self._set_tables(rem)
                psi_eval = self.step(psi, 1)
                self._set_tables(self.dt)
            else:
                psi_eval = psi
            out[idx] = self.overlap(bra, psi_eval)
            dens = np.abs(psi_eval) ** 2
            tail = float(dens[self._edge].max() / dens.max())
            self.max_tail = max(self.max_tail, tail)
            self.norm_drift = max(self.norm_drift, abs(self.overlap(psi_eval, psi_eval).real - norm0))
        if self.max_tail > self.tail_tol:
            raise DomainError(f"wavefunction reached the grid edge (tail {self.max_tail:.2e})")
        if self.norm_drift > self.norm_tol:
            raise AccuracyError(f"norm drift {self.norm_drift:.2e}")
        return out

    def propagator(self, label_in, label_out, T) -> complex:
        return complex(self.sweep(label_in, label_out, [T])[0])


def exact_k_grid(engine: GridEngine2D, label_in, label_out, T):
    T = np.atleast_1d(T)
    K = engine.sweep(label_in, label_out, T)
    return complex(K[0]) if K.size == 1 else K
