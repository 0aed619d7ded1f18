"""Smoothed Hamiltonians ``H~(u, v) = <v|H|u> / <v|u>`` for polynomial systems.

A :class:`PolynomialHamiltonian` describes ``H = sum_k P_k^2 / 2m + V(Q)`` with
a polynomial potential. Combined with coherent-state widths it yields a
:class:`PolySystem` whose smoothed Hamiltonian is obtained by normal ordering:
the kinetic term becomes ``-(c^2/4m)((u-v)^2 - 1)`` and the potential is the
Gaussian average of ``V`` with variance ``b^2/2`` evaluated at
``X = b (u+v)/sqrt(2)``.  :func:`fock_oracle` evaluates the same quantity by
brute force in a truncated number basis.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from math import comb, factorial
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as npoly

from .core import ConfigurationError, SQRT2, check_widths

_REGISTRY: dict[str, Callable[..., "SmoothedSystem"]] = {}


def register_system(name: str):
    def deco(factory):
        _REGISTRY[name] = factory
        return factory
    return deco


def make_system(name: str, **params) -> "SmoothedSystem":
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise ConfigurationError(f"unknown system {name!r}; known: {sorted(_REGISTRY)}") from None
    return factory(**params)


def registered_systems() -> list[str]:
    return sorted(_REGISTRY)


@dataclass(frozen=True)
class PolynomialHamiltonian:
    """``H = sum_k P_k^2/(2 mass) + V(Q)``.

    ``potential`` is a coefficient array with one axis per DOF, entry
    ``[a1, a2, ...]`` multiplying ``Q1**a1 * Q2**a2 ...``.
    """

    potential: np.ndarray
    hbar: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "potential", np.asarray(self.potential, dtype=float))
        if self.potential.ndim not in (1, 2):
            raise ConfigurationError("only 1 or 2 degrees of freedom are supported")
        if not np.all(np.isreal(self.potential)):
            raise ConfigurationError("potential coefficients must be real")

    @property
    def ndof(self) -> int:
        return self.potential.ndim

    def classical(self, Q, P):
        """Classical energy at (possibly complex) ``Q, P`` arrays of shape (..., N)."""
        Q = np.asarray(Q)
        P = np.asarray(P)
        kin = np.sum(P ** 2, axis=-1) / (2 * self.mass)
        return kin + _polyval(self.potential, Q)


# for backward compatibility with the data model naming
QuantumSystem1D = PolynomialHamiltonian


def _polyval(coeffs: np.ndarray, X: np.ndarray):
    if coeffs.ndim == 1:
        return npoly.polyval(X[..., 0], coeffs)
    return npoly.polyval2d(X[..., 0], X[..., 1], coeffs)


def _gaussian_moments(sigma2: float, n: int) -> np.ndarray:
    """``E[xi^k]`` for ``xi ~ N(0, sigma2)``, k = 0..n."""
    m = np.zeros(n + 1)
    m[0] = 1.0
    for k in range(2, n + 1, 2):
        m[k] = m[k - 2] * (k - 1) * sigma2
    return m


def gaussian_smooth(coeffs: np.ndarray, variances) -> np.ndarray:
    """Coefficients of ``E[V(X + xi)]`` with independent Gaussian ``xi_k``."""
    out = np.asarray(coeffs, dtype=float)
    for axis, var in enumerate(np.atleast_1d(variances)):
        n = out.shape[axis] - 1
        mom = _gaussian_moments(float(var), n)
        S = np.zeros((n + 1, n + 1))
        for a in range(n + 1):
            for k in range(a + 1):
                S[a - k, a] += comb(a, k) * mom[k]
        out = np.moveaxis(np.tensordot(S, out, axes=([1], [axis])), 0, axis)
    return out


class SmoothedSystem:
    """Base class: the smoothed Hamiltonian and its holomorphic derivatives.

    Subclasses implement :meth:`H`. Derivatives default to central finite
    differences (``analytic_derivatives`` is then False).
    Arrays ``u, v`` have shape ``(..., N)``.
    """

    name = "generic"
    analytic_derivatives = False
    fd_step = 1e-5

    def __init__(self, ndof: int, hbar: float, b, params: dict | None = None):
        if ndof not in (1, 2):
            raise ConfigurationError("ndof must be 1 or 2")
        self.ndof = ndof
        self.hbar = float(hbar)
        self.b = np.broadcast_to(np.atleast_1d(np.asarray(b, float)), (ndof,)).copy()
        self.c = self.hbar / self.b
        check_widths(self.b, self.c, self.hbar)
        self.params = dict(params or {})

    def __repr__(self):
        return f"{type(self).__name__}(name={self.name!r}, ndof={self.ndof}, hbar={self.hbar}, params={self.params})"

    def _check(self, u, v):
        u = np.asarray(u, complex)
        v = np.asarray(v, complex)
        if u.shape[-1:] != (self.ndof,) or v.shape != u.shape:
            raise ConfigurationError(
                f"point dimension mismatch: system has {self.ndof} DOF, got u{u.shape}, v{v.shape}")
        return u, v

    def H(self, u, v):
        raise NotImplementedError

    def gradient(self, u, v):
        """``(dH/du, dH/dv)``, each of shape (..., N)."""
        u, v = self._check(u, v)
        h = self.fd_step
        Hu = np.empty(u.shape, complex)
        Hv = np.empty(u.shape, complex)
        for k in range(self.ndof):
            e = np.zeros(self.ndof)
            e[k] = h
            Hu[..., k] = (self.H(u + e, v) - self.H(u - e, v)) / (2 * h)
            Hv[..., k] = (self.H(u, v + e) - self.H(u, v - e)) / (2 * h)
        return Hu, Hv

    def hessian(self, u, v):
        """``(Huu, Huv, Hvv)``, each (..., N, N); ``Huv[j, k] = d2H/du_j dv_k``."""
        u, v = self._check(u, v)
        h = self.fd_step
        n = self.ndof
        Huu = np.empty(u.shape + (n,), complex)
        Huv = np.empty_like(Huu)
        Hvv = np.empty_like(Huu)
        for k in range(n):
            e = np.zeros(n)
            e[k] = h
            gu_p, gv_p = self.gradient(u + e, v)
            gu_m, gv_m = self.gradient(u - e, v)
            Huu[..., k, :] = (gu_p - gu_m) / (2 * h)
            _, gv_vp = self.gradient(u, v + e)
            _, gv_vm = self.gradient(u, v - e)
            Hvv[..., k, :] = (gv_vp - gv_vm) / (2 * h)
            Huv[..., k, :] = (gv_p - gv_m) / (2 * h)
        return Huu, Huv, Hvv

    def derivatives(self, u, v):
        """Gradient and Hessian blocks in one call (used by the integrator)."""
        return self.gradient(u, v) + self.hessian(u, v)


class PolySystem(SmoothedSystem):
    """Smoothed Hamiltonian of a :class:`PolynomialHamiltonian` with closed forms."""

    analytic_derivatives = True

    def __init__(self, hamiltonian: PolynomialHamiltonian, b, name: str = "poly",
                 params: dict | None = None):
        super().__init__(hamiltonian.ndof, hamiltonian.hbar, b, params)
        self.name = name
        self.hamiltonian = hamiltonian
        self.mass = hamiltonian.mass
        # Gaussian average of V over |<x|z>|^2, variance b^2/2 per DOF
        self.Vs = gaussian_smooth(hamiltonian.potential, self.b ** 2 / 2)
        n = self.ndof
        self._dV = [npoly.polyder(self.Vs, axis=k) for k in range(n)]
        self._d2V = [[npoly.polyder(self._dV[j], axis=k) for k in range(n)] for j in range(n)]
        self._kin = self.c ** 2 / (2 * self.mass)

    def position(self, u, v):
        return self.b * (u + v) / SQRT2

    def H(self, u, v):
        u, v = self._check(u, v)
        X = self.position(u, v)
        kin = -0.5 * np.sum(self._kin * ((u - v) ** 2 - 1), axis=-1)
        return kin + _polyval(self.Vs, X)

    def gradient(self, u, v):
        u, v = self._check(u, v)
        X = self.position(u, v)
        dV = np.stack([_polyval(d, X) for d in self._dV], axis=-1) * (self.b / SQRT2)
        kin = self._kin * (u - v)
        return dV - kin, dV + kin

    def hessian(self, u, v):
        u, v = self._check(u, v)
        X = self.position(u, v)
        n = self.ndof
        d2 = np.empty(u.shape + (n,), complex)
        for j in range(n):
            for k in range(n):
                d2[..., j, k] = _polyval(self._d2V[j][k], X) * (self.b[j] * self.b[k] / 2)
        kin = np.diag(self._kin)
        return d2 - kin, d2 + kin, d2 - kin

    def derivatives(self, u, v):
        return self.gradient(u, v) + self.hessian(u, v)


def smoothed_H(system: SmoothedSystem, point) -> complex:
    return complex(system.H(np.atleast_1d(point.u), np.atleast_1d(point.v)))


def smoothed_derivatives(system: SmoothedSystem, point):
    """Gradient and Hessian blocks ``(Hu, Hv, Huu, Huv, Hvv)`` at one point."""
    return system.derivatives(np.atleast_1d(point.u), np.atleast_1d(point.v))


# ---------------------------------------------------------------- Fock oracle

def ladder(n: int) -> np.ndarray:
    """Annihilation operator in the truncated number basis ``0..n-1``."""
    return np.diag(np.sqrt(np.arange(1, n)), 1)


def fock_hamiltonian(hamiltonian: PolynomialHamiltonian, b, n_max: int) -> np.ndarray:
    """Matrix of ``H`` in the number basis ``0..n_max-1`` per DOF (tensor product).

    Powers of ``Q`` are formed in a padded basis and then truncated, so the
    returned block is exact.
    """
    b = np.broadcast_to(np.atleast_1d(np.asarray(b, float)), (hamiltonian.ndof,))
    hbar = hamiltonian.hbar
    V = hamiltonian.potential
    deg = max(V.shape) - 1
    pad = n_max + max(deg, 2) + 1
    a = ladder(pad)
    ops_q, ops_p = [], []
    for k in range(hamiltonian.ndof):
        ck = hbar / b[k]
        ops_q.append(b[k] * (a + a.T) / SQRT2)
        ops_p.append(ck * (a - a.T) / (1j * SQRT2))
    powers = []
    for k in range(hamiltonian.ndof):
        pw = [np.eye(pad)]
        for _ in range(V.shape[k] - 1):
            pw.append(pw[-1] @ ops_q[k])
        powers.append([m[:n_max, :n_max] for m in pw])
    kin = [((p @ p).real / (2 * hamiltonian.mass))[:n_max, :n_max] for p in ops_p]
    eye = np.eye(n_max)
    if hamiltonian.ndof == 1:
        H = kin[0] + sum(V[i] * powers[0][i] for i in range(V.shape[0]) if V[i] != 0)
    else:
        H = np.kron(kin[0], eye) + np.kron(eye, kin[1])
        for i, j in zip(*np.nonzero(V)):
            H = H + V[i, j] * np.kron(powers[0][i], powers[1][j])
    return H


class TruncationWarning(UserWarning):
    pass


_fock_cache: dict = {}


def fock_oracle(system: PolySystem, u, v, n_max: int, tol: float = 1e-14) -> complex:
    """``<v|H|u>/<v|u>`` by contraction with Bargmann vectors ``u^n/sqrt(n!)``."""
    u = np.atleast_1d(np.asarray(u, complex))
    v = np.atleast_1d(np.asarray(v, complex))
    system._check(u, v)
    key = (id(system.hamiltonian), tuple(system.b), n_max)
    H = _fock_cache.get(key)
    if H is None:
        H = fock_hamiltonian(system.hamiltonian, system.b, n_max)
        H.setflags(write=False)
        _fock_cache[key] = H
    n = np.arange(n_max)
    lognf = np.array([0.5 * np.log(float(factorial(k))) for k in n])
    kets, bras = [], []
    for k in range(system.ndof):
        with np.errstate(divide="ignore"):
            ket = np.exp(n * np.log(u[k] + 0j) - lognf) if u[k] != 0 else (n == 0).astype(complex)
            bra = np.exp(n * np.log(v[k] + 0j) - lognf) if v[k] != 0 else (n == 0).astype(complex)
        tail = max(abs(ket[-1]), abs(bra[-1]))
        if tail > tol:
            warnings.warn(f"Bargmann tail {tail:.2e} exceeds {tol:.0e} at n_max={n_max}",
                          TruncationWarning, stacklevel=2)
        kets.append(ket)
        bras.append(bra)
    ket, bra = kets[0], bras[0]
    for k in range(1, system.ndof):
        ket = np.kron(ket, kets[k])
        bra = np.kron(bra, bras[k])
    return complex(bra @ (H @ ket) / np.exp(np.sum(u * v)))


# ------------------------------------------------------------ bundled systems

@register_system("harmonic")
def harmonic(omega: float = 1.0, hbar: float = 1.0, mass: float = 1.0, b: float | None = None):
    if b is None:
        b = np.sqrt(hbar / (mass * omega))
    ham = PolynomialHamiltonian([0.0, 0.0, 0.5 * mass * omega ** 2], hbar=hbar, mass=mass)
    return PolySystem(ham, b, name="harmonic", params={"omega": omega, "mass": mass})


@register_system("quartic")
def quartic(B: float = 0.1, hbar: float = 1.0, b: float = 1.0):
    """``H = P^2/2 + Q^2/2 + B Q^4``."""
    ham = PolynomialHamiltonian([0.0, 0.0, 0.5, 0.0, B], hbar=hbar)
    return PolySystem(ham, b, name="quartic", params={"B": B})


@register_system("nelson")
def nelson(hbar: float = 0.05, b=0.2, mu: float = 0.05):
    """``H = (px^2 + py^2)/2 + (y - x^2/2)^2 + mu x^2``."""
    V = np.zeros((5, 3))
    V[0, 2] = 1.0        # y^2
    V[2, 1] = -1.0       # -x^2 y
    V[4, 0] = 0.25       # x^4 / 4
    V[2, 0] = mu         # mu x^2
    ham = PolynomialHamiltonian(V, hbar=hbar)
    return PolySystem(ham, b, name="nelson", params={"mu": mu})


@register_system("free")
def free(hbar: float = 1.0, b=1.0, ndof: int = 1, mass: float = 1.0):
    V = np.zeros((1,) * ndof)
    ham = PolynomialHamiltonian(V, hbar=hbar, mass=mass)
    return PolySystem(ham, b, name="free", params={"mass": mass})
