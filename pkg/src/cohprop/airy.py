"""Airy-type integrals ``F_i(W) = (1/2pi) int_{C_i} exp{i(W t + t^3/3)} dt``.

``C_1`` is the real axis (``F_1 = Ai``); ``C_2``, ``C_3`` are its rotations by
``exp(+-2 pi i/3)`` so that ``F_i(W) = w_i Ai(w_i W)`` and
``F_1 + F_2 + F_3 = 0``.

``Ai`` itself is evaluated by its Maclaurin series or by the Poincare
asymptotic expansions, whichever has the smaller estimated absolute error
(series: ``eps * exp|zeta|``; asymptotics: ``exp(-2|zeta|) |Ai|``).  The
series is always used for ``|z| <= 4`` and never beyond ``|z| = 12``; past
``|z| = 6`` it is summed in extended precision.  :func:`airy_contour_quadrature`
is an independent check that integrates the defining integral directly.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

AI0 = 0.355028053887817239260063186004
AIP0 = -0.258819403792806798405183560189
SERIES_RADIUS = 4.0
ASYMPTOTIC_RADIUS = 12.0
_SQRTPI = np.sqrt(np.pi)


class AiryOverflowError(OverflowError):
    """Result not representable without the scaled form."""


@dataclass(frozen=True)
class AiryContour:
    index: int

    def __post_init__(self):
        if self.index not in (1, 2, 3):
            raise ValueError("contour index must be 1, 2 or 3")

    @property
    def rotation(self) -> complex:
        return {1: 1.0 + 0j, 2: np.exp(2j * np.pi / 3), 3: np.exp(-2j * np.pi / 3)}[self.index]


CONTOURS = (AiryContour(1), AiryContour(2), AiryContour(3))


def _series_mp(z: complex, turns: int = 0):
    """Maclaurin series in 32-digit arithmetic at ``exp(2 pi i turns/3) z``.

    Used for ``|z| > 6`` where the terms grow to ``exp|zeta|``; the rotation is
    applied here too because rounding the argument alone costs ``|Ai'| eps``.
    """
    import mpmath as mp

    with mp.workdps(32):
        zm = mp.mpc(z) * mp.expjpi(mp.mpf(2 * turns) / 3)
        z3 = zm ** 3
        f, g, fp, gp = mp.mpc(1), zm, mp.mpc(0), mp.mpc(1)
        tf, tg = mp.mpc(1), zm
        k = 0
        while True:
            k += 1
            tf = tf * z3 / ((3 * k - 1) * (3 * k))
            tg = tg * z3 / ((3 * k) * (3 * k + 1))
            f += tf
            g += tg
            fp += 3 * k * tf / zm
            gp += (3 * k + 1) * tg / zm
            if abs(tf) + abs(tg) < mp.mpf(10) ** -34 * (abs(f) + abs(g)) and k > 3:
                break
        a0 = mp.mpf(1) / (mp.power(3, mp.mpf(2) / 3) * mp.gamma(mp.mpf(2) / 3))
        a1 = -mp.mpf(1) / (mp.power(3, mp.mpf(1) / 3) * mp.gamma(mp.mpf(1) / 3))
        return complex(a0 * f + a1 * g), complex(a0 * fp + a1 * gp)


def _series(z: complex):
    """Ai, Ai' from the Maclaurin series."""
    if abs(z) > 6.0:
        return _series_mp(z)
    z3 = z ** 3
    # f = sum 3^k (1/3)_k z^{3k}/(3k)!,  g = sum 3^k (2/3)_k z^{3k+1}/(3k+1)!
    f = 1.0 + 0j
    g = z
    fp = 0j
    gp = 1.0 + 0j
    tf = 1.0 + 0j
    tg = z
    k = 0
    while True:
        k += 1
        tf = tf * z3 / ((3 * k - 1) * (3 * k))
        tg = tg * z3 / ((3 * k) * (3 * k + 1))
        f += tf
        g += tg
        fp += 3 * k * tf / z if z != 0 else 0
        gp += (3 * k + 1) * tg / z if z != 0 else 0
        if abs(tf) + abs(tg) < 1e-18 * (abs(f) + abs(g)) and k > 3:
            break
        if k > 500:
            break
    return AI0 * f + AIP0 * g, AI0 * fp + AIP0 * gp


def _uv_coeffs(n: int):
    u = np.empty(n)
    v = np.empty(n)
    u[0] = 1.0
    v[0] = 1.0
    for k in range(1, n):
        u[k] = u[k - 1] * (6 * k - 5) * (6 * k - 3) * (6 * k - 1) / ((2 * k - 1) * 216 * k)
        v[k] = -u[k] * (6 * k + 1) / (6 * k - 1)
    return u, v


_U, _V = _uv_coeffs(40)


def _sum_asym(coeffs, zeta, parity=None):
    """Optimally truncated ``sum (-1)^k c_k / zeta^k`` (optionally even/odd k only)."""
    total = 0j
    prev = np.inf
    for k in range(coeffs.size):
        if parity is not None and k % 2 != parity:
            continue
        sgn = (-1) ** (k // 2 if parity is not None else k)
        term = sgn * coeffs[k] / zeta ** k
        if abs(term) > prev:
            break
        total += term
        prev = abs(term)
        if prev < 1e-17 * abs(total):
            break
    return total


def airy_scaled(z: complex, turns: int = 0):
    """``(ai, aip, s)`` with ``Ai(x) = ai * exp(s)``, ``Ai'(x) = aip * exp(s)`` at
    ``x = exp(2 pi i turns/3) z``."""
    z = complex(z)
    x = z * np.exp(2j * np.pi * turns / 3) if turns else z
    if abs(z) <= SERIES_RADIUS:
        a, ap = _series(x)
        return a, ap, 0.0
    a, ap, s = _asymptotic(x)
    if abs(z) < ASYMPTOTIC_RADIUS:
        zeta = (2.0 / 3.0) * abs(z) ** 1.5
        if 2.2e-16 * np.exp(zeta) < np.exp(s - 2 * zeta):
            a, ap = _series_mp(z, turns) if abs(z) > 6.0 else _series(x)
            return a, ap, 0.0
    return a, ap, s


def _asymptotic(z: complex):
    if abs(np.angle(z)) <= 2 * np.pi / 3:
        zeta = (2.0 / 3.0) * z ** 1.5
        q = z ** 0.25
        a = _sum_asym(_U, zeta) / (2 * _SQRTPI * q)
        ap = -q * _sum_asym(_V, zeta) / (2 * _SQRTPI)
        s = -zeta
        return a * np.exp(1j * s.imag), ap * np.exp(1j * s.imag), float(s.real)
    # Ai(-x) form for |arg(-z)| < pi/3
    x = -z
    zeta = (2.0 / 3.0) * x ** 1.5
    q = x ** 0.25
    P = _sum_asym(_U, zeta, 0)
    Q = _sum_asym(_U, zeta, 1)
    R = _sum_asym(_V, zeta, 0)
    S = _sum_asym(_V, zeta, 1)
    th = zeta - np.pi / 4
    s = abs(th.imag)
    # cos/sin scaled by exp(-s) to stay finite
    ep = np.exp(1j * th - s)
    em = np.exp(-1j * th - s)
    c = 0.5 * (ep + em)
    sn = (ep - em) / 2j
    a = (c * P + sn * Q) / (_SQRTPI * q)
    ap = q * (sn * R - c * S) / _SQRTPI
    return a, ap, float(s)


def airy(z: complex):
    """``(Ai(z), Ai'(z))``."""
    a, ap, s = airy_scaled(z)
    if s > 700:
        raise AiryOverflowError(f"Ai({z}) overflows; use airy_scaled")
    e = np.exp(s)
    return a * e, ap * e


def airy_F_scaled(contour: AiryContour | int, W: complex):
    """``(F, F', s)`` with ``F_i(W) = F e^s`` and ``F_i'(W) = F' e^s``."""
    if isinstance(contour, int):
        contour = AiryContour(contour)
    om = contour.rotation
    a, ap, s = airy_scaled(W, {1: 0, 2: 1, 3: -1}[contour.index])
    return om * a, om * om * ap, s


def airy_F(contour: AiryContour | int, W: complex):
    """``(F_i(W), F_i'(W))``."""
    F, Fp, s = airy_F_scaled(contour, W)
    if s > 700:
        raise AiryOverflowError(f"F at W={W} overflows; use airy_F_scaled")
    e = np.exp(s)
    return F * e, Fp * e


def airy_contour_quadrature(contour: AiryContour | int, W: complex, rtol: float = 1e-13):
    """``(F_i(W), F_i'(W))`` by direct quadrature of the defining integral.

    ``C_1`` is deformed onto the rays ``arg t = 5pi/6 -> 0 -> pi/6`` where
    ``exp(i t^3/3)`` decays like ``exp(-r^3/3)``; ``C_2, C_3`` use the same
    rays rotated.  The ray integrals are at most ``exp(|W|^1.5 2/3)``, so the
    cancellation between them leaves an absolute error near ``1e-10`` for
    ``|W| <= 8``.
    """
    from scipy.integrate import quad

    if isinstance(contour, int):
        contour = AiryContour(contour)
    om = complex(contour.rotation)
    W = complex(W)
    # integrand negligible once r^3/3 - |W| r > 60
    r_max = 2.0 * max(np.sqrt(abs(W)), 6.0)
    out = []
    for power in (0, 1):
        total = 0j
        for theta, sign in ((np.pi / 6, 1), (5 * np.pi / 6, -1)):
            d = om * np.exp(1j * theta)

            def f(r, d=d):
                t = r * d
                return (1j * t) ** power * np.exp(1j * (W * t + t ** 3 / 3)) * d

            with warnings.catch_warnings():
                # roundoff warnings near the requested tolerance are expected
                warnings.simplefilter("ignore")
                val, _ = quad(f, 0.0, r_max, complex_func=True, epsabs=1e-14, epsrel=rtol,
                              limit=200, points=np.linspace(0.5, r_max - 0.5, 8))
            total += sign * val
        out.append(total / (2 * np.pi))
    return out[0], out[1]
