"""Coherent-state labels, complex phase-space coordinates and overlaps.

Every conversion between real labels ``(q, p)`` and the complex coordinate
``z = (q/b + i p/c)/sqrt(2)`` goes through :func:`label_to_z` /
:func:`z_to_label` so that widths are never silently dropped.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SQRT2 = np.sqrt(2.0)


class ConfigurationError(ValueError):
    """Inconsistent physical parameters (widths, hbar, dimensions)."""


def _as_vector(x, dtype=float) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=dtype))


@dataclass(frozen=True)
class CoherentLabel:
    """Real phase-space label of a coherent state, one entry per DOF.

    Widths satisfy ``b * c = hbar``; pass ``c=None`` to derive ``c``.
    """

    q: np.ndarray
    p: np.ndarray
    b: np.ndarray
    c: np.ndarray

    @classmethod
    def from_values(cls, q, p, b=1.0, c=None, hbar: float | None = None) -> "CoherentLabel":
        q = _as_vector(q)
        p = _as_vector(p)
        b = np.broadcast_to(_as_vector(b), q.shape).astype(float)
        if c is None:
            if hbar is None:
                raise ConfigurationError("either c or hbar is required")
            c = hbar / b
        c = np.broadcast_to(_as_vector(c), q.shape).astype(float)
        if q.shape != p.shape:
            raise ConfigurationError("q and p must have the same length")
        if np.any(b <= 0) or np.any(c <= 0):
            raise ConfigurationError("widths b and c must be positive")
        if hbar is not None:
            check_widths(b, c, hbar)
        return cls(q=q, p=p, b=b, c=c)

    @property
    def ndof(self) -> int:
        return self.q.shape[0]

    @property
    def z(self) -> np.ndarray:
        return label_to_z(self)

    def with_qp(self, q, p) -> "CoherentLabel":
        return CoherentLabel(q=_as_vector(q), p=_as_vector(p), b=self.b, c=self.c)


@dataclass(frozen=True)
class ComplexPhasePoint:
    """Point ``(u, v)`` of the complexified phase space."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u", _as_vector(self.u, complex))
        object.__setattr__(self, "v", _as_vector(self.v, complex))
        if self.u.shape != self.v.shape:
            raise ConfigurationError("u and v must have the same length")

    @classmethod
    def from_real(cls, label: CoherentLabel) -> "ComplexPhasePoint":
        z = label_to_z(label)
        return cls(z, np.conj(z))

    @property
    def ndof(self) -> int:
        return self.u.shape[0]


@dataclass(frozen=True)
class Constants:
    hbar: float
    ndof: int = 1
    supported: tuple = field(default=(1, 2), repr=False)

    def __post_init__(self):
        if not self.hbar > 0:
            raise ConfigurationError(f"hbar must be positive, got {self.hbar}")
        if self.ndof not in self.supported:
            raise ConfigurationError(f"ndof must be one of {self.supported}, got {self.ndof}")


def check_widths(b, c, hbar: float, rtol: float = 1e-12) -> None:
    b = _as_vector(b)
    c = _as_vector(c)
    bad = np.abs(b * c - hbar) > rtol * hbar
    if np.any(bad):
        raise ConfigurationError(
            f"width/hbar inconsistency: b*c = {b * c} but hbar = {hbar}")


def label_to_z(label: CoherentLabel, hbar: float | None = None) -> np.ndarray:
    if hbar is not None:
        check_widths(label.b, label.c, hbar)
    return (label.q / label.b + 1j * label.p / label.c) / SQRT2


def z_to_label(z, b, c) -> CoherentLabel:
    z = _as_vector(z, complex)
    b = np.broadcast_to(_as_vector(b), z.shape).astype(float)
    c = np.broadcast_to(_as_vector(c), z.shape).astype(float)
    return CoherentLabel(q=SQRT2 * b * z.real, p=SQRT2 * c * z.imag, b=b, c=c)


def uv_to_qp(u, v, b, c):
    """Complex position and momentum ``(Q, P)`` of a phase point ``(u, v)``."""
    u = np.asarray(u, complex)
    v = np.asarray(v, complex)
    return b * (u + v) / SQRT2, c * (u - v) / (1j * SQRT2)


def qp_to_uv(Q, P, b, c):
    Q = np.asarray(Q, complex)
    P = np.asarray(P, complex)
    return (Q / b + 1j * P / c) / SQRT2, (Q / b - 1j * P / c) / SQRT2


def overlap_bargmann(z1, z2) -> complex:
    """``(z1|z2) = exp(z1* . z2)``."""
    z1 = _as_vector(z1, complex)
    z2 = _as_vector(z2, complex)
    if z1.shape != z2.shape:
        raise ConfigurationError("overlap of vectors with different lengths")
    return complex(np.exp(np.sum(np.conj(z1) * z2)))


def overlap_normalized(z1, z2) -> complex:
    """``<z1|z2> = exp(-|z1|^2/2 + z1* . z2 - |z2|^2/2)``."""
    z1 = _as_vector(z1, complex)
    z2 = _as_vector(z2, complex)
    if z1.shape != z2.shape:
        raise ConfigurationError("overlap of vectors with different lengths")
    expo = -0.5 * np.sum(np.abs(z1) ** 2) + np.sum(np.conj(z1) * z2) - 0.5 * np.sum(np.abs(z2) ** 2)
    return complex(np.exp(expo))


def normalization_exponent(z1, z2) -> float:
    return -0.5 * float(np.sum(np.abs(_as_vector(z1, complex)) ** 2)
                        + np.sum(np.abs(_as_vector(z2, complex)) ** 2))


def normalize_propagator(k, z1, z2):
    """Turn a Bargmann-form amplitude ``k`` into the normalized ``K``."""
    return k * np.exp(normalization_exponent(z1, z2))
