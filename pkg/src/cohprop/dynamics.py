"""Complex Hamilton equations with tangent matrix, action and G accumulated.

Equations of motion in the ``(u, v)`` variables::

    du/dt =  (1/i hbar) dH/dv,      dv/dt = -(1/i hbar) dH/du

The tangent matrix ``M`` maps ``(du(0), dv(0))`` to ``(du(t), dv(t))``; the
accumulated integrals are the action integrand
``(i hbar/2)(u' v - u v') - H = (u.Hu + v.Hv)/2 - H`` and
``G = (1/2) int tr d2H/du dv``.  Boundary terms of the action depend on the
boundary data and are added by :func:`boundary_action`.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from . import _fast
from .systems import PolySystem, SmoothedSystem

logger = logging.getLogger(__name__)


class IntegrationError(RuntimeError):
    pass


class DivergedError(IntegrationError):
    """Trajectory escaped the blow-up bound (finite-time singularity)."""

    def __init__(self, message, t_escape):
        super().__init__(message)
        self.t_escape = t_escape


class StiffnessError(IntegrationError):
    pass


@dataclass(frozen=True)
class IntegratorOptions:
    rtol: float = 1e-10
    atol: float = 1e-12
    method: str = "dopri5"
    blowup: float = 1e3
    max_steps: int = 200_000
    max_phase_jump: float = np.pi / 2
    keep_samples: bool = True


DEFAULT_OPTIONS = IntegratorOptions()


@dataclass(frozen=True)
class TrajectoryResult:
    times: np.ndarray            # (n,)
    u: np.ndarray                # (n, N)
    v: np.ndarray                # (n, N)
    M: np.ndarray                # (2N, 2N) at final time
    action_integral: complex     # int_0^T [(i hbar/2)(u'v - uv') - H] dt
    G: complex
    mvv: np.ndarray              # M_vv (N=1) or det M_vv along the samples
    mvv_phase: np.ndarray        # unwound arg of mvv along the samples, starts at 0
    energy_drift: float
    hbar: float

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def ndof(self) -> int:
        return self.u.shape[1]

    @property
    def u0(self):
        return self.u[0]

    @property
    def v0(self):
        return self.v[0]

    @property
    def uT(self):
        return self.u[-1]

    @property
    def vT(self):
        return self.v[-1]

    def block(self, name: str) -> np.ndarray:
        n = self.ndof
        rows = slice(0, n) if name[1] == "u" else slice(n, 2 * n)
        cols = slice(0, n) if name[2] == "u" else slice(n, 2 * n)
        return self.M[rows, cols]

    @property
    def Mvv_scalar(self) -> complex:
        """``M_vv`` (1 DOF) or ``det M_vv`` (2 DOF) at the final time."""
        return complex(np.linalg.det(self.block("Mvv")))

    @property
    def Muv_scalar(self) -> complex:
        return complex(np.linalg.det(self.block("Muv")))

    @property
    def final_phase(self) -> float:
        return float(self.mvv_phase[-1])

    def sqrt_inv_mvv(self) -> complex:
        """``mvv^{-1/2}`` on the branch fixed by the unwound phase."""
        return abs(self.Mvv_scalar) ** -0.5 * np.exp(-0.5j * self.final_phase)


def boundary_action(traj: TrajectoryResult, z_in, zc_out) -> complex:
    """Full action including the term ``-(i hbar/2)[u(T) z''* + z' v(0)]``."""
    z_in = np.atleast_1d(z_in)
    zc_out = np.atleast_1d(zc_out)
    bt = np.sum(traj.uT * zc_out) + np.sum(z_in * traj.v0)
    return complex(traj.action_integral - 0.5j * traj.hbar * bt)


def _pack(u, v, M, s, g):
    return np.concatenate([u, v, M.ravel(), [s, g]])


class _Flow:
    def __init__(self, system: SmoothedSystem):
        self.system = system
        self.n = system.ndof
        self.ihbar = 1j * system.hbar
        self.nfev = 0

    def unpack(self, y):
        n = self.n
        u = y[:n]
        v = y[n:2 * n]
        M = y[2 * n:2 * n + 4 * n * n].reshape(2 * n, 2 * n)
        return u, v, M, y[-2], y[-1]

    def __call__(self, t, y):
        self.nfev += 1
        n = self.n
        u, v, M, _, _ = self.unpack(y)
        Hu, Hv, Huu, Huv, Hvv = self.system.derivatives(u, v)
        L = np.empty((2 * n, 2 * n), complex)
        L[:n, :n] = Huv.T
        L[:n, n:] = Hvv
        L[n:, :n] = -Huu
        L[n:, n:] = -Huv
        L /= self.ihbar
        ds = 0.5 * (u @ Hu + v @ Hv) - self.system.H(u, v)
        dg = 0.5 * np.trace(Huv)
        return _pack(Hv / self.ihbar, -Hu / self.ihbar, L @ M, ds, dg)


def _mvv_of(M, n):
    return np.linalg.det(M[..., n:, n:]) if n > 1 else M[..., 1, 1]


def integrate(system: SmoothedSystem, u0, v0, T: float,
              opts: IntegratorOptions = DEFAULT_OPTIONS) -> TrajectoryResult:
    """Integrate from ``(u0, v0)`` over ``[0, T]``."""
    if T < 0:
        raise ValueError("T must be non-negative")
    n = system.ndof
    u0 = np.atleast_1d(np.asarray(u0, complex))
    v0 = np.atleast_1d(np.asarray(v0, complex))
    if u0.shape != (n,) or v0.shape != (n,):
        raise ValueError(f"initial point must have {n} components")
    y0 = _pack(u0, v0, np.eye(2 * n, dtype=complex), 0.0, 0.0)
    if opts.method == "dopri5" and isinstance(system, PolySystem):
        return _integrate_compiled(system, y0, float(T), opts)
    flow = _Flow(system)
    if T == 0:
        return _result(system, flow, np.array([0.0]), y0[:, None], None, opts)

    bound = opts.blowup

    def escape(t, y):
        return bound - np.max(np.abs(y[:2 * n]))
    escape.terminal = True

    method = "RK45" if opts.method == "dopri5" else opts.method
    sol = solve_ivp(flow, (0.0, T), y0, method=method, rtol=opts.rtol, atol=opts.atol,
                    events=escape, dense_output=True)
    if sol.status == 1:
        t_esc = float(sol.t_events[0][0])
        raise DivergedError(f"trajectory escaped |(u,v)| > {bound:g} at t = {t_esc:.6g}", t_esc)
    if sol.status != 0:
        raise StiffnessError(sol.message)
    if sol.t.size > opts.max_steps:
        raise StiffnessError(f"step count {sol.t.size} exceeds max_steps")
    return _result(system, flow, sol.t, sol.y, sol.sol, opts)


def compiled_args(system: PolySystem):
    """Coefficient arrays in the layout expected by the compiled kernels."""
    cached = getattr(system, "_compiled_args", None)
    if cached is None:
        Vs = np.asarray(system.Vs, float)
        if Vs.ndim == 1:
            Vs = Vs[:, None]
        b = np.zeros(2)
        kin = np.zeros(2)
        b[:system.ndof] = system.b
        kin[:system.ndof] = system._kin
        cached = (system.ndof, np.ascontiguousarray(Vs), b, kin, system.hbar)
        system._compiled_args = cached
    return cached


def _integrate_compiled(system, y0, T, opts) -> TrajectoryResult:
    N, Vs, b, kin, hbar = compiled_args(system)
    status, t_stop, ts, ys, ph, _ = _fast.integrate_dopri(
        y0, T, N, Vs, b, kin, hbar, opts.rtol, opts.atol, opts.blowup, opts.max_steps,
        opts.max_phase_jump, opts.keep_samples)
    if status == _fast.DIVERGED:
        raise DivergedError(f"trajectory escaped |(u,v)| > {opts.blowup:g} at t = {t_stop:.6g}", t_stop)
    if status == _fast.UNDERFLOW:
        raise StiffnessError(f"step size underflow at t = {t_stop:.6g}")
    if status == _fast.MAXSTEPS:
        raise StiffnessError(f"max_steps={opts.max_steps} reached at t = {t_stop:.6g}")
    n = system.ndof
    u = ys[:, :n].copy()
    v = ys[:, n:2 * n].copy()
    Ms = ys[:, 2 * n:2 * n + 4 * n * n].reshape(-1, 2 * n, 2 * n)
    mvv = _mvv_of(Ms, n)
    E = system.H(u, v)
    drift = float(np.max(np.abs(E - E[0]))) if E.size > 1 else 0.0
    return TrajectoryResult(times=ts.copy(), u=u, v=v, M=Ms[-1].copy(),
                            action_integral=complex(ys[-1, -2]), G=complex(ys[-1, -1]),
                            mvv=mvv, mvv_phase=ph.copy(), energy_drift=drift, hbar=system.hbar)


def _unwind(times, mvv, dense, n, max_jump, depth=0):
    """Unwound phase of ``mvv`` along ``times``; refines between samples with
    the dense output whenever consecutive samples jump by more than ``max_jump``."""
    phase = np.zeros(times.size)
    for i in range(1, times.size):
        d = np.angle(mvv[i] / mvv[i - 1])
        if abs(d) > max_jump and dense is not None and depth < 30:
            ts = np.linspace(times[i - 1], times[i], 9)
            ys = dense(ts)
            k = 2 * n
            Ms = ys[k:k + 4 * n * n].T.reshape(-1, 2 * n, 2 * n)
            sub = _mvv_of(Ms, n)
            d = _unwind(ts, sub, dense, n, max_jump, depth + 1)[-1]
        phase[i] = phase[i - 1] + d
    return phase


def _result(system, flow, times, ys, dense, opts) -> TrajectoryResult:
    n = system.ndof
    u = ys[:n].T.copy()
    v = ys[n:2 * n].T.copy()
    Ms = ys[2 * n:2 * n + 4 * n * n].T.reshape(-1, 2 * n, 2 * n)
    mvv = _mvv_of(Ms, n)
    phase = _unwind(times, mvv, dense, n, opts.max_phase_jump)
    E = system.H(u, v)
    drift = float(np.max(np.abs(E - E[0]))) if E.size > 1 else 0.0
    if not opts.keep_samples:
        sel = [0, -1]
        times, u, v, mvv, phase = times[sel], u[sel], v[sel], mvv[sel], phase[sel]
    return TrajectoryResult(times=times, u=u, v=v, M=Ms[-1].copy(),
                            action_integral=complex(ys[-2, -1]), G=complex(ys[-1, -1]),
                            mvv=mvv, mvv_phase=phase, energy_drift=drift, hbar=system.hbar)


def tangent_fd_oracle(system: SmoothedSystem, u0, v0, T: float, eps: float = 1e-6,
                      opts: IntegratorOptions = DEFAULT_OPTIONS) -> np.ndarray:
    """Tangent matrix by central differences of the final point."""
    n = system.ndof
    u0 = np.atleast_1d(np.asarray(u0, complex))
    v0 = np.atleast_1d(np.asarray(v0, complex))
    M = np.empty((2 * n, 2 * n), complex)
    for col in range(2 * n):
        cols = []
        for sgn in (1, -1):
            du = np.zeros(2 * n, complex)
            du[col] = sgn * eps
            tr = integrate(system, u0 + du[:n], v0 + du[n:], T, opts)
            cols.append(np.concatenate([tr.uT, tr.vT]))
        M[:, col] = (cols[0] - cols[1]) / (2 * eps)
    return M
