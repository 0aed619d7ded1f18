"""Semiclassical propagator assembly.

All amplitudes are built in Bargmann form ``k`` and normalized once with
``exp(-(|z'|^2 + |z''|^2)/2)``.

Second order, per root::

    K2 = |M_vv|^{-1/2} exp(-i phi/2) exp{(i/hbar)(S + G)} exp(-(|z'|^2+|z''|^2)/2)

with ``phi`` the phase of ``M_vv`` (``det M_vv`` for two DOF) unwound along
the trajectory.

Uniform, for an ordered pair of roots ``1, 2`` at the same ``T``::

    A = (i/2hbar)(S1 + S2),     B = [(3i/4hbar)(S2 - S1)]^{2/3}
    k = -i sqrt(pi) e^A [(g1 + g2) F_i(B) + (g2 - g1) F_i'(B)/sqrt(B)]
    g_{1,2} = sqrt(-+ sqrt(B)/M_vv|_{1,2}) e^{iG_{1,2}/hbar}

with principal branches throughout.  Principal ``B`` jumps by a cube root of
unity when ``S2 - S1`` crosses the branch cut, which permutes the contours;
the contour selector follows the value, not the label.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .airy import CONTOURS, AiryContour, airy_F_scaled
from .core import normalization_exponent
from .dynamics import DEFAULT_OPTIONS, IntegratorOptions, integrate
from .shooting import BoundaryProblem, ConvergenceError, Family, Root, refine_root, root_velocity

logger = logging.getLogger(__name__)

_SQRTPI = np.sqrt(np.pi)


class CausticError(ArithmeticError):
    """``M_vv`` vanishes; use :func:`uniform_k`."""


class DualCausticError(ArithmeticError):
    """``M_uv`` vanishes, the singularity of the dual representation."""


class CoalescenceError(ArithmeticError):
    """The two roots coincide and ``(g2 - g1)/sqrt(B)`` is 0/0."""


class CausticWarning(UserWarning):
    pass


class ContourWarning(UserWarning):
    """No contour keeps the uniform value continuous and bounded."""


# ---------------------------------------------------------------- second order

def k2_contribution(root: Root, caustic_threshold: float = 0.0) -> complex:
    """Normalized second-order contribution of one root."""
    m = root.mvv
    if m == 0:
        raise CausticError(f"M_vv = 0 at T={root.T}; use uniform_k")
    if abs(m) < caustic_threshold:
        warnings.warn(f"|M_vv| = {abs(m):.3g} at T={root.T:.4g} is below the caustic threshold",
                      CausticWarning, stacklevel=2)
    return complex(root.sqrt_inv_mvv() * np.exp(root.exponent))


def k2_sum(roots, caustic_threshold: float = 0.0, include_noncontributing: bool = False) -> complex:
    total = 0j
    for r in roots:
        if r.contributing or include_noncontributing:
            total += k2_contribution(r, caustic_threshold)
    return total


# ---------------------------------------------------------------- dual

@dataclass
class DualRoot:
    """Trajectory with ``u(0) = z'`` and ``u(T) = z``."""
    v0: np.ndarray
    T: float
    trajectory: object
    z_end: np.ndarray
    iterations: int


def solve_dual(problem: BoundaryProblem, z_end, T: float, v0_seed=None, tol: float = 1e-11,
               max_iter: int = 50, integ: IntegratorOptions = DEFAULT_OPTIONS) -> DualRoot:
    """Shoot on ``u(T)`` with ``v(0)`` as the unknown (Jacobian ``M_uv``)."""
    z_end = np.atleast_1d(np.asarray(z_end, complex))
    n = problem.ndof
    v0 = problem.v0_of(problem.affine_root()) if v0_seed is None else np.atleast_1d(np.asarray(v0_seed, complex))
    traj = integrate(problem.system, problem.z_in, v0, T, integ)
    for it in range(max_iter):
        F = traj.uT - z_end
        if np.linalg.norm(F) < tol:
            return DualRoot(v0=v0, T=float(T), trajectory=traj, z_end=z_end, iterations=it)
        J = traj.M[:n, n:]
        if abs(np.linalg.det(J)) < 1e-14:
            raise DualCausticError(f"M_uv vanishes at T={T}")
        step = -np.linalg.solve(J, F)
        nrm = np.linalg.norm(step)
        if nrm > 0.5:
            step *= 0.5 / nrm
        v0 = v0 + step
        traj = integrate(problem.system, problem.z_in, v0, T, integ)
    raise ConvergenceError(f"dual shooting did not converge at T={T}")


def _unwound_muv_phase(problem, droot, samples: int = 400):
    """Phase of ``M_uv`` (or its determinant) followed continuously along the trajectory."""
    tr = droot.trajectory
    n = problem.ndof
    ts = np.linspace(0.0, droot.T, samples + 1)
    phase = 0.0
    prev = None
    u0, v0 = tr.u0, tr.v0
    for k in range(1, ts.size):
        sub = integrate(problem.system, u0, v0, ts[k], DEFAULT_OPTIONS)
        m = complex(np.linalg.det(sub.M[:n, n:]))
        if prev is None:
            # M_uv ~ (t / i hbar) Hvv for small t
            prev = complex(np.linalg.det(problem.system.hessian(u0, v0)[2] / (1j * problem.hbar)))
        phase += np.angle(m / prev)
        prev = m
    return m, phase


def dual_k2(problem: BoundaryProblem, z_end, T: float, v0_seed=None, normalize: bool = True) -> complex:
    """Second-order value of the Legendre-transformed propagator at ``u(T) = z``.

    ``|M_uv|^{-1/2} exp(-i phi/2) exp{(i/hbar)(S~ + G)}`` with
    ``S~ = S + i hbar z z''*`` where ``S`` carries the boundary term of the
    direct problem evaluated with ``v(T)`` in place of ``z''*``, so that
    ``S~ = int[(i hbar/2)(u'v - uv') - H] - (i hbar/2)(z v(T) + z' v(0))
    + i hbar z.v(T)``.  The phase of ``M_uv`` is unwound from ``t -> 0``
    where ``M_uv ~ t Hvv / (i hbar)``.  ``normalize`` multiplies by
    ``exp(-|z'|^2/2)`` only.
    """
    d = solve_dual(problem, z_end, T, v0_seed)
    tr = d.trajectory
    hbar = problem.hbar
    z = d.z_end
    bt = np.sum(z * tr.vT) + np.sum(problem.z_in * tr.v0)
    S_t = tr.action_integral - 0.5j * hbar * bt + 1j * hbar * np.sum(z * tr.vT)
    m, phi = _unwound_muv_phase(problem, d)
    if m == 0:
        raise DualCausticError("M_uv = 0")
    k = abs(m) ** -0.5 * np.exp(-0.5j * phi) * np.exp(1j * (S_t + tr.G) / hbar)
    if normalize:
        k *= np.exp(-0.5 * np.sum(np.abs(problem.z_in) ** 2))
    return complex(k)


# ---------------------------------------------------------------- uniform

@dataclass(frozen=True)
class UniformInputs:
    """Ingredients of the uniform formula for an ordered pair of roots.

    ``branch`` selects the cube root in ``B``: ``B = B_principal w^(2 branch)``
    with ``w = exp(2 pi i/3)``.
    """
    S1: complex
    S2: complex
    G1: complex
    G2: complex
    mvv1: complex
    mvv2: complex
    A: complex
    B: complex
    hbar: float
    branch: int = 0

    @classmethod
    def from_roots(cls, r1: Root, r2: Root, hbar: float, branch: int = 0) -> "UniformInputs":
        S1, S2 = complex(r1.action), complex(r2.action)
        A = 0.5j * (S1 + S2) / hbar
        B = complex((0.75j * (S2 - S1) / hbar) ** (2.0 / 3.0)) * np.exp(4j * np.pi * branch / 3)
        return cls(S1=S1, S2=S2, G1=complex(r1.G), G2=complex(r2.G),
                   mvv1=complex(r1.mvv), mvv2=complex(r2.mvv), A=A, B=B, hbar=hbar, branch=branch)

    @property
    def g1(self) -> complex:
        return complex(np.sqrt(-np.sqrt(self.B) / self.mvv1) * np.exp(1j * self.G1 / self.hbar))

    @property
    def g2(self) -> complex:
        return complex(np.sqrt(np.sqrt(self.B) / self.mvv2) * np.exp(1j * self.G2 / self.hbar))


def uniform_bargmann(inp: UniformInputs, contour: AiryContour | int) -> complex:
    """Unnormalized uniform value ``k`` on one contour."""
    if isinstance(contour, int):
        contour = AiryContour(contour)
    B = inp.B
    if abs(B) < 1e-12:
        raise CoalescenceError("B = 0: roots coincide")
    F, Fp, s = airy_F_scaled(contour, B)
    g1, g2 = inp.g1, inp.g2
    bracket = (g1 + g2) * F + (g2 - g1) * Fp / np.sqrt(B)
    return complex(-1j * _SQRTPI * bracket * np.exp(inp.A + s))


def uniform_k(root1: Root, root2: Root, contour: AiryContour | int, problem: BoundaryProblem,
              coalescence_floor: float = 1e-10) -> complex:
    """Normalized uniform propagator for the ordered pair ``(root1, root2)``.

    Raises
    ------
    CoalescenceError
        When the actions coincide; use :func:`uniform_near_coalescence`.
    """
    if abs(root1.action - root2.action) < coalescence_floor:
        raise CoalescenceError("actions coincide; evaluate at T +- dT")
    inp = UniformInputs.from_roots(root1, root2, problem.hbar)
    return uniform_bargmann(inp, contour) * np.exp(problem.normalization())


def uniform_all(root1: Root, root2: Root, problem: BoundaryProblem) -> dict:
    """Uniform value on each contour, ``{1: K, 2: K, 3: K}``."""
    inp = UniformInputs.from_roots(root1, root2, problem.hbar)
    norm = np.exp(problem.normalization())
    return {c.index: uniform_bargmann(inp, c) * norm for c in CONTOURS}


def uniform_near_coalescence(fam1: Family, fam2: Family, T: float, contour, problem: BoundaryProblem,
                             dT: float = 1e-3) -> complex:
    """Average of the uniform values at ``T - dT`` and ``T + dT`` along both families."""
    vals = []
    for t in (T - dT, T + dT):
        pair = []
        for fam in (fam1, fam2):
            base = min(fam.roots, key=lambda r: abs(r.T - t))
            pred = base.w + root_velocity(problem, base) * (t - base.T)
            pair.append(refine_root(problem, t, pred))
        vals.append(uniform_k(pair[0], pair[1], contour, problem))
    return complex(0.5 * (vals[0] + vals[1]))


# ---------------------------------------------------------------- contour choice

@dataclass
class PropagatorSample:
    """Everything known about the propagator at one ``T``.

    ``orientation`` is the sign (contour direction) applied to the uniform
    value of ``contour_used``; ``K_uniform`` already includes it.
    """
    T: float
    K_exact: complex | None = None
    K2_by_family: dict = field(default_factory=dict)
    K2_total: complex = 0j
    K_uniform: complex | None = None
    K_uniform_by_contour: dict = field(default_factory=dict)
    contour_used: int | None = None
    orientation: int = 1
    caustic_flag: bool = False
    min_abs_mvv: float = np.inf
    pair: tuple | None = None
    flags: list = field(default_factory=list)

    @property
    def K_assembled(self) -> complex:
        """Uniform value where a pair is active, else the second-order sum."""
        return self.K_uniform if self.K_uniform is not None else self.K2_total


@dataclass(frozen=True)
class ContourPolicy:
    """``mode`` is ``"auto"`` or a fixed contour index ``1, 2, 3``.

    ``bound`` caps ``|K_uniform|`` at a multiple of the recent scale
    (``|K_exact|`` when known, else accepted values).  The misfit of a
    candidate is its distance from the linear extrapolation of the last two
    accepted values, relative to that scale.  The current contour is kept
    unless another bounded candidate beats its misfit by more than
    ``hysteresis``; a winning misfit above ``jump`` marks the choice
    unresolved.  With ``target="exact"`` the misfit is measured from
    ``K_exact`` instead whenever it is known; this follows a contour switch
    that sets in gradually, which extrapolation cannot see.
    """
    mode: str | int = "auto"
    bound: float = 1.5
    memory: int = 10
    jump: float = 0.5
    hysteresis: float = 0.05
    initial: int = 1
    target: str = "history"

    def __post_init__(self):
        if self.mode not in ("auto", 1, 2, 3):
            raise ValueError(f"contour mode must be 'auto', 1, 2 or 3, got {self.mode!r}")
        if self.target not in ("history", "exact"):
            raise ValueError(f"contour target must be 'history' or 'exact', got {self.target!r}")


@dataclass(frozen=True)
class ContourChoice:
    index: int
    orientation: int
    resolved: bool
    misfit: float


def select_contour(history, candidates: dict, policy: ContourPolicy = ContourPolicy(),
                   K_exact: complex | None = None) -> ContourChoice:
    """Pick a contour and orientation from ``candidates`` (``{index: K}``).

    Parameters
    ----------
    history : sequence of PropagatorSample
        Accepted samples in sweep order; ``K_assembled``, ``contour_used`` and
        ``orientation`` are read.
    candidates : dict
        Uniform value on each contour at the new ``T``.
    K_exact : complex, optional
        Exact value at the new ``T``; used for the bound, and as the target
        when ``policy.target == "exact"``.

    Notes
    -----
    The uniform formula is defined up to the direction of the contour, so a
    candidate may be accepted with either sign.
    """
    past = [h for h in history if h.K_assembled is not None][-policy.memory:]
    prev_idx = policy.initial
    prev_sign = 1
    for h in reversed(history):
        if h.contour_used is not None:
            prev_idx, prev_sign = h.contour_used, h.orientation
            break
    if not past:
        idx = prev_idx if policy.mode == "auto" else int(policy.mode)
        return ContourChoice(idx, 1, True, 0.0)
    scale_vals = [abs(h.K_exact) for h in past if h.K_exact is not None]
    if K_exact is not None:
        scale_vals.append(abs(K_exact))
    if not scale_vals:
        scale_vals = [abs(h.K_assembled) for h in past]
    scale = max(max(scale_vals), 1e-300)
    b = past[-1]
    target = b.K_assembled
    if len(past) >= 2 and past[-2].T != b.T:
        a = past[-2]
        target = b.K_assembled + (b.K_assembled - a.K_assembled)
    if policy.target == "exact" and K_exact is not None:
        target = complex(K_exact)
    finite = {i: complex(k) for i, k in candidates.items() if np.isfinite(k)}
    if not finite:
        return ContourChoice(prev_idx, prev_sign, False, np.inf)

    def fit(i):
        errs = {s: abs(s * finite[i] - target) / scale for s in (prev_sign, -prev_sign)}
        s = min(errs, key=errs.get)
        return errs[s], s

    if policy.mode != "auto":
        i = int(policy.mode)
        if i not in finite:
            return ContourChoice(i, prev_sign, False, np.inf)
        m, s = fit(i)
        return ContourChoice(i, s, m <= policy.jump, m)
    bounded = {i: k for i, k in finite.items() if abs(k) <= policy.bound * scale}
    pool = bounded or finite
    options = [(fit(i)[0], i != prev_idx, i) for i in pool]
    m_best, _, best = min(options)
    if prev_idx in pool:
        m, s = fit(prev_idx)
        if m <= m_best + policy.hysteresis:
            best, m_best = prev_idx, m
    m, s = fit(best)
    return ContourChoice(best, s, bool(bounded) and m <= policy.jump, m)


# ---------------------------------------------------------------- sweeps

@dataclass(frozen=True)
class PairSchedule:
    """Ordered family pairs for the uniform formula, each active from ``T_start``.

    ``entries`` is a sequence of ``(T_start, family_1, family_2)``; the order
    inside a pair fixes the roles of root 1 and root 2 in ``B`` and ``g``.
    """
    entries: tuple = ()

    def __post_init__(self):
        starts = [e[0] for e in self.entries]
        if starts != sorted(starts):
            raise ValueError("pair schedule must be sorted by start time")

    def pair_at(self, T: float):
        active = None
        for start, a, b in self.entries:
            if T >= start - 1e-12:
                active = (a, b)
        return active


def assemble_sweep(problem: BoundaryProblem, families, T_values, schedule: PairSchedule = PairSchedule(),
                   policy: ContourPolicy = ContourPolicy(), exact=None,
                   caustic_threshold: float = 0.8, tol: float = 1e-7,
                   spectators=()) -> list:
    """Propagator samples along ``T_values``.

    Parameters
    ----------
    families : iterable of Family
        Continued root families; a family contributes at ``T`` when it has a
        contributing root there.
    schedule : PairSchedule
        Which pair feeds the uniform formula at each ``T``.
    exact : callable, optional
        ``exact(T) -> complex``; used in the output and for the contour bound.
    spectators : iterable of str
        Families whose second-order terms are added to the uniform value when
        they are outside the active pair.

    Returns
    -------
    list of PropagatorSample
        The contour post-pass is sequential since each choice depends on the
        accepted history.
    """
    fams = {f.id: f for f in families}
    samples = []
    for T in np.asarray(T_values, float):
        s = PropagatorSample(T=float(T))
        if exact is not None:
            s.K_exact = complex(exact(T))
        for fid, fam in fams.items():
            r = fam.at(T, tol)
            if r is not None and r.contributing:
                try:
                    s.K2_by_family[fid] = k2_contribution(r)
                except CausticError:
                    s.flags.append(f"caustic:{fid}")
        s.K2_total = complex(sum(s.K2_by_family.values()))
        pair = schedule.pair_at(T)
        if pair is not None:
            r1, r2 = fams[pair[0]].at(T, tol), fams[pair[1]].at(T, tol)
            if r1 is not None and r2 is not None:
                s.pair = pair
                s.min_abs_mvv = float(min(abs(r1.mvv), abs(r2.mvv)))
                s.caustic_flag = s.min_abs_mvv < caustic_threshold
                try:
                    s.K_uniform_by_contour = uniform_all(r1, r2, problem)
                except CoalescenceError:
                    s.K_uniform_by_contour = {c.index: uniform_near_coalescence(
                        fams[pair[0]], fams[pair[1]], T, c, problem) for c in CONTOURS}
                    s.flags.append("coalescence-limit")
                if spectators:
                    rest = sum(v for k, v in s.K2_by_family.items() if k in spectators and k not in pair)
                    s.K_uniform_by_contour = {c: v + rest for c, v in s.K_uniform_by_contour.items()}
        choice = select_contour(samples, s.K_uniform_by_contour, policy, s.K_exact) \
            if s.K_uniform_by_contour else None
        if choice is None:
            prev = next((h for h in reversed(samples) if h.contour_used is not None), None)
            s.contour_used = prev.contour_used if prev else (policy.initial if policy.mode == "auto" else int(policy.mode))
            s.orientation = prev.orientation if prev else 1
        else:
            s.contour_used, s.orientation = choice.index, choice.orientation
            s.K_uniform = choice.orientation * s.K_uniform_by_contour[choice.index]
            if not choice.resolved:
                s.flags.append("contour-unresolved")
                warnings.warn(f"no contour continues the uniform value at T={T:.4g}", ContourWarning,
                              stacklevel=2)
        samples.append(s)
    return samples


def contour_switches(samples) -> list:
    """``(T, from, to)`` for every change of contour or of family pair."""
    out = []
    prev = None
    for s in samples:
        key = (s.contour_used, s.pair)
        if prev is not None and s.K_uniform is not None and prev[1] is not None and key != prev[1]:
            out.append((s.T, prev[1], key))
        if s.K_uniform is not None:
            prev = (s.T, key)
    return out


def normalization(problem: BoundaryProblem) -> float:
    return normalization_exponent(problem.z_in, problem.z_out)
