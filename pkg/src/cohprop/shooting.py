"""Boundary-value shooting for complex trajectories.

Trajectories must satisfy ``u(0) = z'`` and ``v(T) = z''*``.  Initial
conditions ``Q(0) = q' + w``, ``P(0) = p' + i (c/b) w`` satisfy the first
condition for every complex ``w`` (one ``w`` per DOF), which gives
``v(0) = z'* + sqrt(2) w / b``.  Roots of ``F(w) = v(T) - z''*`` are found by
scanning the w-plane, refined by Newton with the Jacobian ``M_vv sqrt(2)/b``
from the tangent matrix, and continued in ``T``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import _fast
from .core import SQRT2, CoherentLabel, label_to_z, normalization_exponent
from .dynamics import (DEFAULT_OPTIONS, IntegrationError, IntegratorOptions, TrajectoryResult,
                       boundary_action, compiled_args, integrate)
from .systems import PolySystem, SmoothedSystem

logger = logging.getLogger(__name__)


class ShootingError(RuntimeError):
    pass


class ConvergenceError(ShootingError):
    pass


class ParameterError(ShootingError):
    pass


@dataclass(frozen=True)
class BoundaryProblem:
    system: SmoothedSystem
    label_in: CoherentLabel
    label_out: CoherentLabel

    def __post_init__(self):
        n = self.system.ndof
        if self.label_in.ndof != n or self.label_out.ndof != n:
            raise ParameterError("labels and system have different numbers of DOF")
        for lab in (self.label_in, self.label_out):
            if not np.allclose(lab.b, self.system.b, rtol=1e-12):
                raise ParameterError("label widths differ from the system widths")

    @property
    def ndof(self) -> int:
        return self.system.ndof

    @property
    def hbar(self) -> float:
        return self.system.hbar

    @property
    def z_in(self) -> np.ndarray:
        return label_to_z(self.label_in)

    @property
    def z_out(self) -> np.ndarray:
        return label_to_z(self.label_out)

    @property
    def zc_out(self) -> np.ndarray:
        return np.conj(self.z_out)

    @property
    def dv0_dw(self) -> np.ndarray:
        return SQRT2 / self.system.b

    def v0_of(self, w) -> np.ndarray:
        return np.conj(self.z_in) + self.dv0_dw * np.asarray(w, complex)

    def w_of(self, v0) -> np.ndarray:
        return (np.asarray(v0, complex) - np.conj(self.z_in)) / self.dv0_dw

    def initial_qp(self, w):
        w = np.asarray(w, complex)
        lab = self.label_in
        return lab.q + w, lab.p + 1j * (lab.c / lab.b) * w

    def final_labels(self, vT):
        """Real ``(Q'', P'')`` defined by ``v(T) = (Q''/b - i P''/c)/sqrt 2``."""
        vT = np.asarray(vT, complex)
        return SQRT2 * self.system.b * vT.real, -SQRT2 * self.system.c * vT.imag

    def affine_root(self) -> np.ndarray:
        """The unique root at ``T = 0``."""
        return self.w_of(self.zc_out)

    def trajectory(self, w, T, opts: IntegratorOptions = DEFAULT_OPTIONS) -> TrajectoryResult:
        return integrate(self.system, self.z_in, self.v0_of(np.atleast_1d(w)), T, opts)

    def normalization(self) -> float:
        return normalization_exponent(self.z_in, self.z_out)


@dataclass
class Root:
    w: np.ndarray
    T: float
    trajectory: TrajectoryResult
    residual: np.ndarray
    action: complex
    iterations: int = 0
    history: list = field(default_factory=list)
    family_id: str | None = None
    contributing: bool = True
    exponent: complex = 0j
    phase_shift: float = 0.0     # multiple of 2 pi keeping mvv_phase continuous along a family

    @property
    def w1(self) -> complex:
        return complex(self.w[0])

    @property
    def G(self) -> complex:
        return self.trajectory.G

    @property
    def mvv(self) -> complex:
        return self.trajectory.Mvv_scalar

    @property
    def caustic_distance(self) -> float:
        return abs(self.mvv)

    @property
    def mvv_phase(self) -> float:
        return self.trajectory.final_phase + self.phase_shift

    def sqrt_inv_mvv(self) -> complex:
        """``mvv^{-1/2}`` on the branch fixed by :attr:`mvv_phase`."""
        return abs(self.mvv) ** -0.5 * np.exp(-0.5j * self.mvv_phase)


def _make_root(problem, w, T, traj, iterations=0, history=None) -> Root:
    S = boundary_action(traj, problem.z_in, problem.zc_out)
    expo = 1j * (S + traj.G) / problem.hbar + problem.normalization()
    return Root(w=np.atleast_1d(np.asarray(w, complex)).copy(), T=float(T), trajectory=traj,
                residual=traj.vT - problem.zc_out, action=S, iterations=iterations,
                history=list(history or []), exponent=expo, contributing=bool(expo.real <= 1e-9))


# ---------------------------------------------------------------- scanning

@dataclass(frozen=True)
class WGrid:
    alpha: tuple = (-3.0, 3.0)
    beta: tuple = (-3.0, 3.0)
    n_alpha: int = 201
    n_beta: int = 201

    def axes(self):
        return (np.linspace(*self.alpha, self.n_alpha), np.linspace(*self.beta, self.n_beta))


@dataclass
class WMap:
    T: float
    alpha: np.ndarray          # (n_alpha,)
    beta: np.ndarray           # (n_beta,)
    Qpp: np.ndarray            # (n_beta, n_alpha)
    Ppp: np.ndarray
    diverged: np.ndarray
    seeds: list = field(default_factory=list)

    @property
    def w(self) -> np.ndarray:
        return self.alpha[None, :] + 1j * self.beta[:, None]


def final_points(problem: BoundaryProblem, w: np.ndarray, T: float, rtol: float = 1e-8,
                 atol: float = 1e-10, blowup: float = 1e3):
    """``v(T)`` for an array of 1-DOF ``w`` values; NaN where diverged."""
    if problem.ndof != 1:
        raise ParameterError("w-plane scans are defined for one degree of freedom")
    w = np.asarray(w, complex)
    flat = problem.v0_of(w.ravel())[:, None]
    system = problem.system
    if isinstance(system, PolySystem):
        N, Vs, b, kin, hbar = compiled_args(system)
        vT, status = _fast.batch_endpoints(np.ascontiguousarray(flat), problem.z_in.astype(complex),
                                           float(T), N, Vs, b, kin, hbar, rtol, atol, blowup, 100_000)
        vT = vT[:, 0]
        vT[status != _fast.OK] = np.nan
    else:
        opts = IntegratorOptions(rtol=rtol, atol=atol, blowup=blowup, keep_samples=False)
        vT = np.empty(flat.shape[0], complex)
        for i, v0 in enumerate(flat):
            try:
                vT[i] = integrate(system, problem.z_in, v0, T, opts).vT[0]
            except IntegrationError:
                vT[i] = np.nan
    return vT.reshape(w.shape)


def scan_wplane(problem: BoundaryProblem, T: float, grid: WGrid = WGrid(), rtol: float = 1e-8) -> WMap:
    """Map ``w -> (Q'', P'')`` over a rectangle and collect root seeds.

    Seeds are grid cells where both ``Q'' - q''`` and ``P'' - p''`` change sign,
    plus local minima of ``|v(T) - z''*|`` (cheap insurance near map defects).
    """
    alpha, beta = grid.axes()
    W = alpha[None, :] + 1j * beta[:, None]
    vT = final_points(problem, W, T, rtol=rtol)
    div = ~np.isfinite(vT)
    if np.all(div):
        raise ParameterError(f"every trajectory of the scan diverged at T={T}")
    Qpp, Ppp = problem.final_labels(vT)
    fq = Qpp - problem.label_out.q[0]
    fp = Ppp - problem.label_out.p[0]
    seeds = []
    corners = [(slice(None, -1), slice(None, -1)), (slice(1, None), slice(None, -1)),
               (slice(None, -1), slice(1, None)), (slice(1, None), slice(1, None))]
    with np.errstate(invalid="ignore"):
        sq = np.stack([np.sign(fq[c]) for c in corners])
        sp = np.stack([np.sign(fp[c]) for c in corners])
        dmask = np.any(np.stack([div[c] for c in corners]), axis=0)
        hit = (sq.min(0) < 0) & (sq.max(0) > 0) & (sp.min(0) < 0) & (sp.max(0) > 0) & ~dmask
    for i, j in zip(*np.nonzero(hit)):
        seeds.append(complex(0.5 * (W[i, j] + W[i + 1, j + 1])))
    F = np.abs(vT - problem.zc_out[0])
    F[div] = np.inf
    from scipy.ndimage import minimum_filter
    loc = (F == minimum_filter(F, size=3, mode="nearest")) & np.isfinite(F)
    scale = np.nanmedian(np.abs(np.diff(vT, axis=1)))
    loc &= F < 5 * max(scale, 1e-12)
    for i, j in zip(*np.nonzero(loc)):
        s = complex(W[i, j])
        if all(abs(s - t) > 1.5 * (alpha[1] - alpha[0]) for t in seeds):
            seeds.append(s)
    return WMap(T=float(T), alpha=alpha, beta=beta, Qpp=Qpp, Ppp=Ppp, diverged=div, seeds=seeds)


# ---------------------------------------------------------------- Newton

@dataclass(frozen=True)
class NewtonOptions:
    tol: float = 1e-10
    max_iter: int = 40
    max_step: float = 0.5
    min_jacobian: float = 1e-12


def refine_root(problem: BoundaryProblem, T: float, w_seed, opts: NewtonOptions = NewtonOptions(),
                integ: IntegratorOptions = DEFAULT_OPTIONS) -> Root:
    """Damped Newton on ``F(w) = v(T) - z''*``."""
    w = np.atleast_1d(np.asarray(w_seed, complex)).copy()
    scale = problem.dv0_dw
    traj = problem.trajectory(w, T, integ)
    F = traj.vT - problem.zc_out
    nF = float(np.linalg.norm(F))
    history = [nF]
    for it in range(1, opts.max_iter + 1):
        if nF < opts.tol:
            return _make_root(problem, w, T, traj, it - 1, history)
        J = traj.block("Mvv") * scale[None, :]
        if abs(np.linalg.det(J)) < opts.min_jacobian:
            raise ConvergenceError(f"Jacobian vanishes at w={w} (caustic)")
        step = -np.linalg.solve(J, F)
        if np.linalg.norm(step) > opts.max_step:
            step *= opts.max_step / np.linalg.norm(step)
        lam = 1.0
        while True:
            trial = w + lam * step
            try:
                ttraj = problem.trajectory(trial, T, integ)
                tF = ttraj.vT - problem.zc_out
                tn = float(np.linalg.norm(tF))
            except IntegrationError:
                tn = np.inf
            if tn < nF or lam < 1 / 64:
                break
            lam *= 0.5
        if not np.isfinite(tn):
            raise ConvergenceError(f"Newton step diverged from w={w}")
        w, traj, F, nF = trial, ttraj, tF, tn
        history.append(nF)
    if nF < opts.tol:
        return _make_root(problem, w, T, traj, opts.max_iter, history)
    raise ConvergenceError(f"Newton did not converge (|F|={nF:.2e}) from seed {w_seed}")


def root_velocity(problem: BoundaryProblem, root: Root) -> np.ndarray:
    """``dw/dT`` along a root curve from the implicit function theorem."""
    tr = root.trajectory
    Hu, _ = problem.system.gradient(tr.uT, tr.vT)
    dvdT = 1j * Hu / problem.hbar
    J = tr.block("Mvv") * problem.dv0_dw[None, :]
    return -np.linalg.solve(J, dvdT)


# ---------------------------------------------------------------- continuation

@dataclass
class Family:
    id: str
    roots: list = field(default_factory=list)
    gaps: list = field(default_factory=list)
    lost_at: float | None = None      # continuation failed here
    exited_at: float | None = None    # left |w| < w_cutoff here

    @property
    def T(self) -> np.ndarray:
        return np.array([r.T for r in self.roots])

    @property
    def w(self) -> np.ndarray:
        return np.array([r.w1 for r in self.roots])

    @property
    def mvv(self) -> np.ndarray:
        return np.array([r.mvv for r in self.roots])

    def at(self, T: float, tol: float = 1e-9) -> Root | None:
        for r in self.roots:
            if abs(r.T - T) < tol:
                return r
        return None

    def extend(self, other: "Family") -> None:
        by_T = {round(r.T, 12): r for r in self.roots}
        for r in other.roots:
            by_T.setdefault(round(r.T, 12), r)
        self.roots = [by_T[k] for k in sorted(by_T)]
        for r in self.roots:
            r.family_id = self.id
        self.gaps = sorted(set(self.gaps) | set(other.gaps))
        self.lost_at = self.lost_at if self.lost_at is not None else other.lost_at
        self.exited_at = self.exited_at if self.exited_at is not None else other.exited_at
        self.unwind_phase()

    def unwind_phase(self) -> None:
        """Make ``mvv_phase`` continuous in ``T`` across the stored roots."""
        for a, b in zip(self.roots[:-1], self.roots[1:]):
            _continue_phase(a, b)


@dataclass(frozen=True)
class ContinuationOptions:
    jump: float = 0.25          # max |w - w_predicted| accepted per step
    min_step: float = 1e-4
    max_gaps: int = 3
    w_cutoff: float = np.inf    # stop once the family leaves |w| < cutoff
    phase_continuity: bool = True


def _continue_phase(prev: Root, new: Root) -> None:
    """Shift ``new.mvv_phase`` by a multiple of 2 pi to continue ``prev`` in ``T``.

    The phase unwound along each trajectory changes by 2 pi whenever
    ``M_vv(t)`` passes through zero at an intermediate time, which happens at
    isolated ``T`` without any singularity of the final ``M_vv``.
    """
    expected = prev.mvv_phase + np.angle(new.mvv / prev.mvv)
    k = round((expected - new.trajectory.final_phase) / (2 * np.pi))
    if k != 0:
        logger.debug("phase of M_vv continued by %d turns at T=%.6g", k, new.T)
    new.phase_shift = 2 * np.pi * k


def continue_family(problem: BoundaryProblem, root0: Root, T_grid, family_id: str = "f",
                    opts: ContinuationOptions = ContinuationOptions(),
                    newton: NewtonOptions = NewtonOptions(),
                    integ: IntegratorOptions = DEFAULT_OPTIONS) -> Family:
    """Tangent predictor / Newton corrector along ``T_grid`` (increasing or decreasing)."""
    root0.family_id = family_id
    fam = Family(id=family_id, roots=[root0])
    last = root0
    gaps = 0
    for target in T_grid:
        if abs(target - root0.T) < 1e-12 or (target - last.T) * (T_grid[-1] - root0.T) < 0:
            continue
        t_cur, cur = last.T, last
        h = target - t_cur
        ok = True
        while abs(target - t_cur) > 1e-12:
            if abs(h) > abs(target - t_cur):
                h = target - t_cur
            t_next = t_cur + h
            pred = cur.w + root_velocity(problem, cur) * h
            try:
                r = refine_root(problem, t_next, pred, newton, integ)
                accept = np.linalg.norm(r.w - pred) < opts.jump
            except (ConvergenceError, IntegrationError):
                accept = False
            if accept:
                if opts.phase_continuity:
                    _continue_phase(cur, r)
                t_cur, cur = t_next, r
                h *= 1.5
            else:
                h *= 0.5
                if abs(h) < opts.min_step:
                    ok = False
                    break
        if ok:
            cur.family_id = family_id
            fam.roots.append(cur)
            last = cur
            gaps = 0
            if np.max(np.abs(cur.w)) > opts.w_cutoff:
                fam.exited_at = float(target)
                break
        else:
            fam.gaps.append(float(target))
            gaps += 1
            if gaps >= opts.max_gaps:
                fam.lost_at = float(target)
                logger.info("family %s lost at T=%.4g", family_id, target)
                break
    if T_grid[-1] < root0.T:
        fam.roots.reverse()
    return fam


# ---------------------------------------------------------------- caustics

@dataclass
class CausticEvent:
    T_star: float
    w_star: complex
    families: tuple
    min_abs_mvv: float
    T_min_distance: float
    min_distance: float
    found: bool = True


def locate_caustic(problem: BoundaryProblem, fam_a: Family, fam_b: Family, threshold: float = 0.05,
                   refine: bool = True, newton: NewtonOptions = NewtonOptions()) -> CausticEvent:
    """Closest approach of two families and the minimum of ``|M_vv|`` along them.

    The minimum of ``|M_vv|`` on each family is bracketed on the common grid
    and refined by golden-section search with a re-solve at each trial ``T``.
    """
    Ta = {round(r.T, 10): r for r in fam_a.roots}
    Tb = {round(r.T, 10): r for r in fam_b.roots}
    common = sorted(set(Ta) & set(Tb))
    if len(common) < 3:
        return CausticEvent(np.nan, np.nan, (fam_a.id, fam_b.id), np.inf, np.nan, np.inf, found=False)
    dist = np.array([np.linalg.norm(Ta[t].w - Tb[t].w) for t in common])
    mv = np.array([min(Ta[t].caustic_distance, Tb[t].caustic_distance) for t in common])
    i = int(np.argmin(mv))
    j = int(np.argmin(dist))
    T_star, m_star, w_star = common[i], mv[i], Ta[common[i]].w1
    if refine and 0 < i < len(common) - 1:
        fam = fam_a if Ta[common[i]].caustic_distance <= Tb[common[i]].caustic_distance else fam_b
        seed = (Ta if fam is fam_a else Tb)

        def f(T):
            base = seed[min(common, key=lambda t: abs(t - T))]
            w0 = base.w + root_velocity(problem, base) * (T - base.T)
            return refine_root(problem, T, w0, newton)

        lo, hi = common[i - 1], common[i + 1]
        g = (np.sqrt(5) - 1) / 2
        try:
            x1, x2 = hi - g * (hi - lo), lo + g * (hi - lo)
            r1, r2 = f(x1), f(x2)
            for _ in range(30):
                if r1.caustic_distance < r2.caustic_distance:
                    hi, x2, r2 = x2, x1, r1
                    x1 = hi - g * (hi - lo)
                    r1 = f(x1)
                else:
                    lo, x1, r1 = x1, x2, r2
                    x2 = lo + g * (hi - lo)
                    r2 = f(x2)
                if hi - lo < 1e-6:
                    break
            best = r1 if r1.caustic_distance < r2.caustic_distance else r2
            T_star, m_star, w_star = best.T, best.caustic_distance, best.w1
        except (ConvergenceError, IntegrationError):
            pass
    return CausticEvent(T_star=float(T_star), w_star=complex(w_star), families=(fam_a.id, fam_b.id),
                        min_abs_mvv=float(m_star), T_min_distance=float(common[j]),
                        min_distance=float(dist[j]), found=bool(m_star < threshold))


def is_contributing(root: Root, tol: float = 1e-9):
    """Non-contributing when the normalized exponent has positive real part.

    Returns ``(flag, exponent)`` with ``exponent = i(S+G)/hbar - (|z'|^2+|z''|^2)/2``.
    """
    return bool(root.exponent.real <= tol), root.exponent


# ---------------------------------------------------------------- discovery

@dataclass(frozen=True)
class CensusOptions:
    """Which roots count as members of a near-origin family.

    A family is kept when its ``|w|`` drops below ``r_near`` at some ``T`` in
    ``window``; roots elsewhere in the scan are distant candidates.
    """
    r_near: float = 1.4
    window: tuple = (0.0, 4.0)
    scan_step: float = 0.1
    grid: WGrid = WGrid(n_alpha=81, n_beta=81)
    scan_rtol: float = 1e-6
    w_cutoff: float = 4.0
    max_steps: int = 20_000


def _claimed(fams, r, tol=1e-6):
    for f in fams:
        x = f.at(r.T)
        if x is not None and np.linalg.norm(x.w - r.w) < tol:
            return True
    return False


def discover_families(problem: BoundaryProblem, T_grid, opts: CensusOptions = CensusOptions(),
                      newton: NewtonOptions = NewtonOptions(),
                      integ: IntegratorOptions = DEFAULT_OPTIONS) -> list:
    """Families ``f1, f2, ...`` over ``T_grid`` (1 DOF).

    ``f1`` is continued from the affine root at ``T = 0``.  The w-plane is
    re-scanned every ``scan_step`` inside the census window; unclaimed roots
    within ``r_near`` start new families, continued both ways along
    ``T_grid`` and numbered by the time they were first seen.
    """
    T_grid = np.asarray(T_grid, float)
    integ = replace(integ, max_steps=opts.max_steps)
    copts = ContinuationOptions(w_cutoff=opts.w_cutoff)
    fams = []
    if T_grid[0] <= 0.0:
        r0 = refine_root(problem, 0.0, problem.affine_root(), newton, integ)
        fams.append(continue_family(problem, r0, T_grid, "f1", copts, newton, integ))
    lo, hi = opts.window
    hi = min(hi, T_grid[-1])
    scan_T = T_grid[(T_grid >= lo) & (T_grid <= hi)]
    stride = max(1, int(round(opts.scan_step / max(np.diff(T_grid).min(), 1e-12))))
    for Ts in scan_T[::stride]:
        try:
            wmap = scan_wplane(problem, Ts, opts.grid, rtol=opts.scan_rtol)
        except ParameterError:
            continue
        for s in sorted(wmap.seeds, key=abs):
            if abs(s) > opts.r_near + 0.2:
                continue
            try:
                r = refine_root(problem, Ts, s, newton, integ)
            except (ConvergenceError, IntegrationError):
                continue
            if np.linalg.norm(r.w) >= opts.r_near or _claimed(fams, r):
                continue
            fid = f"f{len(fams) + 1}"
            fw = continue_family(problem, r, T_grid[T_grid >= Ts], fid, copts, newton, integ)
            bw = continue_family(problem, r, T_grid[T_grid <= Ts][::-1], fid, copts, newton, integ)
            bw.extend(fw)
            fams.append(bw)
            logger.info("family %s found at T=%.3g, w=%s", fid, Ts, r.w)
    return fams


@dataclass(frozen=True)
class RootSearchOptions:
    """Random-seed Newton search near the origin (any number of DOF)."""
    n_seeds: int = 500
    radius: float = 0.6         # seeds uniform in |Re w_k|, |Im w_k| < radius
    seed: int = 0
    r_keep: float = 1.5         # discard roots with |w| beyond this
    newton: NewtonOptions = NewtonOptions(max_iter=30, max_step=0.1)
    max_steps: int = 20_000
    blowup: float = 1e2


def search_roots(problem: BoundaryProblem, T: float, opts: RootSearchOptions = RootSearchOptions(),
                 integ: IntegratorOptions = DEFAULT_OPTIONS) -> list:
    """Distinct roots at ``T`` reached by Newton from random seeds, sorted by ``|w|``.

    The seed set always includes the affine root (the real-trajectory guess).
    """
    rng = np.random.default_rng(opts.seed)
    integ = replace(integ, max_steps=opts.max_steps, blowup=opts.blowup)
    n = problem.ndof
    seeds = [problem.affine_root()]
    seeds += [rng.uniform(-opts.radius, opts.radius, n) + 1j * rng.uniform(-opts.radius, opts.radius, n)
              for _ in range(opts.n_seeds)]
    roots = []
    for s in seeds:
        try:
            r = refine_root(problem, T, s, opts.newton, integ)
        except (ConvergenceError, IntegrationError):
            continue
        if np.linalg.norm(r.w) > opts.r_keep or any(np.linalg.norm(r.w - x.w) < 1e-6 for x in roots):
            continue
        roots.append(r)
    roots.sort(key=lambda r: float(np.linalg.norm(r.w)))
    return roots


@dataclass(frozen=True)
class FamilySeed:
    id: str
    T: float
    w: tuple


def families_from_seeds(problem: BoundaryProblem, seeds, T_grid,
                        copts: ContinuationOptions = ContinuationOptions(jump=0.1),
                        newton: NewtonOptions = NewtonOptions(),
                        integ: IntegratorOptions = DEFAULT_OPTIONS) -> list:
    """Refine each :class:`FamilySeed` and continue it both ways along ``T_grid``."""
    T_grid = np.asarray(T_grid, float)
    fams = []
    for sd in seeds:
        r = refine_root(problem, sd.T, np.asarray(sd.w, complex), newton, integ)
        fw = continue_family(problem, r, T_grid[T_grid >= sd.T], sd.id, copts, newton, integ)
        bw = continue_family(problem, r, T_grid[T_grid <= sd.T][::-1], sd.id, copts, newton, integ)
        bw.extend(fw)
        fams.append(bw)
        logger.info("family %s continued over T=[%.3g, %.3g]", sd.id, bw.T[0], bw.T[-1])
    return fams


def extend_family(problem: BoundaryProblem, fam: Family, T_grid,
                  copts: ContinuationOptions = ContinuationOptions(jump=0.5),
                  newton: NewtonOptions = NewtonOptions(),
                  integ: IntegratorOptions = DEFAULT_OPTIONS) -> Family:
    """Continue ``fam`` from its end points to the ends of ``T_grid`` in place."""
    T_grid = np.asarray(T_grid, float)
    first, last = fam.roots[0], fam.roots[-1]
    below = T_grid[T_grid <= first.T][::-1]
    above = T_grid[T_grid >= last.T]
    if below.size > 1:
        fam.extend(continue_family(problem, first, below, fam.id, copts, newton, integ))
    if above.size > 1:
        fam.extend(continue_family(problem, last, above, fam.id, copts, newton, integ))
    # failures past either end mark where the family stops, not holes in it
    fam.gaps = [g for g in fam.gaps if fam.roots[0].T < g < fam.roots[-1].T]
    return fam
