"""Configuration-driven command line front end.

Commands
--------
``scan``      w-plane map and root seeds at one or more ``T``
``families``  root families over the ``T`` range and their closest approaches
``compare``   exact, second-order and uniform propagators over the ``T`` range
``reproduce`` bundled pipelines ``fig1``, ``fig2``, ``fig3``

Exit codes: 0 success, 1 configuration error, 2 numerical failure, 3 partial
results with warnings.
"""
from __future__ import annotations

import argparse
import copy
import csv
import inspect
import json
import logging
import platform
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources
from itertools import combinations
from pathlib import Path

import numpy as np

from .core import CoherentLabel, ConfigurationError
from .dynamics import IntegrationError, IntegratorOptions
from .propagator import (CausticWarning, ContourPolicy, ContourWarning, PairSchedule, assemble_sweep,
                         contour_switches)
from .reference import AccuracyError, DomainError, FockEngine1D, GridEngine2D, ResolutionError
from .shooting import (BoundaryProblem, CensusOptions, ContinuationOptions, FamilySeed,
                       NewtonOptions, RootSearchOptions, ShootingError, WGrid, discover_families,
                       extend_family, families_from_seeds, locate_caustic, scan_wplane, search_roots)
from .systems import make_system, registered_systems
from .systems import _REGISTRY as _SYSTEMS

logger = logging.getLogger("cohprop")

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_PARTIAL = 0, 1, 2, 3
FLOAT = "{:.12e}"

# Every key a config may contain, with its default.  ``None`` marks keys
# without a default; ``system.params`` is free-form and checked against the
# system factory instead.
DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "name": "experiment",
    "system": {"name": None, "params": {}},
    "labels": {"in": {"q": None, "p": None}, "out": {"q": None, "p": None}},
    "T": {"start": None, "stop": None, "step": None},
    "scan": {
        "T": [],
        "window": [-3.0, 3.0, -3.0, 3.0],
        "resolution": [201, 201],
        "rtol": 1e-8,
        "n_seeds": 500,
        "radius": 0.6,
        "seed": 0,
        "r_keep": 1.5,
    },
    "integrator": {"rtol": 1e-10, "atol": 1e-12, "max_steps": 200000, "blowup": 1e3},
    "newton": {"tol": 1e-10, "max_iter": 40, "max_step": 0.5},
    "continuation": {"jump": 0.25, "min_step": 1e-4, "max_gaps": 3},
    "census": {
        "method": "scan",
        "r_near": 1.4,
        "window": [0.0, 4.0],
        "scan_step": 0.1,
        "resolution": [81, 81],
        "w_cutoff": 4.0,
        "seeds": [],
        "extend": [],
    },
    "uniform": {"pairs": [], "spectators": [], "caustic_threshold": 0.8},
    "contour": {
        "mode": "auto",
        "target": "history",
        "bound": 1.5,
        "memory": 10,
        "jump": 0.5,
        "hysteresis": 0.05,
        "initial": 1,
    },
    "exact": {
        "engine": "fock",
        "n_max": 120,
        "box": [[-3.0, 3.0], [-2.0, 4.0]],
        "shape": [256, 256],
        "dt": 5e-4,
        "tail_tol": 1e-10,
        "norm_tol": 1e-8,
        "strict_resolution": True,
    },
    "combinations": [],
    "output": {"dir": "out"},
}


def _merge(defaults: dict, given: dict, path: str = "") -> dict:
    out = copy.deepcopy(defaults)
    for key, val in given.items():
        where = f"{path}{key}"
        if key not in defaults:
            raise ConfigurationError(f"unknown config key '{where}'")
        if isinstance(defaults[key], dict) and not (path == "system." and key == "params"):
            if not isinstance(val, dict):
                raise ConfigurationError(f"config key '{where}' must be a table")
            out[key] = _merge(defaults[key], val, where + ".")
        else:
            out[key] = val
    return out


def _missing(d: dict, path: str = "") -> list:
    miss = []
    for k, v in d.items():
        if isinstance(v, dict) and not (path == "system." and k == "params"):
            miss += _missing(v, f"{path}{k}.")
        elif v is None:
            miss.append(f"{path}{k}")
    return miss


def _num(cfg, path, positive=False, integer=False):
    cur = cfg
    for k in path.split("."):
        cur = cur[k]
    ok = isinstance(cur, (int, float)) and not isinstance(cur, bool)
    if integer:
        ok = ok and float(cur).is_integer()
    if not ok or not np.isfinite(cur) or (positive and cur <= 0):
        kind = "positive " if positive else ""
        raise ConfigurationError(f"config key '{path}' must be a {kind}{'integer' if integer else 'number'}")
    return cur


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated, fully resolved experiment configuration."""

    data: dict
    source: str = "<dict>"

    @classmethod
    def from_dict(cls, given: dict, source: str = "<dict>") -> "ExperimentConfig":
        if not isinstance(given, dict):
            raise ConfigurationError("config must be a JSON object")
        version = given.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ConfigurationError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
        data = _merge(DEFAULTS, given)
        miss = _missing(data)
        if miss:
            raise ConfigurationError(f"missing config key '{miss[0]}'")
        cfg = cls(data, source)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        try:
            given = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(given, str(path))

    # ------------------------------------------------------------ validation

    def validate(self) -> None:
        d = self.data
        name = d["system"]["name"]
        if name not in registered_systems():
            raise ConfigurationError(f"system.name '{name}' is not one of {registered_systems()}")
        params = d["system"]["params"]
        allowed = set(inspect.signature(_SYSTEMS[name]).parameters)
        for k in params:
            if k not in allowed:
                raise ConfigurationError(f"unknown config key 'system.params.{k}' for system '{name}'")
        try:
            system = self.system()
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"system.params: {exc}") from exc
        n = system.ndof
        for side in ("in", "out"):
            for k in ("q", "p"):
                v = np.atleast_1d(np.asarray(d["labels"][side][k], dtype=object))
                if v.size != n or not all(isinstance(x, (int, float)) and not isinstance(x, bool)
                                          for x in v):
                    raise ConfigurationError(f"labels.{side}.{k} must hold {n} number(s)")
        try:
            self.labels()
        except ConfigurationError as exc:
            raise ConfigurationError(f"labels: {exc}") from exc
        _num(d, "T.start")
        _num(d, "T.stop")
        _num(d, "T.step", positive=True)
        if d["T"]["stop"] < d["T"]["start"]:
            raise ConfigurationError("T range is empty (T.stop < T.start)")
        for key in ("integrator.rtol", "integrator.atol", "integrator.blowup", "newton.tol",
                    "newton.max_step", "continuation.jump", "continuation.min_step", "scan.rtol",
                    "scan.radius", "scan.r_keep", "census.r_near", "census.scan_step",
                    "census.w_cutoff", "contour.bound", "contour.jump", "exact.dt", "exact.tail_tol",
                    "exact.norm_tol"):
            _num(d, key, positive=True)
        for key in ("integrator.max_steps", "newton.max_iter", "contour.memory", "exact.n_max",
                    "scan.n_seeds"):
            _num(d, key, positive=True, integer=True)
        _num(d, "continuation.max_gaps", integer=True)
        _num(d, "scan.seed", integer=True)
        _num(d, "contour.hysteresis")
        _num(d, "uniform.caustic_threshold")
        for key in ("scan.resolution", "census.resolution"):
            res = d[key.split(".")[0]][key.split(".")[1]]
            if (not isinstance(res, list) or len(res) != 2
                    or not all(isinstance(x, int) and x >= 2 for x in res)):
                raise ConfigurationError(f"config key '{key}' must be two integers >= 2")
        win = d["scan"]["window"]
        if len(win) != 4 or win[0] >= win[1] or win[2] >= win[3]:
            raise ConfigurationError("scan.window must be [alpha_min, alpha_max, beta_min, beta_max]")
        if not isinstance(d["scan"]["T"], list):
            raise ConfigurationError("scan.T must be a list of times")
        if d["census"]["method"] not in ("scan", "seeds"):
            raise ConfigurationError("census.method must be 'scan' or 'seeds'")
        if d["census"]["method"] == "scan" and n != 1:
            raise ConfigurationError("census.method 'scan' needs one degree of freedom; use 'seeds'")
        try:
            self.family_seeds()
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"census.seeds: each seed needs id, T and w ({exc})") from exc
        try:
            self.schedule()
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"uniform.pairs: {exc}") from exc
        try:
            self.contour_policy()
        except ValueError as exc:
            raise ConfigurationError(f"contour: {exc}") from exc
        if d["exact"]["engine"] not in ("fock", "grid"):
            raise ConfigurationError("exact.engine must be 'fock' or 'grid'")
        if d["exact"]["engine"] == "fock" and n != 1:
            raise ConfigurationError("exact.engine 'fock' needs one degree of freedom; use 'grid'")
        if d["exact"]["engine"] == "grid" and n != 2:
            raise ConfigurationError("exact.engine 'grid' needs two degrees of freedom")
        for combo in d["combinations"]:
            if not isinstance(combo, list) or not all(isinstance(x, str) for x in combo):
                raise ConfigurationError("combinations must be lists of family ids")

    # ------------------------------------------------------------ builders

    def system(self):
        return make_system(self.data["system"]["name"], **self.data["system"]["params"])

    def labels(self):
        s = self.system()
        out = []
        for side in ("in", "out"):
            lab = self.data["labels"][side]
            out.append(CoherentLabel.from_values(lab["q"], lab["p"], s.b, hbar=s.hbar))
        return tuple(out)

    def problem(self) -> BoundaryProblem:
        lin, lout = self.labels()
        return BoundaryProblem(self.system(), lin, lout)

    def T_grid(self) -> np.ndarray:
        t = self.data["T"]
        n = int(np.floor((t["stop"] - t["start"]) / t["step"] + 1e-9)) + 1
        return np.round(t["start"] + t["step"] * np.arange(n), 10)

    def integrator(self) -> IntegratorOptions:
        i = self.data["integrator"]
        return IntegratorOptions(rtol=i["rtol"], atol=i["atol"], max_steps=int(i["max_steps"]),
                                 blowup=i["blowup"])

    def newton(self) -> NewtonOptions:
        n = self.data["newton"]
        return NewtonOptions(tol=n["tol"], max_iter=int(n["max_iter"]), max_step=n["max_step"])

    def continuation(self) -> ContinuationOptions:
        c = self.data["continuation"]
        return ContinuationOptions(jump=c["jump"], min_step=c["min_step"], max_gaps=int(c["max_gaps"]))

    def census(self) -> CensusOptions:
        c = self.data["census"]
        return CensusOptions(r_near=c["r_near"], window=tuple(c["window"]), scan_step=c["scan_step"],
                             grid=WGrid(n_alpha=c["resolution"][0], n_beta=c["resolution"][1]),
                             w_cutoff=c["w_cutoff"])

    def wgrid(self) -> WGrid:
        s = self.data["scan"]
        w = s["window"]
        return WGrid(alpha=(w[0], w[1]), beta=(w[2], w[3]), n_alpha=s["resolution"][0],
                     n_beta=s["resolution"][1])

    def root_search(self) -> RootSearchOptions:
        s = self.data["scan"]
        return RootSearchOptions(n_seeds=int(s["n_seeds"]), radius=s["radius"], seed=int(s["seed"]),
                                 r_keep=s["r_keep"])

    def family_seeds(self) -> list:
        out = []
        for sd in self.data["census"]["seeds"]:
            w = tuple(complex(x[0], x[1]) for x in sd["w"])
            out.append(FamilySeed(id=str(sd["id"]), T=float(sd["T"]), w=w))
        return out

    def schedule(self) -> PairSchedule:
        return PairSchedule(tuple((float(e[0]), str(e[1]), str(e[2])) for e in self.data["uniform"]["pairs"]))

    def contour_policy(self) -> ContourPolicy:
        c = self.data["contour"]
        mode = c["mode"] if c["mode"] == "auto" else int(c["mode"])
        return ContourPolicy(mode=mode, bound=c["bound"], memory=int(c["memory"]), jump=c["jump"],
                             hysteresis=c["hysteresis"], initial=int(c["initial"]), target=c["target"])

    def exact_engine(self, threads: int = 1):
        e = self.data["exact"]
        s = self.system()
        if e["engine"] == "fock":
            return FockEngine1D(s.hamiltonian, float(s.b[0]),
                                int(e["n_max"]))
        return GridEngine2D(s.hamiltonian, box=tuple(tuple(b) for b in e["box"]), shape=tuple(e["shape"]),
                            dt=e["dt"], tail_tol=e["tail_tol"], norm_tol=e["norm_tol"],
                            strict_resolution=bool(e["strict_resolution"]), workers=threads)

    def with_overrides(self, contour=None, T=None, T_range=None, out=None) -> "ExperimentConfig":
        d = copy.deepcopy(self.data)
        if contour is not None:
            d["contour"]["mode"] = contour if contour == "auto" else int(contour)
        if T is not None:
            d["scan"]["T"] = [float(T)]
        if T_range is not None:
            d["T"] = {"start": T_range[0], "stop": T_range[1], "step": T_range[2]}
        if out is not None:
            d["output"]["dir"] = str(out)
        return ExperimentConfig.from_dict(d, self.source)


def bundled_config(name: str) -> ExperimentConfig:
    """One of the configurations shipped with the package (``quartic``, ``nelson``, ...)."""
    path = resources.files("cohprop").joinpath("configs", f"{name}.json")
    if not path.is_file():
        raise ConfigurationError(f"no bundled config named '{name}'")
    return ExperimentConfig.from_dict(json.loads(path.read_text()), f"bundled:{name}")


def load_config(ref: str) -> ExperimentConfig:
    """A config file, or a bundled config when ``ref`` is a bare name that is not a file."""
    if not Path(ref).exists() and "/" not in ref and not ref.endswith(".json"):
        return bundled_config(ref)
    return ExperimentConfig.from_file(ref)


# ---------------------------------------------------------------- CSV output

class RunLog:
    """Collects warnings and output files of one command."""

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.files = []
        self.warnings = []
        self.timings = {}

    def warn(self, msg: str) -> None:
        logger.warning(msg)
        self.warnings.append(msg)

    def write_csv(self, name: str, header_lines, columns, rows) -> Path:
        path = self.out_dir / name
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([_fmt(x) for x in row])
        self.files.append(path.name)
        return path


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return "nan" if not np.isfinite(x) else FLOAT.format(float(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "" if x is None else str(x)


def _conventions(cfg: ExperimentConfig) -> list:
    s = cfg.system()
    return [f"system={cfg.data['system']['name']} hbar={s.hbar:g} widths b={[float(x) for x in np.atleast_1d(s.b)]}",
            "z=(q/b+ip/c)/sqrt(2), b*c=hbar; K=<z''|exp(-iHT/hbar)|z'> normalized; T in units of hbar/energy",
            "w: Q(0)=q'+w, P(0)=p'+i(c/b)w per degree of freedom"]


# ---------------------------------------------------------------- commands

def _scan_one(args):
    cfg_data, T = args
    cfg = ExperimentConfig.from_dict(cfg_data)
    P = cfg.problem()
    if P.ndof == 1:
        return T, scan_wplane(P, T, cfg.wgrid(), rtol=cfg.data["scan"]["rtol"])
    return T, search_roots(P, T, cfg.root_search(), cfg.integrator())


def _map_parallel(fn, items, threads: int):
    if threads > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def cmd_scan(cfg: ExperimentConfig, log: RunLog, threads: int = 1) -> dict:
    """w-plane field and seeds (1 DOF) or a random-seed root list (2 DOF) per scan time."""
    Ts = [float(t) for t in cfg.data["scan"]["T"]]
    if not Ts:
        raise ConfigurationError("scan needs at least one time (scan.T or --T)")
    P = cfg.problem()
    results = _map_parallel(_scan_one, [(cfg.data, T) for T in Ts], threads)
    head = _conventions(cfg)
    out = {}
    for T, res in results:
        tag = f"T{T:.2f}"
        if P.ndof == 1:
            wm = res
            rows = []
            for i, b in enumerate(wm.beta):
                for j, a in enumerate(wm.alpha):
                    rows.append((a, b, wm.Qpp[i, j].real, wm.Qpp[i, j].imag, wm.Ppp[i, j].real,
                                 wm.Ppp[i, j].imag, wm.diverged[i, j]))
            log.write_csv(f"wmap_{tag}.csv", head + [f"T={T:g}; Q'', P'' are the final labels; NaN where diverged"],
                          ["alpha", "beta", "ReQpp", "ImQpp", "RePpp", "ImPpp", "diverged"], rows)
            seeds = sorted(wm.seeds, key=lambda s: (abs(s), s.real, s.imag))
            log.write_csv(f"seeds_{tag}.csv", head + [f"T={T:g}; root seeds w=alpha+i beta before Newton"],
                          ["alpha", "beta", "abs_w"], [(s.real, s.imag, abs(s)) for s in seeds])
            out[T] = seeds
        else:
            rows = []
            for r in res:
                k2 = r.sqrt_inv_mvv() * np.exp(r.exponent)
                rows.append(tuple(x for wk in r.w for x in (wk.real, wk.imag))
                            + (float(np.linalg.norm(r.w)), r.exponent.real, abs(r.mvv), abs(k2), r.contributing))
            cols = [c for k in range(P.ndof) for c in (f"Rew{k + 1}", f"Imw{k + 1}")]
            cols += ["norm_w", "Re_exponent", "abs_Mvv", "abs_K2", "contributing"]
            log.write_csv(f"roots_{tag}.csv", head + [f"T={T:g}; converged roots from random Newton seeds, by |w|"],
                          cols, rows)
            out[T] = res
    return out


def compute_families(cfg: ExperimentConfig, log: RunLog | None = None) -> list:
    P = cfg.problem()
    Tg = cfg.T_grid()
    integ, newton = cfg.integrator(), cfg.newton()
    c = cfg.data["census"]
    t0 = time.perf_counter()
    if c["method"] == "scan":
        fams = discover_families(P, Tg, cfg.census(), newton, integ)
    else:
        fams = families_from_seeds(P, cfg.family_seeds(), Tg, cfg.continuation(), newton, integ)
    by_id = {f.id: f for f in fams}
    for fid in c["extend"]:
        if fid not in by_id:
            raise ConfigurationError(f"census.extend names unknown family '{fid}'")
        extend_family(P, by_id[fid], Tg, ContinuationOptions(jump=0.5), newton, integ)
    if log is not None:
        log.timings["families"] = time.perf_counter() - t0
        for f in fams:
            if f.lost_at is not None:
                log.warn(f"family {f.id} lost at T={f.lost_at:.4g}")
            if f.gaps:
                log.warn(f"family {f.id} has {len(f.gaps)} gap(s)")
    return fams


def cmd_families(cfg: ExperimentConfig, log: RunLog, fams=None) -> list:
    P = cfg.problem()
    fams = compute_families(cfg, log) if fams is None else fams
    head = _conventions(cfg)
    rows = []
    for f in fams:
        for r in f.roots:
            k2 = r.sqrt_inv_mvv() * np.exp(r.exponent)
            flags = []
            if f.lost_at is not None and abs(r.T - f.roots[-1].T) < 1e-12:
                flags.append("lost-after")
            if any(abs(g - r.T) < 1e-9 for g in f.gaps):
                flags.append("gap")
            rows.append((r.T, f.id) + tuple(x for wk in r.w for x in (wk.real, wk.imag))
                        + (abs(r.mvv), r.mvv_phase, r.exponent.real, k2.real, k2.imag, r.contributing,
                           ";".join(flags)))
    rows.sort(key=lambda x: (x[1], x[0]))
    cols = ["T", "family"] + [c for k in range(P.ndof) for c in (f"Rew{k + 1}", f"Imw{k + 1}")]
    cols += ["abs_Mvv", "phase_Mvv", "Re_exponent", "ReK2", "ImK2", "contributing", "flags"]
    log.write_csv("families.csv", head + ["Mvv is det M_vv for two degrees of freedom; phase continuous in T"],
                  cols, rows)
    thr = cfg.data["uniform"]["caustic_threshold"]
    ev_rows = []
    for a, b in combinations(fams, 2):
        ev = locate_caustic(P, a, b, threshold=thr)
        if np.isfinite(ev.T_star):
            ev_rows.append((a.id, b.id, ev.T_star, ev.w_star.real, ev.w_star.imag, ev.min_abs_mvv,
                            ev.T_min_distance, ev.min_distance, ev.found))
    log.write_csv("caustics.csv", head + [f"closest approach per family pair; found = min|Mvv| < {thr:g}"],
                  ["family_a", "family_b", "T_star", "Re_w_star", "Im_w_star", "min_abs_Mvv",
                   "T_min_distance", "min_distance", "found"], ev_rows)
    return fams


def exact_values(cfg: ExperimentConfig, Ts, threads: int = 1, log: RunLog | None = None) -> np.ndarray:
    P = cfg.problem()
    t0 = time.perf_counter()
    eng = cfg.exact_engine(threads)
    if isinstance(eng, FockEngine1D):
        K = np.asarray(eng.propagator(P.z_in[0], P.z_out[0], np.asarray(Ts)), complex)
    else:
        lin, lout = cfg.labels()
        K = eng.sweep(lin, lout, np.asarray(Ts))
        if log is not None:
            log.timings["grid_tail"] = eng.max_tail
            log.timings["grid_norm_drift"] = eng.norm_drift
    if log is not None:
        log.timings["exact"] = time.perf_counter() - t0
    return K


def cmd_compare(cfg: ExperimentConfig, log: RunLog, threads: int = 1, fams=None) -> list:
    P = cfg.problem()
    Ts = cfg.T_grid()
    if fams is None:
        fams = compute_families(cfg, log)
    K = exact_values(cfg, Ts, threads, log)
    table = {round(float(t), 10): k for t, k in zip(Ts, K)}
    t0 = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ContourWarning)
        warnings.simplefilter("always", CausticWarning)
        samples = assemble_sweep(P, fams, Ts, cfg.schedule(), cfg.contour_policy(),
                                 exact=lambda T: table[round(float(T), 10)],
                                 caustic_threshold=cfg.data["uniform"]["caustic_threshold"],
                                 tol=1e-6, spectators=tuple(cfg.data["uniform"]["spectators"]))
    log.timings["assemble"] = time.perf_counter() - t0
    n_unres = sum("contour-unresolved" in s.flags for s in samples)
    if n_unres:
        log.warn(f"contour choice unresolved at {n_unres} time(s)")
    for w in caught:
        if not issubclass(w.category, (ContourWarning, CausticWarning)):
            warnings.showwarning(w.message, w.category, w.filename, w.lineno)
    ids = [f.id for f in fams]
    combos = [list(c) for c in cfg.data["combinations"]]
    cols = ["T", "ReK_exact", "ImK_exact", "ReK2", "ImK2", "ReKun", "ImKun", "contour", "orientation",
            "caustic_flag", "pair"]
    cols += [c for fid in ids for c in (f"ReK2_{fid}", f"ImK2_{fid}")]
    cols += [c for combo in combos for c in (f"ReK2_{'+'.join(combo)}", f"ImK2_{'+'.join(combo)}")]
    cols += [c for i in (1, 2, 3) for c in (f"ReKun_C{i}", f"ImKun_C{i}")]
    cols += ["min_abs_Mvv", "flags"]
    rows = []
    for s in samples:
        ku = s.K_assembled
        row = [s.T, s.K_exact.real, s.K_exact.imag, s.K2_total.real, s.K2_total.imag, ku.real, ku.imag,
               s.contour_used if s.K_uniform is not None else None,
               s.orientation if s.K_uniform is not None else None, s.caustic_flag,
               "+".join(s.pair) if s.pair else None]
        for fid in ids:
            v = s.K2_by_family.get(fid)
            row += [None, None] if v is None else [v.real, v.imag]
        for combo in combos:
            v = sum(s.K2_by_family.get(fid, 0j) for fid in combo)
            row += [v.real, v.imag]
        for i in (1, 2, 3):
            v = s.K_uniform_by_contour.get(i)
            row += [None, None] if v is None else [v.real, v.imag]
        row += [s.min_abs_mvv, ";".join(s.flags)]
        rows.append(row)
    sw = contour_switches(samples)
    head = _conventions(cfg) + [
        "K2: second-order sum over contributing families; Kun: uniform value on the selected contour "
        "(second-order sum where no pair is active)",
        "contour switches: " + ("; ".join(f"T={t:g} {a[1]} C{a[0]} -> {b[1]} C{b[0]}" for t, a, b in sw) or "none"),
    ]
    log.write_csv("compare.csv", head, cols, rows)
    return samples


def cmd_reproduce(figure: str, log: RunLog, threads: int = 1, contour=None):
    if figure == "fig1":
        cfg = bundled_config("quartic").with_overrides(contour=contour)
        d = copy.deepcopy(cfg.data)
        d["scan"]["T"] = [0.06, 0.24, 0.70, 1.02, 2.20, 2.70]
        cfg = ExperimentConfig.from_dict(d, cfg.source)
        return cfg, cmd_scan(cfg, log, threads)
    if figure == "fig2":
        cfg = bundled_config("quartic").with_overrides(contour=contour)
    elif figure == "fig3":
        cfg = bundled_config("nelson").with_overrides(contour=contour)
    else:
        raise ConfigurationError(f"unknown figure '{figure}' (fig1, fig2, fig3)")
    fams = cmd_families(cfg, log)
    return cfg, cmd_compare(cfg, log, threads, fams)


def write_manifest(log: RunLog, cfg: ExperimentConfig | None, command: str, argv, t_start: float,
                   status: int) -> None:
    import numba
    import scipy

    from . import __version__
    manifest = {
        "command": command,
        "argv": list(argv),
        "status": status,
        "config_source": cfg.source if cfg else None,
        "config": cfg.data if cfg else None,
        "versions": {"cohprop": __version__, "python": platform.python_version(), "numpy": np.__version__,
                     "scipy": scipy.__version__, "numba": numba.__version__},
        "timings_s": {k: float(f"{v:.4g}") if isinstance(v, float) else v for k, v in log.timings.items()},
        "wall_time_s": round(time.perf_counter() - t_start, 3),
        "warnings": log.warnings,
        "files": log.files,
    }
    (log.out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")


# ---------------------------------------------------------------- entry point

def _T_range(text: str):
    try:
        parts = [float(x) for x in text.split(":")]
    except ValueError:
        parts = []
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected START:STOP:STEP")
    return tuple(parts)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cohprop", description="Semiclassical coherent-state propagators.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, need_config=True):
        sp.add_argument("--config", required=need_config, help="JSON experiment file or bundled config name")
        sp.add_argument("-v", "--verbose", action="store_true", help="log progress")
        sp.add_argument("--out", help="output directory (overrides output.dir)")
        sp.add_argument("--threads", type=int, default=1, help="worker processes / FFT threads")
        sp.add_argument("--contour", choices=["auto", "1", "2", "3"], help="override contour.mode")
        sp.add_argument("--T", type=float, dest="T", help="single scan time")
        sp.add_argument("--T-range", type=_T_range, dest="T_range", help="START:STOP:STEP for the sweep")

    common(sub.add_parser("scan", help="w-plane map and root seeds"))
    common(sub.add_parser("families", help="continue root families and locate caustics"))
    common(sub.add_parser("compare", help="exact vs second-order vs uniform"))
    rp = sub.add_parser("reproduce", help="bundled figure pipelines")
    rp.add_argument("figure", choices=["fig1", "fig2", "fig3"])
    common(rp, need_config=False)
    return p


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    t_start = time.perf_counter()
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    cfg = None
    log = None
    status = EXIT_OK
    try:
        if args.command == "reproduce":
            if args.config:
                raise ConfigurationError("reproduce uses the bundled configs; --config is not accepted")
            out = Path(args.out or f"out/{args.figure}")
            log = RunLog(out)
            cfg, _ = cmd_reproduce(args.figure, log, args.threads, args.contour)
        else:
            cfg = load_config(args.config).with_overrides(
                contour=args.contour, T=args.T, T_range=args.T_range, out=args.out)
            log = RunLog(Path(cfg.data["output"]["dir"]))
            if args.command == "scan":
                cmd_scan(cfg, log, args.threads)
            elif args.command == "families":
                cmd_families(cfg, log)
            else:
                cmd_compare(cfg, log, args.threads)
        if log.warnings:
            status = EXIT_PARTIAL
    except (ConfigurationError, ResolutionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        status = EXIT_CONFIG
    except (ShootingError, IntegrationError, AccuracyError, DomainError, ArithmeticError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        status = EXIT_NUMERICAL
    if log is not None:
        write_manifest(log, cfg, args.command, argv, t_start, status)
    return status


if __name__ == "__main__":
    sys.exit(main())
