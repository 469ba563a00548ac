"""Configuration-driven runs, convergence studies and invariant checks.

Config files are flat key = value text with one [case] section per run:

    [case]
    name = linear2d_demo
    model = linear2d            # see models.model_names()
    mesh = rect 16 16           # interval N | rect NX NY | tri NX NY |
                                # cuboid NX NY NZ | file a.node a.ele
    end_time = 1.0
    cfl = 0.0625                # optional CFL-number override
    recon = iqr                 # iqr | kexact
    levels = 8 16 32            # resolutions for `iqr converge`
    out = results               # optional output directory
    check_invariants = true
    error = true                # compare against the exact solution

Lines starting with # or ; are comments.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field

import numpy as np

from .io import ensure_dir, write_convergence_csv, write_field_csv, write_vtk
from .mesh import (
    Mesh,
    build_cuboid_mesh,
    build_interval_mesh,
    build_rect_mesh,
    build_tri_mesh,
    load_tri_mesh,
)
from .models import ConservationLawModel, get_model
from .solver import SolverState, TimeControls, advance_to, init_state

BOUND_TOL = 1e-11
MP_TOL = 1e-11
CONSERVATION_TOL = 1e-11


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    model: str = ""
    mesh: tuple = ()                 # ("rect", 16, 16) or ("file", node, ele)
    end_time: float = 0.0
    name: str = ""
    cfl: float | None = None
    dt: float | None = None
    recon: str = "iqr"
    diagonal: str = "nw"
    levels: tuple = ()
    out: str | None = None
    check_invariants: bool = False
    compute_error: bool = True
    source: str = "<config>"


@dataclass
class ErrorReport:
    h: float
    l1: float
    linf: float
    l1_order: float | None = None
    linf_order: float | None = None
    ncells: int = 0


@dataclass
class InvariantReport:
    items: dict = field(default_factory=dict)   # name -> (passed, worst)

    @property
    def passed(self) -> bool:
        return all(ok for ok, _ in self.items.values())

    def lines(self):
        out = []
        for name, (ok, worst) in self.items.items():
            out.append(f"{'PASS' if ok else 'FAIL'} {name}: worst violation {worst:.3e}")
        return out


@dataclass
class RunResult:
    config: RunConfig
    mesh: Mesh
    model: ConservationLawModel
    state: SolverState
    error: ErrorReport | None
    invariants: InvariantReport | None
    runtime: float


# ---------------------------------------------------------------------------
# config parsing


_BOOL = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


def _arith(value: str) -> float:
    """Tiny arithmetic for end times like 2*pi or 0.5/pi**2."""
    if not set(value) <= set("0123456789.+-*/() pie"):
        raise ConfigError(f"not a numeric expression: {value!r}")
    return float(eval(value, {"__builtins__": {}}, {"pi": np.pi, "e": np.e}))


def parse_config(text: str, path: str = "<config>") -> list[RunConfig]:
    cases: list[RunConfig] = []
    current: RunConfig | None = None
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"{path}:{ln}: malformed section header {raw!r}")
            current = RunConfig(source=f"{path}:{ln}")
            title = line[1:-1].strip()
            if title.startswith("case"):
                rest = title[4:].strip()
                if rest:
                    current.name = rest
            cases.append(current)
            continue
        if current is None:
            raise ConfigError(f"{path}:{ln}: key outside a [case] section")
        if "=" not in line:
            raise ConfigError(f"{path}:{ln}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            _apply_key(current, key, value)
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"{path}:{ln}: {exc}") from None
    for case in cases:
        if not case.model:
            raise ConfigError(f"{case.source}: case has no model")
        if not case.mesh:
            raise ConfigError(f"{case.source}: case has no mesh")
    return cases


def _apply_key(cfg: RunConfig, key: str, value: str) -> None:
    if key == "name":
        cfg.name = value
    elif key == "model":
        cfg.model = value
    elif key == "mesh":
        parts = value.split()
        kind = parts[0]
        if kind == "file":
            if len(parts) != 3:
                raise ConfigError("mesh file needs node and ele paths")
            cfg.mesh = ("file", parts[1], parts[2])
        elif kind in ("interval", "rect", "tri", "cuboid"):
            want = {"interval": 1, "rect": 2, "tri": 2, "cuboid": 3}[kind]
            if len(parts) - 1 != want:
                raise ConfigError(f"mesh {kind} needs {want} resolution(s)")
            cfg.mesh = (kind, *[int(p) for p in parts[1:]])
        else:
            raise ConfigError(f"unknown mesh kind {kind!r}")
    elif key == "end_time":
        cfg.end_time = _arith(value)
    elif key == "cfl":
        cfg.cfl = float(value)
    elif key == "dt":
        cfg.dt = float(value)
    elif key == "recon":
        if value not in ("iqr", "kexact"):
            raise ConfigError("recon must be iqr or kexact")
        cfg.recon = value
    elif key == "diagonal":
        cfg.diagonal = value
    elif key == "levels":
        cfg.levels = tuple(int(v) for v in value.replace(",", " ").split())
    elif key == "out":
        cfg.out = value
    elif key == "check_invariants":
        cfg.check_invariants = _BOOL[value.lower()]
    elif key == "error":
        cfg.compute_error = _BOOL[value.lower()]
    else:
        raise ConfigError(f"unknown key {key!r}")


def load_config(path: str) -> list[RunConfig]:
    with open(path, encoding="utf-8") as f:
        return parse_config(f.read(), path)


# ---------------------------------------------------------------------------
# meshes and norms


def build_mesh(cfg: RunConfig, model: ConservationLawModel,
               resolution: int | None = None) -> Mesh:
    periodic = model.bc == "periodic"
    lo, hi = model.domain
    kind = cfg.mesh[0]
    if kind == "file":
        with open(cfg.mesh[1], encoding="utf-8") as f:
            node_text = f.read()
        with open(cfg.mesh[2], encoding="utf-8") as f:
            ele_text = f.read()
        return load_tri_mesh(node_text, ele_text, periodic=periodic,
                             domain=model.domain)
    res = list(cfg.mesh[1:])
    if resolution is not None:
        res = [resolution] * len(res)
    if kind == "interval":
        return build_interval_mesh(res[0], (lo[0], hi[0]), periodic=periodic)
    if kind == "rect":
        return build_rect_mesh(res[0], res[1], (lo, hi), periodic=periodic)
    if kind == "tri":
        return build_tri_mesh(res[0], res[1], (lo, hi), diagonal=cfg.diagonal,
                              periodic=periodic)
    if kind == "cuboid":
        return build_cuboid_mesh(res[0], res[1], res[2], (lo, hi),
                                 periodic=periodic)
    raise ConfigError(f"{cfg.source}: unknown mesh kind {kind!r}")


def nominal_h(cfg: RunConfig, mesh: Mesh, model: ConservationLawModel) -> float:
    kind = cfg.mesh[0]
    if kind == "file":
        return mesh.h_min
    lo, hi = model.domain
    n = mesh.ncells
    if kind == "interval":
        return (hi[0] - lo[0]) / n
    if kind == "rect":
        nx = round((n) ** 0.5)
        return (hi[0] - lo[0]) / nx
    if kind == "tri":
        nx = round((n / 2) ** 0.5)
        return (hi[0] - lo[0]) / nx
    nx = round(n ** (1.0 / 3.0))
    return (hi[0] - lo[0]) / nx


def error_norms(mesh: Mesh, u: np.ndarray, exact_avg: np.ndarray):
    """Volume-weighted L1 sum and max cell-average difference."""
    nc = mesh.ncells
    if len(exact_avg) < nc or len(u) < nc:
        raise ValueError("field does not cover the mesh")
    diff = np.abs(u[:nc] - exact_avg[:nc])
    return float(np.dot(mesh.volume[:nc], diff)), float(diff.max())


def exact_cell_averages(mesh: Mesh, model: ConservationLawModel, t: float) -> np.ndarray:
    rule = "error" if model.smooth_ic else "subdiv"
    return mesh.cell_averages(lambda p: model.exact(p, t), rule)


# ---------------------------------------------------------------------------
# invariants


def check_invariants(state: SolverState, mesh: Mesh,
                     model: ConservationLawModel) -> InvariantReport:
    diag = state.diag
    report = InvariantReport()
    lo, hi = state.init_range
    worst_bound = max(lo - min(diag["umin"]), max(diag["umax"]) - hi, 0.0)
    report.items["bound_preservation"] = (worst_bound <= BOUND_TOL, worst_bound)
    if diag["mp_violation"]:
        worst_mp = max(max(diag["mp_violation"]), 0.0)
        report.items["local_max_principle"] = (worst_mp <= MP_TOL, worst_mp)
    if model.bc == "periodic":
        mass = np.asarray(diag["mass"])
        scale = max(float(np.dot(mesh.volume[: mesh.ncells],
                                 np.abs(state.u[: mesh.ncells]))), 1e-300)
        drift = float(np.abs(mass - mass[0]).max()) / scale
        report.items["conservation"] = (drift <= CONSERVATION_TOL, drift)
    return report


# ---------------------------------------------------------------------------
# runs


def run_case(cfg: RunConfig, resolution: int | None = None) -> RunResult:
    model = get_model(cfg.model)
    mesh = build_mesh(cfg, model, resolution)
    t0 = time.perf_counter()
    state = init_state(mesh, model)
    controls = TimeControls(cfl=cfg.cfl, dt=cfg.dt,
                            check_mp=cfg.check_invariants)
    state = advance_to(state, mesh, model, cfg.end_time, controls, cfg.recon)
    runtime = time.perf_counter() - t0

    error = None
    if cfg.compute_error and model.exact is not None:
        exact = exact_cell_averages(mesh, model, cfg.end_time)
        l1, linf = error_norms(mesh, state.u, exact)
        error = ErrorReport(nominal_h(cfg, mesh, model), l1, linf,
                            ncells=mesh.ncells)
    invariants = check_invariants(state, mesh, model) if cfg.check_invariants else None

    if cfg.out:
        ensure_dir(cfg.out)
        base = cfg.name or f"{cfg.model}_{mesh.ncells}"
        write_field_csv(os.path.join(cfg.out, base + "_field.csv"), mesh, state.u)
        write_vtk(os.path.join(cfg.out, base + ".vtk"), mesh, state.u,
                  title=base)
    return RunResult(cfg, mesh, model, state, error, invariants, runtime)


def attach_orders(reports: list[ErrorReport]) -> list[ErrorReport]:
    for prev, cur in zip(reports, reports[1:]):
        ratio = np.log(prev.h / cur.h)
        cur.l1_order = float(np.log(prev.l1 / cur.l1) / ratio) if cur.l1 > 0 else None
        cur.linf_order = float(np.log(prev.linf / cur.linf) / ratio) if cur.linf > 0 else None
    return reports


def convergence_study(cfg: RunConfig, levels=None) -> list[ErrorReport]:
    levels = tuple(levels) if levels is not None else cfg.levels
    if len(levels) < 2:
        raise ConfigError(f"{cfg.source}: convergence study needs >= 2 levels")
    reports = []
    for res in levels:
        result = run_case(cfg, resolution=res)
        if result.error is None:
            raise ConfigError(f"{cfg.source}: model {cfg.model} has no exact solution")
        reports.append(result.error)
    attach_orders(reports)
    if cfg.out:
        ensure_dir(cfg.out)
        base = cfg.name or f"{cfg.model}_convergence"
        write_convergence_csv(os.path.join(cfg.out, base + "_convergence.csv"),
                              reports)
    return reports
