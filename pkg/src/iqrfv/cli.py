"""Command line interface.

    iqr run <config>        run every [case] in the config file
    iqr converge <config>   convergence study over the case's levels
    iqr mesh-info <mesh>    summarize a .node/.ele mesh

Exit codes: 0 success, 2 invariant-check failure, 1 error.
"""

from __future__ import annotations

import argparse
import sys

from .harness import ConfigError, convergence_study, load_config, run_case
from .mesh import MeshError, load_tri_mesh
from .models import ModelError
from .solver import SolverError


def _add_common(p):
    p.add_argument("config", help="path to a key = value config file")
    p.add_argument("--cfl", type=float, default=None, help="override the CFL number")
    p.add_argument("--recon", choices=("iqr", "kexact"), default=None,
                   help="reconstruction mode")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--check-invariants", action="store_true",
                   help="track and report stability invariants")


def _apply_overrides(cases, args):
    for cfg in cases:
        if args.cfl is not None:
            cfg.cfl = args.cfl
        if args.recon is not None:
            cfg.recon = args.recon
        if args.out is not None:
            cfg.out = args.out
        if args.check_invariants:
            cfg.check_invariants = True
    return cases


def _cmd_run(args) -> int:
    cases = _apply_overrides(load_config(args.config), args)
    status = 0
    for cfg in cases:
        result = run_case(cfg)
        label = cfg.name or cfg.model
        print(f"[{label}] t={result.state.t:g} steps={result.state.step} "
              f"cells={result.mesh.ncells} runtime={result.runtime:.2f}s")
        if result.error is not None:
            print(f"[{label}] h={result.error.h:g} "
                  f"L1={result.error.l1:.6e} Linf={result.error.linf:.6e}")
        if result.invariants is not None:
            for line in result.invariants.lines():
                print(f"[{label}] {line}")
            if not result.invariants.passed:
                status = 2
    return status


def _cmd_converge(args) -> int:
    cases = _apply_overrides(load_config(args.config), args)
    for cfg in cases:
        label = cfg.name or cfg.model
        reports = convergence_study(cfg)
        print(f"[{label}] h, L1 error, order, Linf error, order")
        for r in reports:
            l1o = "---" if r.l1_order is None else f"{r.l1_order:.2f}"
            lio = "---" if r.linf_order is None else f"{r.linf_order:.2f}"
            print(f"[{label}] {r.h:<10g} {r.l1:.3e} {l1o:>6} {r.linf:.3e} {lio:>6}")
    return 0


def _cmd_mesh_info(args) -> int:
    node_path = args.mesh
    ele_path = args.ele
    if ele_path is None:
        if node_path.endswith(".node"):
            ele_path = node_path[:-5] + ".ele"
        else:
            raise MeshError("give a .node file or both paths")
    with open(node_path, encoding="utf-8") as f:
        node_text = f.read()
    with open(ele_path, encoding="utf-8") as f:
        ele_text = f.read()
    mesh = load_tri_mesh(node_text, ele_text)
    print(mesh.summary())
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="iqr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    _add_common(sub.add_parser("run", help="run cases from a config file"))
    _add_common(sub.add_parser("converge", help="run a convergence study"))
    p_info = sub.add_parser("mesh-info", help="summarize a mesh file")
    p_info.add_argument("mesh", help=".node file (matching .ele alongside)")
    p_info.add_argument("ele", nargs="?", default=None, help=".ele file")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "converge":
            return _cmd_converge(args)
        return _cmd_mesh_info(args)
    except (ConfigError, MeshError, ModelError, SolverError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
