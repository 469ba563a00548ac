"""Config parsing, runs, error norms, invariant reports, CSV/VTK output."""

import os

import numpy as np
import pytest

from iqrfv.harness import (
    ConfigError,
    ErrorReport,
    RunConfig,
    attach_orders,
    build_mesh,
    check_invariants,
    convergence_study,
    error_norms,
    parse_config,
    run_case,
)
from iqrfv.io import read_field_csv, validate_vtk, write_field_csv, write_vtk
from iqrfv.mesh import build_rect_mesh
from iqrfv.models import get_model
from iqrfv import cli

CONFIG = """
# smoke case
[case]
name = demo
model = linear2d
mesh = rect 8 8
end_time = 0.2
check_invariants = true
levels = 8 16

[case]
model = linear1d
mesh = interval 16
end_time = 1/2
recon = kexact
"""


def test_parse_config_two_cases():
    cases = parse_config(CONFIG, "demo.cfg")
    assert len(cases) == 2
    assert cases[0].name == "demo"
    assert cases[0].mesh == ("rect", 8, 8)
    assert cases[0].levels == (8, 16)
    assert cases[0].check_invariants
    assert cases[1].recon == "kexact"
    assert cases[1].end_time == pytest.approx(0.5)


def test_parse_config_pi_expressions():
    cases = parse_config("[case]\nmodel = burgers2d\nmesh = tri 4 4\n"
                         "end_time = 0.5/pi**2\n")
    assert cases[0].end_time == pytest.approx(0.5 / np.pi**2)


def test_parse_config_errors_carry_line_context():
    with pytest.raises(ConfigError, match="bad.cfg:2"):
        parse_config("[case]\nnonsense line\n", "bad.cfg")
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config("[case]\nwhat = 1\n")
    with pytest.raises(ConfigError, match="no model"):
        parse_config("[case]\nmesh = rect 4 4\n")
    with pytest.raises(ConfigError, match="outside"):
        parse_config("model = linear2d\n")
    with pytest.raises(ConfigError, match="numeric"):
        parse_config("[case]\nmodel = linear2d\nmesh = rect 4 4\n"
                     "end_time = __import__\n")


def test_error_norms_basics():
    mesh = build_rect_mesh(4, 4)
    u = np.zeros(mesh.ntotal)
    l1, linf = error_norms(mesh, u, np.zeros(mesh.ncells))
    assert l1 == 0.0 and linf == 0.0
    exact = np.zeros(mesh.ncells)
    u[3] = 0.5
    l1, linf = error_norms(mesh, u, exact)
    assert l1 == pytest.approx(mesh.volume[3] * 0.5)
    assert linf == pytest.approx(0.5)


def test_error_norms_match_naive_loop():
    rng = np.random.default_rng(0)
    mesh = build_rect_mesh(5, 5)
    u = rng.standard_normal(mesh.ntotal)
    exact = rng.standard_normal(mesh.ncells)
    l1, linf = error_norms(mesh, u, exact)
    acc = 0.0
    mx = 0.0
    for c in range(mesh.ncells):
        d = abs(u[c] - exact[c])
        acc += mesh.volume[c] * d
        mx = max(mx, d)
    assert abs(l1 - acc) < 1e-15 * max(1.0, acc)
    assert linf == mx


def test_attach_orders_synthetic():
    reports = [ErrorReport(0.1, 1e-2, 2e-2), ErrorReport(0.05, 1.25e-3, 2.5e-3)]
    attach_orders(reports)
    assert reports[0].l1_order is None
    assert reports[1].l1_order == pytest.approx(3.0, abs=1e-12)
    assert reports[1].linf_order == pytest.approx(3.0, abs=1e-12)


def test_run_case_smoke_with_outputs(tmp_path):
    cfg = parse_config(CONFIG)[0]
    cfg.out = str(tmp_path)
    result = run_case(cfg)
    assert result.state.t == pytest.approx(0.2)
    assert result.error is not None and result.error.l1 > 0
    assert result.invariants is not None and result.invariants.passed
    csv_path = tmp_path / "demo_field.csv"
    vtk_path = tmp_path / "demo.vtk"
    assert csv_path.exists() and vtk_path.exists()
    validate_vtk(str(vtk_path))
    back = read_field_csv(str(csv_path))
    np.testing.assert_allclose(back, result.state.u[: result.mesh.ncells],
                               atol=1e-15)


def test_csv_roundtrip_and_vtk_selfcheck(tmp_path):
    mesh = build_rect_mesh(4, 4)
    rng = np.random.default_rng(1)
    u = rng.standard_normal(mesh.ncells)
    p = tmp_path / "f.csv"
    write_field_csv(str(p), mesh, u)
    np.testing.assert_allclose(read_field_csv(str(p)), u, atol=0.0)
    v = tmp_path / "f.vtk"
    write_vtk(str(v), mesh, u)
    validate_vtk(str(v))


def test_identical_config_gives_identical_bytes(tmp_path):
    cfg = parse_config(CONFIG)[0]
    outs = []
    for sub in ("a", "b"):
        cfg.out = str(tmp_path / sub)
        run_case(cfg)
        outs.append((tmp_path / sub / "demo_field.csv").read_bytes())
    assert outs[0] == outs[1]


def test_convergence_study_small(tmp_path):
    cfg = parse_config("[case]\nname = conv\nmodel = linear2d\nmesh = rect 8 8\n"
                       "end_time = 0.125\nlevels = 8 16\n")[0]
    cfg.out = str(tmp_path)
    reports = convergence_study(cfg)
    assert len(reports) == 2
    assert reports[1].l1 < reports[0].l1
    text = (tmp_path / "conv_convergence.csv").read_text()
    assert text.splitlines()[0] == "h,l1_error,l1_order,linf_error,linf_order"
    with pytest.raises(ConfigError, match="levels"):
        convergence_study(cfg, levels=[8])


def test_check_invariants_constant_run():
    cfg = RunConfig(model="linear2d", mesh=("rect", 4, 4), end_time=0.05,
                    check_invariants=True)
    model = get_model("linear2d")
    model.initial = lambda p: np.full(len(p), 0.3)
    from iqrfv.solver import TimeControls, advance_to, init_state
    mesh = build_mesh(cfg, model)
    state = init_state(mesh, model)
    state = advance_to(state, mesh, model, 0.05, TimeControls(check_mp=True))
    report = check_invariants(state, mesh, model)
    assert report.passed
    assert report.items["bound_preservation"][1] == 0.0
    assert report.items["conservation"][1] <= 1e-15


def test_burgers_shock_front_location():
    # after the wave breaks, the jump concentrates on x + y = 3/pi^2 +- 2
    cfg = RunConfig(model="burgers2d", mesh=("tri", 40, 40), diagonal="ne",
                    end_time=5 / np.pi**2, compute_error=False)
    result = run_case(cfg)
    mesh, u = result.mesh, result.state.u
    own, nbr = mesh.f_owner, mesh.f_nbr
    interior = nbr < mesh.ncells
    jumps = np.abs(u[own[interior]] - u[nbr[interior]])
    xi_face = mesh.f_qpts[interior].mean(axis=1).sum(axis=1)
    front = 3 / np.pi**2 + 2
    dist = np.abs((xi_face - front + 2) % 4 - 2)   # periodic distance in x+y
    assert jumps[dist < 0.1].max() > 0.4
    assert jumps[dist > 0.3].max() < 0.1


# ---------------------------------------------------------------------------
# CLI


def test_cli_run_and_converge(tmp_path, capsys):
    cfgfile = tmp_path / "c.cfg"
    cfgfile.write_text("[case]\nname = t\nmodel = linear1d\nmesh = interval 16\n"
                       "end_time = 0.25\nlevels = 16 32\n")
    rc = cli.main(["run", str(cfgfile), "--check-invariants",
                   "--out", str(tmp_path / "o")])
    assert rc == 0
    out = capsys.readouterr().out
    assert "L1=" in out and "PASS" in out
    rc = cli.main(["converge", str(cfgfile)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "order" in out

    rc = cli.main(["run", str(tmp_path / "missing.cfg")])
    assert rc == 1


def test_cli_mesh_info(tmp_path, capsys):
    node = tmp_path / "m.node"
    ele = tmp_path / "m.ele"
    node.write_text("4 2 0 0\n1 0.0 0.0\n2 1.0 0.0\n3 1.0 1.0\n4 0.0 1.0\n")
    ele.write_text("2 3 0\n1 1 2 3\n2 1 3 4\n")
    rc = cli.main(["mesh-info", str(node)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "triangle" in out and "cells: 2" in out


def test_cli_invariant_failure_exit_code(tmp_path):
    # an oversized CFL override must be reported as an invariant failure
    cfgfile = tmp_path / "c.cfg"
    cfgfile.write_text("[case]\nmodel = linear1d\nmesh = interval 32\n"
                       "end_time = 0.05\ncfl = 0.9\n")
    model = get_model("linear1d")
    rc = cli.main(["run", str(cfgfile), "--check-invariants"])
    assert rc == 2
