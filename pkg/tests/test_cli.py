import json
import os
import subprocess
import sys

import numpy as np
import pytest

from lipforge import gridfile
from lipforge.cli import run_cli
from lipforge.fn import DistFn, LinearFn, fn_to_file_doc
from lipforge.regions import box_region, gen_four_corner
from lipforge.serialize import dec_float, dump_path, load_path
from lipforge.spaces import LinOp, lp_space


@pytest.fixture
def files(tmp_path, l2_2):
    paths = {}
    paths["E"] = str(tmp_path / "E.json")
    dump_path(gen_four_corner(1).to_doc(), paths["E"])
    paths["Q"] = str(tmp_path / "Q.json")
    dump_path(box_region([-1.0, -1.0], [2.0, 2.0]).to_doc(), paths["Q"])
    paths["op"] = str(tmp_path / "op.json")
    T = LinOp.build(np.array([[0.3, 0.0], [0.0, -0.2]]), l2_2, l2_2)
    dump_path(T.to_doc(), paths["op"])
    # exact-arithmetic paths (game certificates) need an linf codomain
    linf = lp_space(2, "inf")
    paths["op_inf"] = str(tmp_path / "op_inf.json")
    Ti = LinOp.build(np.array([[0.3, 0.0], [0.0, -0.2]]), linf, linf)
    dump_path(Ti.to_doc(), paths["op_inf"])
    paths["fn"] = str(tmp_path / "fn.json")
    dump_path(fn_to_file_doc(LinearFn(0.4 * np.eye(2), lip_bound=0.4)),
              paths["fn"])
    paths["dist"] = str(tmp_path / "dist.json")
    dump_path(fn_to_file_doc(DistFn(l2_2, np.array([0.5, 0.5]))),
              paths["dist"])
    paths["tmp"] = str(tmp_path)
    return paths


def test_cantor_writes_region(files, tmp_path):
    out = str(tmp_path / "cantor.json")
    assert run_cli(["cantor", "--level", "2", "--out", out]) == 0
    doc = load_path(out)
    from lipforge.regions import Region

    E = Region.from_doc(doc)
    assert E.n_boxes == 16


def test_cyl_identity(files, tmp_path, capsys):
    out = str(tmp_path / "cyl.json")
    assert run_cli(["cyl", "--op", files["op"], "--out", out]) == 0
    doc = load_path(out)
    assert dec_float(doc["cyl"]) >= dec_float(doc["opnorm_lb"]) - 1e-9


def test_xi_runs(files, tmp_path):
    out = str(tmp_path / "xi.json")
    rc = run_cli(["xi", "--region", files["Q"], "--p", "1,0",
                  "--alpha", "0.4", "--grid", "0.25", "--out", out])
    assert rc == 0
    doc = load_path(out)
    assert dec_float(doc["value"]) > 0


def test_steep_certificate_and_svg(files, tmp_path):
    out = str(tmp_path / "steep")
    rc = run_cli(["steep", "--region", files["Q"], "--p", "1,0",
                  "--alpha", "0.3", "--grid", "0.2", "--svg", "--out", out])
    assert rc == 0
    cert = load_path(os.path.join(out, "certificate.json"))
    assert all(c["ok"] for c in cert.values() if isinstance(c, dict))
    svg_text = open(os.path.join(out, "g.svg")).read()
    assert svg_text.startswith("<svg") and "rect" in svg_text


def test_verify_and_csv(files, tmp_path):
    out = str(tmp_path / "scan.json")
    csv = str(tmp_path / "scan.csv")
    ops = str(tmp_path / "ops.json")
    dump_path({"ops": [load_path(files["op"])]}, ops)
    rc = run_cli(["verify", "--fn", files["fn"], "--point", "0.2,0.1",
                  "--ops", ops, "--scales", "0.1,0.05", "--tol", "0.15",
                  "--dirs", "16", "--require-pass", "--out", out,
                  "--csv", csv])
    # fn has matrix 0.4 I, op is diag(0.3, -0.2): mismatch -> exit 3
    assert rc == 3
    rows = open(csv).read().strip().splitlines()
    assert rows[0] == "op,scale,error"
    assert len(rows) == 3


def test_verify_passes_matching_operator(files, tmp_path, l2_2):
    ops = str(tmp_path / "ops.json")
    T = LinOp.build(0.4 * np.eye(2), l2_2, l2_2)
    dump_path(T.to_doc(), ops)
    rc = run_cli(["verify", "--fn", files["fn"], "--point", "0.2,0.1",
                  "--ops", ops, "--scales", "0.1", "--tol", "1e-9",
                  "--dirs", "8", "--require-pass"])
    assert rc == 0


def test_game_outputs(files, tmp_path):
    out = str(tmp_path / "game")
    rc = run_cli(["game", "--set", files["E"], "--q", files["Q"],
                  "--op", files["op_inf"], "--rounds", "2",
                  "--policy", "identity", "--out", out])
    assert rc == 0
    cert = load_path(os.path.join(out, "certificate.json"))
    assert len(cert["levels"]) == 2
    csv = open(os.path.join(out, "levels.csv")).read().splitlines()
    assert csv[0] == "level,error,bound,points"


def test_smooth_command(files, tmp_path):
    out = str(tmp_path / "smooth")
    rc = run_cli(["smooth", "--fn", files["dist"], "--set", files["E"],
                  "--q", files["Q"], "--eps", "0.1", "--out", out])
    assert rc == 0
    cert = load_path(os.path.join(out, "certificate.json"))
    assert cert["c1_pass"] is True


def test_prescribe_command(files, tmp_path):
    out = str(tmp_path / "presc")
    rc = run_cli(["prescribe", "--q", files["Q"], "--set", files["E"],
                  "--op", files["op"], "--r", "0.4", "--s", "0.05",
                  "--kmax", "1", "--out", out])
    assert rc == 0
    cert = load_path(os.path.join(out, "certificate.json"))
    assert dec_float(cert["exactness_residual"]) <= 1e-9


def test_plot_roundtrip_lfgf(files, tmp_path):
    svg_out = str(tmp_path / "f.svg")
    lfgf = str(tmp_path / "f.lfgf")
    rc = run_cli(["plot", "--fn", files["fn"], "--bbox=-1,-1;1,1",
                  "--res", "16", "--lfgf", lfgf, "--out", svg_out])
    assert rc == 0
    vals, bb = gridfile.read_grid(lfgf)
    assert vals.shape == (16, 16, 2)
    assert np.allclose(bb[0], [-1, -1]) and np.allclose(bb[1], [1, 1])
    svg2 = str(tmp_path / "f2.svg")
    assert run_cli(["plot", "--grid", lfgf, "--out", svg2]) == 0
    assert open(svg2).read().startswith("<svg")


def test_exit_code_config_errors(files, tmp_path):
    assert run_cli(["cyl", "--op", str(tmp_path / "missing.json")]) == 2
    assert run_cli(["xi", "--region", files["Q"], "--p", "1,0",
                    "--space", "l7:2", "--alpha", "0.4",
                    "--grid", "0.25"]) == 2
    assert run_cli(["plot", "--out", str(tmp_path / "x.svg")]) == 2


def test_exit_code_resolution_error(files, tmp_path):
    # alpha >= 1 violates the cone-parameter contract
    rc = run_cli(["xi", "--region", files["Q"], "--p", "1,0",
                  "--alpha", "1.5", "--grid", "0.25"])
    assert rc == 2 or rc == 4


def test_thread_cap_env_rejected(files, tmp_path):
    env = dict(os.environ, LIPFORGE_THREADS="banana")
    proc = subprocess.run(
        [sys.executable, "-m", "lipforge.cli", "cyl", "--op", files["op"]],
        capture_output=True, env=env, text=True)
    assert proc.returncode == 2


def test_determinism_byte_identical(files, tmp_path):
    outs = []
    for tag in ("a", "b"):
        out = str(tmp_path / ("g_" + tag))
        rc = run_cli(["game", "--set", files["E"], "--q", files["Q"],
                      "--op", files["op_inf"], "--rounds", "2",
                      "--policy", "seeded-random", "--seed", "7",
                      "--out", out])
        assert rc == 0
        outs.append(out)
    for name in ("limit.json", "certificate.json", "levels.csv"):
        a = open(os.path.join(outs[0], name), "rb").read()
        b = open(os.path.join(outs[1], name), "rb").read()
        assert a == b, name


def test_console_script_installed():
    proc = subprocess.run(["lipforge", "--help"], capture_output=True,
                          text=True)
    assert proc.returncode == 0
    assert "cantor" in proc.stdout
