import numpy as np
import pytest

from polybound.basis import make_basis
from polybound.boxopt import _data_dir, load_table
from polybound.bounder import PolyCoeffs, write_coeffs
from polybound.cli import main
from polybound.meshcheck import mirror_element, perturb_mesh, uniform_mesh, write_mesh

FIXTURE_MESH = _data_dir() / "meshes" / "near-degenerate-p2.txt"


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as ei:
        main(["--version"])
    assert ei.value.code == 0


def test_missing_subcommand_exits_one():
    with pytest.raises(SystemExit) as ei:
        main([])
    assert ei.value.code == 1


def test_unknown_flag_exits_one():
    with pytest.raises(SystemExit) as ei:
        main(["bound", "--not-a-flag"])
    assert ei.value.code == 1


# -- boxgen -----------------------------------------------------------------


def test_boxgen_deterministic(tmp_path, capsys):
    argv = ["boxgen", "--family", "lobatto", "--p", "2", "--m", "3",
            "--nodes", "optimized", "--restarts", "2", "--seed", "0"]
    out1 = tmp_path / "a.txt"
    out2 = tmp_path / "b.txt"
    assert main(argv + ["-o", str(out1)]) == 0
    assert main(argv + ["-o", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    text = capsys.readouterr().out
    assert "eps2" in text
    table = load_table(out1)
    assert table.basis == make_basis("lobatto-nodal", 2)


def test_boxgen_fixed_nodes_alias(tmp_path):
    out = tmp_path / "gll.txt"
    rc = main(["boxgen", "--family", "legendre", "--p", "3", "--m", "5",
               "--nodes", "gll", "-o", str(out)])
    assert rc == 0
    from polybound.basis import gauss_lobatto_nodes

    table = load_table(out)
    assert table.nodes.M == 5
    np.testing.assert_allclose(table.eta(), gauss_lobatto_nodes(5), atol=1e-12)


def test_boxgen_default_m_is_p_plus_one(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    rc = main(["boxgen", "--p", "2", "--nodes", "cheb"])
    assert rc == 0
    assert (tmp_path / "lobatto-nodal-p2-M3.txt").exists()


def test_boxgen_rejects_bad_family(capsys):
    assert main(["boxgen", "--family", "fourier", "--p", "2"]) == 1
    assert "unknown basis family" in capsys.readouterr().err


# -- bound ------------------------------------------------------------------


def test_bound_step_column(capsys):
    assert main(["bound", "--step", "--order", "5"]) == 0
    out = capsys.readouterr().out
    assert "0.6368" in out
    assert "3.0758" in out
    assert "0.6780" in out
    assert "-98.3%" in out


def test_bound_coeffs_file_with_oracle(tmp_path, capsys):
    rng = np.random.default_rng(5)
    basis = make_basis("lobatto-nodal", 3)
    path = tmp_path / "c.txt"
    write_coeffs(PolyCoeffs(1, basis, rng.normal(size=4)), path)
    assert main(["bound", str(path), "--oracle"]) == 0
    out = capsys.readouterr().out
    assert "global bounds" in out
    assert "oracle" in out
    assert "bernstein" in out


def test_bound_2d_subdivide(tmp_path, capsys):
    rng = np.random.default_rng(6)
    basis = make_basis("lobatto-nodal", 3)
    path = tmp_path / "c2.txt"
    write_coeffs(PolyCoeffs(2, basis, rng.normal(size=(4, 4))), path)
    assert main(["bound", str(path), "--subdivide", "2", "--tol", "1e-3"]) == 0
    out = capsys.readouterr().out
    assert "global bounds" in out


def test_bound_missing_file():
    assert main(["bound", "/nonexistent/coeffs.txt"]) == 1


def test_bound_no_file_no_step():
    assert main(["bound"]) == 1


# -- checkmesh --------------------------------------------------------------


def test_checkmesh_valid(tmp_path, capsys):
    mesh = perturb_mesh(uniform_mesh(2, 2, 2), 0.05, seed=1)
    path = tmp_path / "m.txt"
    write_mesh(mesh, path)
    assert main(["checkmesh", str(path)]) == 0
    out = capsys.readouterr().out
    assert "4 valid, 0 invalid" in out


def test_checkmesh_shipped_invalid_fixture(capsys):
    assert main(["checkmesh", str(FIXTURE_MESH), "--oracle"]) == 2
    out = capsys.readouterr().out
    assert "invalid" in out
    assert "0 interval-soundness violation(s)" in out


def test_checkmesh_flipped_element(tmp_path, capsys):
    from polybound.meshcheck import CurvedMesh

    mesh = uniform_mesh(2, 2, 2)
    els = [e.copy() for e in mesh.elements]
    els[0] = mirror_element(els[0])
    path = tmp_path / "flip.txt"
    write_mesh(CurvedMesh(2, els), path)
    assert main(["checkmesh", str(path)]) == 2
    assert "3 valid, 1 invalid" in capsys.readouterr().out


def test_checkmesh_malformed_file(tmp_path, capsys):
    path = tmp_path / "junk.txt"
    path.write_text("not a mesh\n")
    assert main(["checkmesh", str(path)]) == 1
    assert "error" in capsys.readouterr().err


# -- limit-demo -------------------------------------------------------------


def test_limit_demo_short_run(capsys):
    rc = main(["limit-demo", "--elements", "4", "--order", "2",
               "--tfinal", "0.02", "--samples", "50"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "limiter on" in out
    assert "mass drift" in out


def test_limit_demo_report_file(tmp_path, capsys):
    report = tmp_path / "summary.txt"
    rc = main(["limit-demo", "--elements", "4", "--order", "2",
               "--tfinal", "0.02", "--samples", "50", "--report", str(report)])
    assert rc == 0
    text = report.read_text()
    assert "grid" in text and "sampled min" in text
    assert "4^2" in text.replace(" ", "")


def test_limit_demo_no_limiter(capsys):
    rc = main(["limit-demo", "--elements", "4", "--order", "2",
               "--tfinal", "0.02", "--samples", "50", "--no-limiter"])
    assert rc == 0
    assert "limiter off" in capsys.readouterr().out


# -- tables -----------------------------------------------------------------


def test_tables_reproduction(capsys):
    assert main(["tables"]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out
    assert "FAIL" not in out
    assert "Control nodes eta" in out
