import json

import pytest

from smoothpatch.cli import DEFAULT_H0, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_space_info_case_a(capsys):
    code, out, _ = run(capsys, "space-info", "--domain", "three-patch", "--case", "A", "--s", "1", "--k", "4")
    assert code == 0
    assert "mixed dim per patch: 105" in out
    assert "total dofs: 219" in out


def test_space_info_case_b_json(capsys):
    code, out, _ = run(capsys, "space-info", "--domain", "five-patch", "--case", "B", "--s", "2",
                       "--k", "5", "--json")
    assert code == 0
    data = json.loads(out)
    assert data["mixed_dim_per_patch"] == 4 * 9 * 6 + 49 + 2 * (6 + 10) == 297
    assert data["total"] == sum(data["blocks"].values())


@pytest.mark.parametrize("argv", [
    ("space-info", "--domain", "nowhere"),
    ("space-info", "--s", "2", "--k", "3"),
    ("check", "--perturb-gluing", "1"),
    ("solve", "--domain", "missing.json"),
])
def test_config_errors_exit_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert err.startswith("error:")


def test_argparse_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["solve", "--h0", "2/3"])
    assert exc.value.code == 2


def test_check_filter(capsys):
    code, out, _ = run(capsys, "check", "--suite", "partition-of-unity")
    assert code == 0
    assert out.splitlines()[0].startswith("PASS  partition-of-unity")
    assert "1/1 suites passed" in out


def test_check_default_three_patch(capsys):
    code, out, _ = run(capsys, "check", "--domain", "three-patch")
    assert code == 0, out
    assert "7/7 suites passed" in out


def test_check_fault_injection(capsys):
    code, out, _ = run(capsys, "check", "--suite", "smoothness", "--perturb-gluing", "2")
    assert code == 3
    assert "FAIL  smoothness" in out and "edge 2" in out


def test_solve_writes_json(capsys, tmp_path):
    code, out, _ = run(capsys, "solve", "--domain", "three-patch", "--case", "B", "--h0", "1/4",
                       "--out", str(tmp_path))
    assert code == 0
    data = json.loads((tmp_path / "solve.json").read_text())
    assert data["k"] == 3 and data["errors"]["L2"] < 1e-4


def test_convergence_outputs(capsys, tmp_path):
    argv = ["convergence", "--domain", "three-patch", "--pde", "biharmonic", "--case", "B",
            "--levels", "2", "--out", str(tmp_path)]
    code, out, _ = run(capsys, *argv)
    assert code == 0
    assert "order L2" in out
    csv = tmp_path / "three-patch_biharmonic_B_s1.csv"
    first = csv.read_bytes()
    assert first.splitlines()[0] == b"level,h,dofs,errL2,errH1,errH2,rateL2,rateH1,rateH2"
    svg = (tmp_path / "three-patch_biharmonic_B_s1.svg").read_text()
    assert svg.startswith("<svg") and svg.count("<polyline") == 3
    assert "log2(1/h)" in svg and "log10(error)" in svg
    run(capsys, *argv)
    assert csv.read_bytes() == first


def test_numerical_failure_exit_3(capsys, monkeypatch):
    from smoothpatch import cli
    from smoothpatch.errors import SingularSystemError

    def boom(*a, **k):
        raise SingularSystemError("non-positive pivot at unknown 7", index=7)

    monkeypatch.setattr(cli, "convergence_study", boom)
    code, _, err = run(capsys, "convergence", "--levels", "1")
    assert code == 3 and "unknown 7" in err


def test_domains_export_roundtrip(capsys, tmp_path):
    path = tmp_path / "g2.json"
    assert main(["domains", "export", "g2-three-patch", "--out", str(path)]) == 0
    code, out, _ = run(capsys, "space-info", "--domain", str(path), "--case", "B", "--s", "1")
    assert code == 0 and "3 patches" in out


def test_default_h0_per_example():
    assert DEFAULT_H0["biharmonic", "A"] == pytest.approx(1 / 6)
    assert DEFAULT_H0["triharmonic", "A"] == pytest.approx(1 / 5)
    assert DEFAULT_H0["biharmonic", "B"] == pytest.approx(1 / 4)
    assert DEFAULT_H0["triharmonic", "B"] == pytest.approx(1 / 5)
