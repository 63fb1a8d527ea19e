import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from hrvem.cli import RunConfig, main, run
from hrvem.verify import csv_columns

DATA = Path(__file__).parent / "data"
TETRA = str(DATA / "tetra_n2.poly")


def test_convergence_writes_csv_and_plot(tmp_path, capsys):
    out, svg = tmp_path / "conv.csv", tmp_path / "conv.svg"
    code = main(["convergence", "--family", "cube", "--n", "1,2,3", "--k", "1", "--test", "a",
                 "--hybrid", "--postprocess", "--csv", str(out), "--plot", str(svg)])
    assert code == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 3
    assert list(rows[0]) == csv_columns()
    assert rows[0]["rate_E_u"] == "nan" and rows[2]["rate_E_u"] != "nan"
    assert svg.exists()
    assert "rate" in capsys.readouterr().out


def test_convergence_csv_bit_identical(tmp_path):
    paths = [tmp_path / f"{i}.csv" for i in range(2)]
    for p in paths:
        assert main(["convergence", "--family", "tetra", "--n", "1,2", "--csv", str(p)]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


@pytest.mark.parametrize("k", [1, 2])
def test_patch_test_default(k, capsys):
    assert main(["patch-test", "--k", str(k), "--family", "cube", "--n", "2"]) == 0
    assert "PASS" in capsys.readouterr().out


def test_patch_test_strict_reports_failure(capsys):
    assert main(["patch-test", "--k", "1", "--family", "cube", "--n", "1", "--strict"]) == 5
    assert "FAIL" in capsys.readouterr().out


def test_solve_equivalence_on_imported_mesh(capsys):
    code = main(["solve", "--mesh", TETRA, "--k", "1", "--test", "a", "--monolithic", "--hybrid"])
    out = capsys.readouterr().out
    assert code == 0
    assert "distance" in out


def test_mesh_info(capsys):
    assert main(["mesh-info", "--mesh", TETRA]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["n_cells"] == 48
    assert rep["total_volume"] == pytest.approx(1.0, rel=1e-12)


def test_postprocess_requires_hybrid(capsys):
    assert main(["solve", "--family", "cube", "--n", "1", "--monolithic", "--postprocess"]) == 2
    assert "--hybrid" in capsys.readouterr().err


@pytest.mark.parametrize(
    "cfg, code",
    [
        (RunConfig("solve", k=3), 2),
        (RunConfig("solve", family="hex"), 2),
        (RunConfig("solve", ns=(0,)), 2),
        (RunConfig("convergence", methods=("monolithic", "hybrid")), 2),
        (RunConfig("convergence", mesh=TETRA), 2),
        (RunConfig("solve", test="/nonexistent.json", ns=(1,)), 2),
        (RunConfig("mesh-info", mesh="/nonexistent.poly"), 2),
    ],
)
def test_exit_codes(cfg, code):
    assert run(cfg) == code


def test_mesh_error_exit_code(tmp_path):
    bad = tmp_path / "bad.poly"
    bad.write_text("vertices 2\n0 0 0\n1 0 0\nfaces 0\ncells 0\n")
    assert run(RunConfig("mesh-info", mesh=str(bad))) == 3


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "hrvem", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "patch-test" in proc.stdout
