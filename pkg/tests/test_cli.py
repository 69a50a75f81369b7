from __future__ import annotations

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from freeprob.cli import main
from freeprob.measure import SpectralMeasure, dirac, ks_distance


def _run(args, capsys):
    code = main(args)
    out, err = capsys.readouterr()
    return code, out, err


def _write(path, m: SpectralMeasure):
    path.write_text(m.to_json())
    return str(path)


def _strip_metadata(text):
    data = json.loads(text)
    data.pop("metadata", None)
    return data


def test_family_semicircle(tmp_path, capsys, semicircle):
    out = tmp_path / "sc.json"
    code, _, _ = _run(["family", "--kind", "meixner", "--a", "0", "--b", "0", "--out", str(out)], capsys)
    assert code == 0
    data = json.loads(out.read_text())
    assert data["schema"] == "v1" and "metadata" in data
    m = SpectralMeasure.from_dict(data["measure"])
    assert ks_distance(m, semicircle) < 1e-12


def test_family_to_stdout(capsys):
    code, out, _ = _run(["family", "--kind", "mp", "--lam", "0.5", "--alpha", "1", "--nodes", "100"], capsys)
    assert code == 0
    atoms = json.loads(out)["measure"]["atoms"]
    assert atoms == [{"x": 0.0, "mass": 0.5}]


def test_family_missing_parameter(capsys):
    code, _, err = _run(["family", "--kind", "binomial", "--sigma", "1"], capsys)
    assert code == 2
    assert json.loads(err)["error"] == "usage"


def test_family_inadmissible_parameters(capsys):
    code, _, err = _run(["family", "--kind", "binomial", "--sigma", "0.2", "--theta", "0.3"], capsys)
    assert code == 2
    assert json.loads(err)["error"] == "ParameterError"


def test_transform_table(tmp_path, capsys):
    out = tmp_path / "g.csv"
    code, _, _ = _run(["transform", "--kind", "meixner", "--a", "0", "--b", "0", "--type", "G",
                       "--z", "2j,1+1j", "--out", str(out)], capsys)
    assert code == 0
    lines = out.read_text().splitlines()
    header = json.loads(lines[0])
    assert header["kind"] == "G" and header["schema"] == "v1"
    rows = list(csv.reader(lines[1:]))
    assert rows[0] == ["re_z", "im_z", "re_f", "im_f"]
    g = complex(float(rows[1][2]), float(rows[1][3]))
    assert abs(g - 1j * (1 - np.sqrt(2))) < 1e-12


def test_transform_from_law_file(tmp_path, capsys):
    law = _write(tmp_path / "d.json", dirac(1.0))
    code, out, _ = _run(["transform", "--law", law, "--type", "S", "--z", "-0.3"], capsys)
    assert code == 0
    row = out.splitlines()[2].split(",")
    assert abs(float(row[2]) - 1.0) < 1e-12


def test_transform_pole_is_numeric_failure(tmp_path, capsys):
    law = _write(tmp_path / "d.json", dirac(0.0))
    code, _, err = _run(["transform", "--law", law, "--type", "G", "--z", "0"], capsys)
    assert code == 1
    assert json.loads(err)["error"] == "PoleError"


def test_convolve_add(tmp_path, capsys, semicircle):
    a = _write(tmp_path / "a.json", semicircle)
    out = tmp_path / "c.json"
    code, _, _ = _run(["convolve", "--op", "add", "--mu", a, "--nu", a, "--out", str(out)], capsys)
    assert code == 0
    data = json.loads(out.read_text())
    assert data["subordination"]["residual_sup"] < 1e-10
    m = SpectralMeasure.from_dict(data["measure"])
    assert ks_distance(m, semicircle.dilate(np.sqrt(2))) < 1e-3


def test_convolve_boolean_power_of_dirac(tmp_path, capsys):
    a = _write(tmp_path / "a.json", dirac(2.0))
    code, out, _ = _run(["convolve", "--op", "boolean-power", "--mu", a, "--t", "0.5"], capsys)
    assert code == 0
    atoms = json.loads(out)["measure"]["atoms"]
    assert len(atoms) == 1 and atoms[0]["x"] == pytest.approx(1.0)


def test_convolve_needs_second_law(tmp_path, capsys):
    a = _write(tmp_path / "a.json", dirac(2.0))
    code, _, _ = _run(["convolve", "--op", "add", "--mu", a], capsys)
    assert code == 2


def test_malformed_json_input(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, err = _run(["convolve", "--op", "boolean-power", "--mu", str(bad), "--t", "0.5"], capsys)
    assert code == 2
    payload = json.loads(err)
    assert payload["exit_code"] == 2 and "malformed" in payload["message"]


def test_missing_input_file(tmp_path, capsys):
    code, _, _ = _run(["density", "--law", str(tmp_path / "nope.json")], capsys)
    assert code == 2


def test_verify_free_regression_passes(tmp_path, capsys):
    rep = tmp_path / "r.json"
    code, _, _ = _run(["verify", "--theorem", "4", "--alpha", "0.3", "--a", "0.5", "--b", "0.2",
                       "--report", str(rep)], capsys)
    assert code == 0
    data = json.loads(rep.read_text())
    assert data["pass"] is True and data["theorem_id"] == "4"


def test_verify_too_strict_tolerance_fails(capsys):
    code, out, _ = _run(["verify", "--theorem", "4", "--alpha", "0.3", "--a", "0.5", "--b", "0.2",
                         "--tol", "1e-30"], capsys)
    assert code == 1
    assert json.loads(out)["pass"] is False


def test_verify_parameter_routes(capsys):
    code, out, _ = _run(["verify", "--theorem", "6", "--c", "0.5", "--d", "0.5", "--lam", "2"], capsys)
    assert code == 0 and json.loads(out)["pass"]
    code, _, err = _run(["verify", "--theorem", "7", "--c", "0.5", "--d", "2"], capsys)
    assert code == 2 and "pole" in json.loads(err)["message"]


def test_verify_usage_errors(capsys):
    assert _run(["verify", "--theorem", "9"], capsys)[0] == 2
    assert _run(["verify", "--theorem", "4", "--alpha", "0.5"], capsys)[0] == 2
    assert _run(["verify", "--theorem", "4", "--alpha", "0.5", "--a", "0", "--b", "0", "--tol", "-1"], capsys)[0] == 2


def test_reports_are_reproducible(capsys):
    args = ["verify", "--theorem", "5", "--alpha", "0.5", "--a", "0", "--b", "0"]
    _, first, _ = _run(args, capsys)
    _, second, _ = _run(args, capsys)
    assert _strip_metadata(first) == _strip_metadata(second)
    a = json.dumps(_strip_metadata(first), sort_keys=True, indent=2)
    b = json.dumps(_strip_metadata(second), sort_keys=True, indent=2)
    assert a == b


def test_oracle_small(tmp_path, capsys):
    rep = tmp_path / "o.json"
    args = ["oracle", "--check", "add", "--n", "100", "--trials", "2", "--seed", "1", "--report", str(rep)]
    code, _, _ = _run(args, capsys)
    assert code == 0
    first = _strip_metadata(rep.read_text())
    assert first["pass"] and first["schema"] == "v1"
    _run(args, capsys)
    assert _strip_metadata(rep.read_text()) == first


def test_oracle_bad_dimension(capsys):
    assert _run(["oracle", "--check", "add", "--n", "4"], capsys)[0] == 2


def test_density_files(tmp_path, capsys):
    out = tmp_path / "d.csv"
    code, _, _ = _run(["density", "--kind", "mp", "--lam", "0.5", "--alpha", "1", "--points", "50",
                       "--out", str(out)], capsys)
    assert code == 0
    rows = list(csv.reader(out.read_text().splitlines()))
    assert rows[0] == ["x", "density"] and len(rows) == 51
    atoms = list(csv.reader((tmp_path / "d.csv.atoms.csv").read_text().splitlines()))
    assert atoms == [["x", "mass"], ["0.0", "0.5"]]


def test_density_to_stdout(capsys):
    code, out, _ = _run(["density", "--kind", "meixner", "--a", "0", "--b", "0", "--nodes", "20"], capsys)
    assert code == 0
    density, atoms = out.split("\n\n")
    assert len(density.splitlines()) == 21
    assert atoms.strip() == "x,mass"


def test_console_script_entry_point(tmp_path):
    out = tmp_path / "sc.json"
    proc = subprocess.run(
        [sys.executable, "-m", "freeprob.cli", "family", "--kind", "meixner", "--a", "0", "--b", "0",
         "--nodes", "50", "--out", str(out)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert json.loads(out.read_text())["kind"] == "meixner"
    assert not [p for p in tmp_path.iterdir() if p.name.startswith(".tmp-")]
