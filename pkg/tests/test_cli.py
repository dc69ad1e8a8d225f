import hashlib
import json
import math
import re
import subprocess
import sys
from importlib import resources

import pytest

from nrcsim import CouplingRule, PrecoderKind, analytic, io
from nrcsim.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize("argv", [
    [], ["bogus"], ["analytic", "--nope"], ["mc", "--seed", "-1"], ["mc", "--seed", "x"],
    ["max-nrc"], ["analytic", "--threads", "-2"], ["sensitivity", "--groups", "nope"],
])
def test_usage_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 1
    assert "error" in err


def test_help_exits_zero(capsys):
    assert run(capsys, "--help")[0] == 0


def test_missing_config(capsys):
    code, _, err = run(capsys, "analytic", "--config", "/nonexistent/cfg.json")
    assert code == 2 and "no such file" in err


def test_invalid_config(capsys, tmp_path):
    doc = json.loads((resources.files("nrcsim") / "configs" / "baseline.json").read_text())
    doc["nrc_db"]["delta2_c_d_db"] = 0.0
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    code, _, err = run(capsys, "analytic", "--config", str(path))
    assert code == 2 and "cross-correlation" in err


def test_invalid_grid_point(capsys):
    code, _, err = run(capsys, "asymptote", "--grid", "10", "100")
    assert code == 2 and "n_bs=10" in err


def test_runtime_error(capsys, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    code, _, err = run(capsys, "analytic", "--out", str(blocker / "x.csv"))
    assert code == 3 and "IoError" in err


def test_analytic_to_stdout(capsys):
    code, out, _ = run(capsys, "analytic")
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("variable,value,precoder,engine,antenna,sinr_db")
    assert len(lines) == 1 + 5 * 2 * 22
    assert all(",analytic," in line for line in lines[1:])


def test_compare_with_outputs(capsys, tmp_path):
    out_csv = tmp_path / "sub" / "cmp.csv"
    code, out, _ = run(capsys, "compare", "--realizations", "30", "--grid", "10", "20",
                       "--out", str(out_csv))
    assert code == 0
    assert re.search(r"max \|dSINR\| .* = \d+\.\d+ dB", out)
    manifest = json.loads((tmp_path / "sub" / "cmp.csv.manifest.json").read_text())
    assert manifest["outputs"]["cmp.csv"] == hashlib.sha256(out_csv.read_bytes()).hexdigest()
    assert manifest["config"]["sweep"]["mc_realizations"] == 30
    assert (tmp_path / "sub" / "cmp.png").stat().st_size > 0
    assert manifest["outputs"]["cmp.png"]


def test_no_plot(capsys, tmp_path):
    code, _, _ = run(capsys, "analytic", "--no-plot", "--out", str(tmp_path / "a.csv"))
    assert code == 0
    assert not (tmp_path / "a.png").exists()
    assert (tmp_path / "a.csv.manifest.json").exists()


def test_seed_and_precoder_overrides(capsys, tmp_path):
    code, _, _ = run(capsys, "mc", "--realizations", "5", "--grid", "20", "--seed", "0xff",
                     "--precoders", "mrt", "--freeze-nrc", "--out", str(tmp_path / "m.csv"))
    assert code == 0
    doc = json.loads((tmp_path / "m.csv.manifest.json").read_text())
    assert doc["seed"] == 255
    assert doc["config"]["sweep"]["precoders"] == ["MRT"]
    assert doc["config"]["sweep"]["freeze_nrc"] is True


def test_max_nrc_prints_level(capsys):
    code, out, err = run(capsys, "max-nrc", "--target-sinr-db", "15", "40")
    assert code == 0
    line = next(line for line in err.splitlines() if line.startswith("ZF") and "=15 dB" in line)
    level_db = float(re.search(r"level (-?\d+\.\d+) dB", line).group(1))
    _, _, spec = io.parse_config("baseline")
    want = analytic.max_tolerable_nrc(spec.base, 10 ** 1.5, PrecoderKind.ZF, CouplingRule())
    assert level_db == pytest.approx(10 * math.log10(want), abs=1e-4)
    assert "target=40 dB: max NRC level infeasible" in err
    assert out.splitlines()[0] == "target_sinr_db,precoder,rho_d_db,max_level_db,feasible"


@pytest.mark.parametrize("argv, header", [
    (["sensitivity", "--grid", "-30", "-20"], "variable,value"),
    (["kopt", "--grid", "-30", "-20", "--rho-d-db", "20"], "nrc_level_db,rho_d_db"),
    (["asymptote", "--grid", "100", "1000"], "variable,value"),
])
def test_study_commands(capsys, tmp_path, argv, header):
    out_csv = tmp_path / "s.csv"
    code, _, _ = run(capsys, *argv, "--out", str(out_csv))
    assert code == 0
    assert out_csv.read_text().startswith(header)
    assert (tmp_path / "s.png").exists()


def test_asymptote_reference_columns(capsys):
    code, out, _ = run(capsys, "asymptote", "--grid", "100", "10000")
    assert code == 0
    assert out.splitlines()[0].endswith("saturation_sinr_db,saturation_se_bps_hz")


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "nrcsim", "kopt", "--grid", "-20",
                          "--rho-d-db", "20"], capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert res.stdout.startswith("nrc_level_db,")
    res = subprocess.run([sys.executable, "-m", "nrcsim", "frobnicate"], capture_output=True,
                         text=True, check=False)
    assert res.returncode == 1
