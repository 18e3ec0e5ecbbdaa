import json
import subprocess
import sys

import pytest

from troplag import gluing
from troplag.cli import main


def run(tmp_path, *argv):
    out = tmp_path / "report.json"
    code = main([*argv, "--json", str(out)])
    return code, json.loads(out.read_text())


def test_verify_tangent_passes(tmp_path):
    code, rep = run(tmp_path, "verify-tangent")
    assert code == 0
    assert rep["ok"] and rep["schema_version"] == 1
    assert {c["status"] for c in rep["checks"]} == {"pass"}
    assert "timing" not in rep


def test_report_schema(tmp_path):
    _, rep = run(tmp_path, "caustic", "--timing")
    assert set(rep) == {"schema_version", "command", "config", "checks", "notes", "ok", "timing"}
    for c in rep["checks"]:
        assert set(c) == {"name", "status", "witness"}
        assert c["status"] in ("pass", "fail", "skip")


def test_corrupted_cocycle_fails(tmp_path):
    data = gluing.reference_tangent_cocycle().to_json()
    for t in data["transitions"]:
        if (t["target"], t["source"]) == (2, 1):
            t["matrix"][0][1] = "w1_0^1*w1_2^-2"  # sign flipped
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(data))
    code, rep = run(tmp_path, "verify-tangent", "--cocycle", str(path))
    assert code == 1
    failed = [c for c in rep["checks"] if c["status"] == "fail"]
    assert failed[0]["name"] == "cocycle defect is identity"
    assert failed[0]["witness"]["defect"] != [["1", "0"], ["0", "1"]]


def test_reconstruct_default_and_determinism(tmp_path):
    code, a = run(tmp_path, "reconstruct", "--trials", "20")
    assert code == 0 and a["ok"]
    _, b = run(tmp_path, "reconstruct", "--trials", "20")
    assert a == b


def test_reconstruct_without_twist_fails_with_witness(tmp_path):
    code, rep = run(tmp_path, "reconstruct", "--no-twist", "--trials", "5")
    assert code == 1
    failed = {c["name"]: c["witness"] for c in rep["checks"] if c["status"] == "fail"}
    assert "corrected defect is identity" in failed
    defect = failed["corrected defect is identity"]["defect"]
    assert defect != [["1", "0"], ["0", "1"]]


def test_constraint_violation_is_usage_error(tmp_path, capsys):
    code = main(["reconstruct", "--constants", "a0=1,b0=1,a1=1,b1=1,a2=1,b2=1"])
    assert code == 2
    assert "expected -1" in capsys.readouterr().err


def test_bad_hbar_is_usage_error():
    assert main(["tropicalize", "--hbar", "0.01,0.1"]) == 2


def test_unknown_command_exits_2():
    with pytest.raises(SystemExit) as err:
        main(["nonsense"])
    assert err.value.code == 2


def test_tropicalize_csv(tmp_path):
    csv = tmp_path / "sweep.csv"
    code = main(["tropicalize", "--csv", str(csv)])
    assert code == 0
    lines = csv.read_text().splitlines()
    assert lines[0].startswith("x1,x2,hbar")
    assert len(lines) == 1 + 27 * 4


def test_tropicalize_custom_grid(tmp_path):
    code, rep = run(tmp_path, "tropicalize", "--grid", "0.7,0.1;0.1,0.1")
    assert code == 0


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"hbar": "0.01,0.1"}))
    assert main(["tropicalize", "--config", str(cfg)]) == 2
    code, rep = run(tmp_path, "tropicalize", "--config", str(cfg), "--hbar", "0.1,0.025,0.01")
    assert code == 0
    assert rep["config"]["hbar"] == "0.1,0.025,0.01"


def test_cone_complex(tmp_path):
    code, rep = run(tmp_path, "cone-complex")
    assert code == 0
    names = {c["name"] for c in rep["checks"]}
    assert "corrections exist without a local system" in names
    assert "multi-section L needs the twist" in names


def test_module_entry_point(tmp_path):
    out = subprocess.run(
        [sys.executable, "-m", "troplag", "caustic"], capture_output=True, text=True, check=False
    )
    assert out.returncode == 0
    assert out.stdout.strip().endswith("OK")
