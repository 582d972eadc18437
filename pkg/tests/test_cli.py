import json
import math

import numpy as np
import pytest

from wavetrap.cli import main
from wavetrap.errors import ConfigError
from wavetrap.io import ResultRecord, config_digest, load_scene, read_membership


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_threshold_prints_eps0(capsys, tmp_path):
    code, out, _ = run(capsys, "morawetz", "threshold", "--n", "4", "--k", "2", "--out", str(tmp_path))
    assert code == 0
    assert "(1+sqrt(3))/4" in out
    assert f"{(1 + math.sqrt(3)) / 4:.6f}"[:6] in out


def test_billiard_orbit_lambda(capsys, tmp_path):
    code, out, _ = run(capsys, "billiard", "orbit", "--out", str(tmp_path))
    assert code == 0
    data = json.loads((tmp_path / "billiard_orbit.json").read_text())
    assert data["results"]["lambda"] == pytest.approx((3 - 2 * math.sqrt(2)) ** 4, rel=1e-4)
    assert data["digest"] and data["version"]


def test_unknown_flag_exit_2(capsys):
    code, _, err = run(capsys, "billiard", "orbit", "--bogus")
    assert code == 2
    assert "usage" in err.lower()


def test_bad_json_reports_position(capsys, tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"body1": {\n  "kind": "sphere",, }\n}')
    code, _, err = run(capsys, "scene", "validate", str(p), "--out", str(tmp_path))
    assert code == 2
    assert "bad.json:2:" in err


def test_missing_field_exit_2(capsys, tmp_path):
    p = tmp_path / "s.json"
    p.write_text(json.dumps({"body1": {"kind": "sphere", "center": [0, 0, 0], "radius": 1}}))
    code, _, err = run(capsys, "scene", "validate", str(p), "--out", str(tmp_path))
    assert code == 2
    assert "body2" in err


def test_domain_error_exit_1(capsys, tmp_path):
    code, _, err = run(capsys, "phase", "eval", "--x=0,0,0", "--xi=1,0,0", "--story", "2",
                       "--y=-10,0,0", "--out", str(tmp_path))
    assert code == 1


def test_phase_eval_oracle(capsys, tmp_path):
    code, out, _ = run(capsys, "phase", "eval", "--x=2,0,0", "--xi=1,0,0", "--story", "2",
                       "--y=-10,0,0", "--out", str(tmp_path))
    assert code == 0
    assert json.loads(out)["phase"] == pytest.approx(14.0)


def test_trapped_set_artifact(capsys, tmp_path):
    code, _, _ = run(capsys, "trapped-set", "compute", "--T", "0", "--res", "3", "--out", str(tmp_path))
    assert code == 0
    header, bits = read_membership(tmp_path / "trapped_set_membership.bin")
    assert bits.shape == tuple(header["dims"])
    assert header["T"] == 0


def test_csv_header_line(capsys, tmp_path):
    code, _, _ = run(capsys, "billiard", "trace", "--x=2,0,0", "--xi=1,0,0", "--t", "6",
                     "--out", str(tmp_path))
    assert code == 0
    csvs = list(tmp_path.glob("*.csv"))
    assert csvs
    first = csvs[0].read_text().splitlines()[0]
    assert first.startswith("# version=") and "digest=" in first and "seed=" in first


def test_output_env(monkeypatch, capsys, tmp_path):
    monkeypatch.setenv("WAVETRAP_OUTPUT_DIR", str(tmp_path / "env"))
    code, _, _ = run(capsys, "morawetz", "threshold", "--n", "4", "--k", "1")
    assert code == 0
    assert list((tmp_path / "env").glob("*.json"))


def test_digest_deterministic():
    a = ResultRecord("x", {"h": 0.05, "v": np.array([1.0, 2.0])}, seed=3)
    b = ResultRecord("x", {"v": [1.0, 2.0], "h": 0.05}, seed=3)
    assert a.digest == b.digest
    assert a.digest != ResultRecord("x", {"h": 0.05}, seed=4).digest
    assert config_digest({"a": 1}) == config_digest({"a": 1})


def test_load_scene_named():
    assert load_scene("standard").gap == pytest.approx(2.0)
    assert load_scene("wide").gap == pytest.approx(2.0)
    with pytest.raises(ConfigError):
        load_scene("nonexistent.json")
