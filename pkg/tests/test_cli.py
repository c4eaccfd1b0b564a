import json
import subprocess
import sys
from pathlib import Path

import pytest

from gf2cert import certificate as cc
from gf2cert.cli import main
from gf2cert.driver import GeneratorMatrix
from gf2cert.errors import MalformedCertificate, ParseError, ValidationError

ROOT = Path(__file__).resolve().parents[1]
FIXTURE = ROOT / "fixtures" / "fixture_k1.json"
MINIMAL = ROOT / "fixtures" / "minimal_k1.json"


@pytest.fixture(scope="module")
def cert():
    return cc.run_build(cc.load_config(FIXTURE), created="2000-01-01T00:00:00+00:00")


def test_minimal_fixture_loads():
    rc = cc.load_config(MINIMAL)
    assert (rc.config.k, rc.config.ground, rc.config.base, rc.config.stages) == (1, 16, 4, 8)


def test_load_errors(tmp_path):
    with pytest.raises(ParseError):
        cc.load_config(tmp_path / "missing.json")
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ParseError):
        cc.load_config(p)
    raw = json.loads(FIXTURE.read_text())
    raw["assignments"][3]["h"]["rows"]["0"] = ["{9}"]
    p.write_text(json.dumps(raw))
    with pytest.raises(ValidationError, match="⋃ h_ξ"):
        cc.load_config(p)
    raw = json.loads(FIXTURE.read_text())
    raw["assignments"][3]["h"]["rows"]["1"] = ["{0}"]
    p.write_text(json.dumps(raw))
    with pytest.raises(ValidationError, match="DependentFamily") as err:
        cc.load_config(p)
    assert err.value.path == "assignments[3].h"


def test_build_shape(cert):
    assert len(cert["stages"]) == 12 - 4
    assert cert["status"] == "unverified"


def test_degenerate_horizon():
    raw = json.loads(MINIMAL.read_text())
    raw["stages"], raw["assignments"] = 4, []
    c = cc.run_build(cc.parse_config(raw))
    assert c["stages"] == [] and c["generators"]["columns"] == 4
    out, code = cc.run_verify(c)
    assert code in (0, 2)


def test_same_config_same_digest(cert):
    again = cc.run_build(cc.load_config(FIXTURE))
    assert again["digest"] == cert["digest"]
    assert cc.canonical(cc.body_of(again)) == cc.canonical(cc.body_of(cert))


def test_verify_pass_and_roundtrip(cert):
    out, code = cc.run_verify(cert)
    assert code == 0 and out["status"] == "pass"
    text = cc.dumps(out)
    assert cc.dumps(cc.loads(text)) == text


def test_flipped_bit_fails(cert):
    bad = json.loads(cc.dumps(cert))
    G = GeneratorMatrix.from_hex(bad["generators"]["rows"], bad["generators"]["columns"])
    bad["generators"]["rows"] = G.flip(20, 5).to_hex()
    out, code = cc.run_verify(bad)
    assert code == 1
    failed = {v["check"] for v in out["verdicts"] if v["verdict"] == "fail"}
    assert "condition_B" in failed


def test_malformed(cert):
    text = cc.dumps(cert)
    with pytest.raises(MalformedCertificate):
        cc.loads(text[: len(text) // 2])
    partial = dict(cert)
    del partial["generators"]
    with pytest.raises(MalformedCertificate):
        cc.run_verify(partial)
    wrong = json.loads(text)
    wrong["generators"]["rows"] = wrong["generators"]["rows"][:-1]
    with pytest.raises(MalformedCertificate):
        cc.run_verify(wrong)


def test_status_rules():
    assert cc.overall_status([{"verdict": "pass"}, {"verdict": "inconclusive"}]) == "inconclusive"
    assert cc.overall_status([{"verdict": "fail"}, {"verdict": "inconclusive"}]) == "fail"
    assert cc.overall_status([]) == "pass"


def test_gen_config_is_seeded():
    assert cc.gen_config(3, 2, 16) == cc.gen_config(3, 2, 16)
    assert cc.gen_config(3, 2, 16) != cc.gen_config(4, 2, 16)


def test_cli_end_to_end(tmp_path, capsys):
    out = tmp_path / "cert.json"
    assert main(["build", "--config", str(FIXTURE), "--out", str(out)]) == 0
    assert main(["verify", "--cert", str(out)]) == 0
    assert main(["verify", "--cert", str(out), "--budget-width", "2"]) == 0
    assert main(["verify", "--cert", str(tmp_path / "nope.json")]) == 3
    out.write_text(out.read_text()[:100])
    assert main(["verify", "--cert", str(out)]) == 3


def test_cli_wide_budget_is_inconclusive(tmp_path):
    out = tmp_path / "cert.json"
    main(["build", "--config", str(FIXTURE), "--out", str(out)])
    assert main(["verify", "--cert", str(out), "--budget-width", "6"]) == 2


def test_cli_gen_config(tmp_path):
    cfg = tmp_path / "g.json"
    assert main(["gen-config", "--seed", "5", "--k", "2", "--stages", "16", "--out", str(cfg)]) == 0
    assert main(["build", "--config", str(cfg), "--out", str(tmp_path / "c.json")]) == 0
    assert main(["gen-config", "--seed", "5", "--k", "2", "--stages", "3", "--out", str(cfg)]) == 3


def test_cli_oracle(tmp_path, capsys):
    p = tmp_path / "v.json"
    p.write_text(json.dumps(["{0}", "{1}", "{0,1}"]))
    assert main(["oracle", "independence", "--vectors", str(p)]) == 1
    res = json.loads(capsys.readouterr().out)
    assert res == {"independent": False, "rank": 2, "size": 3, "witness": [0, 1, 2]}
    p.write_text(json.dumps({"vectors": [[0], [1, 2]]}))
    assert main(["oracle", "independence", "--vectors", str(p)]) == 0
    p.write_text(json.dumps(["{2,1}"]))
    assert main(["oracle", "independence", "--vectors", str(p)]) == 3


def test_console_script(tmp_path):
    out = tmp_path / "cert.json"
    r = subprocess.run(
        [sys.executable, "-m", "gf2cert.cli", "build", "--config", str(MINIMAL), "--out", str(out)],
        capture_output=True, text=True,
    )
    assert r.returncode == 0, r.stderr
    assert "status: pass" in r.stderr
