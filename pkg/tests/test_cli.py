import json
import subprocess
import sys

import pytest

from rdlkit import cli
from rdlkit.model import ChainOrder, GaussianChain, bsc, dsbs, from_chain, save_model
from rdlkit.regions_discrete import tri_B_logloss_floors
from rdlkit.regions_gaussian import delta_range


@pytest.fixture
def files(tmp_path):
    paths = {
        "dsbs": tmp_path / "dsbs.json",
        "chain": tmp_path / "chain.json",
        "gauss": tmp_path / "gauss.json",
        "bad": tmp_path / "bad.json",
    }
    save_model(dsbs(0.1), paths["dsbs"])
    save_model(from_chain(0.5 * bsc(0.25), bsc(0.25)), paths["chain"])
    save_model(GaussianChain(ChainOrder.Y_X_Z, 0.5, 0.2, 0.2), paths["gauss"])
    paths["bad"].write_text(json.dumps({"kind": "discrete", "alphabets": {"x": 2, "y": 1, "z": 1},
                                        "probs": [["0.5"], ["0.6"]]}))
    return paths


def run(*args):
    return cli.main([str(a) for a in args])


def test_validate(files, capsys):
    assert run("validate", "--model", files["chain"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["valid"] and doc["markov"]["X-Y-Z"]["holds"]
    assert run("validate", "--model", files["bad"]) == 2


def test_region_eval_and_member_codes(files, capsys):
    params = json.dumps({"d": 0.2, "r3": 0.1})
    assert run("region", "eval", "--model", files["chain"], "--setting", "TriB", "--params", params) == 0
    doc = json.loads(capsys.readouterr().out)
    want = tri_B_logloss_floors(from_chain(0.5 * bsc(0.25), bsc(0.25)), 0.2, 0.1, bc=False)
    assert doc["floors"]["delta"] == pytest.approx(want["delta"], abs=1e-11)
    ok = json.dumps({"r1": 1, "r2": 1, "r3": 0.1, "d": 0.2, "delta": 1, "distortion": "logloss"})
    assert run("region", "member", "--model", files["chain"], "--setting", "TriA", "--params", ok) == 0
    bad = json.dumps({"r1": 1, "r2": 1, "r3": 0.1, "d": 0.2, "delta": 0.0, "distortion": "logloss"})
    capsys.readouterr()
    assert run("region", "member", "--model", files["chain"], "--setting", "TriA", "--params", bad) == 1
    assert "floor" in capsys.readouterr().err


def test_usage_errors(files, capsys):
    assert run("region", "eval", "--model", files["chain"], "--setting", "Nope") == 2
    assert run("fig4", "--model", files["gauss"], "--steps", "0") == 2
    assert run("fig4", "--model", files["gauss"], "--delta-lo", "2", "--delta-hi", "1") == 2
    assert run("fig4", "--model", files["dsbs"]) == 2
    with pytest.raises(SystemExit) as e:
        run("simulate", "--model", files["dsbs"], "--params", "{}")
    assert e.value.code == 2


def test_fig4_matches_library(files, tmp_path):
    out = tmp_path / "f.csv"
    assert run("fig4", "--model", files["gauss"], "--r1", "1", "--r2", "1.25", "--steps", "5", "--out", out) == 0
    rows = out.read_text().splitlines()
    assert rows[0] == "r1,r2,delta,dmin,branch,alpha_star"
    lo, hi = delta_range(GaussianChain(ChainOrder.Y_X_Z, 0.5, 0.2, 0.2))
    first = rows[1].split(",")
    assert float(first[2]) == pytest.approx(lo, abs=1e-11)
    assert float(first[3]) == pytest.approx(0.25 * 0.7, abs=1e-11)
    assert rows[-1].split(",")[4] == "delta_star"


def test_simulate_dry_run(files, capsys):
    params = {"scheme": "one_sided", "p_u_given_y": bsc(0.4).tolist(), "p_v_given_x": bsc(0.4).tolist(),
              "g": [[0, 1], [0, 1]], "rates": [0.2, 0.2], "n": 16, "trials": 0}
    assert run("simulate", "--model", files["dsbs"], "--params", json.dumps(params), "--seed", 1) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["trials"] == 0 and doc["distortion_mean"] is None


def _commands(files, tmp_path):
    sim = tmp_path / "sim.json"
    sim.write_text(json.dumps({"scheme": "keyed_B", "p_u_given_x": bsc(0.1).tolist(), "g": [[0, 0], [1, 1]],
                               "rates": [1.0, 0.0], "codebook_rate": 1.0, "n": 4, "trials": 20, "eps": 2.0,
                               "key": {"rate": 0.25, "mode": "binned"}, "exact": True}))
    return [
        ["validate", "--model", files["chain"]],
        ["region", "eval", "--model", files["chain"], "--setting", "TriA", "--params", '{"d": 0.2}'],
        ["region", "member", "--model", files["dsbs"], "--setting", "OneSided",
         "--params", '{"r1": 1, "r2": 0.5, "d": 0.2, "delta": 0.8, "distortion": "logloss"}'],
        ["fig4", "--model", files["gauss"], "--steps", "20"],
        ["frontier", "--model", files["dsbs"], "--setting", "OneSided", "--k", "4", "--u-sizes", "1,2",
         "--distortion", "logloss", "--d", "0.2"],
        ["frontier", "--model", files["dsbs"], "--setting", "TriC", "--k", "4", "--u-sizes", "2"],
        ["simulate", "--model", files["chain"], "--params", f"@{sim}", "--seed", "9"],
    ]


def test_commands_are_byte_deterministic(files, tmp_path):
    for i, cmd in enumerate(_commands(files, tmp_path)):
        outs = []
        for rep in range(2):
            out = tmp_path / f"out{i}_{rep}"
            cli.main([str(c) for c in cmd] + ["--out", str(out)])
            outs.append(out.read_bytes())
        assert outs[0] == outs[1] and outs[0]


def test_console_script_module(files):
    r = subprocess.run([sys.executable, "-m", "rdlkit.cli", "validate", "--model", str(files["dsbs"])],
                       capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["valid"]


def test_frontier_csv_header(files, capsys):
    assert run("frontier", "--model", files["dsbs"], "--setting", "TriC", "--k", "4", "--u-sizes", "2") == 0
    head = capsys.readouterr().out.splitlines()[0].split(",")
    assert head[0] == "setting" and head[-6:] == ["r1", "r2", "r3", "d", "delta", "witness"]
