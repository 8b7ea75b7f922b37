import json
from fractions import Fraction
from pathlib import Path

import pytest

from badapprox.cli import main
from badapprox.danger_lines import lines_hitting
from badapprox.exact_arith import RatInterval


def _run_dir(out: Path, command: str) -> Path:
    dirs = sorted(out.glob(f"{command}-*"))
    assert len(dirs) == 1, dirs
    return dirs[0]


def _jsonl(p: Path) -> list[dict]:
    return [json.loads(ln) for ln in p.read_text().splitlines() if ln.strip()]


def _write_config(tmp_path: Path, text: str) -> str:
    p = tmp_path / "run.toml"
    p.write_text(text)
    return str(p)


SMALL_CONSTRUCT = """
[construct]
R = 16
depth = 3

[certify]
Qmax = 300
boundH = 40
"""


def test_construct_small_run(tmp_path):
    cfg = _write_config(tmp_path, SMALL_CONSTRUCT)
    assert main(["construct", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    d = _run_dir(tmp_path / "a", "construct")
    summary = json.loads((d / "summary.json").read_text())
    assert summary["status"] == "pass" and summary["certified"] is True
    stages = json.loads((d / "stages.json").read_text())
    assert stages[0]["tree_like"] is True and stages[0]["final_J"] > 0
    levels = _jsonl(d / "levels.jsonl")
    assert [r["level"] for r in levels] == [0, 1, 2, 3]
    assert all({"stage", "intervals", "removals"} <= set(r) for r in levels)
    cert = json.loads((d / "certificate.json").read_text())
    assert cert["status"] == "pass" and cert["config_hash"].startswith(d.name.split("-", 1)[1])


def test_construct_artifacts_byte_identical(tmp_path):
    cfg = _write_config(tmp_path, SMALL_CONSTRUCT)
    for sub in ("a", "b"):
        assert main(["construct", "--config", cfg, "--out", str(tmp_path / sub)]) == 0
    da, db = _run_dir(tmp_path / "a", "construct"), _run_dir(tmp_path / "b", "construct")
    assert da.name == db.name
    names = sorted(p.name for p in da.iterdir())
    assert names == sorted(p.name for p in db.iterdir())
    for name in names:
        assert (da / name).read_bytes() == (db / name).read_bytes(), name


def test_enumerate_lines_matches_library(tmp_path, golden, half):
    out = tmp_path / "o"
    assert main(["enumerate-lines", "--H-hi", "50", "--c", "1/20", "--out", str(out)]) == 0
    recs = _jsonl(_run_dir(out, "enumerate-lines") / "lines.jsonl")
    expect = lines_hitting(half, golden, Fraction(1, 20), Fraction(0), Fraction(50), [RatInterval(Fraction(0), Fraction(1))], conservative=True)
    assert sorted((r["A"], r["B"], r["C"]) for r in recs) == sorted((L.A, L.B, L.C) for L in expect)
    for r in recs:
        assert {"A", "B", "C", "radius", "class"} <= set(r)
        n, l, k = r["class"]
        assert n >= 1 and l >= 0 and k >= 0


def test_verify_reports_failure(tmp_path):
    point = tmp_path / "p.json"
    point.write_text(json.dumps({"y": "1/2", "targets": [{"weights": "1/2,1/2", "c": "1/5"}], "Qmax": 10, "boundH": 5}))
    out = tmp_path / "o"
    assert main(["verify", "--point", str(point), "--out", str(out)]) == 1
    summary = json.loads((_run_dir(out, "verify") / "summary.json").read_text())
    sim = [f for f in summary["failing"] if f["check"] == "simultaneous"]
    assert sim and sim[0]["status"] == "fail" and sim[0]["blocking"] == 2


def test_verify_accepts_certificate(tmp_path):
    cfg = _write_config(tmp_path, SMALL_CONSTRUCT)
    assert main(["construct", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    cert = _run_dir(tmp_path / "a", "construct") / "certificate.json"
    data = json.loads(cert.read_text())
    point = tmp_path / "p.json"
    point.write_text(json.dumps({"y": data["y"], "targets": [{"weights": c["weights"], "c": c["c"]} for c in data["checks"]], "Qmax": 300, "boundH": 40}))
    assert main(["verify", "--point", str(point), "--out", str(tmp_path / "v")]) == 0
    # the certificate file itself is a valid point record
    assert main(["verify", "--point", str(cert), "--out", str(tmp_path / "w")]) == 0
    cfg_rec = json.loads((_run_dir(tmp_path / "w", "verify") / "config.json").read_text())
    assert cfg_rec["config"]["point"]["targets"] == [{"weights": c["weights"], "c": c["c"]} for c in data["checks"]]


def test_game_play_then_replay(tmp_path):
    out = tmp_path / "o"
    args = ["game", "play", "--beta", "1/10", "--rounds", "8", "--bob", "random", "--seed", "3", "--out", str(out)]
    assert main(args) == 0
    tr = _run_dir(out, "game-play") / "transcript.jsonl"
    assert main(["game", "replay", "--transcript", str(tr), "--out", str(tmp_path / "r")]) == 0
    rep = _run_dir(tmp_path / "r", "game-replay") / "transcript.jsonl"
    assert rep.read_bytes() == tr.read_bytes()


def test_game_tournament(tmp_path):
    out = tmp_path / "o"
    assert main(["game", "tournament", "--beta", "1/10", "--rounds", "6", "--games", "3", "--bob", "halving", "--out", str(out)]) == 0
    games = _jsonl(_run_dir(out, "game-tournament") / "games.jsonl")
    assert [g["seed"] for g in games] == [0, 1, 2]


def test_unknown_config_field_exits_2(tmp_path, capsys):
    cfg = _write_config(tmp_path, "[construct]\ndepht = 3\n")
    assert main(["construct", "--config", cfg, "--out", str(tmp_path)]) == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["field"] == "construct.depht"


def test_unknown_section_and_bad_values_exit_2(tmp_path):
    assert main(["construct", "--config", _write_config(tmp_path, "[nope]\nx = 1\n"), "--out", str(tmp_path)]) == 2
    assert main(["construct", "--theta", "not-a-cf", "--out", str(tmp_path)]) == 2
    assert main(["construct", "--weights", "1,0;0", "--out", str(tmp_path)]) == 2


def test_theoretical_mode_below_threshold_exits_2(tmp_path):
    assert main(["construct", "--mode", "theoretical", "--depth", "1", "--out", str(tmp_path)]) == 2


def test_tree_command(tmp_path):
    fam = {
        "levels": [
            [["0", "1"]],
            [["0", "1/4"], ["1/2", "3/4"]],
            [["0", "1/16"], ["1/8", "3/16"], ["1/2", "9/16"]],
        ],
        "parents": [[-1], [0, 0], [0, 0, 1]],
    }
    src = tmp_path / "fam.json"
    src.write_text(json.dumps(fam))
    out = tmp_path / "o"
    assert main(["tree", "--input", str(src), "--extract", "1", "--out", str(out)]) == 0
    d = _run_dir(out, "tree")
    summary = json.loads((d / "summary.json").read_text())
    assert summary["tree_like"] is True and summary["max_regular_degree"] == 1
    assert (d / "extracted.json").exists()
    assert main(["tree", "--input", str(src), "--extract", "2", "--out", str(tmp_path / "o2")]) == 1


def test_measure_command(tmp_path):
    out = tmp_path / "o"
    assert main(["measure", "--set", "quarter", "--samples", "20", "--depth", "4", "--out", str(out)]) == 0
    d = _run_dir(out, "measure")
    assert len(_jsonl(d / "samples.jsonl")) == 20
    summary = json.loads((d / "summary.json").read_text())
    assert {"beta", "b1", "b2", "beta_c"} <= set(summary)


def test_diagnostics_command(tmp_path):
    out = tmp_path / "o"
    assert main(["diagnostics", "--depth", "2", "--out", str(out)]) == 0
    d = _run_dir(out, "diagnostics")
    summary = json.loads((d / "summary.json").read_text())
    assert summary["theoretical_ok"] is False
    assert {"params.json", "removals.jsonl", "growth.jsonl"} <= {p.name for p in d.iterdir()}


@pytest.mark.parametrize("argv", [["construct", "--mode", "bogus"], ["game", "fly"]])
def test_argparse_errors_exit_2(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2
