import json

import numpy as np
import pytest

from rwre import __version__
from rwre.cli import main
from rwre.errors import ManifestInvalid
from rwre.manifest import build_manifest, load_manifest, parse_text
from rwre.records import Outcome, RunRecord, emit_plotdata, recompute_verdicts
from rwre.runner import run_manifest

VELOCITY = """
# exact 1-d speed
kind = velocity
alphas = 3, 1
seed = 7
steps = 20000
runs = 40
"""


def test_parse_grammar():
    raw = parse_text("a = 1  # comment\n\n# only comment\nB=x y\n")
    assert raw == {"a": "1", "b": "x y"}
    with pytest.raises(ManifestInvalid) as info:
        parse_text("a = 1\na = 2\nnot a line\n")
    assert set(info.value.problems) == {"a", "line 3"}


def test_field_level_diagnostics():
    with pytest.raises(ManifestInvalid) as info:
        build_manifest({"alphas": "1, 2, 3", "seed": "x", "runs": "0", "colour": "red"}, "velocity")
    p = info.value.problems
    assert set(p) == {"alphas", "seed", "runs", "steps", "colour"}
    assert "colour: unknown key" in str(info.value)


@pytest.mark.parametrize("raw,key", [
    ({"alphas": "1,-1"}, "alphas"),
    ({"alphas": "1,1", "delta": "1.5", "seed": "1", "radius": "1", "samples": "5"}, "delta"),
    ({"alphas": "1,1", "seed": str(1 << 64)}, "seed"),
    ({"alphas": "1,1", "dim": "2"}, "dim"),
    ({"mean": "0.5,0.5"}, "gamma"),
])
def test_invalid_fields(raw, key):
    kind = "kalikow" if "delta" in raw else "expansion"
    with pytest.raises(ManifestInvalid) as info:
        build_manifest(raw, kind)
    assert key in info.value.problems


def test_green_mode_requirements():
    with pytest.raises(ManifestInvalid) as info:
        build_manifest({"alphas": "1,1", "mode": "killed"}, "green")
    assert {"seed", "radius", "delta"} <= set(info.value.problems)
    with pytest.raises(ManifestInvalid) as info:
        build_manifest({"alphas": "1,1", "mode": "nope"}, "green")
    assert "mode" in info.value.problems
    assert build_manifest({"alphas": "3,1", "mode": "fourier"}, "green").mode == "fourier"


def test_kind_mismatch():
    with pytest.raises(ManifestInvalid) as info:
        build_manifest({"kind": "green", "alphas": "1,1"}, "expansion")
    assert "kind" in info.value.problems


def test_mean_gamma_and_digest():
    a = build_manifest({"mean": "0.4 0.2 0.2 0.2", "gamma": "400"}, "expansion")
    b = build_manifest({"alphas": "160,80,80,80"}, "expansion")
    assert a.alphas == b.alphas and a.dim == 2
    assert a.digest() == b.digest()
    c = build_manifest({"alphas": "160,80,80,80", "out": "elsewhere"}, "expansion")
    assert c.digest() == a.digest()
    assert a.digest("9.9") != a.digest()
    d = build_manifest({"alphas": "160,80,80,81"}, "expansion")
    assert d.digest() != a.digest()


def _record(outcome):
    return RunRecord("velocity", "0" * 64, __version__, "", 0.0, "", outcome.metrics, outcome.verdicts)


def test_verdict_recomputation_and_json_round_trip():
    o = Outcome()
    o.metric("v_1", 0.34, 0.01, 1 / 3, 1.0)
    o.metric("g", 5.0, 0.0, 1.0, np.inf)
    o.metric("info", 1.0)
    o.verdict("theorem1", "theorem1", [("v_1", 1 / 3, 1.0)], 3)
    o.verdict("bad", "prop2", [("g", 0.0, 1.0)])
    rec = _record(o)
    assert [v.passed for v in rec.verdicts] == [True, False] and not rec.passed
    back = RunRecord.from_json(rec.to_json())
    assert recompute_verdicts(back) == [True, False]
    assert back.metrics[1].bound_high == np.inf and np.isnan(back.metrics[2].bound_low)
    body = json.loads(rec.to_json())
    assert body["metrics"][1]["bound_high"] == "inf" and body["metrics"][2]["bound_low"] is None


def test_sigma_slack_in_verdicts():
    o = Outcome()
    o.metric("x", 1.02, 0.01)
    assert o.verdict("k3", "b", [("x", 0.0, 1.0)], 3).passed
    assert not o.verdict("k1", "b", [("x", 0.0, 1.0)], 1).passed


def test_plotdata_formats(tmp_path):
    empty = emit_plotdata(_record(Outcome()), tmp_path / "empty.csv")
    assert empty.read_text() == "name,value,sigma,bound_low,bound_high\n"
    o = Outcome()
    o.metric("v_1", 0.5, 0.1, 0.25, 1.0)
    text = emit_plotdata(o, tmp_path / "m.csv").read_text().splitlines()
    assert text[1] == "v_1,0.5,0.1,0.25,1.0"


def test_run_velocity_record(tmp_path):
    path = tmp_path / "v.txt"
    path.write_text(VELOCITY)
    man = load_manifest(path, "velocity")
    rec = run_manifest(man, workers=2, out=tmp_path / "out")
    assert rec.passed and [v.name for v in rec.verdicts] == ["theorem1", "exact_velocity"]
    run_dir = rec.path
    assert run_dir.name == f"velocity-{rec.digest[:12]}"
    saved = RunRecord.from_json((run_dir / "record.json").read_text())
    assert recompute_verdicts(saved) == [v.passed for v in rec.verdicts]
    rows = (run_dir / "metrics.csv").read_text().splitlines()
    assert rows[0] == "name,value,sigma,bound_low,bound_high" and rows[1].startswith("v_1,")
    assert rows[1].endswith(",0.3333333333333333,1.0")

    # append-only reruns, identical numbers
    again = run_manifest(man, workers=1, out=tmp_path / "out")
    assert again.path != run_dir and again.path.name.endswith("-2")
    assert (again.path / "metrics.csv").read_bytes() == (run_dir / "metrics.csv").read_bytes()


def test_run_equivalence_and_expansion(tmp_path):
    eq = build_manifest({"alphas": "1.5,0.7,2.2,1.1", "seed": "3", "steps": "4", "runs": "200000"}, "equivalence")
    rec = run_manifest(eq, out=tmp_path)
    m = {x.name: x for x in rec.metrics}
    assert rec.passed and abs(m["total_probability"].value - 1) <= 1e-10
    lines = (rec.path / "path_law.csv").read_text().splitlines()
    assert len(lines) == 1 + 4 ** 4

    ex = build_manifest({"mean": "0.4,0.2,0.2,0.2", "gamma": "400", "seed": "1", "steps": "5000",
                         "runs": "20"}, "expansion")
    rec = run_manifest(ex, out=tmp_path)
    names = [x.name for x in rec.metrics]
    assert names[:3] == ["center_1", "center_2", "error_bound"] and "v_1" in names and "v_2" in names
    assert rec.passed


@pytest.mark.parametrize("mode", ["killed", "fourier", "series", "symmetrize", "lemma2", "lemma3"])
def test_run_green_modes(tmp_path, mode):
    man = build_manifest({"alphas": "3,1,1,1", "mode": mode, "seed": "5", "radius": "2", "delta": "0.9",
                          "samples": "300"}, "green")
    rec = run_manifest(man, workers=1, out=tmp_path)
    assert rec.passed
    if mode not in ("fourier", "series"):  # no closed form to judge against in d=2
        assert rec.verdicts
    assert (rec.path / "record.json").exists()


def test_run_kalikow(tmp_path):
    man = build_manifest({"alphas": "3,1", "seed": "2", "radius": "2", "delta": "0.9", "samples": "3000"}, "kalikow")
    rec = run_manifest(man, out=tmp_path)
    assert rec.passed and {v.name for v in rec.verdicts} == {"prop2", "theorem1"}
    assert len((rec.path / "kernel.csv").read_text().splitlines()) == 1 + 5 * 2


def test_cli_exit_codes(tmp_path, capsys):
    good = tmp_path / "v.txt"
    good.write_text(VELOCITY)
    assert main(["velocity", "--manifest", str(good), "--out", str(tmp_path / "o"), "--workers", "2", "-q"]) == 0
    bad = tmp_path / "bad.txt"
    bad.write_text("alphas = 1, 2, 3\nseed = 1\n")
    assert main(["velocity", "--manifest", str(bad), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "alphas:" in err and "steps:" in err
    sym = tmp_path / "s.txt"
    sym.write_text("alphas = 3,1,1,1\nmode = fourier\n")
    assert main(["green", "--manifest", str(sym), "--mode", "symmetrize", "--out", str(tmp_path / "o"), "-q"]) == 2
    sym.write_text("alphas = 3,1,1,1\nmode = symmetrize\nradius = 1\ndelta = 0.9\n")
    assert main(["green", "--manifest", str(sym), "--out", str(tmp_path / "o"), "-q"]) == 0
    env = tmp_path / "env.csv"
    assert main(["env-dump", "--alphas", "1,2", "--seed", "3", "--radius", "1", "--output", str(env)]) == 0
    assert len(env.read_text().splitlines()) == 4


def test_cli_reports_failed_verdict(tmp_path, monkeypatch):
    import rwre.runner as runner

    def failing(man, workers):
        o = Outcome()
        o.metric("x", 2.0, 0.0, 0.0, 1.0)
        o.verdict("always_fails", "theorem1", [("x", 0.0, 1.0)])
        return o, {}

    monkeypatch.setitem(runner.EXPERIMENTS, "velocity", failing)
    good = tmp_path / "v.txt"
    good.write_text(VELOCITY)
    assert main(["velocity", "--manifest", str(good), "--out", str(tmp_path / "o"), "-q"]) == 1


def test_verify_quick(tmp_path):
    man = build_manifest({"scale": "quick"}, "verify")
    rec = run_manifest(man, workers=2, out=tmp_path)
    rows = (rec.path / "criteria.csv").read_text().splitlines()
    assert len(rows) == 13
    assert all(m.name.startswith("c") for m in rec.metrics)
