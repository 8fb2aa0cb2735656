import csv
import json
from pathlib import Path

import pytest

from rishield.cli import main
from rishield.scenario import build_default_apartment, save_scenario

GOLDEN = Path(__file__).parent / "golden" / "optimize_apartment_seed7_report.txt"


def run(*argv):
    return main([str(a) for a in argv])


def kv(path):
    return dict(line.rstrip("\n").split(" = ", 1) for line in open(path) if " = " in line)


def csv_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def optimize_seed7(tmp_path_factory):
    out = tmp_path_factory.mktemp("opt7")
    assert run("optimize", "--seed", 7, "--out-dir", out) == 0
    return out


def test_simulate_both_modes(tmp_path, capsys):
    assert run("simulate", "--scenario", "apartment", "--ris", "both", "--out-dir", tmp_path) == 0
    for name in ("coverage_off.csv", "coverage_off.pgm", "coverage_absorb-all.csv",
                 "coverage_absorb-all.pgm", "stats.csv", "manifest.json"):
        assert (tmp_path / name).is_file()
    stats = {(r["mode"], r["region"]): float(r["median_dbm"]) for r in csv_rows(tmp_path / "stats.csv")}
    assert stats[("absorb-all", "shielded")] < stats[("off", "shielded")]
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["subcommand"] == "simulate" and man["seed"] == 0
    assert "coverage_off.csv" in man["outputs"]


def test_simulate_mask_mode(tmp_path):
    mask = tmp_path / "m.txt"
    mask.write_text("101010\n010101\n")
    assert run("simulate", "--ris", "mask", "--ris-mask", mask, "--out-dir", tmp_path / "o") == 0
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert str(mask) in man["inputs"]


def test_golden_report(optimize_seed7):
    got, want = kv(optimize_seed7 / "report.txt"), kv(GOLDEN)
    assert got.keys() == want.keys()
    for key, val in want.items():
        try:
            ref = float(val)
        except ValueError:
            assert got[key] == val, key
            continue
        assert float(got[key]) == pytest.approx(ref, rel=1e-6, abs=1e-12), key
    assert (optimize_seed7 / "report.txt").read_text().split("[mask]")[1] == GOLDEN.read_text().split("[mask]")[1]


def test_optimize_outputs_consistent(optimize_seed7):
    rep = kv(optimize_seed7 / "report.txt")
    after = csv_rows(optimize_seed7 / "links_after.csv")
    smse = sum(float(r["mse"]) for r in after if r["zone"] == "protected")
    assert smse == pytest.approx(float(rep["smse_after"]), rel=1e-9)
    assert float(rep["sum_rate_after"]) == pytest.approx(sum(float(r["rate_bps_hz"]) for r in after), rel=1e-9)
    assert (optimize_seed7 / "mask.txt").read_text().strip() == \
        (optimize_seed7 / "report.txt").read_text().split("[mask]\n")[1].strip()
    assert len(csv_rows(optimize_seed7 / "links_before.csv")) == 4


def test_optimize_brute_force_reports_gap(tmp_path):
    assert run("optimize", "--seed", 1, "--restarts", 4, "--brute-force", "--out-dir", tmp_path) == 0
    rep = kv(tmp_path / "report.txt")
    gap = float(rep["oracle_gap"])
    assert gap >= 0
    assert float(rep["objective"]) - float(rep["oracle_objective"]) == pytest.approx(gap, abs=1e-12)


def test_determinism_byte_identical(tmp_path):
    for sub in ("a", "b"):
        assert run("simulate", "--out-dir", tmp_path / sub / "sim", "--cell", 0.25) == 0
        assert run("optimize", "--seed", 3, "--restarts", 4, "--out-dir", tmp_path / sub / "opt") == 0
        assert run("pattern", "--preset", "center-square-absorb", "--out-dir", tmp_path / sub / "pat") == 0
    for f in sorted((tmp_path / "a").rglob("*")):
        if f.is_file() and f.name != "manifest.json":
            twin = tmp_path / "b" / f.relative_to(tmp_path / "a")
            assert f.read_bytes() == twin.read_bytes(), f.name


def test_pattern_presets(tmp_path, capsys):
    assert run("pattern", "--preset", "half-alternating", "--rows", 10, "--cols", 10, "--out-dir", tmp_path / "h") == 0
    assert len(csv_rows(tmp_path / "h" / "lobes.csv")) == 3
    assert run("pattern", "--preset", "full-reflect", "--out-dir", tmp_path / "f") == 0
    assert len(csv_rows(tmp_path / "f" / "lobes.csv")) == 1
    assert (tmp_path / "f" / "full_pattern.pgm").read_bytes().startswith(b"P5\n201 201\n255\n")


def test_pattern_user_mask(tmp_path):
    mask = tmp_path / "m.txt"
    mask.write_text("1100\n0011\n")
    assert run("pattern", "--mask", mask, "--rows", 2, "--cols", 4, "--resolution", 64,
               "--full-resolution", 21, "--out-dir", tmp_path / "o") == 0


def test_sweep_rows_and_summary(tmp_path):
    assert run("sweep", "--seeds", "0:10", "--restarts", 2, "--no-binary-seeds", "--out-dir", tmp_path) == 0
    rows = csv_rows(tmp_path / "sweep.csv")
    assert [r["seed"] for r in rows] == [str(s) for s in range(10)] + ["mean"]
    summary = {r["stat"]: r for r in csv_rows(tmp_path / "sweep_summary.csv")}
    objs = [float(r["objective"]) for r in rows[:10]]
    assert float(summary["min"]["objective"]) == min(objs)
    assert float(summary["max"]["objective"]) == max(objs)
    assert float(summary["mean"]["objective"]) == pytest.approx(sum(objs) / 10)


def test_sweep_single_seed_matches_optimize(tmp_path, optimize_seed7):
    assert run("sweep", "--seeds", "7:8", "--out-dir", tmp_path) == 0
    row = csv_rows(tmp_path / "sweep.csv")[0]
    rep = kv(optimize_seed7 / "report.txt")
    assert float(row["objective"]) == pytest.approx(float(rep["objective"]), rel=1e-12)
    assert float(row["sum_rate"]) == pytest.approx(float(rep["sum_rate_after"]), rel=1e-12)


def test_sweep_parallel_matches_serial(tmp_path):
    args = ["--seeds", "0:4", "--restarts", 2, "--no-binary-seeds"]
    assert run("sweep", *args, "--out-dir", tmp_path / "s") == 0
    assert run("sweep", *args, "--jobs", 2, "--out-dir", tmp_path / "p") == 0
    assert (tmp_path / "s" / "sweep.csv").read_bytes() == (tmp_path / "p" / "sweep.csv").read_bytes()


def _no_protected_scenario(tmp_path):
    s = build_default_apartment()
    import dataclasses
    from rishield.scenario import Zone

    rx = tuple(dataclasses.replace(r, zone=Zone.SERVED) for r in s.receivers)
    p = tmp_path / "noprot.toml"
    save_scenario(dataclasses.replace(s, receivers=rx), p)
    return p


def _bad_mask(tmp_path):
    p = tmp_path / "m.txt"
    p.write_text("111111111\n" * 10)
    return p


EXIT_TABLE = [
    ("missing scenario", lambda t: ["simulate", "--scenario", t / "nope.toml"], 2, "scenario not found"),
    ("bad scenario", lambda t: ["optimize", "--scenario", t / "bad.toml"], 2, "invalid scenario"),
    ("empty protected flag", lambda t: ["optimize", "--protected", ","], 2, "protected set is empty"),
    ("no protected receivers", lambda t: ["optimize", "--scenario", _no_protected_scenario(t)], 2, "protected set is empty"),
    ("unknown receiver", lambda t: ["optimize", "--protected", "kitchen"], 2, "kitchen"),
    ("bad solver option", lambda t: ["optimize", "--restarts", 0], 2, "restarts"),
    ("mask 10x9 vs cols 10", lambda t: ["pattern", "--mask", _bad_mask(t), "--rows", 10, "--cols", 10], 2, "expected 10x10"),
    ("mask file missing", lambda t: ["pattern", "--mask", t / "none.txt"], 2, "not found"),
    ("resolution too low", lambda t: ["pattern", "--resolution", 4], 2, "resolution"),
    ("mask mode without file", lambda t: ["simulate", "--ris", "mask"], 2, "--ris-mask"),
    ("empty seed range", lambda t: ["sweep", "--seeds", "5:5"], 2, "empty seed range"),
    ("bad seed range", lambda t: ["sweep", "--seeds", "a:b"], 2, "bad seed range"),
    ("jobs zero", lambda t: ["sweep", "--jobs", 0], 2, "--jobs"),
    ("unknown subcommand", lambda t: ["teleport"], 2, ""),
    ("out dir is a file", lambda t: ["pattern", "--out-dir", t / "file.txt"], 3, "runtime error"),
]


@pytest.mark.parametrize("name,argv,code,msg", EXIT_TABLE, ids=[e[0] for e in EXIT_TABLE])
def test_exit_codes(tmp_path, capsys, name, argv, code, msg):
    (tmp_path / "bad.toml").write_text("carrier_hz = 2.4e9\n[tx]\nx=0.0\ny=0.0\npower_dbm=20.0\nbogus=1\n")
    (tmp_path / "file.txt").write_text("x")
    args = argv(tmp_path)
    if "--out-dir" not in args:
        args = args + ["--out-dir", tmp_path / "out"]
    assert run(*args) == code
    assert msg in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    import subprocess
    import sys

    proc = subprocess.run([sys.executable, "-m", "rishield", "pattern", "--resolution", "64",
                           "--full-resolution", "21", "--out-dir", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "lobes.csv").is_file()
