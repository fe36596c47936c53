import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from semiquant.cli import run

ROOT = Path(__file__).parent.parent

SMALL = """\
[geometry]
factors = 1

[hamiltonian]
preset = {preset}

[window]
half_width = 0.4

[run]
level = {level}
p = 10, 20, 40
time = 0.3
checks = {checks}
{extra}
"""


def write_cfg(tmp_path, preset="rotation", level=0.3, checks="rrh, spectrum", extra="",
              name="run.conf"):
    path = tmp_path / name
    path.write_text(SMALL.format(preset=preset, level=level, checks=checks, extra=extra))
    return path


def summary(out):
    return json.loads((out / "summary.json").read_text())


def test_check_pass(tmp_path):
    out = tmp_path / "out"
    assert run(["check", "--config", str(write_cfg(tmp_path)), "--out", str(out)]) == 0
    s = summary(out)
    assert s["passed"] and {c["verdict"] for c in s["checks"]} == {"pass"}
    header = (out / "checks.csv").read_text().splitlines()[0]
    assert header == "name,measured,predicted,rel_err,verdict"


def test_check_fail_still_writes_reports(tmp_path):
    cfg = write_cfg(tmp_path, checks="spectrum", extra="\n[tolerances]\nspectrum = 1e-300\n")
    out = tmp_path / "out"
    assert run(["check", "--config", str(cfg), "--out", str(out)]) == 1
    assert summary(out)["checks"][0]["verdict"] == "fail"
    assert (out / "checks.csv").exists()


def test_config_error_exit(tmp_path, capsys):
    cfg = write_cfg(tmp_path, extra="colour = red\n")
    assert run(["check", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "line 15" in err and "run.colour" in err
    assert run(["check", "--config", str(tmp_path / "missing.conf")]) == 2
    assert run(["check"]) == 2


def test_numerical_error_exit(tmp_path):
    # the metaplectic lift of a non-holomorphic flow is refused at run time
    text = SMALL.format(preset="perturbed:0.1,0.15\nlift = metaplectic", level=0.3,
                        checks="invariants", extra="")
    path = tmp_path / "meta.conf"
    path.write_text(text.replace("factors = 1", "factors = 1\ntwists = -1"))
    out = tmp_path / "out"
    assert run(["check", "--config", str(path), "--out", str(out)]) == 3
    assert summary(out)["checks"][0]["verdict"] == "error"


def test_critical_level_skipped(tmp_path):
    out = tmp_path / "out"
    assert run(["check", "--config", str(ROOT / "configs" / "critical_level.conf"),
                "--out", str(out)]) == 0
    assert summary(out)["checks"][0]["verdict"] == "skipped: critical level"


def test_verbs_produce_files(tmp_path):
    cfg = write_cfg(tmp_path, preset="radial:1,0.5")
    expected = {"quantize": "quantize.csv", "spectrum": "spectrum.csv", "evolve": "evolve.csv",
                "trace": "traces.csv", "gutzwiller": "prediction.csv"}
    for verb, fname in expected.items():
        out = tmp_path / verb
        assert run([verb, "--config", str(cfg), "--out", str(out)]) == 0, verb
        assert (out / fname).exists()
        assert fname in summary(out)["files"]


def test_floats_have_17_digits(tmp_path):
    out = tmp_path / "out"
    run(["spectrum", "--config", str(write_cfg(tmp_path, preset="radial:1,0.5")),
         "--out", str(out)])
    vals = [ln.split(",")[2] for ln in (out / "spectrum.csv").read_text().splitlines()[1:]]
    digits = [v.lstrip("-").split("e")[0].replace(".", "").lstrip("0") for v in vals]
    assert max(len(d) for d in digits) == 17


def test_deterministic_and_cache_reuse(tmp_path):
    cfg = write_cfg(tmp_path, preset="radial:1,0.5", checks="weyl, rrh")
    cache = tmp_path / "cache"
    outs = [tmp_path / f"o{i}" for i in range(3)]
    run(["check", "--config", str(cfg), "--out", str(outs[0])])
    run(["check", "--config", str(cfg), "--out", str(outs[1]), "--cache", str(cache)])
    assert list(cache.glob("*.sqc"))
    run(["check", "--config", str(cfg), "--out", str(outs[2]), "--cache", str(cache)])
    a, b, c = ((o / "checks.csv").read_bytes() for o in outs)
    assert a == b == c


def test_cache_precedence(tmp_path, monkeypatch):
    cfg = write_cfg(tmp_path, preset="radial:1,0.5", checks="rrh",
                    extra=f"\n[output]\ncache = {tmp_path / 'from_config'}\n")
    monkeypatch.setenv("SEMIQUANT_CACHE", str(tmp_path / "from_env"))
    run(["spectrum", "--config", str(cfg), "--out", str(tmp_path / "o1")])
    assert list((tmp_path / "from_env").glob("*.sqc"))
    assert not (tmp_path / "from_config").exists()
    run(["spectrum", "--config", str(cfg), "--out", str(tmp_path / "o2"),
         "--cache", str(tmp_path / "from_flag")])
    assert list((tmp_path / "from_flag").glob("*.sqc"))


def test_cache_gc_verb(tmp_path):
    cfg = write_cfg(tmp_path, preset="radial:1,0.5")
    cache = tmp_path / "cache"
    run(["spectrum", "--config", str(cfg), "--out", str(tmp_path / "o"), "--cache", str(cache)])
    assert len(list(cache.glob("*.sqc"))) == 3
    out = tmp_path / "gc"
    assert run(["cache-gc", "--cache", str(cache), "--max-bytes", "0", "--out", str(out)]) == 0
    assert not list(cache.glob("*.sqc"))
    assert summary(out)["bytes_after"] == 0
    assert run(["cache-gc", "--cache", str(cache)]) == 2


def test_jobs_matches_serial(tmp_path):
    cfg = write_cfg(tmp_path, preset="radial:1,0.5")
    run(["spectrum", "--config", str(cfg), "--out", str(tmp_path / "a")])
    run(["spectrum", "--config", str(cfg), "--out", str(tmp_path / "b"), "--jobs", "2"])
    assert ((tmp_path / "a" / "spectrum.csv").read_bytes()
            == (tmp_path / "b" / "spectrum.csv").read_bytes())


def test_console_entry_point(tmp_path):
    env = dict(os.environ, PYTHONPATH=str(ROOT / "src"))
    res = subprocess.run([sys.executable, "-m", "semiquant.cli", "check", "--config",
                          str(write_cfg(tmp_path)), "--out", str(tmp_path / "o")],
                         capture_output=True, text=True, env=env)
    assert res.returncode == 0
    assert "PASS" in res.stdout
