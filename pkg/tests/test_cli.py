import json

import pytest

from netelast.cli import main

TINY = "eps = 0.25\nt_end = 0.1\nsamples = 4\n"


def _cfg(tmp_path, text=TINY):
    path = tmp_path / "run.cfg"
    path.write_text(text)
    return str(path)


def test_passing_run_exits_zero(tmp_path, capsys):
    out = tmp_path / "res"
    rc = main(["lattice-info", "--config", _cfg(tmp_path), "--out", str(out)])
    assert rc == 0
    printed = capsys.readouterr().out
    assert "overall: pass" in printed
    assert (out / "lattice.csv").exists()
    report = json.loads((out / "report.json").read_text())
    assert report["command"] == "lattice-info"
    assert report["passed"] is True


def test_unknown_config_key_exits_two(tmp_path, capsys):
    rc = main(
        [
            "simulate",
            "--config",
            _cfg(tmp_path, "bogus = 1\n"),
            "--out",
            str(tmp_path / "res"),
        ]
    )
    assert rc == 2
    assert "unknown key" in capsys.readouterr().err


def test_missing_config_file_exits_two(tmp_path, capsys):
    rc = main(
        ["simulate", "--config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path / "o")]
    )
    assert rc == 2


def test_failing_verdict_exits_one(tmp_path, capsys):
    text = "korn_eps = 0.25\nkorn_floor = 0.2\n"
    rc = main(
        ["korn-check", "--config", _cfg(tmp_path, text), "--out", str(tmp_path / "res")]
    )
    assert rc == 1
    assert "FAIL" in capsys.readouterr().out


def test_bad_thread_count_exits_two(tmp_path, capsys):
    rc = main(["simulate", "--threads", "0", "--out", str(tmp_path / "res")])
    assert rc == 2


def test_defaults_without_config(tmp_path):
    rc = main(["bonds-info", "--out", str(tmp_path / "res")])
    assert rc == 0
    manifest = json.loads((tmp_path / "res" / "manifest.json").read_text())
    assert "bonds.csv" in manifest["artifacts"]


def test_unknown_subcommand_rejected():
    with pytest.raises(SystemExit) as err:
        main(["frobnicate"])
    assert err.value.code == 2
