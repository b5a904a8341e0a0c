import pytest

from netelast_plots.cli import main
from netelast_plots.data import example_path


def test_render_ok(tmp_path, capsys):
    out = tmp_path / "fig.png"
    rc = main(
        ["kernel", "--csv", str(example_path("kernel_gaps.csv")), "--out", str(out)]
    )
    assert rc == 0
    assert out.exists()
    assert "wrote" in capsys.readouterr().out


def test_missing_input_exits_two(tmp_path, capsys):
    rc = main(
        ["kernel", "--csv", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "f.png")]
    )
    assert rc == 2
    assert "error:" in capsys.readouterr().err


def test_schema_mismatch_exits_two_and_writes_nothing(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("foo,bar\n1,2\n")
    out = tmp_path / "f.png"
    rc = main(["convergence", "--csv", str(bad), "--out", str(out)])
    assert rc == 2
    assert "missing column" in capsys.readouterr().err
    assert not out.exists()


def test_unknown_kind_rejected_by_parser():
    with pytest.raises(SystemExit) as err:
        main(["pie", "--csv", "x", "--out", "y"])
    assert err.value.code == 2
