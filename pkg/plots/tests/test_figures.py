import sys

import pytest

from netelast_plots import PlotDataError, render
from netelast_plots.data import EXAMPLES, example_path
from netelast_plots.figures import FIGURES

KIND_TO_EXAMPLE = {
    "convergence": "convergence.csv",
    "tensor-error": "meso.csv",
    "energy": "trajectory.csv",
    "kernel": "kernel_gaps.csv",
    "snapshot-slice": "snapshots.csv",
}


def test_example_table_is_complete():
    assert sorted(KIND_TO_EXAMPLE) == sorted(FIGURES)
    assert sorted(KIND_TO_EXAMPLE.values()) == sorted(EXAMPLES)


@pytest.mark.parametrize("kind", sorted(FIGURES))
def test_every_kind_renders_from_shipped_data(kind, tmp_path):
    out = tmp_path / f"{kind}.png"
    got = render(kind, example_path(KIND_TO_EXAMPLE[kind]), out)
    assert got == out
    assert out.stat().st_size > 1000
    # png magic
    assert out.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_unknown_kind_rejected(tmp_path):
    with pytest.raises(PlotDataError, match="unknown figure kind"):
        render("pie", example_path("meso.csv"), tmp_path / "x.png")


def test_schema_mismatch_leaves_no_file(tmp_path):
    wrong = tmp_path / "wrong.csv"
    wrong.write_text("a,b\n1,2\n")
    out = tmp_path / "fig.png"
    with pytest.raises(PlotDataError, match="missing column"):
        render("energy", wrong, out)
    assert not out.exists()


def test_empty_input_leaves_no_file(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("time,total_energy,conserved_energy\n")
    out = tmp_path / "fig.png"
    with pytest.raises(PlotDataError, match="no data rows"):
        render("energy", empty, out)
    assert not out.exists()


def test_simulation_package_not_imported():
    leaked = [m for m in sys.modules if m.split(".")[0] == "netelast"]
    assert not leaked, leaked
