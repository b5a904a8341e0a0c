"""Example artifacts from a real harness run, one per figure kind."""

from importlib import resources
from pathlib import Path

EXAMPLES = (
    "convergence.csv",
    "meso.csv",
    "trajectory.csv",
    "kernel_gaps.csv",
    "snapshots.csv",
)


def example_path(name: str) -> Path:
    if name not in EXAMPLES:
        raise FileNotFoundError(f"no shipped example named {name!r}")
    return Path(str(resources.files(__package__) / name))
