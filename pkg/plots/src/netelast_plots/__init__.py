"""Figure rendering for netelast experiment artifacts.

Consumes the delimited CSV files the experiment harness writes and
turns them into matplotlib figures.  The package reads only those
files; it never imports the simulation code itself, so it installs and
runs on machines that only hold result artifacts.
"""

__version__ = "0.1.0"


class PlotDataError(ValueError):
    """Input rows missing, or a required column absent."""


from .figures import FIGURES, render  # noqa: E402

__all__ = ["FIGURES", "PlotDataError", "render"]
