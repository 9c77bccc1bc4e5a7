"""Transfer stacking of sigmoid feedforward networks for cyclone intensity series."""

from importlib.resources import files

__version__ = "0.1.0"


def fixture_path(basin: str):
    """Path to a bundled synthetic corpus, ``basin`` in {"SP", "SI"}."""
    return files("transtack") / "data" / f"synthetic_{basin.lower()}.csv"
