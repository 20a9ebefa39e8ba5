"""Figure rendering for ris3d run artifacts. Reads CSV/JSON files only."""

__version__ = "0.1.0"
