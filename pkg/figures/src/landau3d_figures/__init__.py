"""Figure scripts reading landau3d CSV/JSON artifacts."""

from .artifacts import SchemaError, read_csv, read_json
from .plots import (plot_decay, plot_decomposition, plot_dispersion,
                    plot_picard_history)

__all__ = [
    "SchemaError",
    "read_csv",
    "read_json",
    "plot_decay",
    "plot_decomposition",
    "plot_dispersion",
    "plot_picard_history",
]
