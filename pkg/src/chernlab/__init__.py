"""chernlab: spectral tensor calculus on flat tori for G-geodesics and Chern-Ricci forms."""
from .errors import (ChernLabError, DegenerateFrame, DegenerateVolume, IncompatiblePair, NoConvergence,
                     NonDiagonalizable, SingularMetric, StepTooLarge, UnsupportedRank)
from .fields import GridField, GridSpec, load_field, save_field

__version__ = "0.1.0"

__all__ = [
    "ChernLabError", "DegenerateFrame", "DegenerateVolume", "GridField", "GridSpec", "IncompatiblePair",
    "NoConvergence", "NonDiagonalizable", "SingularMetric", "StepTooLarge", "UnsupportedRank",
    "load_field", "save_field", "__version__",
]
