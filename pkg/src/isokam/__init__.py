"""Group-cohomological KAM engine for perturbed isometry actions on model
manifolds (circle, flat torus, z-rotation sector of the sphere)."""

from . import actions, groups, kam, models, spectral, torusmaps
from .spectral import Cochain, Grid, VectorFieldSpectrum

__all__ = ["actions", "groups", "kam", "models", "spectral", "torusmaps",
           "Cochain", "Grid", "VectorFieldSpectrum"]

__version__ = "0.1.0"
