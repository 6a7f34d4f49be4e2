"""paradigmforge: a desk-scale lab for targeted pre-training data interventions."""

__version__ = "0.1.0"

from .rng import Rng, derive_seed

__all__ = ["Rng", "derive_seed", "__version__"]
