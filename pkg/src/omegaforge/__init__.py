"""Exact finite-scale constructions and measure bounds for outcome
probabilities of oracle, monotone and infinitary self-delimiting machines."""

from .bits import Dyadic, check_prefix_free, kraft_chaitin, measure_of

__all__ = ["Dyadic", "check_prefix_free", "kraft_chaitin", "measure_of"]
__version__ = "0.1.0"
