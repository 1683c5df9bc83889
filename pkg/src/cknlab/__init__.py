"""Numerical laboratory for a weighted Sobolev inequality family.

Desk-scale verification of the computable objects around the sharp
constant S(p, a, b): extremal bubbles, the weight-removing radial
stretches, manifold projections, stability ratios, and the spectral
ingredients of the near-manifold expansion for p > 2.
"""

from .errors import *  # noqa: F401,F403
from .params import (  # noqa: F401
    CknParams,
    HatParams,
    derive_params,
    derive_hat_params,
    sharp_constant,
)

__version__ = "0.1.0"
