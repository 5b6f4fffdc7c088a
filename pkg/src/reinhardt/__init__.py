"""Weighted Bergman projections on convex Reinhardt domains.

Moment tables, truncated kernels, the operator M_beta, weighted Sobolev
norms, and numerical checks of the inequalities behind Sobolev regularity
of the projection.
"""

from reinhardt.geometry import (
    RadialDomain,
    ball,
    complex_ellipsoid,
    custom_domain,
    polydisc,
    unit_disc,
)
from reinhardt.weight import WeightSpec
from reinhardt.moments import MomentTable, build_table, closed_form_table
from reinhardt.operators import MonomialPolynomial

__version__ = "0.1.0"

__all__ = [
    "RadialDomain",
    "ball",
    "complex_ellipsoid",
    "custom_domain",
    "polydisc",
    "unit_disc",
    "WeightSpec",
    "MomentTable",
    "build_table",
    "closed_form_table",
    "MonomialPolynomial",
]
