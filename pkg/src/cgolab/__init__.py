"""cgolab: a desk-scale numerical workbench for Cauchy/Vekua integral
operators, stationary-phase functionals, Carleman-weight inequalities,
contraction-series CGO solutions, and the Stokes/Lame decoupling transforms
on disc domains."""

from .grid import (
    Domain,
    ScalarField,
    Field3,
    Matrix3Field,
    Jet4,
    build_disc_domain,
    integrate_area,
    integrate_boundary,
    pairing,
    wirtinger_diff,
    weighted_sobolev_norm,
    jet_at,
    l2_norm,
    sup_norm,
    interp,
)
from .profiles import make_profile, sample, profile_from_config

__all__ = [
    "Domain",
    "ScalarField",
    "Field3",
    "Matrix3Field",
    "Jet4",
    "build_disc_domain",
    "integrate_area",
    "integrate_boundary",
    "pairing",
    "wirtinger_diff",
    "weighted_sobolev_norm",
    "jet_at",
    "l2_norm",
    "sup_norm",
    "interp",
    "make_profile",
    "sample",
    "profile_from_config",
]

__version__ = "0.1.0"
