"""Eigenvector moment flow: configurations, matching observables, the
generator and its verification routes."""
from .configs import Configuration, enumerate_configs
from .generator import (ConfigSpace, equilibrium_measure, flow_speed, generator_apply, generator_matrix,
                        master_equation_solve, phi)
from .matchings import HERMITIAN, SYMMETRIC, MatchingGraph, enumerate_matchings, g_poly
from .numeric import monte_carlo_f, verify_identity_numeric, young_bound_probe
from .observables import OverlapSet, observable_g, overlaps
from .symbolic import verify_all, verify_identity_symbolic

__all__ = [
    "Configuration", "enumerate_configs", "ConfigSpace", "equilibrium_measure", "flow_speed", "generator_apply",
    "generator_matrix", "master_equation_solve", "phi", "HERMITIAN", "SYMMETRIC", "MatchingGraph",
    "enumerate_matchings", "g_poly", "monte_carlo_f", "verify_identity_numeric",
    "young_bound_probe", "OverlapSet", "observable_g", "overlaps", "verify_all",
    "verify_identity_symbolic",
]
