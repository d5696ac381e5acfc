"""Structural checks and independent reference solutions."""
from .checks import (comparison_check, coefficient_spot_check, moreau_yosida_suite, report,
                     yosida_rate_fit)
from .moduli import ModulusRho, bihari_bound, modulus_invariants, reciprocal_integral, rho_eval
from .oracles import oracle_solve

__all__ = [
    "ModulusRho", "bihari_bound", "coefficient_spot_check", "comparison_check", "modulus_invariants",
    "moreau_yosida_suite", "oracle_solve", "reciprocal_integral", "report", "rho_eval", "yosida_rate_fit",
]
