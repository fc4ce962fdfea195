"""Critical parameters, survival probabilities and simulation of branching random walks."""

__version__ = "0.1.0"

from .branching import (FixedPointReport, MonotoneMap, OffspringLaw, extinction_probs,
                        ibp_irreducible, monotone_iterate, survival_probs, survival_verdict)
from .brw import BRWLaw, apply_K, brw_G, brw_H, offspring_prob
from .critical import (Certificate, CriticalReport, check_certificate, condU_holds,
                       critical_behavior_probe, critical_report, lambda_s, lambda_w_bracket,
                       lambda_w_finite, part_a_diagnostic, spectral_radius)
from .genfun import estimate_parameters, lambda_s_via_phi, series
from .graph import Window, WeightedKernel, load_kernel, save_kernel
from .sim import SimConfig, estimate_survival, simulate_continuous, simulate_generations

__all__ = [
    "BRWLaw", "Certificate", "CriticalReport", "FixedPointReport", "MonotoneMap",
    "OffspringLaw", "SimConfig", "Window", "WeightedKernel", "apply_K", "brw_G", "brw_H",
    "check_certificate", "condU_holds", "critical_behavior_probe", "critical_report",
    "estimate_parameters", "estimate_survival", "extinction_probs", "ibp_irreducible",
    "lambda_s", "lambda_s_via_phi", "lambda_w_bracket", "lambda_w_finite", "load_kernel",
    "monotone_iterate", "offspring_prob", "part_a_diagnostic", "save_kernel", "series",
    "simulate_continuous", "simulate_generations", "spectral_radius", "survival_probs",
    "survival_verdict",
]
