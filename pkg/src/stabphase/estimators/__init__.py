from ._common import (BayesConfig, ConfigError, DirectBayesConfig, EstimateResult,
                      PhomConfig, RamseyConfig, fit_harmonic)
from .direct import bayes_direct_cc
from .scans import fit_cosine_phase, phom, phom_constant_cosine, ramsey_scan
from .sequential import bayes_marginal, bayes_single_adaptive

__all__ = [
    "BayesConfig", "ConfigError", "DirectBayesConfig", "EstimateResult", "PhomConfig",
    "RamseyConfig", "fit_harmonic", "fit_cosine_phase", "bayes_direct_cc", "phom",
    "phom_constant_cosine", "ramsey_scan", "bayes_marginal", "bayes_single_adaptive",
]
