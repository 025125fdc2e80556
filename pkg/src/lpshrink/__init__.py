"""lp-norm based James-Stein shrinkage estimators with minimaxity and sparsity."""

from lpshrink.estimators import (
    ConstantPhi,
    Observation,
    PhiFunction,
    PhiSpec,
    RationalPhi,
    ScaleMode,
    ShrinkageConfig,
    band_limit,
    gamma,
    james_stein,
    parse_phi_spec,
    phi_make,
    shrink,
    zero_set,
    zhou_hwang_config,
)
from lpshrink.exceptions import DomainError, ValidationError
from lpshrink.minimax import Grid, MinimaxReport, Theorem, check_minimax, g_phi
from lpshrink.norms import INFINITY, check_lemma_a1, lp_norm
from lpshrink.risk import (
    MeanConfig,
    RiskEstimate,
    SureReport,
    identity_check,
    mc_risk,
    psi_phi,
    psi_upper,
    sure,
    unknown_risk_margin,
)

__version__ = "0.1.0"
