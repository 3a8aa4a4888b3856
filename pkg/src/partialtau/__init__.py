"""Partial and marginal association between mixed-type outcomes.

Each outcome is adjusted for covariates by a regression model; its residual
randomness is mapped to a common (-1/2, 1/2) scale by surrogate residuals,
and association is measured by Kendall's tau between the residuals.
"""

from .assoc import (
    AssocEstimate,
    AssocKind,
    ModerationResult,
    PairData,
    kendall_tau,
    marginal_t,
    moderation,
    partial_t,
    pct_change,
    t_measure,
)
from .errors import PartialTauError
from .inference import (
    BootstrapConfig,
    BootstrapDistribution,
    bootstrap_moderation,
    bootstrap_moderation_difference,
    bootstrap_t,
    p_value_composite,
    p_value_simple,
    summarize,
)
from .lowess import lowess
from .models import (
    Dataset,
    Family,
    FittedModel,
    Link,
    ModelSpec,
    category_probs,
    cdf_interval,
    encode_ordinal,
    fit,
    loglik_at,
    score_vector,
)
from .rng import RngStream
from .surrogate import (
    ResidualMatrix,
    lz_equivalence_stat,
    normalize,
    residual,
    residual_matrix,
    surrogate_draw,
)

__version__ = "0.1.0"

__all__ = [
    "AssocEstimate",
    "AssocKind",
    "BootstrapConfig",
    "BootstrapDistribution",
    "Dataset",
    "Family",
    "FittedModel",
    "Link",
    "ModelSpec",
    "ModerationResult",
    "PairData",
    "PartialTauError",
    "ResidualMatrix",
    "RngStream",
    "bootstrap_moderation",
    "bootstrap_moderation_difference",
    "bootstrap_t",
    "category_probs",
    "cdf_interval",
    "encode_ordinal",
    "fit",
    "kendall_tau",
    "loglik_at",
    "lowess",
    "lz_equivalence_stat",
    "marginal_t",
    "moderation",
    "normalize",
    "p_value_composite",
    "p_value_simple",
    "partial_t",
    "pct_change",
    "residual",
    "residual_matrix",
    "score_vector",
    "summarize",
    "surrogate_draw",
    "t_measure",
]
