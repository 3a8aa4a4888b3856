"""Bootstrap inference for the residual tau measure and for moderation.

Each replicate ``b`` resamples rows with replacement, refits both outcome
models and draws fresh surrogate residuals.  All randomness of replicate
``b`` (attempt ``a``) comes from the stream ``(seed, 1, b, a)``: child 0
draws the row indices, the estimators use the remaining children.  The
full-sample estimate uses ``(seed, 0)``.  Replicates are therefore
independent of evaluation order and of ``n_jobs``.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .assoc import DEFAULT_M, MODERATION_EPS, AssocKind, PairData, _estimate
from .errors import (
    EmptyCategory,
    InvalidAlpha,
    InvalidConfig,
    ModelFitError,
    NonFiniteLikelihood,
    TooFewReplicates,
    TooManyFailures,
    UndefinedModeration,
)
from .models import ModelSpec
from .rng import RngStream

MAX_FAILURE_RATE = 0.01
MIN_B_FOR_PVALUE = 100

# a resample that triggers one of these is redrawn, then counted as failed
_RETRYABLE = (EmptyCategory, ModelFitError, NonFiniteLikelihood, UndefinedModeration)


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise InvalidAlpha(f"alpha must lie in (0, 1), got {alpha}")
    return alpha


@dataclass(frozen=True)
class BootstrapConfig:
    B: int = 1000
    M: int = DEFAULT_M
    alpha: float = 0.05
    seed: int = 0
    max_refit_retries: int = 5
    n_jobs: int = 1

    def __post_init__(self):
        _check_alpha(self.alpha)
        if self.B < 1 or self.M < 1:
            raise InvalidConfig("B and M must be positive")
        if self.max_refit_retries < 0:
            raise InvalidConfig("max_refit_retries must be non-negative")
        if self.n_jobs < 1:
            raise InvalidConfig("n_jobs must be at least 1")


@dataclass(frozen=True)
class Summary:
    se: float
    ci_lo: float
    ci_hi: float

    def to_dict(self) -> dict:
        return {"se": self.se, "ci_lo": self.ci_lo, "ci_hi": self.ci_hi}


@dataclass(frozen=True)
class BootstrapDistribution:
    """Replicate estimates in replicate order, failed replicates removed."""

    replicates: np.ndarray
    failures: int
    target: dict = field(default_factory=dict)
    estimate: float = math.nan
    B: int = 0
    sorted: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        reps = np.asarray(self.replicates, dtype=float)
        reps.setflags(write=False)
        object.__setattr__(self, "replicates", reps)
        if self.B == 0:
            object.__setattr__(self, "B", len(reps) + self.failures)
        s = np.sort(reps)
        s.setflags(write=False)
        object.__setattr__(self, "sorted", s)

    def ecdf(self, t: float) -> float:
        """``#{replicates <= t} / B`` over the retained replicates."""
        return np.searchsorted(self.sorted, t, side="right") / len(self.sorted)

    def to_dict(self) -> dict:
        return {"B": self.B, "failures": self.failures, "estimate": self.estimate, "target": self.target}


# ---------------------------------------------------------------------------
# summaries and p-values


def summarize(dist: BootstrapDistribution, alpha: float = 0.05) -> Summary:
    """Standard error (sample SD) and percentile interval of the replicates."""
    alpha = _check_alpha(alpha)
    r = dist.sorted
    if len(r) < 2:
        raise TooFewReplicates("need at least two replicates")
    lo, hi = np.quantile(r, [alpha / 2, 1 - alpha / 2], method="averaged_inverted_cdf")
    return Summary(float(np.std(r, ddof=1)), float(lo), float(hi))


def _check_pvalue_size(dist: BootstrapDistribution):
    if dist.B < MIN_B_FOR_PVALUE:
        raise TooFewReplicates(f"p-values need B >= {MIN_B_FOR_PVALUE}, got {dist.B}")


def p_value_simple(dist: BootstrapDistribution) -> float:
    """Two-sided p-value for a zero association: ``2 min{F(0), 1 - F(0)}``."""
    _check_pvalue_size(dist)
    f0 = dist.ecdf(0.0)
    return float(min(1.0, max(0.0, 2.0 * min(f0, 1.0 - f0))))


def p_value_composite(dist: BootstrapDistribution, delta: float, mirrored: bool = False) -> float:
    """p-value for the interval null ``|T| < delta``.

    The default evaluates ``2 min{F(delta), F(-delta)}`` as written, which
    only rejects on the positive side.  ``mirrored=True`` uses
    ``2 min{F(delta), 1 - F(-delta)}`` so that replicates far below
    ``-delta`` also give a small p-value.
    """
    if delta < 0:
        raise InvalidConfig("delta must be non-negative")
    _check_pvalue_size(dist)
    upper = dist.ecdf(delta)
    lower = dist.ecdf(-delta)
    p = 2.0 * min(upper, 1.0 - lower) if mirrored else 2.0 * min(upper, lower)
    return float(min(1.0, max(0.0, p)))


# ---------------------------------------------------------------------------
# replicate engines


def _t_stat(data: PairData, spec1, spec2, M, rng, start, kind):
    X = data.X if kind is AssocKind.PARTIAL else None
    est, _ = _estimate(data.y1, data.y2, X, spec1, spec2, M, rng, kind, start=start)
    return est.t_hat


def _pct_stat(data: PairData, spec1, spec2, M, rng, start, kind):
    part, _ = _estimate(data.y1, data.y2, data.X, spec1, spec2, M, rng.child(1), AssocKind.PARTIAL, start=start[0])
    marg, _ = _estimate(data.y1, data.y2, None, spec1, spec2, M, rng.child(2), AssocKind.MARGINAL, start=start[1])
    if abs(marg.t_hat) <= MODERATION_EPS:
        raise UndefinedModeration("marginal association is numerically zero")
    return (part.t_hat - marg.t_hat) / marg.t_hat * 100.0


_STATS = {"t": _t_stat, "pct_change": _pct_stat}


def _replicate(root: RngStream, b: int, data: PairData, spec1, spec2, M, retries, stat, start, kind) -> float:
    fn = _STATS[stat]
    for attempt in range(retries + 1):
        rng = root.child(b, attempt)
        idx = rng.child(0).generator().integers(0, data.n, data.n)
        try:
            return fn(data.take(idx), spec1, spec2, M, rng, start, kind)
        except _RETRYABLE:
            continue
    return math.nan


def _replicate_block(args) -> np.ndarray:
    root, bs, *rest = args
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return np.array([_replicate(root, b, *rest) for b in bs])


def _run(root: RngStream, data: PairData, spec1, spec2, cfg: BootstrapConfig, stat, start, kind) -> np.ndarray:
    """Replicate values in replicate order; NaN marks a failed replicate."""
    rest = (data, spec1, spec2, cfg.M, cfg.max_refit_retries, stat, start, kind)
    if cfg.n_jobs == 1:
        return _replicate_block((root, range(cfg.B), *rest))
    blocks = np.array_split(np.arange(cfg.B), cfg.n_jobs * 4)
    with ProcessPoolExecutor(max_workers=cfg.n_jobs) as pool:
        parts = list(pool.map(_replicate_block, [(root, blk, *rest) for blk in blocks]))
    return np.concatenate(parts)


def _finish(values: np.ndarray, B: int, target: dict, estimate: float) -> BootstrapDistribution:
    failed = np.isnan(values)
    failures = int(failed.sum())
    if failures > MAX_FAILURE_RATE * B:
        raise TooManyFailures(f"{failures} of {B} bootstrap replicates failed after retries")
    return BootstrapDistribution(values[~failed], failures, target, estimate, B)


def _full_sample_fit(data, spec1, spec2, M, rng, kind):
    X = data.X if kind is AssocKind.PARTIAL else None
    est, (m1, m2) = _estimate(data.y1, data.y2, X, spec1, spec2, M, rng, kind)
    # warm starts for refits; linear fits are closed form
    return est, (m1.params if spec1.is_discrete else None, m2.params if spec2.is_discrete else None)


def _target(data: PairData, spec1, spec2, covariates, statistic) -> dict:
    return {
        "statistic": statistic,
        "n": data.n,
        "n_covariates": int(data.X.shape[1]),
        "covariates": None if covariates is None else list(covariates),
        "spec1": spec1.to_dict(),
        "spec2": spec2.to_dict(),
    }


def bootstrap_t(
    data: PairData,
    spec1: ModelSpec,
    spec2: ModelSpec,
    covariates=None,
    cfg: BootstrapConfig | None = None,
    kind: AssocKind | str = AssocKind.PARTIAL,
    rng: RngStream | None = None,
) -> BootstrapDistribution:
    """Pairs-bootstrap distribution of the tau estimate.

    ``covariates`` selects columns of ``data.X`` (``None`` keeps all);
    ``kind="marginal"`` bootstraps the unadjusted estimate instead.  The
    full-sample fit runs first so that unusable inputs fail immediately.
    ``rng`` replaces the root stream ``RngStream(cfg.seed)``, e.g. to nest a
    bootstrap inside a simulation.
    """
    cfg = cfg or BootstrapConfig()
    kind = AssocKind(kind)
    data = data.select(covariates)
    root = RngStream(cfg.seed) if rng is None else rng
    est, start = _full_sample_fit(data, spec1, spec2, cfg.M, root.child(0), kind)
    values = _run(root.child(1), data, spec1, spec2, cfg, "t", start, kind)
    target = _target(data, spec1, spec2, covariates, f"t_{kind.value}")
    return _finish(values, cfg.B, target, est.t_hat)


def _moderation_values(data, spec1, spec2, cfg, root):
    part, sp = _full_sample_fit(data, spec1, spec2, cfg.M, root.child(0, 1), AssocKind.PARTIAL)
    marg, sm = _full_sample_fit(data, spec1, spec2, cfg.M, root.child(0, 2), AssocKind.MARGINAL)
    if abs(marg.t_hat) <= MODERATION_EPS:
        raise UndefinedModeration("marginal association of the full sample is numerically zero")
    estimate = (part.t_hat - marg.t_hat) / marg.t_hat * 100.0
    values = _run(root.child(1), data, spec1, spec2, cfg, "pct_change", (sp, sm), AssocKind.PARTIAL)
    return values, estimate


def bootstrap_moderation(
    data: PairData,
    spec1: ModelSpec,
    spec2: ModelSpec,
    covariates=None,
    cfg: BootstrapConfig | None = None,
    rng: RngStream | None = None,
) -> BootstrapDistribution:
    """Bootstrap distribution of the percentage change from marginal to
    partial association; both are computed on the same resample.

    A replicate whose marginal estimate is numerically zero is redrawn like a
    failed refit and counted in ``failures`` if it keeps failing.
    """
    cfg = cfg or BootstrapConfig()
    data = data.select(covariates)
    root = RngStream(cfg.seed) if rng is None else rng
    values, estimate = _moderation_values(data, spec1, spec2, cfg, root)
    target = _target(data, spec1, spec2, covariates, "pct_change")
    return _finish(values, cfg.B, target, estimate)


def bootstrap_moderation_difference(
    data_a: PairData,
    data_b: PairData,
    spec1: ModelSpec,
    spec2: ModelSpec,
    covariates=None,
    cfg: BootstrapConfig | None = None,
) -> BootstrapDistribution:
    """Difference in percentage change between two independent cohorts.

    Each cohort is bootstrapped separately (cohort ``k`` uses streams under
    ``(seed, k)``) and replicate ``b`` of the result is
    ``pct_a[b] - pct_b[b]``; a replicate failing in either cohort is dropped.
    """
    cfg = cfg or BootstrapConfig()
    data_a = data_a.select(covariates)
    data_b = data_b.select(covariates)
    va, ea = _moderation_values(data_a, spec1, spec2, cfg, RngStream(cfg.seed, (0,)))
    vb, eb = _moderation_values(data_b, spec1, spec2, cfg, RngStream(cfg.seed, (1,)))
    target = _target(data_a, spec1, spec2, covariates, "pct_change_difference")
    target["n_b"] = data_b.n
    return _finish(va - vb, cfg.B, target, ea - eb)
