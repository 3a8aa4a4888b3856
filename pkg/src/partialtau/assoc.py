"""Kendall-tau association between surrogate residuals.

The partial association of two outcomes given covariates is Kendall's tau
between their residuals; averaging over ``M`` surrogate draws removes most
of the simulation noise.  Without covariates the same construction reduces
to the classical (tie-zero) Kendall tau of the outcomes themselves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import LengthMismatch, ShapeMismatch, TooFewObservations
from .kendall import tau_numerator, tau_numerators_columns
from .models import Dataset, ModelSpec, fit
from .rng import RngStream, as_stream
from .surrogate import ResidualMatrix, residual_matrix

DEFAULT_M = 30
MODERATION_EPS = 1e-8


class AssocKind(str, Enum):
    MARGINAL = "marginal"
    PARTIAL = "partial"


@dataclass(frozen=True)
class AssocEstimate:
    t_hat: float
    M: int
    n: int
    kind: AssocKind
    per_column: np.ndarray = field(repr=False)
    specs: tuple = ()

    def to_dict(self) -> dict:
        return {
            "t_hat": self.t_hat,
            "M": self.M,
            "n": self.n,
            "kind": self.kind.value,
        }


@dataclass(frozen=True)
class ModerationResult:
    t_partial: AssocEstimate
    t_marginal: AssocEstimate
    delta: float
    pct_change: float | None

    @property
    def undefined(self) -> bool:
        return self.pct_change is None

    def to_dict(self) -> dict:
        return {
            "marginal": self.t_marginal.t_hat,
            "partial": self.t_partial.t_hat,
            "delta": self.delta,
            "pct_change": self.pct_change,
            "undefined": self.undefined,
        }


@dataclass(frozen=True)
class PairData:
    """Two outcome columns observed on the same rows, plus covariates."""

    y1: np.ndarray
    y2: np.ndarray
    X: np.ndarray | None = None

    def __post_init__(self):
        y1 = np.asarray(self.y1)
        y2 = np.asarray(self.y2)
        if y1.ndim != 1 or y1.shape != y2.shape:
            raise LengthMismatch(f"outcomes of shapes {y1.shape} and {y2.shape}")
        X = np.empty((len(y1), 0)) if self.X is None else np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.shape[0] != len(y1):
            raise LengthMismatch(f"{X.shape[0]} covariate rows for {len(y1)} outcomes")
        object.__setattr__(self, "y1", y1)
        object.__setattr__(self, "y2", y2)
        object.__setattr__(self, "X", X)

    @property
    def n(self) -> int:
        return len(self.y1)

    def take(self, idx) -> PairData:
        return PairData(self.y1[idx], self.y2[idx], self.X[idx])

    def select(self, covariates) -> PairData:
        """Keep only the listed covariate columns (``None`` keeps all)."""
        if covariates is None:
            return self
        return PairData(self.y1, self.y2, self.X[:, list(covariates)])


def kendall_tau(a, b) -> float:
    """Pair-sign sum over all ``n choose 2`` pairs; tied pairs count 0."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise LengthMismatch(f"vectors of shapes {a.shape} and {b.shape}")
    n = len(a)
    if n < 2:
        raise TooFewObservations("Kendall's tau needs at least two observations")
    return tau_numerator(a, b) / (n * (n - 1) // 2)


def _values(r) -> np.ndarray:
    return r.values if isinstance(r, ResidualMatrix) else np.asarray(r, dtype=float)


def t_measure(r1, r2, kind: AssocKind = AssocKind.PARTIAL, specs: tuple = ()) -> AssocEstimate:
    """Average of the column-wise Kendall taus of two residual matrices."""
    A, B = _values(r1), _values(r2)
    if A.ndim == 1:
        A = A[:, None]
    if B.ndim == 1:
        B = B[:, None]
    if A.shape != B.shape:
        raise ShapeMismatch(f"residual matrices of shapes {A.shape} and {B.shape}")
    n, M = A.shape
    if n < 2:
        raise TooFewObservations("Kendall's tau needs at least two observations")
    pairs = n * (n - 1) // 2
    per_column = tau_numerators_columns(A, B) / pairs
    t_hat = math.fsum(per_column.tolist()) / M
    return AssocEstimate(t_hat, M, n, AssocKind(kind), per_column, specs)


def _estimate(y1, y2, X, spec1, spec2, M, rng, kind, start=(None, None)):
    rng = as_stream(rng)
    d1 = Dataset(np.asarray(y1), X)
    d2 = Dataset(np.asarray(y2), X)
    m1 = fit(spec1, d1, start=start[0])
    m2 = fit(spec2, d2, start=start[1])
    r1 = residual_matrix(m1, d1, M, rng.child(1))
    r2 = residual_matrix(m2, d2, M, rng.child(2))
    return t_measure(r1, r2, kind, (spec1, spec2)), (m1, m2)


def partial_t(y1, y2, X, spec1: ModelSpec, spec2: ModelSpec, M: int = DEFAULT_M, rng: RngStream | int = 0) -> AssocEstimate:
    """Partial association of ``y1`` and ``y2`` after adjusting both for ``X``."""
    return _estimate(y1, y2, X, spec1, spec2, M, rng, AssocKind.PARTIAL)[0]


def marginal_t(y1, y2, spec1: ModelSpec, spec2: ModelSpec, M: int = DEFAULT_M, rng: RngStream | int = 0) -> AssocEstimate:
    """Association with intercept-only models, i.e. no covariate adjustment."""
    return _estimate(y1, y2, None, spec1, spec2, M, rng, AssocKind.MARGINAL)[0]


def pct_change(partial: float, marginal: float) -> float | None:
    if abs(marginal) <= MODERATION_EPS:
        return None
    return (partial - marginal) / marginal * 100.0


def moderation(partial: AssocEstimate, marginal: AssocEstimate) -> ModerationResult:
    delta = partial.t_hat - marginal.t_hat
    return ModerationResult(partial, marginal, delta, pct_change(partial.t_hat, marginal.t_hat))
