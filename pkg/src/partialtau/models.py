"""Regression models used for covariate adjustment.

Each model describes the conditional distribution of one outcome given the
covariates and is fitted by maximum likelihood.  Downstream code only needs
two things from a fitted model: the category probabilities of a discrete
outcome and the CDF interval ``(F(y-; x), F(y; x))`` of an observed value.

Parameterisations
-----------------
linear
    ``y = a + x'b + e``, ``e ~ N(0, s^2)``; ``s`` is the MLE (RSS / n).
binary
    ``P(Y = 1 | x) = G(a + x'b)`` with codes 0/1.
cumulative
    ``P(Y <= j | x) = G(a_j - x'b)``, ``a_1 < ... < a_{J-1}``.
adjacent
    ``log P(Y = j) / P(Y = j + 1) = a_j + x'b`` for ``j = 1..J-1``.
stereotype
    ``log P(Y = j) / P(Y = 1) = a_j + phi_j x'b`` for ``j = 2..J`` with
    ``phi_1 = 0`` and ``phi_J = 1`` pinned.

The flat parameter vectors accepted by :func:`loglik_at` follow the same
order as :attr:`FittedModel.params`:

* linear: ``[a, b_1..b_d, s]``
* binary: ``[a, b_1..b_d]``
* cumulative, adjacent: ``[a_1..a_{J-1}, b_1..b_d]``
* stereotype: ``[a_2..a_J, b_1..b_d, phi_2..phi_{J-1}]``
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import special

from .errors import (
    EmptyCategory,
    InvalidConfig,
    LengthMismatch,
    MissingValue,
    NonConvergence,
    NonFiniteLikelihood,
    OutOfSupport,
    RankDeficientDesign,
    SeparationDetected,
    ShapeMismatch,
)

MAX_ITER = 100
REL_TOL = 1e-8
# score norm (per 1000 observations) required after the log-likelihood criterion
GRAD_TOL = 1e-8
# half-width of the linear-predictor range beyond which coefficients are
# treated as diverging
SEPARATION_BOUND = 30.0


class Family(str, Enum):
    LINEAR = "linear"
    BINARY = "binary"
    CUMULATIVE = "cumulative"
    ADJACENT = "adjacent"
    STEREOTYPE = "stereotype"


class Link(str, Enum):
    LOGIT = "logit"
    PROBIT = "probit"
    CLOGLOG = "cloglog"


class OutcomeKind(str, Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"
    ORDINAL = "ordinal"


# ---------------------------------------------------------------------------
# link functions


def link_cdf(link: Link, z):
    if link is Link.LOGIT:
        return special.expit(z)
    if link is Link.PROBIT:
        return special.ndtr(z)
    return -np.expm1(-np.exp(z))


def link_sf(link: Link, z):
    """Upper tail ``1 - G(z)`` computed without cancellation."""
    if link is Link.LOGIT:
        return special.expit(-z)
    if link is Link.PROBIT:
        return special.ndtr(-z)
    return np.exp(-np.exp(z))


def link_pdf(link: Link, z):
    if link is Link.LOGIT:
        p = special.expit(z)
        return p * (1.0 - p)
    if link is Link.PROBIT:
        return np.exp(-0.5 * np.square(z)) / math.sqrt(2.0 * math.pi)
    return np.exp(z - np.exp(z))


def link_ppf(link: Link, p):
    if link is Link.LOGIT:
        return special.logit(p)
    if link is Link.PROBIT:
        return special.ndtri(p)
    return np.log(-np.log1p(-np.asarray(p, dtype=float)))


def link_mean(link: Link) -> float:
    """Mean of the latent error distribution whose CDF is the link."""
    if link is Link.CLOGLOG:
        return -float(np.euler_gamma)
    return 0.0


# ---------------------------------------------------------------------------
# specs and data


@dataclass(frozen=True)
class ModelSpec:
    family: Family
    link: Link = Link.LOGIT
    n_categories: int | None = None

    def __post_init__(self):
        fam = Family(self.family)
        object.__setattr__(self, "family", fam)
        link = Link(self.link)
        if fam in (Family.ADJACENT, Family.STEREOTYPE):
            link = Link.LOGIT
        object.__setattr__(self, "link", link)
        J = self.n_categories
        if fam is Family.LINEAR:
            if J is not None:
                raise InvalidConfig("linear models take no category count")
        elif fam is Family.BINARY:
            if J not in (None, 2):
                raise InvalidConfig("binary models have exactly 2 categories")
            object.__setattr__(self, "n_categories", 2)
        else:
            if J is None or int(J) < 3:
                raise InvalidConfig(f"{fam.value} models need at least 3 categories")
            object.__setattr__(self, "n_categories", int(J))

    @classmethod
    def linear(cls) -> ModelSpec:
        return cls(Family.LINEAR)

    @classmethod
    def binary(cls, link: Link | str = Link.LOGIT) -> ModelSpec:
        return cls(Family.BINARY, Link(link))

    @classmethod
    def cumulative(cls, n_categories: int, link: Link | str = Link.LOGIT) -> ModelSpec:
        return cls(Family.CUMULATIVE, Link(link), n_categories)

    @classmethod
    def adjacent(cls, n_categories: int) -> ModelSpec:
        return cls(Family.ADJACENT, Link.LOGIT, n_categories)

    @classmethod
    def stereotype(cls, n_categories: int) -> ModelSpec:
        return cls(Family.STEREOTYPE, Link.LOGIT, n_categories)

    @property
    def kind(self) -> OutcomeKind:
        if self.family is Family.LINEAR:
            return OutcomeKind.CONTINUOUS
        if self.family is Family.BINARY:
            return OutcomeKind.BINARY
        return OutcomeKind.ORDINAL

    @property
    def is_discrete(self) -> bool:
        return self.family is not Family.LINEAR

    @property
    def code_offset(self) -> int:
        """Smallest outcome code: 0 for binary, 1 for ordinal."""
        return 0 if self.family is Family.BINARY else 1

    def with_categories(self, n_categories: int) -> ModelSpec:
        return ModelSpec(self.family, self.link, n_categories)

    def n_intercepts(self) -> int:
        if self.family in (Family.LINEAR, Family.BINARY):
            return 1
        return self.n_categories - 1

    def n_params(self, d: int) -> int:
        if self.family is Family.LINEAR:
            return d + 2
        if self.family is Family.STEREOTYPE:
            return (self.n_categories - 1) + d + (self.n_categories - 2)
        return self.n_intercepts() + d

    def to_dict(self) -> dict:
        out = {"family": self.family.value}
        if self.family in (Family.BINARY, Family.CUMULATIVE):
            out["link"] = self.link.value
        if self.family not in (Family.LINEAR, Family.BINARY):
            out["n_categories"] = self.n_categories
        return out


def _as_design(X, n: int | None = None) -> np.ndarray:
    if X is None:
        if n is None:
            raise ValueError("need n to build an empty design")
        return np.zeros((n, 0))
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X


@dataclass(frozen=True)
class Dataset:
    """One outcome column plus an ``n x d`` covariate matrix (``d`` may be 0)."""

    y: np.ndarray
    X: np.ndarray | None = None

    def __post_init__(self):
        y = np.asarray(self.y)
        if y.ndim != 1:
            raise ShapeMismatch("y must be one-dimensional")
        X = _as_design(self.X, len(y))
        if X.shape[0] != len(y):
            raise LengthMismatch(f"X has {X.shape[0]} rows but y has {len(y)}")
        if y.dtype.kind == "f" and np.isnan(y).any():
            raise MissingValue("y contains missing values")
        if np.isnan(X).any():
            raise MissingValue("X contains missing values")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def take(self, idx) -> Dataset:
        return Dataset(self.y[idx], self.X[idx])


def encode_ordinal(values, levels=None) -> tuple[np.ndarray, list]:
    """Map labels to codes ``1..J`` by sort order (or by the given ``levels``).

    Raises ``EmptyCategory`` when a declared level never occurs.
    """
    values = np.asarray(values)
    if levels is None:
        levels = sorted(set(values.tolist()))
    levels = list(levels)
    lookup = {lab: i + 1 for i, lab in enumerate(levels)}
    try:
        codes = np.array([lookup[v] for v in values.tolist()], dtype=np.int64)
    except KeyError as exc:
        raise OutOfSupport(f"value {exc.args[0]!r} is not a declared level") from None
    counts = np.bincount(codes, minlength=len(levels) + 1)[1:]
    missing = [lab for lab, c in zip(levels, counts) if c == 0]
    if missing:
        raise EmptyCategory(f"declared categories never observed: {missing}")
    return codes, levels


def _check_discrete_codes(spec: ModelSpec, y) -> np.ndarray:
    """Return 0-based column indices of ``y``; every category must be observed."""
    y = np.asarray(y)
    if y.dtype.kind == "f":
        if not np.all(np.equal(np.mod(y, 1), 0)):
            raise OutOfSupport("discrete outcome codes must be integers")
    idx = y.astype(np.int64) - spec.code_offset
    K = spec.n_categories
    if idx.size and (idx.min() < 0 or idx.max() >= K):
        lo = spec.code_offset
        raise OutOfSupport(f"outcome codes must lie in {lo}..{lo + K - 1}")
    counts = np.bincount(idx, minlength=K)
    if np.any(counts == 0):
        empty = (np.flatnonzero(counts == 0) + spec.code_offset).tolist()
        raise EmptyCategory(f"categories with no observations: {empty}")
    return idx


# ---------------------------------------------------------------------------
# discrete families: probabilities and their Jacobian in the flat parameters


class _Discrete:
    def __init__(self, spec: ModelSpec, d: int):
        self.spec = spec
        self.d = d
        self.K = spec.n_categories
        self.q = spec.n_params(d)

    def valid(self, theta) -> bool:
        return bool(np.all(np.isfinite(theta)))

    def eta(self, theta, X):
        return X @ self.beta_of(theta)


class _Binary(_Discrete):
    def beta_of(self, theta):
        return theta[1:]

    def split(self, theta):
        return theta[:1], theta[1:], None

    def start(self, idx, X):
        ybar = idx.mean()
        return np.concatenate([[link_ppf(self.spec.link, ybar)], np.zeros(self.d)])

    def probs(self, theta, X):
        z = theta[0] + X @ theta[1:]
        link = self.spec.link
        return np.column_stack([link_sf(link, z), link_cdf(link, z)])

    def probs_jac(self, theta, X):
        z = theta[0] + X @ theta[1:]
        link = self.spec.link
        P = np.column_stack([link_sf(link, z), link_cdf(link, z)])
        g = link_pdf(link, z)
        d1 = g[:, None] * np.column_stack([np.ones_like(z), X])
        dP = np.stack([-d1, d1], axis=1)
        return P, dP


class _Cumulative(_Discrete):
    def beta_of(self, theta):
        return theta[self.K - 1:]

    def split(self, theta):
        return theta[: self.K - 1], theta[self.K - 1:], None

    def valid(self, theta):
        return super().valid(theta) and bool(np.all(np.diff(theta[: self.K - 1]) > 0))

    def start(self, idx, X):
        freq = np.bincount(idx, minlength=self.K) / len(idx)
        cum = np.cumsum(freq)[:-1]
        return np.concatenate([link_ppf(self.spec.link, cum), np.zeros(self.d)])

    def _cum(self, theta, X):
        alpha = theta[: self.K - 1]
        z = alpha[None, :] - (X @ theta[self.K - 1:])[:, None]
        link = self.spec.link
        gam = link_cdf(link, z)
        n = z.shape[0]
        P = np.empty((n, self.K))
        P[:, 0] = gam[:, 0]
        P[:, 1:-1] = np.diff(gam, axis=1)
        P[:, -1] = link_sf(link, z[:, -1])
        return z, P

    def probs(self, theta, X):
        return self._cum(theta, X)[1]

    def probs_jac(self, theta, X):
        z, P = self._cum(theta, X)
        n, K = P.shape
        g = link_pdf(self.spec.link, z)
        dgam = np.zeros((n, K + 1, self.q))
        j = np.arange(K - 1)
        dgam[:, j + 1, j] = g
        dgam[:, 1:K, K - 1:] = -g[:, :, None] * X[:, None, :]
        return P, np.diff(dgam, axis=1)


class _Softmax(_Discrete):
    """Families whose category log-odds are smooth in the parameters."""

    def probs(self, theta, X):
        return _softmax(self.utilities(theta, X))

    def probs_jac(self, theta, X):
        U, dU = self.utilities_jac(theta, X)
        P = _softmax(U)
        mean_dU = np.einsum("nk,nkq->nq", P, dU)
        dP = P[:, :, None] * (dU - mean_dU[:, None, :])
        return P, dP


def _softmax(U):
    U = U - U.max(axis=1, keepdims=True)
    E = np.exp(U)
    return E / E.sum(axis=1, keepdims=True)


class _Adjacent(_Softmax):
    def __init__(self, spec, d):
        super().__init__(spec, d)
        K = self.K
        # u_j = sum_{k >= j} a_k + (J - j) * eta, with u_J = 0
        self.tri = np.triu(np.ones((K, K - 1)))
        self.mult = np.arange(K - 1, -1, -1, dtype=float)

    def beta_of(self, theta):
        return theta[self.K - 1:]

    def split(self, theta):
        return theta[: self.K - 1], theta[self.K - 1:], None

    def start(self, idx, X):
        freq = np.bincount(idx, minlength=self.K).astype(float)
        return np.concatenate([np.log(freq[:-1] / freq[1:]), np.zeros(self.d)])

    def utilities(self, theta, X):
        alpha = theta[: self.K - 1]
        eta = X @ theta[self.K - 1:]
        return (self.tri @ alpha)[None, :] + eta[:, None] * self.mult[None, :]

    def utilities_jac(self, theta, X):
        n = X.shape[0]
        U = self.utilities(theta, X)
        dU = np.empty((n, self.K, self.q))
        dU[:, :, : self.K - 1] = self.tri[None, :, :]
        dU[:, :, self.K - 1:] = self.mult[None, :, None] * X[:, None, :]
        return U, dU


class _Stereotype(_Softmax):
    def beta_of(self, theta):
        K, d = self.K, self.d
        return theta[K - 1: K - 1 + d]

    def phi_full(self, theta):
        K, d = self.K, self.d
        return np.concatenate([[0.0], theta[K - 1 + d:], [1.0]])

    def split(self, theta):
        K = self.K
        return theta[: K - 1], self.beta_of(theta), self.phi_full(theta)

    def start(self, idx, X):
        freq = np.bincount(idx, minlength=self.K).astype(float)
        phi = np.arange(1, self.K - 1) / (self.K - 1)
        return np.concatenate([np.log(freq[1:] / freq[0]), np.zeros(self.d), phi])

    def utilities(self, theta, X):
        alpha = np.concatenate([[0.0], theta[: self.K - 1]])
        eta = X @ self.beta_of(theta)
        return alpha[None, :] + eta[:, None] * self.phi_full(theta)[None, :]

    def utilities_jac(self, theta, X):
        K, d = self.K, self.d
        n = X.shape[0]
        eta = X @ self.beta_of(theta)
        phi = self.phi_full(theta)
        U = np.concatenate([[0.0], theta[: K - 1]])[None, :] + eta[:, None] * phi[None, :]
        dU = np.zeros((n, K, self.q))
        j = np.arange(1, K)
        dU[:, j, j - 1] = 1.0
        dU[:, :, K - 1: K - 1 + d] = phi[None, :, None] * X[:, None, :]
        jf = np.arange(1, K - 1)
        dU[:, jf, K - 1 + d + jf - 1] = eta[:, None]
        return U, dU


_FAMILY_IMPL = {
    Family.BINARY: _Binary,
    Family.CUMULATIVE: _Cumulative,
    Family.ADJACENT: _Adjacent,
    Family.STEREOTYPE: _Stereotype,
}


def _impl(spec: ModelSpec, d: int) -> _Discrete:
    return _FAMILY_IMPL[spec.family](spec, d)


# ---------------------------------------------------------------------------
# fitted model


@dataclass(frozen=True)
class FittedModel:
    spec: ModelSpec
    beta: np.ndarray
    intercepts: np.ndarray
    sigma: float | None = None
    phi: np.ndarray | None = None
    loglik: float = float("nan")
    converged: bool = True
    n_iter: int = 0
    n_obs: int = 0
    _impl: _Discrete | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float))
        object.__setattr__(self, "intercepts", np.asarray(self.intercepts, dtype=float))
        if self.phi is not None:
            object.__setattr__(self, "phi", np.asarray(self.phi, dtype=float))
        if self.spec.is_discrete and self._impl is None:
            object.__setattr__(self, "_impl", _impl(self.spec, self.d))

    @property
    def d(self) -> int:
        return len(self.beta)

    @property
    def params(self) -> np.ndarray:
        if self.spec.family is Family.LINEAR:
            return np.concatenate([self.intercepts, self.beta, [self.sigma]])
        if self.spec.family is Family.STEREOTYPE:
            return np.concatenate([self.intercepts, self.beta, self.phi[1:-1]])
        return np.concatenate([self.intercepts, self.beta])

    @classmethod
    def from_params(cls, spec: ModelSpec, params, d: int, **meta) -> FittedModel:
        theta = np.asarray(params, dtype=float)
        if len(theta) != spec.n_params(d):
            raise ShapeMismatch(
                f"{spec.family.value} with d={d} needs {spec.n_params(d)} parameters, got {len(theta)}"
            )
        if spec.family is Family.LINEAR:
            if not theta[-1] > 0:
                raise InvalidConfig("sigma must be positive")
            return cls(spec, theta[1:-1], theta[:1], sigma=float(theta[-1]), **meta)
        impl = _impl(spec, d)
        a, b, phi = impl.split(theta)
        return cls(spec, b.copy(), a.copy(), phi=None if phi is None else phi.copy(), _impl=impl, **meta)

    def linear_predictor(self, X) -> np.ndarray:
        X = _as_design(X)
        return X @ self.beta

    def mean(self, X) -> np.ndarray:
        """Conditional mean of a continuous outcome."""
        if self.spec.family is not Family.LINEAR:
            raise TypeError("mean() is defined for linear models only")
        return self.intercepts[0] + self.linear_predictor(X)

    def probs(self, X) -> np.ndarray:
        if not self.spec.is_discrete:
            raise TypeError("category probabilities need a discrete family")
        X = _as_design(X)
        if X.shape[1] != self.d:
            raise ShapeMismatch(f"expected {self.d} covariates, got {X.shape[1]}")
        return self._impl.probs(self.params, X)

    def cdf_interval(self, y, X) -> tuple[np.ndarray, np.ndarray]:
        y = np.asarray(y)
        X = _as_design(X, len(y))
        if self.spec.family is Family.LINEAR:
            z = (y.astype(float) - self.mean(X)) / self.sigma
            F = special.ndtr(z)
            return F, F.copy()
        idx = y.astype(np.int64) - self.spec.code_offset
        if np.any(idx < 0) or np.any(idx >= self.spec.n_categories) or np.any(y != np.round(y)):
            raise OutOfSupport(
                f"outcome outside {self.spec.code_offset}..{self.spec.code_offset + self.spec.n_categories - 1}"
            )
        C = np.cumsum(self.probs(X), axis=1)
        rows = np.arange(len(idx))
        hi = C[rows, idx]
        lo = np.where(idx > 0, C[rows, np.maximum(idx - 1, 0)], 0.0)
        return lo, hi

    def sample(self, X, gen: np.random.Generator) -> np.ndarray:
        """Draw outcomes from the model at covariate rows ``X``."""
        X = _as_design(X)
        n = X.shape[0]
        if self.spec.family is Family.LINEAR:
            return self.mean(X) + self.sigma * gen.standard_normal(n)
        C = np.cumsum(self.probs(X), axis=1)
        u = gen.random(n)
        return (u[:, None] >= C[:, :-1]).sum(axis=1) + self.spec.code_offset

    def to_dict(self) -> dict:
        out = {
            "spec": self.spec.to_dict(),
            "intercepts": self.intercepts.tolist(),
            "beta": self.beta.tolist(),
            "loglik": self.loglik,
            "converged": self.converged,
            "n_iter": self.n_iter,
            "n_obs": self.n_obs,
        }
        if self.sigma is not None:
            out["sigma"] = self.sigma
        if self.phi is not None:
            out["phi"] = self.phi.tolist()
        return out


def cdf_interval(model: FittedModel, y, x) -> tuple:
    """``(F(y-; x), F(y; x))``; scalar in, scalar out."""
    y_arr = np.atleast_1d(y)
    x_arr = np.asarray(x, dtype=float)
    if np.ndim(y) == 0:
        x_arr = x_arr.reshape(1, -1)
    lo, hi = model.cdf_interval(y_arr, x_arr)
    if np.ndim(y) == 0:
        return float(lo[0]), float(hi[0])
    return lo, hi


def category_probs(model: FittedModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim <= 1:
        return model.probs(x.reshape(1, -1))[0]
    return model.probs(x)


# ---------------------------------------------------------------------------
# likelihood


def loglik_at(spec: ModelSpec, params, data: Dataset) -> float:
    theta = np.asarray(params, dtype=float)
    if len(theta) != spec.n_params(data.d):
        raise ShapeMismatch(f"expected {spec.n_params(data.d)} parameters, got {len(theta)}")
    if spec.family is Family.LINEAR:
        sigma = theta[-1]
        if not sigma > 0:
            raise InvalidConfig("sigma must be positive")
        resid = data.y.astype(float) - theta[0] - data.X @ theta[1:-1]
        return float(_gauss_loglik(resid, sigma))
    idx = data.y.astype(np.int64) - spec.code_offset
    if np.any(idx < 0) or np.any(idx >= spec.n_categories):
        raise OutOfSupport("outcome outside the model support")
    P = _impl(spec, data.d).probs(theta, data.X)
    py = P[np.arange(data.n), idx]
    if np.any(py <= 0) or not np.all(np.isfinite(py)):
        raise NonFiniteLikelihood("an observed outcome has zero probability under these parameters")
    return float(np.sum(np.log(py)))


def _gauss_loglik(resid, sigma):
    n = len(resid)
    return -0.5 * n * math.log(2 * math.pi) - n * math.log(sigma) - 0.5 * np.dot(resid, resid) / sigma**2


def score_vector(spec: ModelSpec, params, data: Dataset) -> np.ndarray:
    """Analytic gradient of :func:`loglik_at` in the flat parameters."""
    theta = np.asarray(params, dtype=float)
    if spec.family is Family.LINEAR:
        sigma = theta[-1]
        D = np.column_stack([np.ones(data.n), data.X])
        resid = data.y.astype(float) - D @ theta[:-1]
        g_b = D.T @ resid / sigma**2
        g_s = -data.n / sigma + resid @ resid / sigma**3
        return np.concatenate([g_b, [g_s]])
    idx = data.y.astype(np.int64) - spec.code_offset
    P, dP = _impl(spec, data.d).probs_jac(theta, data.X)
    rows = np.arange(data.n)
    return (dP[rows, idx] / P[rows, idx][:, None]).sum(axis=0)


# ---------------------------------------------------------------------------
# fitting


def _check_rank(X: np.ndarray):
    D = np.column_stack([np.ones(X.shape[0]), X])
    if np.linalg.matrix_rank(D) < D.shape[1]:
        raise RankDeficientDesign("covariate matrix (with intercept) is rank deficient")


def fit(spec: ModelSpec, data: Dataset, start=None) -> FittedModel:
    """Maximum-likelihood fit of ``spec`` to ``data``.

    ``start`` optionally supplies a flat parameter vector (or a previous
    :class:`FittedModel`) to warm-start the iterations; bootstrap refits use
    the full-sample estimate.
    """
    n, d = data.n, data.d
    if n <= spec.n_params(d) - (1 if spec.family is Family.LINEAR else 0):
        raise RankDeficientDesign(f"n={n} is too small for {spec.n_params(d)} parameters")
    if spec.family is Family.LINEAR:
        return _fit_linear(spec, data)
    idx = _check_discrete_codes(spec, data.y)
    _check_rank(data.X)
    impl = _impl(spec, d)
    if isinstance(start, FittedModel):
        start = start.params
    if start is not None:
        theta0 = np.asarray(start, dtype=float).copy()
        if len(theta0) != impl.q or not impl.valid(theta0):
            theta0 = impl.start(idx, data.X)
    else:
        theta0 = impl.start(idx, data.X)

    n_iter = 0
    if spec.family is Family.STEREOTYPE and start is None and d > 0:
        # phi is unidentified at beta = 0, so settle (alpha, beta) first
        free = np.arange(spec.n_categories - 1 + d)
        theta0, _, n_iter = _fisher_scoring(impl, theta0, data.X, idx, free=free, strict=False)
    theta, ll, it = _fisher_scoring(impl, theta0, data.X, idx, n_prior=n_iter)
    model = FittedModel.from_params(spec, theta, d, loglik=ll, converged=True, n_iter=it, n_obs=n)
    if spec.family is Family.STEREOTYPE and np.any(np.diff(model.phi) < 0):
        warnings.warn(f"stereotype scores are not monotone: {np.round(model.phi, 4).tolist()}", stacklevel=2)
    return model


def _fit_linear(spec: ModelSpec, data: Dataset) -> FittedModel:
    y = data.y.astype(float)
    D = np.column_stack([np.ones(data.n), data.X])
    coef, _, rank, _ = np.linalg.lstsq(D, y, rcond=None)
    if rank < D.shape[1]:
        raise RankDeficientDesign("covariate matrix (with intercept) is rank deficient")
    resid = y - D @ coef
    sigma = math.sqrt(float(resid @ resid) / data.n)
    if not sigma > 0:
        raise RankDeficientDesign("outcome is fitted exactly; residual scale is zero")
    ll = float(_gauss_loglik(resid, sigma))
    return FittedModel(spec, coef[1:], coef[:1], sigma=sigma, loglik=ll, converged=True, n_iter=1, n_obs=data.n)


def _loglik_from(P, rows, idx) -> float:
    py = P[rows, idx]
    if np.any(py <= 0) or not np.all(np.isfinite(py)):
        return -np.inf
    return float(np.sum(np.log(py)))


def _solve(info, score):
    try:
        step = np.linalg.solve(info, score)
        if np.all(np.isfinite(step)):
            return step
    except np.linalg.LinAlgError:
        pass
    return np.linalg.lstsq(info, score, rcond=None)[0]


def _fisher_scoring(impl: _Discrete, theta, X, idx, free=None, strict=True, n_prior=0):
    """Fisher scoring with step halving.

    Converged once the relative log-likelihood change drops below
    ``REL_TOL``; iterations then continue until the score norm is below
    ``GRAD_TOL`` so that fitted residuals are reproducible.  With
    ``strict=False`` hitting the iteration cap returns the current iterate
    instead of raising.
    """
    theta = theta.copy()
    if free is None:
        free = np.arange(len(theta))
    rows = np.arange(len(idx))
    P, dP = impl.probs_jac(theta, X)
    ll = _loglik_from(P, rows, idx)
    if not np.isfinite(ll):
        raise NonConvergence("starting values give a zero-probability observation")
    ll_converged = False
    n_steps = 0
    while True:
        dPf = dP[:, :, free]
        score = (dPf[rows, idx] / P[rows, idx][:, None]).sum(axis=0)
        if ll_converged and np.linalg.norm(score) < GRAD_TOL * max(1.0, len(idx) / 1000):
            return theta, ll, n_prior + n_steps
        if n_steps == MAX_ITER:
            if ll_converged or not strict:
                return theta, ll, n_prior + n_steps
            raise NonConvergence(f"no convergence within {MAX_ITER} iterations")
        A = (dPf / np.sqrt(P)[:, :, None]).reshape(-1, len(free))
        step = _solve(A.T @ A, score)
        t = 1.0
        while True:
            cand = theta.copy()
            cand[free] += t * step
            if impl.valid(cand):
                P_new, dP_new = impl.probs_jac(cand, X)
                ll_new = _loglik_from(P_new, rows, idx)
                if ll_new >= ll - 1e-12 * max(1.0, abs(ll)):
                    break
            t *= 0.5
            if t < 1e-12:
                # no ascent direction left: optimum up to rounding
                if ll_converged or not strict:
                    return theta, ll, n_prior + n_steps
                raise NonConvergence("line search failed before convergence")
        n_steps += 1
        theta, ll_old, ll, P, dP = cand, ll, ll_new, P_new, dP_new
        eta = impl.eta(theta, X)
        if eta.size and np.ptp(eta) > 2 * SEPARATION_BOUND:
            raise SeparationDetected(
                "coefficients diverge (linear predictor range exceeds "
                f"{2 * SEPARATION_BOUND:g}); the MLE does not exist for these data"
            )
        ll_converged = ll_converged or abs(ll - ll_old) <= REL_TOL * abs(ll_old)
