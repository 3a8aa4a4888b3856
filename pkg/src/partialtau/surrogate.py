"""Surrogate residuals on a common (-1/2, 1/2) scale.

For an observed outcome ``y`` the surrogate ``S`` is drawn uniformly on
``[F(y-; x), F(y; x))``; for a continuous outcome the interval collapses and
``S = F(y; x)``.  Under a correctly specified model ``S | x ~ U(0, 1)``, so
the residual is ``R = S - 1/2`` and needs no per-observation expectation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from .errors import DomainError, EmptyData, InvalidConfig
from .models import Dataset, Family, FittedModel, Link, link_cdf, link_mean, link_ppf
from .rng import RngStream, as_stream

_HALF_OPEN = np.nextafter(0.5, 0.0)


@dataclass(frozen=True)
class ResidualMatrix:
    values: np.ndarray
    seed_lineage: str = ""

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def M(self) -> int:
        return self.values.shape[1]

    def column(self, m: int) -> np.ndarray:
        return self.values[:, m]


def _clip(r):
    return np.clip(r, -_HALF_OPEN, _HALF_OPEN)


def surrogate_draw(model: FittedModel, y, x, rng: RngStream | int) -> float:
    """One draw of ``S`` for a single observation."""
    lo, hi = model.cdf_interval(np.atleast_1d(y), np.asarray(x, dtype=float).reshape(1, -1))
    lo, hi = float(lo[0]), float(hi[0])
    if lo == hi:
        return hi
    u = as_stream(rng).generator().random()
    return lo + u * (hi - lo)


def residual(model: FittedModel, y, x, rng: RngStream | int) -> float:
    return float(_clip(surrogate_draw(model, y, x, rng) - 0.5))


def residual_matrix(model: FittedModel, data: Dataset, M: int, rng: RngStream | int) -> ResidualMatrix:
    """``n x M`` residuals; column ``m``, row ``i`` is the ``(m * n + i)``-th
    draw of ``rng``'s stream, so any column is reproducible on its own and a
    smaller ``M`` yields a prefix of the columns.
    """
    if M < 1:
        raise InvalidConfig("M must be at least 1")
    rng = as_stream(rng)
    lo, hi = model.cdf_interval(data.y, data.X)
    if model.spec.family is Family.LINEAR:
        col = _clip(hi - 0.5)
        return ResidualMatrix(np.repeat(col[:, None], M, axis=1), seed_lineage="deterministic")
    U = rng.generator().random((M, data.n)).T
    r = (lo - 0.5)[:, None] + U * (hi - lo)[:, None]
    return ResidualMatrix(_clip(r), seed_lineage=rng.lineage)


def normalize(r):
    """``h(r) = Phi^{-1}(r + 1/2)``, the standard-normal scale used for plots."""
    r = np.asarray(r, dtype=float)
    if np.any(np.abs(r) >= 0.5) or np.any(np.isnan(r)):
        raise DomainError("residuals must lie strictly inside (-1/2, 1/2)")
    # odd in r by construction, so h(-r) == -h(r) exactly
    out = np.sqrt(2.0) * special.erfinv(2.0 * r)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# latent-variable (truncation) residuals for cumulative link models


def lz_residual_matrix(model: FittedModel, data: Dataset, M: int, rng: RngStream | int) -> ResidualMatrix:
    """Latent-truncation residuals for a cumulative link model.

    The latent error is drawn from the link distribution truncated to
    ``(a_{y-1} - x'b, a_y - x'b]`` by inverse-CDF sampling and centred by the
    mean of the link distribution.
    """
    if model.spec.family is not Family.CUMULATIVE:
        raise TypeError("latent residuals need a cumulative link model")
    rng = as_stream(rng)
    lo, hi = model.cdf_interval(data.y, data.X)
    U = rng.generator().random((M, data.n)).T
    p = lo[:, None] + U * (hi - lo)[:, None]
    link = model.spec.link
    # p can round to exactly 0 or 1 only with probability ~2^-53
    p = np.clip(p, np.finfo(float).tiny, _HALF_OPEN + 0.5)
    return ResidualMatrix(link_ppf(link, p) - link_mean(link), seed_lineage=rng.lineage)


def lz_equivalence_stat(
    model: FittedModel,
    data: Dataset,
    rng: RngStream | int,
    transform_link: Link | str | None = None,
) -> float:
    """Two-sample KS statistic between surrogate residuals and transformed
    latent residuals ``G(R_LZ) - 1/2`` on the same data.

    ``transform_link`` overrides the link ``G`` used in the transformation
    (the latent draws always follow the fitted link); a wrong link makes the
    two samples differ.
    """
    if data.n == 0:
        raise EmptyData("no observations")
    rng = as_stream(rng)
    link = model.spec.link if transform_link is None else Link(transform_link)
    r = residual_matrix(model, data, 1, rng.child(0)).column(0)
    lz = lz_residual_matrix(model, data, 1, rng.child(1)).column(0)
    transformed = link_cdf(link, lz + link_mean(model.spec.link)) - 0.5
    return float(stats.ks_2samp(r, transformed).statistic)


def ks_critical_value(n1: int, n2: int, alpha: float = 0.01) -> float:
    """Asymptotic two-sample KS critical value at level ``alpha``."""
    c = np.sqrt(-0.5 * np.log(alpha / 2.0))
    return float(c * np.sqrt((n1 + n2) / (n1 * n2)))
