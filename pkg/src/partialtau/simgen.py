"""Synthetic data generators, regression-coefficient baselines and the
power-study harness.

Two data-generating processes are provided.  The wellbeing process draws
categorical risk factors independently, an ordinal anxiety score from an
adjacent-category logit model and a continuous wellbeing score from a linear
model on anxiety dummies plus the risk factors.  The power process draws a
five-level ordinal ``Y1`` from an adjacent-category model on two covariates
and a continuous ``Y2`` whose category effects ``eta`` follow a linear,
quadratic or exponential profile in ``lam``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum

import numpy as np
from scipy import stats

from .assoc import PairData
from .errors import InvalidConfig, PartialTauError
from .inference import BootstrapConfig, bootstrap_t, p_value_simple
from .models import Dataset, FittedModel, ModelSpec, fit
from .rng import RngStream, as_stream

J_ANXIETY = 5


# ---------------------------------------------------------------------------
# wellbeing scenario


@dataclass(frozen=True)
class CovariateDist:
    """A discrete covariate taking ``values`` with probabilities ``probs``."""

    name: str
    values: tuple
    probs: tuple

    def __post_init__(self):
        if len(self.values) != len(self.probs) or not math.isclose(sum(self.probs), 1.0, abs_tol=1e-9):
            raise InvalidConfig(f"covariate {self.name!r}: probabilities must match values and sum to 1")

    @property
    def mean(self) -> float:
        return float(np.dot(self.values, self.probs))

    @property
    def sd(self) -> float:
        v = np.asarray(self.values, dtype=float)
        return float(math.sqrt(np.dot((v - self.mean) ** 2, self.probs)))


# risk factors of a first-year student cohort: Likert-type concerns on 1..5,
# age in years and two indicators
DEFAULT_COVARIATES = (
    CovariateDist("financial_strain", (1, 2, 3, 4, 5), (0.27, 0.36, 0.21, 0.12, 0.04)),
    CovariateDist("healthiness", (1, 2, 3, 4, 5), (0.01, 0.07, 0.27, 0.52, 0.13)),
    CovariateDist("loneliness", (1, 2, 3, 4, 5), (0.28, 0.37, 0.21, 0.11, 0.03)),
    CovariateDist("age", (17, 18, 19, 20, 22, 25, 30), (0.08, 0.52, 0.22, 0.08, 0.05, 0.03, 0.02)),
    CovariateDist("female", (0, 1), (0.35, 0.65)),
    CovariateDist("student_hall", (0, 1), (0.45, 0.55)),
)


@dataclass(frozen=True)
class AnxietyModel:
    """Adjacent-category logit ``log P(j)/P(j+1) = alpha_j + x'beta``."""

    alpha: tuple = (0.0, 0.0, 0.0, 0.0)
    beta: tuple = (0.0,) * 6


@dataclass(frozen=True)
class WellbeingModel:
    """Linear model for wellbeing given anxiety dummies and risk factors."""

    intercept: float = 70.0
    gamma: tuple = (0.0,) * 6
    sigma: float = 15.0


DEFAULT_BETA_A = (-2.180, -7.341, -15.526, -23.466)


@dataclass(frozen=True)
class WellbeingScenario:
    n: int = 1209
    beta_A: tuple = DEFAULT_BETA_A
    covariate_gen: tuple = DEFAULT_COVARIATES
    anxiety_model: AnxietyModel = field(default_factory=AnxietyModel)
    wellbeing_model: WellbeingModel = field(default_factory=WellbeingModel)
    seed: int = 0

    def __post_init__(self):
        d = len(self.covariate_gen)
        if len(self.beta_A) != J_ANXIETY - 1:
            raise InvalidConfig("beta_A needs one coefficient per anxiety level 2..5")
        if len(self.anxiety_model.alpha) != J_ANXIETY - 1:
            raise InvalidConfig("anxiety_model.alpha needs four intercepts")
        if len(self.anxiety_model.beta) != d or len(self.wellbeing_model.gamma) != d:
            raise InvalidConfig(f"covariate slopes must have length {d}")
        if not self.wellbeing_model.sigma > 0 or self.n < 1:
            raise InvalidConfig("sigma and n must be positive")

    @property
    def covariate_names(self) -> list[str]:
        return [c.name for c in self.covariate_gen]

    def anxiety_fitted(self) -> FittedModel:
        params = list(self.anxiety_model.alpha) + list(self.anxiety_model.beta)
        return FittedModel.from_params(ModelSpec.adjacent(J_ANXIETY), params, len(self.covariate_gen))

    def with_beta(self, beta_A) -> WellbeingScenario:
        return replace(self, beta_A=tuple(float(b) for b in beta_A))

    def scaled(self, factor: float) -> WellbeingScenario:
        return self.with_beta(np.asarray(self.beta_A) * factor)


def _default_wellbeing() -> WellbeingScenario:
    # Calibrated by simulation: anxiety margins close to
    # (0.06, 0.19, 0.34, 0.32, 0.09); strain, healthiness, loneliness and
    # gender affect both outcomes, age only wellbeing.
    return WellbeingScenario(
        anxiety_model=AnxietyModel(
            alpha=(-1.087, -0.233, 0.731, 2.335),
            beta=(-0.36, 0.36, -0.42, 0.0, -0.24, 0.0),
        ),
        wellbeing_model=WellbeingModel(
            intercept=70.0,
            gamma=(-2.4, 4.8, -4.8, 1.8, -1.2, 1.2),
            sigma=12.0,
        ),
    )


DEFAULT_WELLBEING = _default_wellbeing()

# the four partial-relationship settings used for the partial regression plots
VISUAL_SETTINGS = {
    "a": DEFAULT_BETA_A,
    "b": (-2.0, -7.0, -12.0, -17.0),
    "c": (-2.0, -3.0, -10.0, -30.0),
    "d": (-2.0, -3.0, 10.0, -30.0),
}


def _draw_covariates(covs, n, rng: RngStream) -> np.ndarray:
    cols = []
    for k, c in enumerate(covs):
        gen = rng.child(k).generator()
        cols.append(gen.choice(np.asarray(c.values, dtype=float), size=n, p=np.asarray(c.probs)))
    return np.column_stack(cols) if cols else np.empty((n, 0))


def gen_wellbeing(sc: WellbeingScenario = DEFAULT_WELLBEING, rng: RngStream | int | None = None) -> PairData:
    """Synthetic ``(Y_W, Y_A, X)``: ``y1`` is wellbeing (continuous), ``y2``
    anxiety on 1..5.  ``rng`` defaults to ``sc.seed``."""
    rng = as_stream(sc.seed if rng is None else rng)
    n = sc.n
    X = _draw_covariates(sc.covariate_gen, n, rng.child(0))
    y_a = sc.anxiety_fitted().sample(X, rng.child(1).generator())
    wm = sc.wellbeing_model
    effect = np.concatenate([[0.0], np.asarray(sc.beta_A, dtype=float)])
    eps = rng.child(2).generator().standard_normal(n)
    y_w = wm.intercept + effect[y_a - 1] + X @ np.asarray(wm.gamma, dtype=float) + wm.sigma * eps
    return PairData(y_w, y_a, X)


# ---------------------------------------------------------------------------
# power scenario


class EtaShape(str, Enum):
    LINEAR = "linear"
    QUADRATIC = "quadratic"
    EXPONENTIAL = "exponential"


DEFAULT_LAMBDAS = (0.0, 0.05, 0.1, 0.15, 0.2, 0.3)


@dataclass(frozen=True)
class PowerScenario:
    lam: float = 0.0
    shape: EtaShape = EtaShape.LINEAR
    n: int = 200
    reps: int = 1000
    alpha_cut: tuple = (-3.0, -2.0, 0.0, 2.0)
    beta1: tuple = (-0.5, 1.5)
    beta2: tuple = (1.0, 1.5)
    noise_sd: float = 1.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "shape", EtaShape(self.shape))
        if self.lam < 0:
            raise InvalidConfig("lambda must be non-negative")
        if self.n < 1 or self.reps < 1 or not self.noise_sd > 0:
            raise InvalidConfig("n, reps and noise_sd must be positive")
        if len(self.beta1) != 2 or len(self.beta2) != 2:
            raise InvalidConfig("the power design has two covariates")

    @property
    def eta(self) -> np.ndarray:
        base = self.lam * np.arange(len(self.alpha_cut) + 1, dtype=float)
        if self.shape is EtaShape.LINEAR:
            return base
        if self.shape is EtaShape.QUADRATIC:
            return base**2
        return np.exp(base)

    @property
    def scenario_id(self) -> str:
        return f"{self.shape.value}-{self.lam:g}"

    def ordinal_model(self) -> FittedModel:
        J = len(self.alpha_cut) + 1
        return FittedModel.from_params(ModelSpec.adjacent(J), list(self.alpha_cut) + list(self.beta1), 2)


def gen_power(sc: PowerScenario, rng: RngStream | int | None = None) -> PairData:
    """Synthetic ``(Y1, Y2, X)``: ``y1`` ordinal on 1..J, ``y2`` continuous."""
    rng = as_stream(sc.seed if rng is None else rng)
    n = sc.n
    gx = rng.child(0).generator()
    X = np.column_stack([gx.normal(0.0, 2.0, n), gx.uniform(0.0, 1.0, n)])
    y1 = sc.ordinal_model().sample(X, rng.child(1).generator())
    eps = rng.child(2).generator().standard_normal(n)
    y2 = sc.eta[y1 - 1] + X @ np.asarray(sc.beta2, dtype=float) + sc.noise_sd * eps
    return PairData(y1, y2, X)


# ---------------------------------------------------------------------------
# baselines


class Direction(str, Enum):
    CONTINUOUS_AS_RESPONSE = "continuous_as_response"
    ORDINAL_AS_RESPONSE = "ordinal_as_response"


def _dummies(codes, J) -> np.ndarray:
    return (np.asarray(codes)[:, None] == np.arange(2, J + 1)[None, :]).astype(float)


def _ols(y, D):
    coef, *_ = np.linalg.lstsq(D, y, rcond=None)
    return coef


def coef_change_baseline(data: PairData, direction: Direction | str) -> float:
    """Percentage change of regression coefficients when covariates are added.

    ``data.y1`` is the continuous outcome and ``data.y2`` the ordinal one.
    With the continuous outcome as response, the linear model uses dummies
    for levels 2..J and the four percentage changes are averaged; with the
    ordinal outcome as response, an adjacent-category model takes the
    continuous outcome as a predictor.
    """
    direction = Direction(direction)
    y_c = np.asarray(data.y1, dtype=float)
    y_o = np.asarray(data.y2).astype(int)
    J = int(y_o.max())
    n = data.n
    if direction is Direction.CONTINUOUS_AS_RESPONSE:
        Dm = np.column_stack([np.ones(n), _dummies(y_o, J)])
        b_marg = _ols(y_c, Dm)[1:J]
        b_part = _ols(y_c, np.column_stack([Dm, data.X]))[1:J]
        return float(np.mean((b_part - b_marg) / b_marg) * 100.0)
    spec = ModelSpec.adjacent(J)
    m_marg = fit(spec, Dataset(y_o, y_c[:, None]))
    m_part = fit(spec, Dataset(y_o, np.column_stack([y_c, data.X])))
    b0, b1 = m_marg.beta[0], m_part.beta[0]
    return float((b1 - b0) / b0 * 100.0)


def _gauss_max_loglik(y, D) -> float:
    r = y - D @ _ols(y, D)
    n = len(y)
    s2 = float(r @ r) / n
    return -0.5 * n * (math.log(2 * math.pi * s2) + 1.0)


def lrt_partial(data: PairData) -> float:
    """Likelihood-ratio p-value for no effect of the ordinal ``y1`` on the
    continuous ``y2`` given ``X``.

    The full model adds dummies for the observed levels of ``y1`` other than
    the lowest one, so the design never contains a redundant dummy.
    """
    y1 = np.asarray(data.y1)
    y2 = np.asarray(data.y2, dtype=float)
    n = data.n
    base = np.column_stack([np.ones(n), data.X])
    levels = np.unique(y1)
    dummies = (y1[:, None] == levels[None, 1:]).astype(float)
    df = dummies.shape[1]
    if df == 0:
        return 1.0
    ll0 = _gauss_max_loglik(y2, base)
    ll1 = _gauss_max_loglik(y2, np.column_stack([base, dummies]))
    stat = max(0.0, 2.0 * (ll1 - ll0))
    return float(stats.chi2.sf(stat, df))


# ---------------------------------------------------------------------------
# power study


class Method(str, Enum):
    PROPOSED = "proposed"
    LRT = "lrt"


@dataclass(frozen=True)
class PowerRow:
    scenario_id: str
    lam: float
    shape: str
    method: str
    rejection_rate: float
    reps: int
    seed: int
    failures: int = 0

    def to_csv_row(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "lambda": f"{self.lam:g}",
            "shape": self.shape,
            "method": self.method,
            "rejection_rate": f"{self.rejection_rate:.6f}",
            "reps": self.reps,
            "seed": self.seed,
        }


CSV_COLUMNS = ("scenario_id", "lambda", "shape", "method", "rejection_rate", "reps", "seed")


def power_grid(shapes=tuple(EtaShape), lambdas=DEFAULT_LAMBDAS, **kw) -> list[PowerScenario]:
    return [PowerScenario(lam=lam, shape=s, **kw) for s in shapes for lam in lambdas]


def _proposed_pvalue(data: PairData, J: int, B: int, M: int, rng: RngStream) -> float:
    cfg = BootstrapConfig(B=B, M=M)
    dist = bootstrap_t(data, ModelSpec.adjacent(J), ModelSpec.linear(), cfg=cfg, rng=rng)
    return p_value_simple(dist)


def power_cell(
    sc: PowerScenario,
    methods=(Method.PROPOSED, Method.LRT),
    B: int = 300,
    M: int = 30,
) -> dict[Method, np.ndarray]:
    """Per-replicate p-values of each method for one scenario.

    Replicate ``r`` draws its dataset from stream ``(seed, r, 0)`` and the
    bootstrap from ``(seed, r, 1)``; every method sees the same dataset.  A
    proposed-test replicate whose bootstrap cannot be completed gets NaN.
    """
    methods = [Method(m) for m in methods]
    J = len(sc.alpha_cut) + 1
    out = {m: np.full(sc.reps, np.nan) for m in methods}
    root = RngStream(sc.seed)
    for r in range(sc.reps):
        data = gen_power(sc, root.child(r, 0))
        for m in methods:
            try:
                if m is Method.LRT:
                    out[m][r] = lrt_partial(data)
                else:
                    out[m][r] = _proposed_pvalue(data, J, B, M, root.child(r, 1))
            except PartialTauError:
                pass
    return out


def run_power_study(
    grid,
    methods=(Method.PROPOSED, Method.LRT),
    B: int = 300,
    M: int = 30,
    level: float = 0.05,
    csv_path=None,
) -> list[PowerRow]:
    """Rejection rates (p-value at most ``level``) per scenario and method.

    Replicates whose test could not be computed are excluded from the rate
    and reported in ``PowerRow.failures``.
    """
    rows = []
    for sc in grid:
        pvals = power_cell(sc, methods, B, M)
        for m, p in pvals.items():
            ok = ~np.isnan(p)
            rate = float(np.mean(p[ok] <= level)) if ok.any() else math.nan
            rows.append(PowerRow(sc.scenario_id, sc.lam, sc.shape.value, m.value, rate, sc.reps, sc.seed, int((~ok).sum())))
    if csv_path is not None:
        write_power_csv(rows, csv_path)
    return rows


def write_power_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow(row.to_csv_row())


def scenario_to_dict(sc) -> dict:
    d = asdict(sc)
    if isinstance(sc, PowerScenario):
        d["shape"] = sc.shape.value
    return d
