"""Command-line interface.

Subcommands: ``fit``, ``assoc``, ``moderation``, ``plotdata``, ``simulate``
and ``power``.  Errors raised by the library map onto exit codes 2
(configuration), 3 (data) and 4 (numerical failure).
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
import warnings
from dataclasses import dataclass

import numpy as np

from .assoc import AssocKind, pct_change
from .dataio import (
    AnalysisConfig,
    LoadedData,
    OutcomeConfig,
    load_config,
    load_dataset,
    to_json,
    write_csv_table,
    write_dataset,
)
from .errors import DataError, InvalidConfig, PartialTauError
from .inference import (
    BootstrapDistribution,
    bootstrap_moderation,
    bootstrap_t,
    p_value_composite,
    p_value_simple,
    summarize,
)
from .lowess import Curve, lowess
from .models import Dataset, fit
from .rng import RngStream
from .simgen import (
    DEFAULT_LAMBDAS,
    DEFAULT_WELLBEING,
    EtaShape,
    PowerScenario,
    gen_power,
    gen_wellbeing,
    power_grid,
    run_power_study,
)
from .surrogate import normalize, residual_matrix

# ---------------------------------------------------------------------------
# commands


def _dist_report(dist: BootstrapDistribution, config: AnalysisConfig, value_key: str) -> dict:
    s = summarize(dist, config.alpha)
    out = {value_key: dist.estimate, "se": s.se, "ci_lo": s.ci_lo, "ci_hi": s.ci_hi}
    if dist.B >= 100:
        out["p_simple"] = p_value_simple(dist)
        if config.delta is not None:
            out["p_composite"] = p_value_composite(dist, config.delta)
            out["p_composite_mirrored"] = p_value_composite(dist, config.delta, mirrored=True)
    out["B"] = dist.B
    out["failures"] = dist.failures
    return out


def cmd_fit(config: AnalysisConfig, data: LoadedData) -> dict:
    """Fit each configured outcome on the covariates."""
    models = {}
    for o in config.outcomes:
        m = fit(data.specs[o.column], Dataset(data.outcomes[o.column], data.X))
        entry = m.to_dict()
        entry["covariates"] = list(data.covariates)
        if o.column in data.levels:
            entry["levels"] = list(data.levels[o.column])
        models[o.column] = entry
    return {"n": data.n, "dropped_lines": list(data.dropped_lines), "models": models}


def cmd_assoc(config: AnalysisConfig, data: LoadedData) -> dict:
    """Marginal and partial association with bootstrap inference per pair.

    Pair ``k`` bootstraps the partial estimate on streams under
    ``(seed, k, 0)`` and the marginal one under ``(seed, k, 1)``.
    """
    report = {"n": data.n, "dropped_lines": list(data.dropped_lines), "config": config.to_dict(), "pairs": []}
    cfg = config.bootstrap_config()
    root = RngStream(config.seed)
    for k, (c1, c2) in enumerate(config.pair_list()):
        pd = data.pair(c1, c2)
        s1, s2 = data.specs[c1], data.specs[c2]
        part = bootstrap_t(pd, s1, s2, cfg=cfg, kind=AssocKind.PARTIAL, rng=root.child(k, 0))
        marg = bootstrap_t(pd, s1, s2, cfg=cfg, kind=AssocKind.MARGINAL, rng=root.child(k, 1))
        pc = pct_change(part.estimate, marg.estimate)
        report["pairs"].append(
            {
                "pair": [c1, c2],
                "marginal": _dist_report(marg, config, "t_hat"),
                "partial": _dist_report(part, config, "t_hat"),
                "moderation": {
                    "delta": part.estimate - marg.estimate,
                    "pct_change": pc,
                    "undefined": pc is None,
                },
            }
        )
    return report


def cmd_moderation(config: AnalysisConfig, data: LoadedData) -> dict:
    """Bootstrap inference on the percentage change per pair (streams under
    ``(seed, k, 2)``)."""
    report = {"n": data.n, "dropped_lines": list(data.dropped_lines), "config": config.to_dict(), "pairs": []}
    cfg = config.bootstrap_config()
    root = RngStream(config.seed)
    for k, (c1, c2) in enumerate(config.pair_list()):
        pd = data.pair(c1, c2)
        dist = bootstrap_moderation(pd, data.specs[c1], data.specs[c2], cfg=cfg, rng=root.child(k, 2))
        report["pairs"].append({"pair": [c1, c2], "pct_change": _dist_report(dist, config, "estimate")})
    return report


@dataclass(frozen=True)
class PlotData:
    h_r1: np.ndarray
    h_r2: np.ndarray
    lowess: Curve
    seed: int

    def write(self, path, curve_path):
        write_csv_table(path, ["h_r1", "h_r2"], zip(self.h_r1, self.h_r2), comment=f"seed={self.seed}")
        write_csv_table(curve_path, ["x", "smooth"], zip(self.lowess.x, self.lowess.smooth))


def cmd_plotdata(config: AnalysisConfig, data: LoadedData, pair) -> PlotData:
    """Normalized partial residuals of one pair (first surrogate column) and
    a LOWESS curve of ``h_r2`` against ``h_r1``.

    The residuals use the same streams as the first column of the partial
    estimate with root ``seed``.
    """
    c1, c2 = pair
    for c in pair:
        config.outcome(c)
    rng = RngStream(config.seed)
    cols = []
    for j, c in enumerate((c1, c2), start=1):
        ds = Dataset(data.outcomes[c], data.X)
        model = fit(data.specs[c], ds)
        cols.append(residual_matrix(model, ds, 1, rng.child(j)).column(0))
    h1, h2 = normalize(cols[0]), normalize(cols[1])
    curve = lowess(h1, h2, config.lowess_frac, config.lowess_iters)
    return PlotData(np.asarray(h1), np.asarray(h2), curve, config.seed)


# ---------------------------------------------------------------------------
# simulation commands


def cmd_simulate(scenario: str, seed: int, n: int | None = None, beta_a=None, lam: float = 0.0,
                 shape: str = "linear", noise_sd: float = 1.0):
    """Generate one synthetic dataset; returns ``(columns, config)``."""
    if scenario == "wellbeing":
        sc = DEFAULT_WELLBEING
        if n is not None:
            sc = dataclasses.replace(sc, n=n)
        if beta_a is not None:
            sc = sc.with_beta(beta_a)
        d = gen_wellbeing(sc, RngStream(seed))
        columns = {"wellbeing": d.y1, "anxiety": d.y2}
        names = sc.covariate_names
        outcomes = [
            OutcomeConfig("wellbeing", "continuous"),
            OutcomeConfig("anxiety", "ordinal", family="adjacent"),
        ]
    elif scenario == "power":
        sc = PowerScenario(lam=lam, shape=shape, n=200 if n is None else n, noise_sd=noise_sd, seed=seed)
        d = gen_power(sc, RngStream(seed))
        columns = {"y1": d.y1, "y2": d.y2}
        names = ["x1", "x2"]
        outcomes = [OutcomeConfig("y1", "ordinal", family="adjacent"), OutcomeConfig("y2", "continuous")]
    else:
        raise InvalidConfig(f"unknown scenario {scenario!r}")
    for j, name in enumerate(names):
        columns[name] = d.X[:, j]
    config = AnalysisConfig(outcomes=outcomes, covariates=names, seed=seed)
    return columns, config


# ---------------------------------------------------------------------------
# argument parsing


def _add_analysis_args(p: argparse.ArgumentParser, with_bootstrap: bool = True):
    p.add_argument("--config", required=True, help="JSON analysis configuration")
    p.add_argument("--data", help="CSV data file (overrides the configuration)")
    p.add_argument("--seed", type=int, help="root seed (overrides the configuration)")
    p.add_argument("--M", type=int, help="surrogate draws per estimate")
    if with_bootstrap:
        p.add_argument("--B", type=int, help="bootstrap replicates")
        p.add_argument("--alpha", type=float, help="1 - confidence level")
        p.add_argument("--delta", type=float, help="composite-null threshold")
        p.add_argument("--n-jobs", type=int, dest="n_jobs", help="worker processes")
    p.add_argument("--out", help="output file (default: standard output)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="partialtau",
        description="Partial and marginal association between mixed-type outcomes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit the covariate-adjustment model of each outcome")
    _add_analysis_args(p, with_bootstrap=False)

    p = sub.add_parser("assoc", help="marginal and partial association with bootstrap inference")
    _add_analysis_args(p)

    p = sub.add_parser("moderation", help="bootstrap inference on the moderation percentage change")
    _add_analysis_args(p)

    p = sub.add_parser("plotdata", help="partial regression plot data with a LOWESS curve")
    _add_analysis_args(p, with_bootstrap=False)
    p.add_argument("--pair", nargs=2, metavar=("FIRST", "SECOND"), required=True)
    p.add_argument("--curve-out", required=True, help="CSV file for the LOWESS curve")
    p.add_argument("--frac", type=float, help="LOWESS bandwidth fraction")
    p.add_argument("--iters", type=int, help="LOWESS robustness passes")

    p = sub.add_parser("simulate", help="write a synthetic dataset")
    p.add_argument("--scenario", choices=["wellbeing", "power"], required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--beta-a", type=float, nargs=4, dest="beta_a", help="wellbeing: anxiety level 2..5 effects")
    p.add_argument("--lambda", type=float, default=0.0, dest="lam", help="power: association strength")
    p.add_argument("--shape", choices=[s.value for s in EtaShape], default="linear")
    p.add_argument("--noise-sd", type=float, default=1.0, dest="noise_sd")
    p.add_argument("--out", required=True, help="CSV output")
    p.add_argument("--config-out", help="write a matching analysis configuration")

    p = sub.add_parser("power", help="run the power study and write a CSV table")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--shapes", nargs="+", choices=[s.value for s in EtaShape], default=[s.value for s in EtaShape])
    p.add_argument("--lambdas", type=float, nargs="+", default=list(DEFAULT_LAMBDAS))
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--B", type=int, default=300)
    p.add_argument("--M", type=int, default=30)
    p.add_argument("--methods", nargs="+", choices=["proposed", "lrt"], default=["proposed", "lrt"])
    p.add_argument("--out", required=True)
    return parser


def _resolve_config(args) -> tuple[AnalysisConfig, LoadedData]:
    config = load_config(args.config)
    overrides = {}
    for key in ("seed", "M", "B", "alpha", "delta", "n_jobs", "data"):
        v = getattr(args, key, None)
        if v is not None:
            overrides[key] = v
    if getattr(args, "frac", None) is not None:
        overrides["lowess_frac"] = args.frac
    if getattr(args, "iters", None) is not None:
        overrides["lowess_iters"] = args.iters
    config = dataclasses.replace(config, **overrides)
    if config.data is None:
        raise InvalidConfig("no data file given (--data or 'data' in the configuration)")
    try:
        data = load_dataset(config.data, config)
    except FileNotFoundError:
        raise DataError(f"data file not found: {config.data}") from None
    return config, data


def _emit(text: str, out):
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command in ("fit", "assoc", "moderation", "plotdata"):
        config, data = _resolve_config(args)
        if args.command == "plotdata":
            if args.out is None:
                raise InvalidConfig("plotdata needs --out")
            cmd_plotdata(config, data, tuple(args.pair)).write(args.out, args.curve_out)
            return 0
        fn = {"fit": cmd_fit, "assoc": cmd_assoc, "moderation": cmd_moderation}[args.command]
        _emit(to_json(fn(config, data)), args.out)
        return 0
    if args.command == "simulate":
        columns, config = cmd_simulate(args.scenario, args.seed, args.n, args.beta_a, args.lam, args.shape, args.noise_sd)
        write_dataset(args.out, columns)
        if args.config_out:
            d = config.to_dict()
            d["data"] = args.out
            _emit(to_json(d), args.config_out)
        return 0
    if args.command == "power":
        grid = power_grid(args.shapes, args.lambdas, n=args.n, reps=args.reps, seed=args.seed)
        run_power_study(grid, args.methods, B=args.B, M=args.M, csv_path=args.out)
        return 0
    raise InvalidConfig(f"unknown command {args.command}")  # pragma: no cover


def main(argv=None) -> int:
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return run(argv)
    except PartialTauError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DataError.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
