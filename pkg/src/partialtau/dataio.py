"""Analysis configuration, CSV ingestion and result serialization.

Configuration schema (JSON)::

    {
      "data": "survey.csv",                      # optional; --data overrides
      "outcomes": [
        {"column": "wellbeing", "kind": "continuous"},
        {"column": "anxiety", "kind": "ordinal", "family": "adjacent",
         "levels": ["none", "mild", "moderate", "severe", "extreme"]},
        {"column": "smoker", "kind": "binary", "link": "probit"}
      ],
      "covariates": ["strain", "age"],
      "pairs": [["wellbeing", "anxiety"]],       # optional; default all pairs
      "M": 30, "B": 1000, "alpha": 0.05, "delta": null, "seed": 0,
      "max_refit_retries": 5, "n_jobs": 1,
      "lowess_frac": 0.6667, "lowess_iters": 3
    }

``kind`` is ``continuous`` (linear model), ``binary`` (``family`` fixed to
``binary``) or ``ordinal`` (``family`` one of ``cumulative``, ``adjacent``,
``stereotype``; default ``cumulative``).  ``link`` is ``logit``, ``probit``
or ``cloglog``.  Covariates must be numeric.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .assoc import DEFAULT_M, PairData
from .errors import (
    EmptyAfterFiltering,
    InvalidConfig,
    MissingColumn,
    NonNumericCell,
)
from .inference import BootstrapConfig
from .models import Family, Link, ModelSpec, encode_ordinal

MISSING_TOKENS = frozenset({"", "NA", "N/A", "NaN", "nan", "null", "NULL"})

_ORDINAL_FAMILIES = {
    "cumulative": Family.CUMULATIVE,
    "adjacent": Family.ADJACENT,
    "stereotype": Family.STEREOTYPE,
}


@dataclass(frozen=True)
class OutcomeConfig:
    column: str
    kind: str = "continuous"
    family: str | None = None
    link: str = "logit"
    levels: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("continuous", "binary", "ordinal"):
            raise InvalidConfig(f"outcome {self.column!r}: unknown kind {self.kind!r}")
        try:
            Link(self.link)
        except ValueError:
            raise InvalidConfig(f"outcome {self.column!r}: unknown link {self.link!r}") from None
        if self.kind == "ordinal" and self.family not in (None, *_ORDINAL_FAMILIES):
            raise InvalidConfig(f"outcome {self.column!r}: unknown ordinal family {self.family!r}")
        if self.kind == "binary" and self.family not in (None, "binary"):
            raise InvalidConfig(f"outcome {self.column!r}: binary outcomes use the binary family")
        if self.kind == "continuous" and self.family not in (None, "linear"):
            raise InvalidConfig(f"outcome {self.column!r}: continuous outcomes use the linear family")
        if self.levels is not None:
            object.__setattr__(self, "levels", tuple(self.levels))

    def spec(self, n_categories: int | None = None) -> ModelSpec:
        if self.kind == "continuous":
            return ModelSpec.linear()
        if self.kind == "binary":
            return ModelSpec.binary(self.link)
        fam = _ORDINAL_FAMILIES[self.family or "cumulative"]
        return ModelSpec(fam, Link(self.link), n_categories)


@dataclass(frozen=True)
class AnalysisConfig:
    outcomes: tuple
    covariates: tuple = ()
    pairs: tuple | None = None
    M: int = DEFAULT_M
    B: int = 1000
    alpha: float = 0.05
    delta: float | None = None
    seed: int = 0
    max_refit_retries: int = 5
    n_jobs: int = 1
    lowess_frac: float = 2.0 / 3.0
    lowess_iters: int = 3
    data: str | None = None

    def __post_init__(self):
        outs = tuple(o if isinstance(o, OutcomeConfig) else OutcomeConfig(**o) for o in self.outcomes)
        object.__setattr__(self, "outcomes", outs)
        object.__setattr__(self, "covariates", tuple(self.covariates))
        names = [o.column for o in outs]
        if len(set(names)) != len(names):
            raise InvalidConfig("outcome columns must be distinct")
        if len(set(self.covariates)) != len(self.covariates):
            raise InvalidConfig("covariate columns must be distinct")
        overlap = set(names) & set(self.covariates)
        if overlap:
            raise InvalidConfig(f"columns used both as outcome and covariate: {sorted(overlap)}")
        if self.pairs is not None:
            pairs = tuple(tuple(p) for p in self.pairs)
            for p in pairs:
                if len(p) != 2 or p[0] == p[1] or not set(p) <= set(names):
                    raise InvalidConfig(f"pair {list(p)} must name two different outcome columns")
            object.__setattr__(self, "pairs", pairs)
        if self.delta is not None and not self.delta >= 0:
            raise InvalidConfig("delta must be non-negative")
        self.bootstrap_config()

    @classmethod
    def from_dict(cls, d: dict) -> AnalysisConfig:
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise InvalidConfig(f"unknown configuration keys: {sorted(unknown)}")
        if "outcomes" not in d:
            raise InvalidConfig("configuration needs an 'outcomes' list")
        try:
            return cls(**d)
        except TypeError as exc:
            raise InvalidConfig(str(exc)) from None

    def to_dict(self) -> dict:
        return {
            "outcomes": [
                {k: (list(v) if isinstance(v, tuple) else v) for k, v in o.__dict__.items() if v is not None}
                for o in self.outcomes
            ],
            "covariates": list(self.covariates),
            "pairs": None if self.pairs is None else [list(p) for p in self.pairs],
            "M": self.M,
            "B": self.B,
            "alpha": self.alpha,
            "delta": self.delta,
            "seed": self.seed,
        }

    def outcome(self, column: str) -> OutcomeConfig:
        for o in self.outcomes:
            if o.column == column:
                return o
        raise InvalidConfig(f"{column!r} is not a configured outcome")

    def pair_list(self) -> list[tuple[str, str]]:
        if self.pairs is not None:
            return list(self.pairs)
        return list(itertools.combinations([o.column for o in self.outcomes], 2))

    def bootstrap_config(self, seed: int | None = None) -> BootstrapConfig:
        return BootstrapConfig(
            B=self.B,
            M=self.M,
            alpha=self.alpha,
            seed=self.seed if seed is None else seed,
            max_refit_retries=self.max_refit_retries,
            n_jobs=self.n_jobs,
        )


def load_config(path) -> AnalysisConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"{path}: invalid JSON ({exc})") from None
    except OSError as exc:
        raise InvalidConfig(f"cannot read configuration {path}: {exc.strerror}") from None
    if not isinstance(raw, dict):
        raise InvalidConfig("configuration must be a JSON object")
    return AnalysisConfig.from_dict(raw)


# ---------------------------------------------------------------------------
# data


@dataclass(frozen=True)
class LoadedData:
    """Encoded outcome columns, the covariate matrix and bookkeeping."""

    outcomes: dict
    X: np.ndarray
    covariates: tuple
    specs: dict
    levels: dict = field(default_factory=dict)
    dropped_lines: tuple = ()

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def pair(self, c1: str, c2: str) -> PairData:
        return PairData(self.outcomes[c1], self.outcomes[c2], self.X)


def _parse_float(cell: str, column: str, line: int) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise NonNumericCell(f"line {line}, column {column!r}: {cell!r} is not numeric") from None
    if not math.isfinite(v):
        raise NonNumericCell(f"line {line}, column {column!r}: {cell!r} is not finite")
    return v


def _sort_key(values):
    try:
        return sorted(values, key=float)
    except ValueError:
        return sorted(values)


def read_csv(path) -> tuple[list[str], list[tuple[int, list[str]]]]:
    """Header and ``(line number, cells)`` rows of a UTF-8 CSV file."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh)]
    if not rows:
        raise EmptyAfterFiltering(f"{path}: file is empty")
    header = [h.strip() for h in rows[0]]
    body = []
    for i, r in enumerate(rows[1:], start=2):
        if not r or (len(r) == 1 and not r[0].strip()):
            continue
        body.append((i, r))
    return header, body


def load_dataset(csv_path, config: AnalysisConfig) -> LoadedData:
    """Read the configured columns from ``csv_path``.

    Rows with a missing cell in any used column are dropped; their line
    numbers are kept in ``dropped_lines``.  Ordinal and binary outcomes are
    encoded by their declared ``levels`` or by sorted unique values.
    """
    header, body = read_csv(csv_path)
    used = [o.column for o in config.outcomes] + list(config.covariates)
    missing = [c for c in used if c not in header]
    if missing:
        raise MissingColumn(f"columns not found in {csv_path}: {', '.join(missing)}")
    pos = {c: header.index(c) for c in used}
    kept, dropped = [], []
    for line, cells in body:
        if len(cells) != len(header):
            raise NonNumericCell(f"line {line}: expected {len(header)} cells, found {len(cells)}")
        vals = [cells[pos[c]].strip() for c in used]
        if any(v in MISSING_TOKENS for v in vals):
            dropped.append(line)
            continue
        kept.append((line, dict(zip(used, vals))))
    if not kept:
        raise EmptyAfterFiltering(f"{csv_path}: no complete rows (dropped lines {dropped})")
    X = np.array(
        [[_parse_float(row[c], c, line) for c in config.covariates] for line, row in kept], dtype=float
    ).reshape(len(kept), len(config.covariates))
    outcomes, specs, levels = {}, {}, {}
    for o in config.outcomes:
        raw = [row[o.column] for _, row in kept]
        if o.kind == "continuous":
            outcomes[o.column] = np.array([_parse_float(v, o.column, line) for v, (line, _) in zip(raw, kept)])
            specs[o.column] = o.spec()
            continue
        declared = list(o.levels) if o.levels is not None else _sort_key(set(raw))
        codes, labs = encode_ordinal(raw, [str(v) for v in declared])
        if o.kind == "binary":
            if len(labs) != 2:
                raise InvalidConfig(f"binary outcome {o.column!r} has {len(labs)} levels")
            codes = codes - 1
        outcomes[o.column] = codes
        specs[o.column] = o.spec(len(labs))
        levels[o.column] = labs
    return LoadedData(outcomes, X, tuple(config.covariates), specs, levels, tuple(dropped))


def write_csv_table(path, columns, rows, comment: str | None = None):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if comment is not None:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_dataset(path, columns: dict):
    """Write named columns (equal length) as a CSV file."""
    names = list(columns)
    rows = zip(*(np.asarray(columns[c]).tolist() for c in names))
    write_csv_table(path, names, rows)


def to_json(obj) -> str:
    """Deterministic JSON: insertion-ordered keys, shortest float repr."""
    return json.dumps(_jsonable(obj), indent=2, allow_nan=True) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, Path):
        return str(obj)
    return obj
