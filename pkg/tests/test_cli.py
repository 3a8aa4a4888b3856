import json

import numpy as np
import pytest

from partialtau.cli import cmd_plotdata, cmd_simulate, main
from partialtau.dataio import (
    AnalysisConfig,
    OutcomeConfig,
    load_config,
    load_dataset,
    read_csv,
    to_json,
    write_dataset,
)
from partialtau.errors import EmptyAfterFiltering, EmptyCategory, InvalidConfig, MissingColumn, NonNumericCell


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def _config(**kw):
    base = dict(
        outcomes=[{"column": "level", "kind": "ordinal", "levels": ["low", "mid", "high"]}, {"column": "score"}],
        covariates=["x"],
    )
    base.update(kw)
    return AnalysisConfig.from_dict(base)


class TestConfig:
    def test_unknown_key(self):
        with pytest.raises(InvalidConfig, match="colour"):
            AnalysisConfig.from_dict({"outcomes": [], "colour": 1})

    def test_overlap(self):
        with pytest.raises(InvalidConfig):
            _config(covariates=["score"])

    def test_bad_kind(self):
        with pytest.raises(InvalidConfig):
            OutcomeConfig("y", kind="count")

    def test_bad_pair(self):
        with pytest.raises(InvalidConfig):
            _config(pairs=[["level", "level"]])

    def test_pairs_default(self):
        assert _config().pair_list() == [("level", "score")]

    def test_load_config_invalid_json(self, tmp_path):
        with pytest.raises(InvalidConfig):
            load_config(_write(tmp_path / "c.json", "{oops"))

    def test_specs(self):
        assert OutcomeConfig("y", "binary", link="probit").spec().link.value == "probit"
        assert OutcomeConfig("y", "ordinal", family="stereotype").spec(4).n_categories == 4


class TestLoadDataset:
    def test_encoding(self, tmp_path):
        p = _write(tmp_path / "d.csv", "level,score,x\nlow,1.5,0\nhigh,2.5,1\nmid,0.5,2\n")
        d = load_dataset(p, _config())
        assert d.outcomes["level"].tolist() == [1, 3, 2]
        assert d.X[:, 0].tolist() == [0.0, 1.0, 2.0]
        assert d.specs["level"].n_categories == 3

    def test_missing_column(self, tmp_path):
        p = _write(tmp_path / "d.csv", "level,score\nlow,1\n")
        with pytest.raises(MissingColumn, match="x"):
            load_dataset(p, _config())

    def test_missing_rows_dropped(self, tmp_path):
        p = _write(tmp_path / "d.csv", "level,score,x\nlow,1,0\nmid,NA,1\nhigh,2,\nmid,3,2\nhigh,1,1\n")
        d = load_dataset(p, _config())
        assert d.dropped_lines == (3, 4)
        assert d.n == 3

    def test_non_numeric(self, tmp_path):
        p = _write(tmp_path / "d.csv", "level,score,x\nlow,1,0\nmid,abc,0\nhigh,2,1\n")
        with pytest.raises(NonNumericCell, match="line 3"):
            load_dataset(p, _config())

    def test_empty(self, tmp_path):
        p = _write(tmp_path / "d.csv", "level,score,x\nlow,NA,0\n")
        with pytest.raises(EmptyAfterFiltering):
            load_dataset(p, _config())

    def test_unobserved_level(self, tmp_path):
        p = _write(tmp_path / "d.csv", "level,score,x\nlow,1,0\nmid,2,1\n")
        with pytest.raises(EmptyCategory, match="high"):
            load_dataset(p, _config())

    def test_binary_codes(self, tmp_path):
        p = _write(tmp_path / "d.csv", "s,x\nyes,0\nno,1\nyes,2\n")
        cfg = AnalysisConfig.from_dict({"outcomes": [{"column": "s", "kind": "binary"}], "covariates": ["x"]})
        assert load_dataset(p, cfg).outcomes["s"].tolist() == [1, 0, 1]

    def test_round_trip(self, tmp_path):
        columns, config = cmd_simulate("power", seed=3, n=50)
        p = tmp_path / "sim.csv"
        write_dataset(p, columns)
        d = load_dataset(p, config)
        for name in ("y2", "x1", "x2"):
            got = d.outcomes[name] if name == "y2" else d.X[:, ["x1", "x2"].index(name)]
            np.testing.assert_array_equal(got, columns[name])
        np.testing.assert_array_equal(d.outcomes["y1"], columns["y1"])
        header, rows = read_csv(p)
        assert header == list(columns) and len(rows) == 50


class TestJson:
    def test_deterministic_and_nan(self):
        assert to_json({"a": np.float64(0.1), "b": float("nan")}) == '{\n  "a": 0.1,\n  "b": null\n}\n'


@pytest.fixture
def sim_files(tmp_path):
    data, cfg = tmp_path / "sim.csv", tmp_path / "cfg.json"
    assert main(["simulate", "--scenario", "power", "--seed", "2", "--lambda", "0.5", "--n", "150",
                 "--out", str(data), "--config-out", str(cfg)]) == 0
    return data, cfg


class TestCli:
    def test_fit(self, sim_files, tmp_path):
        _, cfg = sim_files
        out = tmp_path / "fit.json"
        assert main(["fit", "--config", str(cfg), "--out", str(out)]) == 0
        rep = json.loads(out.read_text())
        assert rep["n"] == 150 and set(rep["models"]) == {"y1", "y2"}

    def test_assoc_deterministic(self, sim_files, tmp_path):
        _, cfg = sim_files
        outs = []
        for k in range(2):
            out = tmp_path / f"a{k}.json"
            assert main(["assoc", "--config", str(cfg), "--B", "100", "--M", "3", "--delta", "0.1", "--out", str(out)]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]
        pair = json.loads(outs[0])["pairs"][0]
        assert {"p_simple", "p_composite", "se", "ci_lo", "ci_hi"} <= set(pair["partial"])
        assert "pct_change" in pair["moderation"]

    def test_moderation(self, sim_files, tmp_path):
        _, cfg = sim_files
        out = tmp_path / "m.json"
        assert main(["moderation", "--config", str(cfg), "--B", "20", "--M", "3", "--out", str(out)]) == 0
        assert "estimate" in json.loads(out.read_text())["pairs"][0]["pct_change"]

    def test_plotdata_format(self, sim_files, tmp_path):
        _, cfg = sim_files
        pts, curve = tmp_path / "p.csv", tmp_path / "c.csv"
        assert main(["plotdata", "--config", str(cfg), "--pair", "y1", "y2", "--out", str(pts), "--curve-out", str(curve)]) == 0
        lines = pts.read_text().splitlines()
        assert lines[0] == "# seed=2" and lines[1] == "h_r1,h_r2"
        cl = curve.read_text().splitlines()
        assert cl[0] == "x,smooth"
        xs = [float(r.split(",")[0]) for r in cl[1:]]
        assert xs == sorted(xs) and len(xs) == 150

    def test_power(self, tmp_path):
        out = tmp_path / "power.csv"
        assert main(["power", "--seed", "1", "--shapes", "linear", "--lambdas", "0", "--reps", "2",
                     "--methods", "lrt", "--out", str(out)]) == 0
        assert out.read_text().splitlines()[0] == "scenario_id,lambda,shape,method,rejection_rate,reps,seed"

    def test_exit_codes(self, sim_files, tmp_path, capsys):
        data, cfg = sim_files
        assert main(["fit", "--config", str(tmp_path / "none.json")]) == 2
        bad = _write(tmp_path / "bad.json", json.dumps({"outcomes": [{"column": "zz"}], "data": str(data)}))
        assert main(["fit", "--config", str(bad)]) == 3
        assert "MissingColumn" in capsys.readouterr().err

    def test_seed_required(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["simulate", "--scenario", "power", "--out", str(tmp_path / "x.csv")])
        assert exc.value.code == 2


class TestPlotData:
    def test_seed_column_matches(self):
        columns, config = cmd_simulate("wellbeing", seed=1, n=300)
        from partialtau.dataio import LoadedData
        from partialtau.models import ModelSpec

        X = np.column_stack([columns[c] for c in config.covariates])
        ld = LoadedData({"anxiety": columns["anxiety"], "wellbeing": columns["wellbeing"]}, X,
                        tuple(config.covariates), {"anxiety": ModelSpec.adjacent(5), "wellbeing": ModelSpec.linear()})
        a = cmd_plotdata(config, ld, ("anxiety", "wellbeing"))
        b = cmd_plotdata(config, ld, ("anxiety", "wellbeing"))
        np.testing.assert_array_equal(a.h_r1, b.h_r1)
        assert np.all(np.isfinite(a.h_r1)) and np.all(np.isfinite(a.h_r2))
