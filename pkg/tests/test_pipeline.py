import json
import math
import warnings

import jsonschema
import numpy as np
import pytest
from scipy import stats

from extmix.exceptions import LoadError, RankDeficiencyError, UsageError
from extmix.inference import ChainStore, SamplerConfig, run_chains
from extmix.model import PriorSpec, free_names, scenario_params, simulate_model, summary_names
from extmix.pipeline import (DroppedRowsWarning, ScenarioSpec, build_artifacts, dependence_table,
                             detrend, load_config, load_csv, load_schema,
                             posterior_predictive, qq_table, report, run_scenario, write_csv)
from extmix.pipeline.cli import main
from extmix.pipeline.detrend import PERIOD, design_matrix
from extmix.pipeline.report import DEPENDENCE_HEADER, QQ_HEADER, REPORT_FILES

TINY = SamplerConfig(n_iter=300, burn_in=200, thin=5, n_chains=2, seed=1)


@pytest.fixture(scope="module")
def small_data():
    return simulate_model(scenario_params("1.1"), 400, np.random.default_rng(3), ("x1", "x2"))


@pytest.fixture(scope="module")
def small_chains(small_data):
    return run_chains(small_data, PriorSpec.default(small_data), TINY)


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestLoadCsv:
    def test_well_formed(self, tmp_path):
        d = load_csv(write(tmp_path, "a,b\n1,2\n3,4\n5,6\n"))
        assert d.n == 3 and d.names == ("a", "b")
        assert np.array_equal(d.values, [[1, 2], [3, 4], [5, 6]])

    def test_missing_cell(self, tmp_path):
        p = write(tmp_path, "a,b\n1,2\n3,\n5,6\n")
        with pytest.warns(DroppedRowsWarning):
            d, dropped = load_csv(p, return_dropped=True)
        assert d.n == 2 and dropped == 1

    def test_header_only(self, tmp_path):
        with pytest.raises(UsageError):
            load_csv(write(tmp_path, "a,b\n"))

    def test_empty_file(self, tmp_path):
        with pytest.raises(UsageError):
            load_csv(write(tmp_path, ""))

    def test_unparseable_cell_location(self, tmp_path):
        with pytest.raises(LoadError) as info:
            load_csv(write(tmp_path, "a,b\n1,2\n3,x\n"))
        assert info.value.row == 3 and info.value.column == "b"

    def test_column_selection(self, tmp_path):
        p = write(tmp_path, "day,a,b\n1,2,3\n2,4,5\n")
        assert np.array_equal(load_csv(p, ["b", "a"]).values, [[3, 2], [5, 4]])
        assert np.array_equal(load_csv(p, [0]).values, [[1], [2]])
        with pytest.raises(UsageError):
            load_csv(p, ["c"])

    def test_round_trip(self, tmp_path, small_data):
        back = load_csv(write_csv(tmp_path / "x.csv", small_data))
        assert np.array_equal(back.values, small_data.values)


def seasonal_series(beta, n, rng, noise=1.0, y0=0.0):
    t = np.arange(n, dtype=float)
    y = np.empty(n)
    y[0] = y0
    for i in range(1, n):
        y[i] = design_matrix([t[i]], [y[i - 1]])[0] @ beta
        if noise:
            y[i] += noise * rng.standard_normal()
    return y, t


class TestDetrend:
    def test_noise_free_recursion_fits_exactly(self):
        # a transient from a far start keeps the lag column independent of the seasonal terms
        y, t = seasonal_series(np.array([1.0, 2.0, -1.0, 0.6]), 200, None, noise=0.0, y0=40.0)
        m = detrend(y, t)
        assert np.max(np.abs(m.residuals)) < 1e-8
        assert np.allclose(m.coefficients[0], [1.0, 2.0, -1.0, 0.6], atol=1e-8)

    def test_pure_sinusoid_is_collinear(self):
        t = np.arange(1, 400, dtype=float)
        y = 5 + 3 * np.sin(2 * np.pi * t / PERIOD) + np.cos(2 * np.pi * t / PERIOD)
        with pytest.raises(RankDeficiencyError):
            detrend(y, t)

    def test_constant_series(self):
        with pytest.raises(RankDeficiencyError):
            detrend(np.ones(50), np.arange(50))

    def test_white_noise(self, rng):
        y = rng.standard_normal(3000)
        m = detrend(y, np.arange(3000))
        assert abs(m.coefficients[0, 3]) < 3 * m.std_errors[0, 3]

    def test_recovers_known_coefficients(self, rng):
        beta = np.array([2.0, 1.5, -0.5, 0.7])
        y1, t = seasonal_series(beta, 3000, rng)
        y2, _ = seasonal_series(beta * [1, -1, 1, 0.5], 3000, rng)
        m = detrend(np.column_stack([y1, y2]), t)
        for j, b in enumerate((beta, beta * [1, -1, 1, 0.5])):
            assert np.all(np.abs(m.coefficients[j] - b) < 3 * m.std_errors[j])

    def test_residual_mean_zero(self, rng):
        y, t = seasonal_series(np.array([1.0, 0.5, 0.5, 0.3]), 500, rng)
        m = detrend(y, t)
        assert abs(m.residuals.mean()) < 1e-8
        assert np.array_equal(m.negative_residuals, -m.residuals)

    def test_gaps_drop_rows(self, rng):
        t = np.concatenate([np.arange(100), np.arange(150, 250)]).astype(float)
        m = detrend(rng.standard_normal(200), t)
        assert m.residuals.shape[0] == 198
        assert 0.0 not in m.day_index and 150.0 not in m.day_index

    def test_acf_shape(self, rng):
        m = detrend(rng.standard_normal((300, 2)), np.arange(300))
        acf = m.residual_acf(10)
        assert acf.shape == (11, 2) and np.allclose(acf[0], 1.0)

    def test_too_short(self):
        with pytest.raises(UsageError):
            detrend(np.arange(8.0), np.arange(8))


class TestScenario:
    def test_rows_determinism_and_single_replication(self):
        spec = ScenarioSpec.named("1.1", n_replications=1, n_points=300, sampler=TINY)
        a = run_scenario(spec, seed=4)
        b = run_scenario(spec, seed=4)
        assert set(a.rows) == set(summary_names(2)) and len(a.rows) == 14
        assert all(r["coverage"] in (0.0, 1.0) for r in a.rows.values())
        assert json.dumps(a.to_dict(), sort_keys=True) == json.dumps(b.to_dict(), sort_keys=True)
        assert a.rows["u_1"]["true"] == 5.5 and a.rows["U_2_2"]["true"] == pytest.approx(
            math.sqrt(1 - 0.49))

    def test_replication_counts(self):
        assert ScenarioSpec.named("1.2").n_replications == 50
        assert ScenarioSpec.named("1.2", paper_scale=True).n_replications == 1000

    def test_validation(self):
        with pytest.raises(UsageError):
            ScenarioSpec("x", scenario_params("1.1"), n_points=5)


class TestPosteriorPredictive:
    def test_single_draw_matches_simulation(self):
        p = scenario_params("1.2")
        store = ChainStore(p.to_flat()[None], np.zeros(1), free_names(2), np.zeros(13),
                           np.zeros((1, 13)))
        reps = posterior_predictive([store], 40, 500, np.random.default_rng(1))
        pooled = np.vstack([r.values for r in reps])
        direct = simulate_model(p, 20_000, np.random.default_rng(2)).values
        for j in range(2):
            assert stats.ks_2samp(pooled[:, j], direct[:, j]).pvalue > 0.01

    def test_support_of_replicates(self):
        p = scenario_params("1.3")
        store = ChainStore(p.to_flat()[None], np.zeros(1), free_names(2), np.zeros(13),
                           np.zeros((1, 13)))
        reps = posterior_predictive([store], 5, 2000, np.random.default_rng(3))
        bound = p.u[1] + p.tail.sigma[1] / abs(p.tail.gamma[1])
        for r in reps:
            assert np.all(r.values[:, 1] < bound)

    def test_empty(self):
        with pytest.raises(UsageError):
            posterior_predictive([], 10, 10, np.random.default_rng(0))

    def test_tables(self, small_data, small_chains):
        reps = posterior_predictive(small_chains, 30, small_data.n, np.random.default_rng(5))
        qq = qq_table(small_data, reps)
        assert len(qq) == 2 * 99
        assert all(lo <= med <= hi for _, _, _, lo, med, hi in qq)
        dep = dependence_table(small_data, reps)
        assert [r[0] for r in dep].count("tau") == 1 and dep[-1][1] == ""


class TestReport:
    def artifacts(self, data, chains):
        return build_artifacts(data, TINY, chains, np.random.default_rng(9), n_rep=20,
                               ensemble_size=60, max_score_obs=60)

    def test_files_headers_schema_and_bytes(self, tmp_path, small_data, small_chains):
        paths = report(self.artifacts(small_data, small_chains), tmp_path / "a")
        assert sorted(p.name for p in paths) == sorted(REPORT_FILES)
        assert sorted(p.name for p in (tmp_path / "a").iterdir()) == sorted(REPORT_FILES)
        head = lambda n: (tmp_path / "a" / n).read_text().splitlines()[0]  # noqa: E731
        assert head("qq.csv") == ",".join(QQ_HEADER)
        assert head("dependence.csv") == ",".join(DEPENDENCE_HEADER)
        assert head("scores.csv") == "model,ES,OWES_W1,OWES_W2,TWES_W1,TWES_W2"
        assert head("chains.csv").split(",")[:3] == ["chain", "draw", "mu_1"]
        summary = json.loads((tmp_path / "a" / "summary.json").read_text())
        jsonschema.validate(summary, load_schema("summary"))
        report(self.artifacts(small_data, small_chains), tmp_path / "b")
        for name in REPORT_FILES:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_unwritable_directory(self, tmp_path, small_data, small_chains):
        blocker = tmp_path / "file"
        blocker.write_text("")
        with pytest.raises(OSError):
            report(self.artifacts(small_data, small_chains), blocker / "sub")


class TestConfig:
    def test_defaults(self):
        cfg = load_config(None)
        assert cfg.sampler_config(3) == SamplerConfig(seed=3)

    def test_overrides(self, tmp_path, small_data):
        p = write(tmp_path, json.dumps({"sampler": {"n_iter": 100, "burn_in": 50},
                                        "prior": {"delta": 2.0, "s_u": [5, 5]}}), "c.json")
        cfg = load_config(p)
        assert cfg.sampler_config(0).n_iter == 100
        spec = cfg.prior_for(small_data)
        assert spec.delta == 2.0 and np.array_equal(spec.s_u, [5, 5])

    def test_invalid(self, tmp_path):
        with pytest.raises(UsageError):
            load_config(write(tmp_path, json.dumps({"sampler": {"bogus": 1}}), "c.json"))


class TestCli:
    CONFIG = {"sampler": {"n_iter": 300, "burn_in": 200, "thin": 5, "n_chains": 2},
              "ppc": {"n_rep": 15, "ensemble_size": 40, "max_score_obs": 40}}

    def test_end_to_end(self, tmp_path, capsys):
        cfg = write(tmp_path, json.dumps(self.CONFIG), "c.json")
        data = tmp_path / "sim.csv"
        base = ["--seed", "7", "--config", str(cfg)]
        assert main(base + ["simulate", "--n", "300", "--out", str(data)]) == 0
        assert load_csv(data).n == 300
        assert main(base + ["fit", "--data", str(data), "--out", str(tmp_path / "ch")]) == 0
        manifest = json.loads((tmp_path / "ch" / "manifest.json").read_text())
        assert manifest["seed"] == 7 and "rhat" in manifest["diagnostics"]
        common = ["--data", str(data), "--chains", str(tmp_path / "ch")]
        assert main(base + ["ppc", *common, "--out", str(tmp_path / "ppc")]) == 0
        assert (tmp_path / "ppc" / "qq.csv").exists()
        assert main(base + ["score", *common, "--out", str(tmp_path / "s.csv")]) == 0
        assert main(base + ["report", *common, "--out", str(tmp_path / "r1")]) == 0
        assert main(base + ["report", *common, "--out", str(tmp_path / "r2")]) == 0
        for name in REPORT_FILES:
            assert (tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes()

    def test_scenario_command(self, tmp_path):
        cfg = write(tmp_path, json.dumps({**self.CONFIG, "scenario": {"n_points": 300}}), "c.json")
        out = tmp_path / "scen.json"
        assert main(["--config", str(cfg), "scenario", "--name", "1.3", "--replications", "1",
                     "--out", str(out)]) == 0
        assert set(json.loads(out.read_text())["rows"]) == set(summary_names(2))

    def test_detrend_command(self, tmp_path, rng):
        y, t = seasonal_series(np.array([1.0, 0.5, 0.5, 0.3]), 100, rng)
        lines = ["day,s1"] + [f"{int(a)},{float(b)!r}" for a, b in zip(t, y)]
        src = write(tmp_path, "\n".join(lines) + "\n")
        out = tmp_path / "e.csv"
        assert main(["detrend", "--data", str(src), "--out", str(out),
                     "--acf", str(tmp_path / "acf.csv")]) == 0
        assert out.read_text().splitlines()[0] == "day,E_s1"
        assert len(out.read_text().splitlines()) == 100

    def test_usage_errors(self, tmp_path, capsys):
        assert main(["fit", "--data", str(tmp_path / "missing.csv"), "--out", "x"]) == 2
        bad = write(tmp_path, "a,b\n1,zz\n")
        assert main(["fit", "--data", str(bad), "--out", str(tmp_path / "o")]) == 2
        assert "error" in capsys.readouterr().err

    def test_model_failure_exit_code(self, tmp_path):
        src = write(tmp_path, "day,s\n" + "".join(f"{i},1.0\n" for i in range(30)))
        assert main(["detrend", "--data", str(src), "--out", str(tmp_path / "e.csv")]) == 1
