import json

import numpy as np
import pytest
from click.testing import CliRunner

from quacklab import GameConfig, PiecewiseRule, StrategyProfile
from quacklab.cli import main


@pytest.fixture()
def runner():
    return CliRunner()


def invoke(runner, args):
    return runner.invoke(main, args, catch_exceptions=False)


class TestRuleCommand:
    def test_max_rule_endpoint(self, runner, tmp_path):
        out = tmp_path / "max.json"
        res = invoke(runner, ["rule", "max", "--epsilon", "0.6667", "--grid", "1024",
                              "--out", str(out)])
        assert res.exit_code == 0
        data = json.loads(out.read_text())
        m_end, phi_end = data["grid"][-1]
        assert m_end == 1.0
        assert abs(phi_end - 0.7778) <= 1e-4  # 1 - eps/3
        assert data["meta"]["tool"] == "quacklab"
        assert data["meta"]["options"]["epsilon"] == 0.6667

    def test_roundtrip_bit_exact(self, runner, tmp_path):
        out = tmp_path / "min.json"
        res = invoke(runner, ["rule", "min", "--epsilon", "0.2", "--grid", "1400",
                              "--out", str(out)])
        assert res.exit_code == 0
        rule = PiecewiseRule.load(str(out))
        rule.save(str(tmp_path / "again.json"))
        back = PiecewiseRule.load(str(tmp_path / "again.json"))
        assert np.array_equal(rule.grid_m, back.grid_m)
        assert np.array_equal(rule.grid_phi, back.grid_phi)

    def test_missing_epsilon_exits_1(self, runner, tmp_path):
        res = runner.invoke(main, ["rule", "max", "--out", str(tmp_path / "x.json")])
        assert res.exit_code == 1
        err = json.loads(res.stderr.strip().splitlines()[-1])
        assert "epsilon" in err["error"]


class TestVerifyCommand:
    def test_indifference_pass(self, runner, tmp_path):
        out = tmp_path / "r.json"
        invoke(runner, ["rule", "max", "--epsilon", "0.5", "--grid", "1024", "--out", str(out)])
        res = invoke(runner, ["verify", "indifference", "--rule", str(out),
                              "--grid-points", "51"])
        assert res.exit_code == 0
        payload = json.loads(res.output)
        assert payload["result"]["passed"]
        assert payload["result"]["spread"] <= 1e-4

    def test_expert_br_pass(self, runner, tmp_path):
        out = tmp_path / "r.json"
        invoke(runner, ["rule", "max", "--epsilon", "0.5", "--grid", "1024", "--out", str(out)])
        res = invoke(runner, ["verify", "expert-br", "--rule", str(out),
                              "--grid-points", "101"])
        assert res.exit_code == 0
        payload = json.loads(res.output)
        assert payload["result"]["max_regret"] <= 1e-6

    def test_tampered_rule_fails(self, runner, tmp_path):
        out = tmp_path / "r.json"
        invoke(runner, ["rule", "max", "--epsilon", "0.5", "--grid", "1024", "--out", str(out)])
        data = json.loads(out.read_text())
        data["grid"] = [[m, 0.5] for m, _ in data["grid"]]  # turn it into the coin judge
        out.write_text(json.dumps(data))
        res = runner.invoke(main, ["verify", "indifference", "--rule", str(out),
                                   "--grid-points", "21"])
        assert res.exit_code == 1


class TestSimulateCommand:
    def test_end_to_end_and_deterministic(self, runner, tmp_path):
        from quacklab import ExpertStrategy, QuackStrategy, build_max_rule

        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(GameConfig(0.5).to_json_dict()))
        prof_path = tmp_path / "prof.json"
        prof = StrategyProfile(
            ExpertStrategy.truthful(), QuackStrategy.uniform(), build_max_rule(0.5, 1024)
        )
        prof_path.write_text(json.dumps(prof.to_json_dict()))
        args = ["simulate", "--config", str(cfg), "--profile", str(prof_path),
                "--rounds", "100000", "--seed", "9", "--out", str(tmp_path / "rep.json")]
        res = invoke(runner, args)
        assert res.exit_code == 0
        first = (tmp_path / "rep.json").read_text()
        payload = json.loads(first)
        assert abs(payload["report"]["judge_accuracy"] + payload["report"]["quack_win_rate"] - 1) == 0
        assert payload["meta"]["seed"] == 9
        csv = (tmp_path / "rep.json.payoff.csv").read_text()
        assert csv.splitlines()[0] == "m,payoff,stderr"
        res2 = invoke(runner, args)
        assert res2.exit_code == 0
        assert (tmp_path / "rep.json").read_text() == first


class TestMetricsCommand:
    def test_csv_columns_and_values(self, runner, tmp_path):
        out = tmp_path / "metrics.csv"
        res = invoke(runner, ["metrics", "--epsilon-grid", "0.25:0.75:0.25",
                              "--out", str(out)])
        assert res.exit_code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "eps,learn_prob,learn_prob_paper_stated,var_reduction"
        row = [float(v) for v in lines[2].split(",")]
        assert row[0] == 0.5
        assert abs(row[1] - (1 - 0.5 + 0.25 / 3)) < 1e-12
        assert abs(row[2] - (1 - 0.25 / 3)) < 1e-12
        meta = json.loads((tmp_path / "metrics.csv.meta.json").read_text())
        assert meta["options"]["epsilon_grid"] == "0.25:0.75:0.25"
        cond = (out.parent / (out.name + ".conditional.csv")).read_text().splitlines()
        assert cond[0].startswith("eps,omega,")


class TestExtCommands:
    def test_identity(self, runner, tmp_path):
        out = tmp_path / "id.json"
        res = invoke(runner, ["ext", "identity", "--p1", "0.55", "--epsilon", "0.25",
                              "--out", str(out)])
        assert res.exit_code == 0
        sol = json.loads(out.read_text())["solution"]
        assert sol["regime"] == "moderate"
        assert abs(sol["m_bar"] - 9 / 11) < 1e-12
        assert sol["convention"] == "per_identity"

    def test_sequential(self, runner, tmp_path):
        out = tmp_path / "seq.json"
        res = invoke(runner, ["ext", "sequential", "--epsilon", "0.2", "--out", str(out)])
        assert res.exit_code == 0
        sol = json.loads(out.read_text())["solution"]
        assert sol["judge_prefers_simultaneous"]

    def test_one_speaker(self, runner, tmp_path):
        out = tmp_path / "one.json"
        res = invoke(runner, ["ext", "one-speaker", "--q", "0.5", "--u", "0.8",
                              "--epsilon", str(1 / 3), "--out", str(out)])
        assert res.exit_code == 0
        sol = json.loads(out.read_text())["solution"]
        assert sol["regime"] == "cherry_picking"
        assert abs(sol["z"] - 0.881) < 1e-3

    def test_prior_mimic_uniform_corner(self, runner, tmp_path):
        out = tmp_path / "pm.json"
        res = invoke(runner, ["ext", "prior-mimic", "--epsilon", "0.3", "--prior", "uniform",
                              "--grid", "1024", "--out", str(out)])
        assert res.exit_code == 0
        sol = json.loads(out.read_text())["solution"]
        assert sol["corner"] and sol["m_bar"] == 1.0

    def test_noise_nonconvergence_exits_2(self, runner, tmp_path):
        res = runner.invoke(main, ["ext", "noise", "--kind", "gaussian", "--sigma", "0.1",
                                   "--max-iter", "2", "--tol", "1e-12",
                                   "--out", str(tmp_path / "n.json")])
        assert res.exit_code == 2
        err = json.loads(res.stderr.strip().splitlines()[-1])
        assert err["type"] == "ConvergenceError"
        assert "residual" in err


class TestFiguresCommand:
    def test_fig4_series_monotone_and_bounded(self, runner, tmp_path):
        res = invoke(runner, ["figures", "fig4", "--out", str(tmp_path), "--points", "101"])
        assert res.exit_code == 0
        rows = np.loadtxt(tmp_path / "fig4.csv", delimiter=",", skiprows=1)
        m, series, limit = rows[:, 0], rows[:, 1:6], rows[:, 6]
        assert np.allclose(limit, (1 + m) / 2)
        for k in range(5):
            assert np.all(np.diff(series[:, k]) >= -1e-9)
            assert np.all(series[:, k] <= limit + 1e-9)

    def test_fig1_endpoint(self, runner, tmp_path):
        res = invoke(runner, ["figures", "fig1", "--out", str(tmp_path), "--points", "51"])
        assert res.exit_code == 0
        rows = np.loadtxt(tmp_path / "fig1.csv", delimiter=",", skiprows=1)
        assert abs(rows[-1, 1] - (1 - (2 / 3) / 3)) <= 1e-9

    def test_fig5_flat_levels(self, runner, tmp_path):
        res = invoke(runner, ["figures", "fig5", "--out", str(tmp_path), "--points", "81"])
        assert res.exit_code == 0
        low = np.loadtxt(tmp_path / "fig5_u_2_3.csv", delimiter=",", skiprows=1)
        high = np.loadtxt(tmp_path / "fig5_u_4_5.csv", delimiter=",", skiprows=1)
        mid = np.abs(low[:, 0]) < 0.3
        assert np.allclose(low[mid, 1], 0.75)
        assert np.allclose(high[np.abs(high[:, 0]) < 0.3, 1], 0.375)

    def test_fig2_flagged_extrapolated(self, runner, tmp_path):
        res = invoke(runner, ["figures", "fig2", "--out", str(tmp_path), "--points", "41"])
        assert res.exit_code == 0
        meta = json.loads((tmp_path / "fig2.csv.meta.json").read_text())
        assert meta["flags"]["extrapolated"]
