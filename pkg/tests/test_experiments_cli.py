import json
import math

import pytest
from click.testing import CliRunner

from pluralitysim import cli, constants, experiments, serialize_rule, skewed_tiebreak_rule
from pluralitysim.engine import Dynamics, gen_balanced_biased
from pluralitysim.experiments import (
    CSV_COLUMNS,
    RunRecord,
    read_records,
    records_to_csv,
    scaling_bias,
    wilson_interval,
    write_records,
)
from pluralitysim.rules import three_majority


class TestRecords:
    def test_csv_round_trip(self, tmp_path):
        records = [
            RunRecord("exp", 100, 3, None, 5, None, 0, 123, 7, 1, True, True),
            RunRecord("exp", 100, None, 4, None, 0.25, 1, 456, 9, None, False, False),
        ]
        path = tmp_path / "r.csv"
        write_records(records, str(path))
        assert read_records(str(path)) == records

    def test_schema_order(self):
        text = records_to_csv([])
        assert text.splitlines()[0] == ",".join(CSV_COLUMNS)

    def test_header_mismatch_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError):
            read_records(str(path))


class TestDeterminism:
    def test_workers_do_not_change_records(self):
        configs = [({"k": 3, "s": 40}, gen_balanced_biased(2000, 3, 40))]
        kwargs = dict(
            dynamics=Dynamics.from_rule(three_majority()),
            configs=configs,
            trials=16,
            seed=31337,
        )
        solo, _ = experiments.simulate_experiment("det", workers=1, **kwargs)
        multi, _ = experiments.simulate_experiment("det", workers=8, **kwargs)
        assert records_to_csv(solo) == records_to_csv(multi)

    def test_rerun_identical(self):
        records1, s1 = experiments.median_failure_experiment(2000, trials=8, seed=5)
        records2, s2 = experiments.median_failure_experiment(2000, trials=8, seed=5)
        assert records_to_csv(records1) == records_to_csv(records2)
        assert s1 == s2


class TestScalingBias:
    def test_prescription_used_when_feasible(self):
        n = 10**7
        ln = math.log(n)
        lam = min(4.0, (n / ln) ** (1 / 3))
        expected = math.ceil(22 * math.sqrt(lam * n * ln))
        s, fell_back = scaling_bias(n, 2)
        assert (s, fell_back) == (expected, False)

    def test_fallback_at_desk_scale(self):
        s, fell_back = scaling_bias(100_000, 32)
        assert fell_back and s == 100_000 // 32


class TestWilson:
    def test_extremes(self):
        lo, hi = wilson_interval(0, 50)
        assert lo == 0.0 and hi < 0.1
        lo, hi = wilson_interval(50, 50)
        assert hi == 1.0 and lo > 0.9

    def test_contains_phat(self):
        lo, hi = wilson_interval(30, 50)
        assert lo < 0.6 < hi


class TestExperimentSummaries:
    def test_summary_schema(self):
        _, summary = experiments.scaling_k_experiment(5000, [2, 4], trials=5, seed=2)
        assert set(summary) >= {"experiment", "params", "points"}
        for point in summary["points"]:
            assert set(point) == {"sweep", "median_rounds", "majority_rate", "ci95"}

    def test_trials_validated(self):
        with pytest.raises(ValueError):
            experiments.scaling_k_experiment(1000, [2], trials=0, seed=1)

    def test_bias_decrease_s_too_small(self):
        with pytest.raises(ValueError):
            experiments.bias_decrease_experiment(20, 3, trials=10, seed=1)

    def test_bias_decrease_any_beats_fixed(self):
        _, summary = experiments.bias_decrease_experiment(2500, 36, trials=2000, seed=4)
        est = summary["estimates"]
        assert est["any_j"] >= est["fixed_j"]

    def test_lb_growth_warns_on_hypothesis(self):
        _, summary = experiments.lb_growth_experiment(5000, [16], 0.3, trials=3, seed=3)
        assert any("hypothesis" in w for w in summary["warnings"])


runner = CliRunner()


class TestCli:
    def test_expected_table(self):
        result = runner.invoke(cli.main, ["expected", "--counts", "2,1"])
        assert result.exit_code == 0
        assert "0.740741" in result.output
        assert "s=1" in result.output

    def test_expected_median_dynamics(self):
        result = runner.invoke(cli.main, ["expected", "--counts", "1,1,1", "--dynamics", "median"])
        assert result.exit_code == 0

    def test_classify_3maj_exit0(self):
        result = runner.invoke(cli.main, ["classify", "3maj", "--k", "8"])
        assert result.exit_code == 0
        assert json.loads(result.output)["in_m3"] is True

    def test_classify_median_exit1(self):
        result = runner.invoke(cli.main, ["classify", "median", "--k", "3"])
        assert result.exit_code == 1
        payload = json.loads(result.output)
        assert payload["uniform_counterexample"] == [0, 1, 2]

    def test_classify_rule_file(self, tmp_path):
        path = tmp_path / "rule.txt"
        path.write_text(serialize_rule(skewed_tiebreak_rule()))
        result = runner.invoke(cli.main, ["classify", str(path)])
        assert result.exit_code == 1  # clear-majority but not uniform
        payload = json.loads(result.output)
        assert payload["clear_majority"] is True and payload["uniform"] is False

    def test_classify_malformed_file_exit2(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("k=3\n0 1 2 -> 9\n")
        result = runner.invoke(cli.main, ["classify", str(path)])
        assert result.exit_code == 2

    def test_classify_missing_k_usage_error(self):
        result = runner.invoke(cli.main, ["classify", "3maj"])
        assert result.exit_code == 2

    def test_simulate_writes_csv(self, tmp_path):
        out = tmp_path / "runs.csv"
        result = runner.invoke(
            cli.main,
            [
                "simulate",
                "--n", "500", "--k", "2,3", "--s", "60",
                "--trials", "4", "--seed", "11", "--out", str(out),
            ],
        )
        assert result.exit_code == 0, result.output
        records = read_records(str(out))
        assert len(records) == 8
        summary = json.loads(result.output)
        assert len(summary["points"]) == 2

    def test_simulate_trials_zero_exit2(self):
        result = runner.invoke(cli.main, ["simulate", "--trials", "0"])
        assert result.exit_code == 2

    def test_simulate_byte_identical_across_threads(self, tmp_path):
        args = ["simulate", "--n", "400", "--k", "3", "--s", "40", "--trials", "12", "--seed", "7"]
        out1, out8 = tmp_path / "a.csv", tmp_path / "b.csv"
        r1 = runner.invoke(cli.main, args + ["--out", str(out1), "--threads", "1"])
        r8 = runner.invoke(cli.main, args + ["--out", str(out8), "--threads", "8"])
        assert r1.exit_code == 0 and r8.exit_code == 0
        assert out1.read_bytes() == out8.read_bytes()

    def test_simulate_counts_init(self, tmp_path):
        out = tmp_path / "m.csv"
        result = runner.invoke(
            cli.main,
            [
                "simulate", "--init", "counts", "--counts", "30,34,36",
                "--dynamics", "median", "--trials", "3", "--seed", "2",
                "--out", str(out),
            ],
        )
        assert result.exit_code == 0, result.output
        assert len(read_records(str(out))) == 3

    def test_simulate_adversary_flag(self):
        result = runner.invoke(
            cli.main,
            ["simulate", "--n", "300", "--k", "2", "--s", "80", "--trials", "2",
             "--adversary", "demote:5", "--seed", "3"],
        )
        assert result.exit_code == 0
        bad = runner.invoke(cli.main, ["simulate", "--adversary", "steal:5"])
        assert bad.exit_code == 2

    def test_plot_script_emitted(self, tmp_path):
        out = tmp_path / "runs.csv"
        result = runner.invoke(
            cli.main,
            ["simulate", "--n", "200", "--k", "2", "--s", "50", "--trials", "2",
             "--seed", "5", "--out", str(out), "--plot-script"],
        )
        assert result.exit_code == 0
        script = tmp_path / "runs.csv.plot.py"
        assert script.exists()
        compile(script.read_text(), str(script), "exec")

    def test_median_failure_cmd(self, tmp_path):
        out = tmp_path / "mf.csv"
        result = runner.invoke(
            cli.main,
            ["median-failure", "--n", "3000", "--trials", "10", "--seed", "1", "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        summary = json.loads(result.output)
        assert summary["estimates"]["median_winner_rate"] > 0.5

    def test_bias_decrease_cmd(self):
        result = runner.invoke(
            cli.main, ["bias-decrease", "--n", "2500", "--k", "36", "--trials", "400", "--seed", "8"]
        )
        assert result.exit_code == 0, result.output
        payload = json.loads(result.output)
        assert payload["estimates"]["passed"] is True

    def test_scaling_k_cmd_small(self):
        result = runner.invoke(
            cli.main, ["scaling-k", "--n", "4000", "--k", "2,4", "--trials", "4", "--seed", "6"]
        )
        assert result.exit_code == 0, result.output
        summary = json.loads(result.output)
        assert len(summary["points"]) == 2

    def test_h_speedup_cmd_small(self):
        result = runner.invoke(
            cli.main,
            ["h-speedup", "--n", "2000", "--k", "4", "--h", "3,5", "--trials", "6", "--seed", "10"],
        )
        assert result.exit_code in (0, 1), result.output
        summary = json.loads(result.output)
        assert summary["checks"]["floor"] == constants.H_SPEEDUP_TAU_FLOOR

    def test_lb_growth_cmd_small(self):
        result = runner.invoke(
            cli.main,
            ["lb-growth", "--n", "4000", "--k", "2,4", "--eps", "0.3", "--trials", "4", "--seed", "12"],
        )
        assert result.exit_code == 0, result.output


def test_median_failure_start_under_3maj_favors_plurality():
    # the same (0.30, 0.34, 0.36) start under 3-majority goes to the
    # plurality color in at least 3/4 of trials
    from pluralitysim.engine import gen_balanced_biased  # noqa: F401 (context)
    from pluralitysim import new_configuration

    c0 = new_configuration([3000, 3400, 3600])
    records, summary = experiments.simulate_experiment(
        "3maj-on-median-start",
        Dynamics.from_rule(three_majority()),
        [({"k": 3}, c0)],
        trials=40,
        seed=90,
    )
    plurality_wins = sum(r.winner == 2 for r in records)
    assert plurality_wins >= 0.75 * len(records)


def test_scaling_binary_case_fast():
    # k = 2 reduces to the binary case: median consensus time well under 40
    _, summary = experiments.scaling_k_experiment(100_000, [2], trials=50, seed=14)
    assert summary["points"][0]["median_rounds"] <= 40


class TestCliExtra:
    def test_simulate_agent_engine(self, tmp_path):
        out = tmp_path / "agent.csv"
        result = runner.invoke(
            cli.main,
            ["simulate", "--n", "300", "--k", "3", "--s", "60", "--trials", "3",
             "--seed", "4", "--engine", "agent", "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        assert len(read_records(str(out))) == 3

    def test_simulate_hmaj_dynamics(self):
        result = runner.invoke(
            cli.main,
            ["simulate", "--dynamics", "hmaj:5", "--n", "400", "--k", "3",
             "--s", "80", "--trials", "3", "--seed", "4"],
        )
        assert result.exit_code == 0, result.output

    def test_table_dynamics_from_file(self, tmp_path):
        path = tmp_path / "rule.txt"
        path.write_text(serialize_rule(skewed_tiebreak_rule()))
        result = runner.invoke(
            cli.main,
            ["simulate", "--dynamics", f"table:{path}", "--init", "three-color",
             "--n", "600", "--s", "30", "--trials", "3", "--seed", "4"],
        )
        assert result.exit_code == 0, result.output
        bad = runner.invoke(cli.main, ["simulate", "--dynamics", "table:/nonexistent"])
        assert bad.exit_code == 2

    def test_expected_hmaj(self):
        result = runner.invoke(
            cli.main, ["expected", "--counts", "2,1", "--dynamics", "hmaj:3"]
        )
        assert result.exit_code == 0
        assert "0.740741" in result.output
