import json

import pytest
from click.testing import CliRunner

from gril.cli import main
from gril.core import EnvConfig, Problem, ProblemKind, RewardConfig, to_json
from gril.judge import JudgeConfig
from gril.policy import PolicyKind, PolicySpec, rollout

from helpers import CLARIFY_TEXT, solve_text


@pytest.fixture
def runner():
    return CliRunner()


def write_corpus(path, n=100):
    lines = []
    for i in range(n):
        p = Problem(
            id=f"c{i}",
            kind=ProblemKind.COMPLETE,
            question=f"Ann has {i + 2} apples. Ben has {i + 3} pears. How many fruits?",
            gold_answer=str(2 * i + 5),
        )
        lines.append(to_json(p))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_incomplete_dataset(path, n=4):
    lines = []
    for i in range(n):
        p = Problem(
            id=f"inc{i}",
            kind=ProblemKind.INCOMPLETE,
            question="What is the smallest number?",
            missing_premise=f"The remainder is {i}.",
            gold_answer="168",
        )
        lines.append(to_json(p))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


class TestDatasetBuild:
    def test_even_split_summary(self, runner, tmp_path):
        corpus = tmp_path / "corpus.ndjson"
        out = tmp_path / "dataset.ndjson"
        write_corpus(corpus)
        result = runner.invoke(
            main,
            ["dataset-build", str(corpus), "--oracle", "permissive",
             "--fraction", "0.5", "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        assert "(50/50)" in result.output
        rows = [json.loads(l) for l in out.read_text().splitlines()]
        assert len(rows) == 100

    def test_forty_sixty(self, runner, tmp_path):
        corpus = tmp_path / "corpus.ndjson"
        out = tmp_path / "dataset.ndjson"
        write_corpus(corpus)
        result = runner.invoke(
            main,
            ["dataset-build", str(corpus), "--oracle", "permissive",
             "--fraction", "0.4", "--out", str(out)],
        )
        assert result.exit_code == 0
        assert "(40/60)" in result.output

    def test_audit_file(self, runner, tmp_path):
        corpus = tmp_path / "corpus.ndjson"
        out = tmp_path / "dataset.ndjson"
        audit = tmp_path / "audit.ndjson"
        write_corpus(corpus)
        result = runner.invoke(
            main,
            ["dataset-build", str(corpus), "--oracle", "permissive",
             "--out", str(out), "--audit-out", str(audit)],
        )
        assert result.exit_code == 0
        rows = [json.loads(l) for l in audit.read_text().splitlines()]
        assert len(rows) == 2  # 2% of 100
        assert all(r["human_label"] == "" for r in rows)

    def test_unreadable_path_usage_error(self, runner, tmp_path):
        result = runner.invoke(
            main,
            ["dataset-build", str(tmp_path / "ghost.ndjson"),
             "--out", str(tmp_path / "o")],
        )
        assert result.exit_code == 2

    def test_shortfall_domain_error(self, runner, tmp_path):
        corpus = tmp_path / "corpus.ndjson"
        # No digits -> no candidates anywhere.
        p = Problem(id="c0", kind=ProblemKind.COMPLETE,
                    question="Ann sings. Does she?", gold_answer="yes")
        corpus.write_text(to_json(p) + "\n", encoding="utf-8")
        result = runner.invoke(
            main,
            ["dataset-build", str(corpus), "--oracle", "permissive",
             "--fraction", "1.0", "--out", str(tmp_path / "o")],
        )
        assert result.exit_code == 1
        assert "achievable" in result.output


class TestRollout:
    def test_always_clarify_pd(self, runner, tmp_path):
        dataset = tmp_path / "dataset.ndjson"
        out = tmp_path / "log.ndjson"
        write_incomplete_dataset(dataset)
        result = runner.invoke(
            main,
            ["rollout", str(dataset), "--policy", "always_clarify", "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        assert "PD=1.0000" in result.output

    def test_scripted_log_matches_in_process_byte_for_byte(self, runner, tmp_path):
        dataset = tmp_path / "dataset.ndjson"
        out = tmp_path / "log.ndjson"
        script_file = tmp_path / "script.json"
        write_incomplete_dataset(dataset, n=2)
        script = [CLARIFY_TEXT, solve_text("168")]
        script_file.write_text(json.dumps(script), encoding="utf-8")
        result = runner.invoke(
            main,
            ["rollout", str(dataset), "--policy", "scripted",
             "--script", str(script_file), "--out", str(out)],
        )
        assert result.exit_code == 0, result.output

        spec = PolicySpec(kind=PolicyKind.SCRIPTED, script=tuple(script))
        expected_lines = []
        for i in range(2):
            problem = Problem(
                id=f"inc{i}", kind=ProblemKind.INCOMPLETE,
                question="What is the smallest number?",
                missing_premise=f"The remainder is {i}.", gold_answer="168",
            )
            traj = rollout(spec, problem, EnvConfig(), RewardConfig(), JudgeConfig())
            expected_lines.append(to_json(traj))
        assert out.read_text().splitlines() == expected_lines

    def test_jobs_parallel_sorted(self, runner, tmp_path):
        dataset = tmp_path / "dataset.ndjson"
        out = tmp_path / "log.ndjson"
        write_incomplete_dataset(dataset, n=6)
        result = runner.invoke(
            main,
            ["rollout", str(dataset), "--policy", "always_clarify",
             "--jobs", "4", "--out", str(out)],
        )
        assert result.exit_code == 0
        ids = [json.loads(l)["problem_id"] for l in out.read_text().splitlines()]
        assert ids == sorted(ids)

    def test_empty_dataset_error(self, runner, tmp_path):
        dataset = tmp_path / "empty.ndjson"
        dataset.write_text("\n", encoding="utf-8")
        result = runner.invoke(
            main, ["rollout", str(dataset), "--out", str(tmp_path / "o")]
        )
        assert result.exit_code == 1
        assert "no problems" in result.output

    def test_episode_failure_nonzero_exit(self, runner, tmp_path):
        dataset = tmp_path / "dataset.ndjson"
        out = tmp_path / "log.ndjson"
        write_incomplete_dataset(dataset, n=2)
        script_file = tmp_path / "script.json"
        # One-entry script exhausts mid-episode.
        script_file.write_text(json.dumps([CLARIFY_TEXT]), encoding="utf-8")
        result = runner.invoke(
            main,
            ["rollout", str(dataset), "--policy", "scripted",
             "--script", str(script_file), "--out", str(out)],
        )
        assert result.exit_code == 1


class TestEval:
    def make_log(self, runner, tmp_path, n=4):
        dataset = tmp_path / "dataset.ndjson"
        out = tmp_path / "log.ndjson"
        write_incomplete_dataset(dataset, n=n)
        script_file = tmp_path / "script.json"
        script_file.write_text(
            json.dumps([CLARIFY_TEXT, solve_text("168")]), encoding="utf-8"
        )
        result = runner.invoke(
            main,
            ["rollout", str(dataset), "--policy", "scripted",
             "--script", str(script_file), "--out", str(out)],
        )
        assert result.exit_code == 0
        return dataset, out

    def test_standard_mode(self, runner, tmp_path):
        _, log = self.make_log(runner, tmp_path)
        report_path = tmp_path / "report.json"
        result = runner.invoke(
            main, ["eval", str(log), "--mode", "standard", "--out", str(report_path)]
        )
        assert result.exit_code == 0, result.output
        report = json.loads(report_path.read_text())
        assert report["success_rate"] == 1.0
        assert report["premise_detection"] == 1.0
        assert report["provenance"]["tokenizer"] == "whitespace"

    def test_classification_mode(self, runner, tmp_path):
        _, log = self.make_log(runner, tmp_path)
        report_path = tmp_path / "report.json"
        result = runner.invoke(
            main,
            ["eval", str(log), "--mode", "classification", "--out", str(report_path)],
        )
        assert result.exit_code == 0
        report = json.loads(report_path.read_text())
        assert report["recall"] == 1.0
        assert report["confusion"]["tp"] == 4

    def test_gap_mode(self, runner, tmp_path):
        _, log = self.make_log(runner, tmp_path)
        report_path = tmp_path / "report.json"
        result = runner.invoke(
            main, ["eval", str(log), "--mode", "gap", "--out", str(report_path)]
        )
        assert result.exit_code == 0
        report = json.loads(report_path.read_text())
        assert len(report["episodes"]) == 4
        # Clarify answers contain "insufficient information" -> a match exists.
        assert all(e["suspect_position"] is not None for e in report["episodes"])

    def test_forced_feedback_mode(self, runner, tmp_path):
        dataset, _ = self.make_log(runner, tmp_path)
        report_path = tmp_path / "report.json"
        script_file = tmp_path / "ff.json"
        script_file.write_text(
            json.dumps([CLARIFY_TEXT, solve_text("168")]), encoding="utf-8"
        )
        result = runner.invoke(
            main,
            ["eval", str(dataset), "--mode", "forced-feedback",
             "--policy", "scripted", "--script", str(script_file),
             "--out", str(report_path)],
        )
        assert result.exit_code == 0, result.output
        report = json.loads(report_path.read_text())
        assert report["dcr"] == 1.0 and report["n_not_detected"] == 0

    def test_robustness_uninformative(self, runner, tmp_path):
        dataset, _ = self.make_log(runner, tmp_path)
        report_path = tmp_path / "report.json"
        result = runner.invoke(
            main,
            ["eval", str(dataset), "--mode", "robustness",
             "--condition", "uninformative", "--policy", "always_clarify",
             "--out", str(report_path)],
        )
        assert result.exit_code == 0, result.output
        report = json.loads(report_path.read_text())
        # AlwaysClarify keeps clarifying after the evasion -> graceful stop.
        assert report["success_rate"] == 1.0

    def test_robustness_noisy(self, runner, tmp_path):
        dataset, _ = self.make_log(runner, tmp_path)
        report_path = tmp_path / "report.json"
        script_file = tmp_path / "s.json"
        script_file.write_text(
            json.dumps([CLARIFY_TEXT, solve_text("168")]), encoding="utf-8"
        )
        result = runner.invoke(
            main,
            ["eval", str(dataset), "--mode", "robustness", "--condition", "noisy",
             "--policy", "scripted", "--script", str(script_file),
             "--out", str(report_path)],
        )
        assert result.exit_code == 0, result.output
        report = json.loads(report_path.read_text())
        assert report["success_rate"] == 1.0

    def test_mode_input_mismatch(self, runner, tmp_path):
        _, log = self.make_log(runner, tmp_path)
        result = runner.invoke(
            main,
            ["eval", str(log), "--mode", "forced-feedback",
             "--out", str(tmp_path / "r.json")],
        )
        # A trajectory log is not a dataset of problems.
        assert result.exit_code == 1


class TestGlobalFlags:
    def test_invalid_reward_flag(self, runner, tmp_path):
        dataset = tmp_path / "d.ndjson"
        write_incomplete_dataset(dataset, n=1)
        result = runner.invoke(
            main,
            ["--gamma-d", "1.5", "rollout", str(dataset), "--out", str(tmp_path / "o")],
        )
        assert result.exit_code == 1
        assert "gamma_d" in result.output

    def test_unknown_flag_usage_error(self, runner):
        result = runner.invoke(main, ["--no-such-flag"])
        assert result.exit_code == 2

    def test_config_file_overridden_by_flag(self, runner, tmp_path):
        cfg = tmp_path / "cfg.toml"
        cfg.write_text("[env]\nmax_turns = 2\n", encoding="utf-8")
        dataset = tmp_path / "d.ndjson"
        out = tmp_path / "log.ndjson"
        write_incomplete_dataset(dataset, n=1)
        result = runner.invoke(
            main,
            ["--config", str(cfg), "--max-turns", "3",
             "rollout", str(dataset), "--policy", "always_solve", "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        traj = json.loads(out.read_text().splitlines()[0])
        assert len(traj["turns"]) == 3

    def test_config_file_applies(self, runner, tmp_path):
        cfg = tmp_path / "cfg.toml"
        cfg.write_text("[env]\nmax_turns = 2\n", encoding="utf-8")
        dataset = tmp_path / "d.ndjson"
        out = tmp_path / "log.ndjson"
        write_incomplete_dataset(dataset, n=1)
        result = runner.invoke(
            main,
            ["--config", str(cfg),
             "rollout", str(dataset), "--policy", "always_solve", "--out", str(out)],
        )
        assert result.exit_code == 0
        traj = json.loads(out.read_text().splitlines()[0])
        assert len(traj["turns"]) == 2

    def test_bad_toml_domain_error(self, runner, tmp_path):
        cfg = tmp_path / "cfg.toml"
        cfg.write_text("not [valid", encoding="utf-8")
        result = runner.invoke(main, ["--config", str(cfg), "eval", "--help"])
        assert result.exit_code == 1
