"""Operator command-line frontend.

Subcommands: dataset-build (premise masking), rollout (run a policy over a
dataset), eval (metric reports from trajectory logs or live protocols), and
serve (the HTTP session service). Configuration precedence is flags over a
TOML config file over built-in defaults.
"""

from __future__ import annotations

import concurrent.futures
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Optional

import click

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from . import datagen, metrics
from .core import (
    EnvConfig,
    GrilError,
    Problem,
    ProblemKind,
    RewardConfig,
    to_json,
    validate_reward_config,
)
from .judge import JudgeConfig
from .policy import PolicyKind, PolicySpec, RemoteEndpoint, rollout

EXIT_DOMAIN_ERROR = 1


def _load_config_file(path: Optional[str]) -> dict[str, Any]:
    if not path:
        return {}
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _build_configs(
    cfg_file: dict[str, Any],
    max_turns: Optional[int],
    alpha: Optional[float],
    beta: Optional[float],
    gamma_d: Optional[float],
    lam: Optional[float],
) -> tuple[EnvConfig, RewardConfig, JudgeConfig]:
    env_section = cfg_file.get("env", {})
    reward_section = cfg_file.get("reward", {})
    judge_section = cfg_file.get("judge", {})

    env_cfg = EnvConfig(
        max_turns=max_turns if max_turns is not None else env_section.get("max_turns", 4),
        strict_format=env_section.get("strict_format", False),
    )
    reward_cfg = RewardConfig.from_dict(reward_section)
    overrides = {"alpha": alpha, "beta": beta, "gamma_d": gamma_d, "lam": lam}
    reward_cfg = replace(
        reward_cfg, **{k: v for k, v in overrides.items() if v is not None}
    )
    violations = validate_reward_config(reward_cfg)
    if violations:
        raise GrilError("invalid reward config: " + "; ".join(violations))
    judge_cfg = JudgeConfig(
        numeric_tolerance=judge_section.get("numeric_tolerance", 1e-6),
        case_sensitive=judge_section.get("case_sensitive", False),
    )
    return env_cfg, reward_cfg, judge_cfg


def load_problems(path: str) -> list[Problem]:
    problems: list[Problem] = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            if not d.get("id"):
                d["id"] = f"{d.get('source') or 'corpus'}#{i}"
            problems.append(Problem.from_dict(d))
    if not problems:
        raise GrilError(f"no problems found in {path}")
    return problems


def _write_lines(path: str, lines: list[str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(line + "\n")


def _make_oracle(spec: str, endpoint_url: str, model: str):
    if spec == "permissive":
        return datagen.PermissiveOracle()
    if spec == "stub":
        return datagen.StubOracle()
    if spec == "chat":
        if not endpoint_url:
            raise GrilError("--endpoint is required for the chat oracle")
        return datagen.ChatOracle(
            RemoteEndpoint(base_url=endpoint_url, model_name=model, temperature=0.0)
        )
    raise GrilError(f"unknown oracle: {spec}")


def _make_policy(
    kind: str, script_path: Optional[str], endpoint_url: str, model: str
) -> PolicySpec:
    if kind == "always_clarify":
        return PolicySpec(kind=PolicyKind.ALWAYS_CLARIFY)
    if kind == "always_solve":
        return PolicySpec(kind=PolicyKind.ALWAYS_SOLVE)
    if kind == "scripted":
        if not script_path:
            raise GrilError("--script is required for the scripted policy")
        data = json.loads(Path(script_path).read_text(encoding="utf-8"))
        if isinstance(data, dict):
            # Per-problem scripts handled by the caller; flag via marker.
            raise GrilError("per-problem script maps are not supported; pass a list")
        return PolicySpec(kind=PolicyKind.SCRIPTED, script=tuple(data))
    if kind == "remote":
        if not endpoint_url:
            raise GrilError("--endpoint is required for the remote policy")
        return PolicySpec(
            kind=PolicyKind.REMOTE,
            endpoint=RemoteEndpoint(base_url=endpoint_url, model_name=model),
        )
    raise GrilError(f"unknown policy: {kind}")


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--max-turns", type=int, default=None)
@click.option("--alpha", type=float, default=None)
@click.option("--beta", type=float, default=None)
@click.option("--gamma-d", type=float, default=None)
@click.option("--lambda", "lam", type=float, default=None)
@click.pass_context
def main(ctx, config_path, seed, max_turns, alpha, beta, gamma_d, lam):
    """Missing-premise interaction environment toolkit."""
    ctx.ensure_object(dict)
    try:
        cfg_file = _load_config_file(config_path)
        env_cfg, reward_cfg, judge_cfg = _build_configs(
            cfg_file, max_turns, alpha, beta, gamma_d, lam
        )
    except (GrilError, OSError, tomllib.TOMLDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        ctx.exit(EXIT_DOMAIN_ERROR)
    ctx.obj.update(
        seed=seed, env_cfg=env_cfg, reward_cfg=reward_cfg, judge_cfg=judge_cfg
    )


@main.command("dataset-build")
@click.argument("corpus_path", type=click.Path(exists=True))
@click.option("--oracle", "oracle_spec", default="stub", show_default=True,
              type=click.Choice(["stub", "permissive", "chat"]))
@click.option("--fraction", type=float, default=0.5, show_default=True)
@click.option("--retry-masks", type=int, default=0, show_default=True,
              help="Resample up to N further masks when a sampled mask is redundant.")
@click.option("--endpoint", "endpoint_url", default="", envvar="GRIL_ENDPOINT")
@click.option("--model", default="oracle-model")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--audit-out", "audit_path", default=None, type=click.Path())
@click.option("--audit-fraction", type=float, default=0.02, show_default=True)
@click.pass_context
def cmd_dataset_build(
    ctx, corpus_path, oracle_spec, fraction, retry_masks, endpoint_url, model,
    out_path, audit_path, audit_fraction,
):
    """Mask premises in a complete corpus and emit a mixed dataset."""
    cfg = ctx.obj
    try:
        corpus = load_problems(corpus_path)
        oracle = _make_oracle(oracle_spec, endpoint_url, model)
        report = datagen.build_dataset_report(
            corpus, oracle, incomplete_fraction=fraction, seed=cfg["seed"],
            retry_masks=retry_masks,
        )
        dataset = report.dataset
        _write_lines(out_path, [to_json(p) for p in dataset])
        if audit_path:
            sample = datagen.audit_sample(dataset, fraction=audit_fraction, seed=cfg["seed"])
            _write_lines(audit_path, [json.dumps(d, ensure_ascii=False) for d in sample])
    except (GrilError, OSError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        ctx.exit(EXIT_DOMAIN_ERROR)
    click.echo(
        f"wrote {out_path}: {report.n_incomplete} incomplete / "
        f"{report.n_complete} complete ({report.n_incomplete}/{report.n_complete}), "
        f"{report.n_redundant_dropped} dropped-redundant, "
        f"{report.n_no_candidates} no-candidate"
    )


@main.command("rollout")
@click.argument("dataset_path", type=click.Path(exists=True))
@click.option("--policy", "policy_kind", default="always_clarify", show_default=True,
              type=click.Choice(["always_clarify", "always_solve", "scripted", "remote"]))
@click.option("--script", "script_path", default=None, type=click.Path(exists=True))
@click.option("--endpoint", "endpoint_url", default="", envvar="GRIL_ENDPOINT")
@click.option("--model", default="policy-model")
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--human", is_flag=True, help="Type assistant responses interactively.")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def cmd_rollout(
    ctx, dataset_path, policy_kind, script_path, endpoint_url, model, jobs, human, out_path
):
    """Run one episode per dataset problem and append the trajectory log."""
    cfg = ctx.obj
    try:
        problems = load_problems(dataset_path)
    except (GrilError, OSError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        ctx.exit(EXIT_DOMAIN_ERROR)

    if human:
        trajectories = [_human_rollout(p, cfg) for p in problems]
        errored = 0
    else:
        try:
            policy = _make_policy(policy_kind, script_path, endpoint_url, model)
        except GrilError as exc:
            click.echo(f"error: {exc}", err=True)
            ctx.exit(EXIT_DOMAIN_ERROR)

        def run(problem: Problem):
            return rollout(policy, problem, cfg["env_cfg"], cfg["reward_cfg"], cfg["judge_cfg"])

        trajectories, errored = [], 0
        if jobs <= 1:
            for p in problems:
                try:
                    trajectories.append(run(p))
                except GrilError as exc:
                    errored += 1
                    click.echo(f"episode {p.id} failed: {exc}", err=True)
        else:
            with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
                futures = {pool.submit(run, p): p for p in problems}
                for fut in concurrent.futures.as_completed(futures):
                    try:
                        trajectories.append(fut.result())
                    except GrilError as exc:
                        errored += 1
                        click.echo(f"episode {futures[fut].id} failed: {exc}", err=True)
            trajectories.sort(key=lambda t: t.problem_id)

    if not trajectories:
        click.echo("error: no episodes completed", err=True)
        ctx.exit(EXIT_DOMAIN_ERROR)
    with open(out_path, "a", encoding="utf-8") as fh:
        for traj in trajectories:
            fh.write(to_json(traj) + "\n")
    report = metrics.evaluate(trajectories, max_turns=cfg["env_cfg"].max_turns)
    click.echo(
        f"episodes={report.n_episodes} SR={report.success_rate:.4f} "
        f"PD={report.premise_detection:.4f}"
    )
    if errored:
        ctx.exit(EXIT_DOMAIN_ERROR)


def _human_rollout(problem: Problem, cfg: dict):
    from .env import finalize, reset, step

    state = reset(problem, cfg["env_cfg"])
    click.echo(state.history[-1].content)
    while not state.done:
        text = click.prompt("assistant")
        result = step(state, text, cfg["env_cfg"], cfg["reward_cfg"], cfg["judge_cfg"])
        click.echo(f"[event={result.event.value} reward={result.turn_reward}]")
        if result.feedback:
            click.echo(result.feedback.content)
    return finalize(state, cfg["reward_cfg"])


@main.command("eval")
@click.argument("input_path", type=click.Path(exists=True))
@click.option("--mode", default="standard", show_default=True,
              type=click.Choice(["standard", "classification", "gap",
                                 "forced-feedback", "robustness"]))
@click.option("--policy", "policy_kind", default="always_clarify",
              type=click.Choice(["always_clarify", "always_solve", "scripted", "remote"]))
@click.option("--script", "script_path", default=None, type=click.Path(exists=True))
@click.option("--endpoint", "endpoint_url", default="", envvar="GRIL_ENDPOINT")
@click.option("--model", default="policy-model")
@click.option("--condition", default="noisy", type=click.Choice(["noisy", "uninformative"]))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def cmd_eval(ctx, input_path, mode, policy_kind, script_path, endpoint_url, model,
             condition, out_path):
    """Produce a metric report.

    Standard/classification/gap modes read a trajectory log; forced-feedback
    and robustness modes read a dataset and run the named policy.
    """
    cfg = ctx.obj
    try:
        report = _run_eval(
            cfg, input_path, mode, policy_kind, script_path, endpoint_url, model, condition
        )
        Path(out_path).write_text(
            json.dumps(report, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
        )
    except (GrilError, OSError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        ctx.exit(EXIT_DOMAIN_ERROR)
    click.echo(metrics.render_table([_flat(report)], title=f"mode={mode}"))


def _flat(d: dict) -> dict:
    return {k: v for k, v in d.items() if not isinstance(v, (dict, list))}


def _load_trajectories(path: str):
    from .core import Trajectory

    trajectories = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                trajectories.append(Trajectory.from_dict(json.loads(line)))
    if not trajectories:
        raise GrilError(f"no trajectories found in {path}")
    return trajectories


def _run_eval(cfg, input_path, mode, policy_kind, script_path, endpoint_url, model,
              condition) -> dict:
    provenance = metrics.report_provenance(seeds={"seed": cfg["seed"]})
    if mode == "standard":
        trajs = _load_trajectories(input_path)
        report = metrics.evaluate(trajs, max_turns=cfg["env_cfg"].max_turns)
        return {**report.to_dict(), "provenance": provenance}
    if mode == "classification":
        trajs = _load_trajectories(input_path)
        pairs = [(t.problem_kind, t.turns[0].action) for t in trajs if t.turns]
        report = metrics.detection_classification(pairs)
        return {**report.to_dict(), "provenance": provenance}
    if mode == "gap":
        trajs = _load_trajectories(input_path)
        measurements = [
            metrics.gap_ratio([rec.assistant.content for rec in t.turns]).to_dict()
            for t in trajs
            if t.turns
        ]
        return {"episodes": measurements, "provenance": provenance}
    policy = _make_policy(policy_kind, script_path, endpoint_url, model)
    problems = load_problems(input_path)
    incomplete = [p for p in problems if p.kind is ProblemKind.INCOMPLETE]
    if not incomplete:
        raise GrilError(f"mode {mode} requires incomplete problems in the dataset")
    if mode == "forced-feedback":
        report = metrics.forced_feedback_eval(
            policy, incomplete, cfg["env_cfg"], cfg["reward_cfg"], cfg["judge_cfg"]
        )
        return {**report.to_dict(), "provenance": provenance}
    # robustness
    seed = cfg["seed"]
    if condition == "noisy":
        distractors = [
            "By the way, the weather is lovely today.",
            "I had pasta for lunch.",
            "Did you watch the game last night?",
            "My cat keeps knocking things off the table.",
        ]
        env_cfg = replace(
            cfg["env_cfg"],
            premise_transform=lambda body: metrics.inject_noise(body, distractors, seed),
        )
        success_rule = None
    else:
        env_cfg = replace(
            cfg["env_cfg"],
            uninformative_provider=lambda: metrics.uninformative_response(seed),
        )
        success_rule = "graceful_stop_counts"
    trajs = [
        rollout(policy, p, env_cfg, cfg["reward_cfg"], cfg["judge_cfg"])
        for p in incomplete
    ]
    from .core import Outcome

    if success_rule:
        successes = sum(1 for t in trajs if t.outcome is Outcome.GRACEFUL_STOP)
    else:
        successes = sum(1 for t in trajs if t.outcome is Outcome.SOLVED_CORRECT)
    return {
        "condition": condition,
        "success_rate": successes / len(trajs),
        "n_episodes": len(trajs),
        "provenance": provenance,
    }


@main.command("serve")
@click.option("--addr", default="127.0.0.1:8777", envvar="GRIL_ADDR", show_default=True)
@click.option("--dataset", "dataset_path", default=None, envvar="GRIL_DATASET",
              type=click.Path(exists=True))
@click.option("--log", "log_path", default=None, type=click.Path())
@click.option("--ttl", "ttl_s", type=float, default=3600.0, show_default=True)
@click.pass_context
def cmd_serve(ctx, addr, dataset_path, log_path, ttl_s):
    """Run the HTTP session service until interrupted."""
    import uvicorn

    from .service import create_app

    cfg = ctx.obj
    try:
        dataset = {}
        if dataset_path:
            dataset = {p.id: p for p in load_problems(dataset_path)}
        host, _, port = addr.partition(":")
        app = create_app(
            dataset=dataset,
            env_cfg=cfg["env_cfg"],
            reward_cfg=cfg["reward_cfg"],
            judge_cfg=cfg["judge_cfg"],
            log_path=log_path,
            ttl_s=ttl_s,
        )
    except (GrilError, OSError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        ctx.exit(EXIT_DOMAIN_ERROR)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8777))


if __name__ == "__main__":
    main()
