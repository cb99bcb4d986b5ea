"""Console smoke test: run one scripted episode against a service URL."""

from __future__ import annotations

import argparse
import json
import sys

from .client import AdapterError, RemoteEnvHandle, run_episode

DEFAULT_SCRIPT = [
    "<think>Missing information.</think><answer>insufficient information</answer>"
] * 8


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gril-env-smoke",
        description="Run a scripted episode against a gril service and print each turn.",
    )
    parser.add_argument("base_url", help="service URL, e.g. http://127.0.0.1:8777")
    parser.add_argument("--problem-ref", help="dataset problem id to play")
    parser.add_argument(
        "--problem-json", help="inline problem as a JSON object (instead of a ref)"
    )
    parser.add_argument(
        "--script", help="JSON file with a list of assistant responses", default=None
    )
    args = parser.parse_args(argv)

    if not args.problem_ref and not args.problem_json:
        parser.error("one of --problem-ref / --problem-json is required")
    problem = json.loads(args.problem_json) if args.problem_json else None
    if args.script:
        with open(args.script, encoding="utf-8") as fh:
            script = json.load(fh)
    else:
        script = DEFAULT_SCRIPT

    handle = RemoteEnvHandle(base_url=args.base_url)
    if not handle.healthy():
        print(f"error: service at {args.base_url} is not healthy", file=sys.stderr)
        return 1
    try:
        last = None
        for result in run_episode(
            handle, script, problem_ref=args.problem_ref, problem=problem
        ):
            last = result
            print(
                f"turn={result.info['turn']} event={result.info['event']} "
                f"reward={result.turn_reward} done={result.done}"
            )
        if last is None or not last.done:
            print("episode did not finish within the script", file=sys.stderr)
            return 1
        print(
            f"outcome={last.info['outcome']} total={last.info['total_reward']}"
        )
    except AdapterError as exc:
        print(f"error: {exc} {json.dumps(exc.body)}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
