"""Command line interface.

    lockstepsim run --config cfg.json --out rundir/ [--seed N] [--fail-on-safeoff]
    lockstepsim compare RUN_A RUN_B [--alpha A] [--out FILE]
    lockstepsim vote-table --policy 2oo3
    lockstepsim stats --trace rundir/trace.jsonl

Exit codes: 0 success, 1 usage or validation error, 2 safety-relevant
finding when --fail-on-safeoff is set.
"""

from __future__ import annotations

import argparse
import json
import string
import sys
from pathlib import Path

from .config import load_config
from .errors import ConfigError, HarnessError
from .experiment import (
    REPORT_FILENAME,
    compare_runs,
    render_comparison_table,
    run_to_directory,
)
from .fixedpoint import FixedPointTensor, tensor_digest
from .profiling import stats
from .replica import ReplicaOutput
from .voting import Exact, VotingPolicy, vote


class _Parser(argparse.ArgumentParser):
    # usage problems exit 1; code 2 is reserved for safety findings
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="lockstepsim", description="Redundant-inference lockstep simulator")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p_run = sub.add_parser("run", help="run one experiment config")
    p_run.add_argument("--config", required=True, help="experiment config JSON")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_run.add_argument("--fail-on-safeoff", action="store_true",
                       help="exit 2 if the run ends in the safe-off state")

    p_cmp = sub.add_parser("compare", help="compare two run directories")
    p_cmp.add_argument("run_a", help="first run directory or report.json")
    p_cmp.add_argument("run_b", help="second run directory or report.json")
    p_cmp.add_argument("--alpha", type=float, default=0.01)
    p_cmp.add_argument("--out", default=None, help="also write the comparison JSON here")

    p_vt = sub.add_parser("vote-table", help="print the exhaustive verdict table for a policy")
    p_vt.add_argument("--policy", required=True, help="policy name, e.g. 1oo2 or 2oo3")

    p_st = sub.add_parser("stats", help="turnaround statistics from a trace file")
    p_st.add_argument("--trace", required=True, help="trace.jsonl produced by run")
    return parser


def _cmd_run(args) -> int:
    try:
        config = load_config(args.config, seed_override=args.seed)
    except ConfigError as e:
        for msg in e.errors:
            print(msg, file=sys.stderr)
        return 1
    report = run_to_directory(config, args.out)
    total = sum(report.verdict_counts.values())
    print(f"run complete: {total} verdicts {report.verdict_counts}, "
          f"safety={report.safety_final}, out={args.out}")
    if args.fail_on_safeoff and report.safety_final == "safe_off":
        print("safety switch tripped during the run", file=sys.stderr)
        return 2
    return 0


def _load_report(path_str: str) -> dict:
    p = Path(path_str)
    if p.is_dir():
        p = p / REPORT_FILENAME
    if not p.is_file():
        raise ConfigError([f"no report found at {p}"])
    return json.loads(p.read_text())


def _cmd_compare(args) -> int:
    try:
        a = _load_report(args.run_a)
        b = _load_report(args.run_b)
        comparison = compare_runs(a, b, alpha=args.alpha)
    except ConfigError as e:
        for msg in e.errors:
            print(msg, file=sys.stderr)
        return 1
    print(render_comparison_table(comparison))
    if args.out:
        Path(args.out).write_text(json.dumps(comparison, indent=2) + "\n")
    return 0


def agreement_patterns(n: int):
    """Canonical output-agreement patterns for n replicas (first occurrence
    gets label A, the next new value B, and so on)."""
    def extend(prefix, used):
        if len(prefix) == n:
            yield tuple(prefix)
            return
        for label in range(used + 1):
            yield from extend(prefix + [label], max(used, label + 1))

    yield from extend([], 0)


def _pattern_outputs(pattern):
    outputs = []
    for rid, label in enumerate(pattern):
        tensor = FixedPointTensor((1,), (label,))
        outputs.append(
            ReplicaOutput(rid, 0, tensor, 0, tensor_digest(tensor), 0, 0, ())
        )
    return outputs


def _cmd_vote_table(args) -> int:
    try:
        policy = VotingPolicy.named(args.policy)
    except ConfigError as e:
        for msg in e.errors:
            print(msg, file=sys.stderr)
        return 1
    comparator = Exact()
    print(f"policy {policy} (required agreement: {policy.required_agreement})")
    print(f"{'pattern':>8}  {'verdict':>8}  detail")
    for pattern in agreement_patterns(policy.n):
        verdict = vote(_pattern_outputs(pattern), policy, comparator)
        name = "".join(string.ascii_uppercase[v] for v in pattern)
        if verdict.variant == "pass":
            detail = f"agreeing_ids={list(verdict.agreeing_ids)}"
        elif verdict.variant == "mismatch":
            detail = f"groups={[list(g) for g in verdict.groups]}"
        else:
            detail = verdict.reason or ""
        print(f"{name:>8}  {verdict.variant:>8}  {detail}")
    return 0


def _cmd_stats(args) -> int:
    p = Path(args.trace)
    if not p.is_file():
        print(f"no trace file at {p}", file=sys.stderr)
        return 1
    samples = {}
    with open(p) as fp:
        for line in fp:
            rec = json.loads(line)
            if rec.get("kind") == "completion":
                samples.setdefault(rec["replica_id"], []).append(rec["turnaround_ns"])
    if not samples:
        print("trace contains no completion records", file=sys.stderr)
        return 1
    out = {
        str(rid): stats(xs).to_json_dict() for rid, xs in sorted(samples.items())
    }
    print(json.dumps(out, indent=2))
    return 0


def cli_main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "compare":
            return _cmd_compare(args)
        if args.command == "vote-table":
            return _cmd_vote_table(args)
        if args.command == "stats":
            return _cmd_stats(args)
    except HarnessError as e:
        print(str(e), file=sys.stderr)
        return 1
    return 1


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
