"""Command-line interface.

Subcommands: ``validate`` (parse and dry-run a trace file), ``simulate``
(seeded stochastic walk printed as a trace), ``classify`` (measurement CSV
to structure transitions), ``export-dot`` (transition diagram) and
``serve`` (run the HTTP service).

Exit codes: 0 success, 1 domain error (parse, replay, malformed content),
2 usage error (bad flags, missing files). Diagnostics go to stderr, data
to stdout, and no command ever writes to its input files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .classify import ClassifierConfig, parse_samples, series_to_transitions
from .errors import (
    CrowdModelError,
    InvalidConfigError,
    InvalidSampleError,
    SampleFileError,
    TraceReplayError,
    TraceSyntaxError,
    UnknownStateError,
    WeightFileError,
    ZeroMassError,
)
from .schema import Phase, TERMINAL, default_schema, state
from .stochastic import WalkConfig, WeightTable, parse_weights, walk
from .trace import ReplayReport, parse, replay

OK = 0
DOMAIN_ERROR = 1
USAGE_ERROR = 2


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _read_file(path: str) -> str | None:
    if not os.path.isfile(path):
        return None
    with open(path, encoding="utf-8") as handle:
        return handle.read()


# -- validate --------------------------------------------------------------------


def _cause_text(forced) -> str:
    if isinstance(forced.cause, tuple):
        thread, entered = forced.cause
        return f"reaction to thread {thread} entering {entered}"
    return f"event {forced.cause}"


def _print_summary(report: ReplayReport) -> None:
    print(f"threads created: {report.threads_created}")
    print(f"transitions applied: {report.transitions}")
    print(f"forced transitions: {len(report.forced)}")
    for forced in report.forced:
        print(f"  thread {forced.thread} -> {forced.to} ({_cause_text(forced)})")
    print("final states:")
    for tid, final in report.final_states.items():
        print(f"  thread {tid}: {final}")


def cmd_validate(args: argparse.Namespace) -> int:
    text = _read_file(args.trace)
    if text is None:
        return _fail(f"no such file: {args.trace}", USAGE_ERROR)
    try:
        trace = parse(text, source=args.trace)
        _, report = replay(trace)
    except TraceSyntaxError as exc:
        print(f"{args.trace}:{exc.line}:{exc.column}: {exc.reason}", file=sys.stderr)
        return DOMAIN_ERROR
    except TraceReplayError as exc:
        print(f"{args.trace}:{exc.line}: {exc.reason}", file=sys.stderr)
        return DOMAIN_ERROR
    for skip in report.skipped:
        print(
            f"{args.trace}: rule skipped thread {skip.thread} -> {skip.target} ({skip.reason})",
            file=sys.stderr,
        )
    if args.json:
        print(json.dumps(report.as_dict(), indent=2, sort_keys=True))
    else:
        _print_summary(report)
    return OK


# -- simulate --------------------------------------------------------------------


def cmd_simulate(args: argparse.Namespace) -> int:
    schema = default_schema()
    try:
        start = state(args.start)
    except UnknownStateError as exc:
        return _fail(str(exc), USAGE_ERROR)
    if start == TERMINAL:
        return _fail("start state terminal has no outgoing transitions", USAGE_ERROR)

    if args.weights is not None:
        text = _read_file(args.weights)
        if text is None:
            return _fail(f"no such file: {args.weights}", USAGE_ERROR)
        try:
            table = parse_weights(text, schema)
        except WeightFileError as exc:
            print(f"{args.weights}:{exc.line}: {exc.reason}", file=sys.stderr)
            return DOMAIN_ERROR
    else:
        table = WeightTable()

    try:
        config = WalkConfig(seed=args.seed, max_steps=args.steps, start=start)
    except InvalidConfigError as exc:
        return _fail(str(exc), USAGE_ERROR)
    try:
        result = walk(table, schema, config)
    except ZeroMassError as exc:
        return _fail(str(exc), DOMAIN_ERROR)

    states = result.states
    if start.phase is Phase.ASSEMBLY:
        print(f"thread 1 assemble {start.local}")
        states = states[1:]
    for visited in states:
        if visited == TERMINAL:
            print("thread 1 end")
        else:
            print(f"thread 1 goto {visited.name}")
    return OK


# -- classify --------------------------------------------------------------------


def _load_classifier_config(path: str) -> ClassifierConfig | int:
    text = _read_file(path)
    if text is None:
        return _fail(f"no such file: {path}", USAGE_ERROR)
    try:
        data = json.loads(text)
        if not isinstance(data, dict):
            raise ValueError("config must be a JSON object")
        return ClassifierConfig(**data)
    except (ValueError, TypeError, InvalidConfigError) as exc:
        return _fail(f"bad classifier config {path}: {exc}", DOMAIN_ERROR)


def cmd_classify(args: argparse.Namespace) -> int:
    text = _read_file(args.input)
    if text is None:
        return _fail(f"no such file: {args.input}", USAGE_ERROR)
    if args.config is not None:
        config = _load_classifier_config(args.config)
        if isinstance(config, int):
            return config
    else:
        config = ClassifierConfig()
    try:
        samples = parse_samples(text)
    except SampleFileError as exc:
        print(f"{args.input}:{exc.row}: {exc.reason}", file=sys.stderr)
        return DOMAIN_ERROR
    try:
        transitions = series_to_transitions(config, samples)
    except InvalidSampleError as exc:
        return _fail(str(exc), DOMAIN_ERROR)
    if args.json:
        payload = {
            "source": args.input,
            "transitions": [{"timestamp": t, "state": s.name} for t, s in transitions],
        }
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        for timestamp, classified in transitions:
            print(f"@{timestamp} {classified.name}")
    return OK


# -- export-dot ------------------------------------------------------------------


def cmd_export_dot(args: argparse.Namespace) -> int:
    dot = default_schema().to_dot()
    if args.out is None:
        sys.stdout.write(dot)
        return OK
    try:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(dot)
    except OSError as exc:
        return _fail(f"cannot write {args.out}: {exc}", USAGE_ERROR)
    return OK


# -- serve -----------------------------------------------------------------------


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run("crowdstates.service.app:app", host=args.host, port=args.port)
    return OK


# -- entry point -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crowdstates", description="Dynamic state-based crowd model tools."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="parse and dry-run a .crowd trace file")
    p_validate.add_argument("trace", help="path to the trace file")
    p_validate.add_argument("--json", action="store_true", help="machine-readable report")
    p_validate.set_defaults(func=cmd_validate)

    p_simulate = sub.add_parser("simulate", help="print a seeded walk as a trace")
    p_simulate.add_argument("--seed", type=int, required=True, help="64-bit unsigned seed")
    p_simulate.add_argument("--steps", type=int, required=True, help="maximum transitions")
    p_simulate.add_argument("--weights", help="weight file (from -> to weight lines)")
    p_simulate.add_argument(
        "--start", default="assembly.planned", help="start state (canonical dotted name)"
    )
    p_simulate.set_defaults(func=cmd_simulate)

    p_classify = sub.add_parser("classify", help="classify a measurement CSV")
    p_classify.add_argument("--input", required=True, help="CSV: timestamp,density,speed,order")
    p_classify.add_argument("--config", help="JSON file overriding classifier thresholds")
    p_classify.add_argument("--json", action="store_true", help="machine-readable report")
    p_classify.set_defaults(func=cmd_classify)

    p_dot = sub.add_parser("export-dot", help="emit the transition diagram as DOT text")
    p_dot.add_argument("--out", help="write to this path instead of stdout")
    p_dot.set_defaults(func=cmd_export_dot)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CrowdModelError as exc:
        return _fail(str(exc), DOMAIN_ERROR)


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
