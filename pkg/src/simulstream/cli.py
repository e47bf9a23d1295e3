"""Command-line operator surface.

Subcommands:
    gen-corpus  write a synthetic corpus as JSON lines
    simulate    run every utterance through one policy; JSONL + CSV out
    sweep       grid of policies -> one CSV row per grid point
    eval        recompute metrics from stored session logs
    verify      run the built-in oracle suites; nonzero exit on failure
    serve       host a corpus over the wire protocol
    connect     drain a server, cross-check its metrics, write CSV

Configuration precedence: command-line flags override the --config file,
which overrides built-in defaults. The only environment variable read is
SIMULSTREAM_LOG (log level name).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Optional, Sequence

import jsonschema

from .corpus import (
    CorpusConfigError,
    SyntheticTaskSpec,
    generate_corpus,
    read_corpus,
    write_corpus,
)
from .latency import report_csv_header, report_csv_row
from .session import (
    ComputeModel,
    PolicySpec,
    SessionConfig,
    SessionResult,
    policy_from_spec,
    recompute_result_from_events,
    run_session,
)
from . import verification, wire

log = logging.getLogger("simulstream")

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "pre_decision_ms": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "emission_rate_l": {"type": "integer", "minimum": 1},
        "unit_ms": {"type": "number", "exclusiveMinimum": 0},
        "units_per_token": {"type": "integer", "minimum": 1},
        "compute": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["fixed_cost", "measured_wallclock"]},
                "per_decision_ms": {"type": "number", "minimum": 0},
                "per_unit_ms": {"type": "number", "minimum": 0},
            },
        },
        "policy": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["waitk", "offline", "vmma"]},
                "k": {"type": "integer", "minimum": 1},
                "lam": {"type": "number", "exclusiveMinimum": 0},
                "scorer": {"enum": ["oracle", "constant"]},
                "scorer_value": {"type": "number"},
                "seed": {"type": "integer"},
            },
        },
    },
}

DEFAULTS = {
    "pre_decision_ms": None,
    "emission_rate_l": 1,
    "unit_ms": 20.0,
    "units_per_token": 5,
    "compute": {"kind": "fixed_cost", "per_decision_ms": 0.0, "per_unit_ms": 0.0},
    "policy": {
        "kind": "waitk",
        "k": 1,
        "lam": 0.5,
        "scorer": "oracle",
        "scorer_value": 0.5,
        "seed": 0,
    },
}


class CliError(SystemExit):
    def __init__(self, message: str, code: int = 2):
        print(f"error: {message}", file=sys.stderr)
        super().__init__(code)


def _load_config_file(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise CliError(f"config {path} is not valid JSON: line {exc.lineno} col {exc.colno}")
    try:
        jsonschema.validate(data, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "$" + "".join(f"[{p!r}]" for p in exc.absolute_path)
        raise CliError(f"config {path}: {exc.message} at {where}")
    return data


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        elif value is not None:
            out[key] = value
    return out


def _flag_overrides(args: argparse.Namespace) -> dict:
    policy = {
        "kind": args.policy,
        "k": args.k,
        "lam": args.lam,
        "scorer": args.scorer,
        "scorer_value": args.scorer_value,
        "seed": args.policy_seed,
    }
    compute = {
        "kind": args.compute,
        "per_decision_ms": args.per_decision_ms,
        "per_unit_ms": args.per_unit_ms,
    }
    return {
        "pre_decision_ms": args.pre_decision_ms,
        "emission_rate_l": args.emission_rate,
        "unit_ms": args.unit_ms,
        "units_per_token": args.units_per_token,
        "compute": {k: v for k, v in compute.items() if v is not None},
        "policy": {k: v for k, v in policy.items() if v is not None},
    }


def build_config(args: argparse.Namespace) -> SessionConfig:
    merged = _merge(_merge(DEFAULTS, _load_config_file(args.config)), _flag_overrides(args))
    try:
        return SessionConfig(
            policy=PolicySpec(**merged["policy"]),
            pre_decision_ms=merged["pre_decision_ms"],
            emission_rate_l=merged["emission_rate_l"],
            unit_ms=merged["unit_ms"],
            units_per_token=merged["units_per_token"],
            compute=ComputeModel(**merged["compute"]),
        )
    except (TypeError, ValueError) as exc:
        raise CliError(str(exc))


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--policy", choices=["waitk", "offline", "vmma"])
    p.add_argument("--k", type=int, help="wait-k head start")
    p.add_argument("--lam", type=float, help="change-rate parameter")
    p.add_argument("--scorer", choices=["oracle", "constant"])
    p.add_argument("--scorer-value", type=float, dest="scorer_value")
    p.add_argument("--policy-seed", type=int, dest="policy_seed")
    p.add_argument("--pre-decision-ms", type=float, dest="pre_decision_ms")
    p.add_argument("--emission-rate", type=int, dest="emission_rate")
    p.add_argument("--unit-ms", type=float, dest="unit_ms")
    p.add_argument("--units-per-token", type=int, dest="units_per_token")
    p.add_argument("--compute", choices=["fixed_cost", "measured_wallclock"])
    p.add_argument("--per-decision-ms", type=float, dest="per_decision_ms")
    p.add_argument("--per-unit-ms", type=float, dest="per_unit_ms")


def _read_corpus_or_die(path: str):
    try:
        corpus = read_corpus(path)
    except (OSError, CorpusConfigError, json.JSONDecodeError, KeyError) as exc:
        raise CliError(f"cannot load corpus {path}: {exc}")
    if not corpus:
        raise CliError(f"corpus {path} is empty")
    return corpus


def _aggregate_row(results: Sequence[SessionResult]) -> str:
    n = len(results)
    reports = [r.report() for r in results]
    mean = lambda xs: sum(xs) / n
    return ",".join(
        [
            "aggregate",
            f"{mean([r.al_ms for r in reports]):.3f}",
            f"{mean([r.ca_al_ms for r in reports]):.3f}",
            f"{mean([r.mean_delay_ms for r in reports]):.3f}",
            f"{mean([r.discontinuity_total_ms for r in reports]):.3f}",
            str(sum(r.num_output_tokens for r in reports)),
            f"{mean([x.quality for x in results]):.3f}",
        ]
    )


def cmd_gen_corpus(args) -> int:
    try:
        spec = SyntheticTaskSpec(
            vocab_size=args.vocab_size,
            length_range=(args.min_len, args.max_len),
            alignment_kind=args.kind,
            shift_c=args.shift_c,
            noise_rate=args.noise_rate,
            segment_ms=args.segment_ms,
        )
        corpus = generate_corpus(spec, args.n, args.seed)
    except CorpusConfigError as exc:
        raise CliError(str(exc))
    write_corpus(corpus, args.out)
    print(f"wrote {len(corpus)} utterances to {args.out}")
    return 0


def cmd_simulate(args) -> int:
    corpus = _read_corpus_or_die(args.corpus)
    config = build_config(args)
    policy = policy_from_spec(config.policy)
    results = []
    failures = []
    for utt in corpus:
        try:
            results.append(run_session(utt, config, policy))
        except Exception as exc:  # keep going; report at the end
            failures.append(f"{utt.id}: {exc}")
    if args.out_results:
        with open(args.out_results, "w", encoding="utf-8") as f:
            for r in results:
                f.write(r.to_json() + "\n")
    if args.out_csv:
        with open(args.out_csv, "w", encoding="utf-8") as f:
            f.write(report_csv_header() + "\n")
            for r in results:
                f.write(report_csv_row(r.utterance_id, r.report(), r.quality) + "\n")
            if results:
                f.write(_aggregate_row(results) + "\n")
    for line in failures:
        print(f"failed: {line}", file=sys.stderr)
    print(f"simulated {len(results)}/{len(corpus)} utterances with {config.policy.label()}")
    return 1 if failures else 0


def cmd_sweep(args) -> int:
    corpus = _read_corpus_or_die(args.corpus)
    config = build_config(args)
    try:
        grid = [
            int(v) if args.family == "waitk" else float(v) for v in args.grid.split(",") if v
        ]
    except ValueError as exc:
        raise CliError(f"bad grid: {exc}")
    if not grid:
        raise CliError("grid is empty")
    rows = []
    failures = []
    for value in sorted(grid):
        if args.family == "waitk":
            spec = PolicySpec(
                "waitk", k=value, scorer=config.policy.scorer, seed=config.policy.seed
            )
        else:
            spec = PolicySpec(
                "vmma",
                lam=value,
                scorer=config.policy.scorer,
                scorer_value=config.policy.scorer_value,
                seed=config.policy.seed,
            )
        policy = policy_from_spec(spec)
        try:
            results = [run_session(utt, config, policy) for utt in corpus]
        except Exception as exc:
            failures.append(f"{args.family}={value}: {exc}")
            continue
        reports = [r.report() for r in results]
        n = len(results)
        rows.append(
            (
                value,
                sum(r.quality for r in results) / n,
                sum(r.al_ms for r in reports) / n,
                sum(r.ca_al_ms for r in reports) / n,
            )
        )
    with open(args.out, "w", encoding="utf-8") as f:
        f.write("param,quality,al_ms,ca_al_ms\n")
        for value, quality, al, ca in rows:
            f.write(f"{value},{quality:.3f},{al:.3f},{ca:.3f}\n")
    for line in failures:
        print(f"failed: {line}", file=sys.stderr)
    print(f"swept {len(rows)} grid points into {args.out}")
    return 0


def cmd_eval(args) -> int:
    reference = {}
    if args.corpus:
        reference = {u.id: u for u in _read_corpus_or_die(args.corpus)}
    rows = []
    with open(args.results, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            stored = SessionResult.from_json(line)
            fresh = recompute_result_from_events(stored)
            quality = fresh.quality
            if reference:
                utt = reference.get(fresh.utterance_id)
                if utt is None:
                    raise CliError(f"utterance {fresh.utterance_id} missing from corpus")
                from .corpus import quality_score

                quality = quality_score(fresh.hypothesis, utt.target_tokens)
            rows.append(report_csv_row(fresh.utterance_id, fresh.report(), quality))
    with open(args.out, "w", encoding="utf-8") as f:
        f.write(report_csv_header() + "\n")
        for row in rows:
            f.write(row + "\n")
    print(f"recomputed {len(rows)} sessions into {args.out}")
    return 0


def cmd_verify(args) -> int:
    checks = verification.run_all(thorough=args.thorough)
    width = max(len(c.name) for c in checks)
    failed = 0
    for c in checks:
        status = "PASS" if c.ok else "FAIL"
        print(f"{status}  {c.name:<{width}}  {c.detail}")
        failed += 0 if c.ok else 1
    if failed:
        print(f"{failed}/{len(checks)} checks failed", file=sys.stderr)
        return 1
    print(f"all {len(checks)} checks passed")
    return 0


def cmd_serve(args) -> int:
    corpus = _read_corpus_or_die(args.corpus)
    config = build_config(args)
    server = wire.serve(args.host, args.port, corpus, config, fast_forward=not args.pace)
    host, port = server.address[0], server.address[1]
    print(f"serving {len(corpus)} utterances on {host}:{port}")
    try:
        while True:
            import time

            time.sleep(0.5)
            if len(server.results) + len(server.failures) >= len(corpus) and args.once:
                break
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
    if server.failures:
        for line in server.failures:
            print(f"failed: {line}", file=sys.stderr)
        return 1
    return 0


def cmd_connect(args) -> int:
    exchanges = wire.connect(args.host, args.port, args.max_sessions)
    mismatched = [e for e in exchanges if e.max_field_gap() >= 1.0]
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(report_csv_header() + "\n")
            for e in exchanges:
                m = e.server_metrics
                f.write(
                    f"{e.utterance_id},{m['al_ms']:.3f},{m['ca_al_ms']:.3f},"
                    f"{m['mean_delay_ms']:.3f},{m['discont_ms']:.3f},"
                    f"{m['n_tokens']},{m['quality']:.3f}\n"
                )
    print(f"completed {len(exchanges)} sessions; {len(mismatched)} metric mismatches")
    return 1 if mismatched else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simulstream",
        description="simultaneous translation policies and streaming latency evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-corpus", help="write a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--vocab-size", type=int, default=200, dest="vocab_size")
    p.add_argument("--min-len", type=int, default=6, dest="min_len")
    p.add_argument("--max-len", type=int, default=16, dest="max_len")
    p.add_argument("--kind", choices=["identity", "shift", "random-monotone"], default="identity")
    p.add_argument("--shift-c", type=int, default=0, dest="shift_c")
    p.add_argument("--noise-rate", type=float, default=0.0, dest="noise_rate")
    p.add_argument("--segment-ms", type=float, default=280.0, dest="segment_ms")
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("simulate", help="run one policy over a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out-results", dest="out_results")
    p.add_argument("--out-csv", dest="out_csv")
    _add_config_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="grid of policies, one CSV row each")
    p.add_argument("--corpus", required=True)
    p.add_argument("--family", choices=["waitk", "vmma"], required=True)
    p.add_argument("--grid", required=True, help="comma-separated parameter values")
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("eval", help="recompute metrics from session logs")
    p.add_argument("--results", required=True)
    p.add_argument("--corpus")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("verify", help="run built-in correctness suites")
    p.add_argument("--thorough", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("serve", help="host a corpus over the wire protocol")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=0)
    p.add_argument("--corpus", required=True)
    p.add_argument("--pace", action="store_true", help="stream segments in real time")
    p.add_argument("--once", action="store_true", help="exit after the corpus is drained")
    _add_config_flags(p)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("connect", help="drain a server and cross-check metrics")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, required=True)
    p.add_argument("--out")
    p.add_argument("--max-sessions", type=int, dest="max_sessions")
    p.set_defaults(func=cmd_connect)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=os.environ.get("SIMULSTREAM_LOG", "WARNING").upper())
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
