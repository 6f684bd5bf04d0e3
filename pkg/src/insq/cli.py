"""Command line tools: generate scenarios, run them headless, verify, serve.

Exit codes: 0 success (and verified), 1 usage error, 2 verification found
mismatches, 3 runtime error (unreadable or invalid input, port in use).
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import InsqError
from .scenario import generate_random, load_scenario, save_scenario
from .simulate import (
    brute_force_oracle,
    compare_runs,
    metrics_table,
    run_simulation,
    tick_message,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VERIFICATION = 2
EXIT_RUNTIME = 3


def _grid(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return (int(w), int(h))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}") from None


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="insq",
        description="Moving kNN queries validated by influential neighbor sets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a random scenario file")
    g.add_argument("--mode", choices=("plane", "network"), required=True)
    g.add_argument("--n", type=int, help="site count (plane: required, network: optional)")
    g.add_argument("--grid", type=_grid, metavar="WxH", help="grid dimensions, network mode")
    g.add_argument("--k", type=int, required=True, help="neighbors to track")
    g.add_argument("--rho", type=float, default=1.0, help="prefetch factor, >= 1")
    g.add_argument("--ticks", type=int, default=200, help="target run length")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output", required=True, metavar="FILE")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="play a scenario and print summary counters")
    r.add_argument("-i", "--input", required=True, metavar="FILE")
    r.add_argument("--metrics", metavar="OUT.csv", help="write per-tick counters")
    r.add_argument("--report", metavar="OUT.jsonl", help="write one tick document per line")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="diff a run against the brute-force oracle")
    v.add_argument("-i", "--input", required=True, metavar="FILE")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("serve", help="start the HTTP/WebSocket service")
    s.add_argument("--port", type=int, default=8000)
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--static", metavar="DIR", help="serve this directory at /")
    s.add_argument("--session-ttl", type=float, default=30.0, metavar="MIN",
                   help="idle session lifetime in minutes")
    s.set_defaults(func=cmd_serve)
    return parser


def cmd_generate(args) -> int:
    try:
        scenario = generate_random(
            args.mode,
            n=args.n,
            grid=args.grid,
            k=args.k,
            rho=args.rho,
            ticks=args.ticks,
            seed=args.seed,
        )
    except InsqError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    with open(args.output, "wb") as fh:
        fh.write(save_scenario(scenario))
    print(f"wrote {args.output} ({len(scenario.sites)} sites, mode {scenario.mode})")
    return EXIT_OK


def _load(path: str):
    with open(path, "rb") as fh:
        return load_scenario(fh.read())


def _report_line(r) -> str:
    return json.dumps(tick_message(r), sort_keys=True, separators=(",", ":"))


def cmd_run(args) -> int:
    reports, metrics = run_simulation(_load(args.input))
    if args.metrics:
        with open(args.metrics, "w", encoding="utf-8", newline="") as fh:
            fh.write(metrics_table(reports, recompute_count=True))
    if args.report:
        with open(args.report, "w", encoding="utf-8", newline="") as fh:
            for r in reports:
                fh.write(_report_line(r) + "\n")
    print(
        f"ticks={len(reports)}"
        f" validations={metrics.validations}"
        f" comparisons={metrics.comparisons}"
        f" reranks={metrics.reranks}"
        f" swaps={metrics.swaps}"
        f" recomputes={metrics.full_recomputes}"
        f" knn_changes={metrics.knn_changes}"
        f" false_alarms={metrics.false_alarms}"
    )
    return EXIT_OK


def cmd_verify(args) -> int:
    scenario = _load(args.input)
    reports, _ = run_simulation(scenario)
    diff = compare_runs(reports, brute_force_oracle(scenario))
    print(
        f"ticks={diff.total_ticks}"
        f" mismatches={len(diff.mismatches)}"
        f" engine_events={diff.engine_events}"
        f" oracle_changes={diff.oracle_changes}"
    )
    if diff.mismatches:
        shown = ", ".join(str(t) for t in diff.mismatches[:10])
        more = "" if len(diff.mismatches) <= 10 else ", ..."
        print(f"first mismatched ticks: {shown}{more}")
        return EXIT_VERIFICATION
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(session_ttl_seconds=args.session_ttl * 60.0, static_dir=args.static)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage problems, 0 on --help
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except (InsqError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
