"""Scenario-driven command line front end.

Subcommands::

    prefixsim run    --scenario file.json [--seed N] [--out DIR] [--codec C]
    prefixsim sweep  --scenario file.json --ns 4,7,10 [--out DIR]
    prefixsim check  SUITE [--n N] [--f F] [--runs K] [--slots S] [--seed N]
    prefixsim decode (--hex HEX | --file PATH)

Exit codes: 0 success, 2 scenario/schema error (with the offending field
path), 3 invariant violation (with the first failing invariant and a
reproducer seed).  The default output directory comes from the
``PREFIXSIM_OUT`` environment variable.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import List, Optional

from . import checks, scenario as scn_mod, wire
from .scenario import ScenarioError, load_scenario, run_scenario
from .simnet import SimulationError

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_VIOLATION = 3


def _out_dir(args) -> Optional[str]:
    return args.out or os.environ.get("PREFIXSIM_OUT")


def _emit(args, name: str, payload: str) -> Optional[str]:
    out = _out_dir(args)
    if out is None:
        return None
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, name)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(payload)
    return path


def _say(args, text: str) -> None:
    if not getattr(args, "quiet", False):
        print(text)


def cmd_run(args) -> int:
    try:
        scn = load_scenario(args.scenario)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"scenario: unreadable ({exc})", file=sys.stderr)
        return EXIT_SCHEMA
    if args.seed is not None:
        scn["seed"] = args.seed
    if args.codec is not None:
        scn["codec"] = args.codec
        scn["measure_bytes"] = True
    errors = scn_mod.validate(scn_mod._with_defaults(scn))
    if errors:
        for path, msg in errors:
            print(f"scenario.{path}: {msg}" if path else f"scenario: {msg}", file=sys.stderr)
        return EXIT_SCHEMA
    try:
        result = run_scenario(scn, record=True)
    except SimulationError as exc:
        # Engine assertion mid-run: dump what we have and fail loudly.
        print(f"simulation aborted: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    doc = result.metrics_doc()
    metrics_path = _emit(args, "metrics.json", json.dumps(doc, indent=2, sort_keys=True))
    transcript_path = _emit(args, "transcript.log", "\n".join(result.sim.records))
    if scn.get("protocol") == "msc" and result.honest:
        log = result.sim.engines[result.honest[0]].export_commit_log()
        _emit(args, "commits.log", log)
    _say(args, json.dumps(doc, indent=2, sort_keys=True))
    if result.violations:
        first = result.violations[0]
        where = transcript_path or "(transcript not written; pass --out)"
        print(f"violation: {first} [transcript: {where}]", file=sys.stderr)
        return EXIT_VIOLATION
    if metrics_path:
        _say(args, f"metrics written to {metrics_path}")
    return EXIT_OK


def _fit_exponent(ns: List[int], ys: List[float]) -> float:
    xs = [math.log(n) for n in ns]
    ls = [math.log(y) for y in ys]
    mx = sum(xs) / len(xs)
    my = sum(ls) / len(ls)
    num = sum((x - mx) * (y - my) for x, y in zip(xs, ls))
    den = sum((x - mx) ** 2 for x in xs)
    return num / den


def sweep_rows(template: dict, ns: List[int], scale_L: bool = True) -> List[dict]:
    rows = []
    for n in ns:
        scn = dict(template)
        scn["n"] = n
        scn["f"] = (n - 1) // 3
        if scale_L and "L" in scn:
            scn["L"] = n
        result = run_scenario(scn)
        if result.violations:
            raise ScenarioError([("sweep", f"n={n}: {result.violations[0]}")])
        rows.append(
            {
                "n": n,
                "messages": result.metrics.message_count,
                "bytes": result.metrics.bytes_total,
                "end_time": str(result.metrics.end_time),
            }
        )
    return rows


def cmd_sweep(args) -> int:
    try:
        template = load_scenario(args.scenario)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"scenario: unreadable ({exc})", file=sys.stderr)
        return EXIT_SCHEMA
    ns = [int(x) for x in args.ns.split(",")]
    if args.codec is not None:
        template["codec"] = args.codec
    template["measure_bytes"] = True
    errors = scn_mod.validate(scn_mod._with_defaults({**template, "n": ns[0], "f": (ns[0] - 1) // 3}))
    if errors:
        for path, msg in errors:
            print(f"scenario.{path}: {msg}", file=sys.stderr)
        return EXIT_SCHEMA
    try:
        rows = sweep_rows(template, ns)
    except ScenarioError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_VIOLATION
    msg_exp = _fit_exponent(ns, [r["messages"] for r in rows])
    byte_exp = _fit_exponent(ns, [r["bytes"] for r in rows])
    table = {
        "codec": template.get("codec", "plain"),
        "rows": rows,
        "message_exponent": round(msg_exp, 3),
        "byte_exponent": round(byte_exp, 3),
    }
    text = json.dumps(table, indent=2)
    _say(args, text)
    _emit(args, "sweep.json", text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# property suites


def _suite_scenarios(name: str, opts) -> List[dict]:
    n, f = opts.n, opts.f
    runs = opts.runs
    base = {
        "version": 1, "n": n, "f": f, "L": opts.L or n,
        "gst": 10, "delta": 1, "delta_cap": 2,
    }
    out = []
    if name in ("upperbound", "availability", "safety"):
        protocol = opts.protocol or "pc3"
        kinds = [
            {"kind": "fuzz", "stretch": 5},
            {"kind": "silent", "byzantine": list(range(n - f, n)), "jitter": 5},
        ]
        if protocol != "pc_5f1":
            kinds.append({"kind": "equivocate", "byzantine": [n - 1], "jitter": 5})
        for i in range(runs):
            scn = dict(base)
            scn.update(
                protocol=protocol, seed=opts.seed + i, gst=None,
                adversary=kinds[i % len(kinds)],
                inputs={"kind": "random", "alphabet": 3},
            )
            out.append(scn)
    elif name == "agreement":
        for i in range(runs):
            scn = dict(base)
            adv = [
                {"kind": "silent", "byzantine": [0], "jitter": 4},
                {"kind": "split_view", "byzantine": [0], "jitter": 4},
                {"kind": "doctored", "byzantine": [n - 1], "jitter": 4},
                {"kind": "withhold_body", "reveal": {"0": [1]}, "jitter": 4},
            ][i % 4]
            scn.update(protocol="spc", seed=opts.seed + i, adversary=adv,
                       inputs={"kind": "random", "alphabet": 2})
            out.append(scn)
    elif name == "censorship":
        for i in range(runs):
            scn = dict(base)
            byz = list(range(n - f, n))
            reveal = {str(b): [0] for b in byz}
            victims = [p for p in range(1, n) if p not in byz]
            adv = (
                {"kind": "censor", "reveal": reveal, "lag_victims": victims, "lag": 6}
                if i % 2 == 0
                else {"kind": "equivocate", "byzantine": byz, "lag_victims": victims, "lag": 6}
            )
            scn.update(protocol="msc", slots=opts.slots, seed=opts.seed + i, adversary=adv)
            scn.pop("L", None)
            out.append(scn)
    elif name == "leaderless":
        for i in range(runs):
            scn = dict(base)
            silent = list(range(n - (f - 1), n)) if f > 1 else []
            scn.update(
                protocol="msc" if i % 2 else "spc",
                slots=2, seed=opts.seed + i,
                adversary={"kind": "suspender", "byzantine": silent, "round_len": 1},
                inputs={"kind": "random", "alphabet": 2},
            )
            out.append(scn)
    elif name == "verifiability":
        for i in range(runs):
            scn = dict(base)
            scn.update(
                protocol="spc", seed=opts.seed + i,
                adversary={"kind": "doctored", "byzantine": [n - 1], "jitter": 4},
                inputs={"kind": "random", "alphabet": 2},
            )
            out.append(scn)
    else:
        raise ScenarioError([("suite", f"unknown suite {name}")])
    return out


def run_suite(name: str, opts) -> tuple:
    """Returns (runs, first_failure | None)."""
    if name == "determinism":
        scn = {
            "version": 1, "protocol": opts.protocol or "pc3", "n": opts.n, "f": opts.f,
            "L": opts.L or opts.n, "gst": None, "seed": opts.seed,
            "adversary": {"kind": "fuzz", "stretch": 5},
            "inputs": {"kind": "random"},
        }
        count = 0
        for i in range(max(1, opts.runs // 10)):
            scn["seed"] = opts.seed + i
            first = run_scenario(dict(scn)).metrics.transcript_sha
            again = run_scenario(dict(scn)).metrics.transcript_sha
            count += 2
            if first != again:
                return count, (scn["seed"], checks.Violation("determinism", "transcripts differ"))
        return count, None
    if name == "equivalence":
        import random as _random

        from .crypto import make_scheme
        from .pc import PcConfig, Variant

        cfg = PcConfig(opts.n, opts.f, opts.L or opts.n, Variant.THREE_ROUND, ("chk", "eq"))
        scheme = make_scheme("mac", opts.n)
        rng = _random.Random(opts.seed)
        alphabet = [b"a", b"b", b"c"]
        for i in range(opts.runs):
            values = [tuple(rng.choice(alphabet) for _ in range(cfg.L)) for _ in range(opts.n)]
            try:
                wire.equivalence_harness(values, cfg, scheme, rng)
            except AssertionError as exc:
                return i + 1, (opts.seed, checks.Violation("equivalence", str(exc)))
        return opts.runs, None
    scenarios = _suite_scenarios(name, opts)
    for scn in scenarios:
        result = run_scenario(scn)
        if result.violations:
            return scenarios.index(scn) + 1, (scn["seed"], result.violations[0])
    return len(scenarios), None


def cmd_check(args) -> int:
    try:
        count, failure = run_suite(args.suite, args)
    except ScenarioError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_SCHEMA
    if failure:
        seed, violation = failure
        print(f"FAIL {args.suite}: {violation} (reproduce with seed {seed})", file=sys.stderr)
        return EXIT_VIOLATION
    _say(args, f"PASS {args.suite}: {count} runs, no violations")
    return EXIT_OK


def cmd_decode(args) -> int:
    if args.hex:
        data = bytes.fromhex(args.hex)
    else:
        with open(args.file, "rb") as fh:
            data = fh.read()
    try:
        msg = wire.decode(data)
    except wire.DecodeError as exc:
        print(f"decode error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    print(wire.describe(msg))
    print()
    print(wire.hexdump(data))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prefixsim", description=__doc__)
    parser.add_argument("--quiet", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario file")
    p_run.add_argument("--scenario", required=True)
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--codec", choices=["plain", "compact"])
    p_run.add_argument("--out")
    p_run.set_defaults(fn=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a template across n values")
    p_sweep.add_argument("--scenario", required=True)
    p_sweep.add_argument("--ns", default="4,7,10")
    p_sweep.add_argument("--codec", choices=["plain", "compact"])
    p_sweep.add_argument("--out")
    p_sweep.set_defaults(fn=cmd_sweep)

    p_check = sub.add_parser("check", help="run a property suite")
    p_check.add_argument(
        "suite",
        choices=[
            "upperbound", "availability", "safety", "agreement", "censorship",
            "leaderless", "verifiability", "determinism", "equivalence",
        ],
    )
    p_check.add_argument("--n", type=int, default=4)
    p_check.add_argument("--f", type=int, default=1)
    p_check.add_argument("--L", type=int)
    p_check.add_argument("--protocol")
    p_check.add_argument("--runs", type=int, default=100)
    p_check.add_argument("--slots", type=int, default=20)
    p_check.add_argument("--seed", type=int, default=0)
    p_check.add_argument("--out")
    p_check.set_defaults(fn=cmd_check)

    p_dec = sub.add_parser("decode", help="decode and hex-dump a wire message")
    group = p_dec.add_mutually_exclusive_group(required=True)
    group.add_argument("--hex")
    group.add_argument("--file")
    p_dec.set_defaults(fn=cmd_decode)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
