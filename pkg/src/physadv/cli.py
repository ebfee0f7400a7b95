"""Command line entry point: ``physadv {synth,train,attack,sweep,report}``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import constraints as cons
from . import nn, powergrid, water
from .errors import DegenerateConstraint, InvariantBreach, PhysAdvError
from .harness import config as hc
from .harness import report as rep
from .harness import runner

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_BREACH = 2
EXIT_DEGENERATE = 3

log = logging.getLogger("physadv")


def parse_range(text: str) -> list[float]:
    """``a:b:s`` (inclusive of b) or a comma list."""
    if ":" not in text:
        return [float(x) for x in text.split(",") if x]
    parts = [float(x) for x in text.split(":")]
    if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
        raise argparse.ArgumentTypeError(f"bad range {text!r}, expected start:stop:step")
    a, b, s = parts
    n = int(round((b - a) / s)) + 1
    return [round(a + k * s, 10) for k in range(n) if a + k * s <= b + 1e-9]


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON scenario config; flags given here override it")
    p.add_argument("--domain", choices=hc.DOMAINS)
    p.add_argument("--case", type=int)
    p.add_argument("--seed", type=int, action="append", dest="seeds", help="repeatable")
    p.add_argument("--records", type=int)
    p.add_argument("--test-size", type=int)
    p.add_argument("--grid", help="CSV measurement matrix (power only)")


def _attack_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", choices=hc.SCENARIOS)
    p.add_argument("--step", type=int)
    p.add_argument("--size", type=float)
    p.add_argument("--lambda", type=float, dest="lam")
    p.add_argument("--max-itera", type=int)
    p.add_argument("--samples", type=int, dest="sample_count")
    p.add_argument("--deadline-ms", type=float)


def build_config(args, **overrides) -> hc.ScenarioConfig:
    cfg = hc.load_config(args.config) if args.config else None
    domain = args.domain or (cfg.domain if cfg else "power")
    if cfg is None or cfg.domain != domain:
        cfg = hc.ScenarioConfig.for_domain(domain)
    kw = {}
    for name in ("case", "records", "test_size", "grid", "scenario", "deadline_ms"):
        v = getattr(args, name, None)
        if v is not None:
            kw[name] = v
    if args.seeds:
        kw["seeds"] = tuple(args.seeds)
    att = {}
    for flag, field in (("step", "step"), ("size", "size"), ("lam", "lambda_threshold"),
                        ("max_itera", "max_itera"), ("sample_count", "sample_count")):
        v = getattr(args, flag, None)
        if v is not None:
            att[field] = v
    if att:
        kw["attack"] = replace(cfg.attack, **att)
    kw.update(overrides)
    return replace(cfg, **kw)


def cmd_synth(args) -> int:
    cfg = build_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for seed in cfg.seeds:
        data, g = runner.synthesize(cfg, seed)
        d = out / f"{cfg.domain}-seed{seed}"
        d.mkdir(exist_ok=True)
        if cfg.domain == "water":
            header, note = list(water.SENSORS) + ["label"], water.header_comment()
        else:
            header, note = [f"z{i}" for i in range(data.defender.dim)] + ["label"], None
            powergrid.save_grid(g, d / "grid.csv")
        data.defender.to_csv(d / "defender.csv", header=header, comment=note)
        data.attacker.to_csv(d / "attacker.csv", header=header, comment=note)
        for case, ts in data.tests.items():
            nn.LabeledDataset(ts.features, [1] * len(ts)).to_csv(
                d / f"test-case{case}.csv", header=header, comment=note
            )
            cons.save_constraints(ts.constraint, d / f"constraints-case{case}.csv")
        print(f"wrote {d}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = build_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for seed in cfg.seeds:
        b = runner.prepare(cfg, seed)
        nn.save_network(b.defender, out / f"{cfg.domain}-seed{seed}-defender.json")
        nn.save_network(b.attacker, out / f"{cfg.domain}-seed{seed}-surrogate.json")
        print(f"{cfg.domain} seed {seed}: defender test accuracy {b.defender_accuracy:.4f}, "
              f"surrogate test accuracy {b.attacker_accuracy:.4f}")
    return EXIT_OK


def _breach(report: dict) -> str | None:
    if report["constraintViolations"] or report["stealthViolations"]:
        return (f"invariant breach: {report['constraintViolations']} constraint and "
                f"{report['stealthViolations']} residual-stealth violations")
    return None


def cmd_attack(args) -> int:
    cfg = build_config(args)
    report = runner.run_scenario(cfg)
    paths = rep.write_report(report, args.out, timing_inline=args.timing_inline)
    sys.stdout.write(rep.render_table([report]))
    print("wrote " + ", ".join(str(p) for p in paths))
    msg = _breach(report)
    if msg:
        print(msg, file=sys.stderr)
        return EXIT_BREACH
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = build_config(args)
    if args.cases:
        rows = runner.sweep_cases(cfg, [int(c) for c in parse_range(args.cases)])
    else:
        grid = parse_range(args.lambdas) if args.lambdas else list(cfg.lambda_grid or [0.1, 0.3, 0.5, 0.7, 0.9])
        rows = runner.sweep_lambda(cfg, grid)
    if not args.timing:
        rows = [{k: v for k, v in r.items() if k not in runner.TIMING_KEYS} for r in rows]
    rows = [{"domain": cfg.domain, "scenario": cfg.scenario, **r} for r in rows]
    if "case" not in rows[0]:
        rows = [{"case": cfg.case, **r} for r in rows]
    Path(args.out).write_text(rep.rows_to_csv(rows))
    print(f"wrote {len(rows)} rows to {args.out}")
    bad = sum(r["constraintViolations"] + r["stealthViolations"] for r in rows)
    if bad:
        print(f"invariant breach: {bad} violations across the sweep", file=sys.stderr)
        return EXIT_BREACH
    return EXIT_OK


def cmd_report(args) -> int:
    reports = [rep.load_report(p) for p in args.reports]
    sys.stdout.write(rep.render_table(reports))
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="physadv", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write datasets and constraint files")
    _common(s)
    s.add_argument("--out", default="data")
    s.set_defaults(func=cmd_synth)

    t = sub.add_parser("train", help="train defender and surrogate models")
    _common(t)
    t.add_argument("--out", default="models")
    t.set_defaults(func=cmd_train)

    a = sub.add_parser("attack", help="run one scenario and write JSON and CSV reports")
    _common(a)
    _attack_flags(a)
    a.add_argument("--out", default="report.json")
    a.add_argument("--timing-inline", action="store_true", help="keep wall-clock fields in the main JSON")
    a.set_defaults(func=cmd_attack)

    w = sub.add_parser("sweep", help="iterate a lambda or case grid and write a tidy CSV")
    _common(w)
    _attack_flags(w)
    w.add_argument("--lambda-grid", "--lambda-range", dest="lambdas", help="start:stop:step or a,b,c")
    w.add_argument("--cases", help="comma list of cases instead of a lambda grid")
    w.add_argument("--timing", action="store_true", help="include wall-clock columns")
    w.add_argument("--out", default="sweep.csv")
    w.set_defaults(func=cmd_sweep)

    r = sub.add_parser("report", help="render report JSON files as a text table")
    r.add_argument("reports", nargs="+")
    r.set_defaults(func=cmd_report)
    return p


def _fix_sweep_lambda(argv: list[str]) -> list[str]:
    # `sweep --lambda a:b:s` means a grid, not a single threshold
    if argv and argv[0] == "sweep":
        return ["--lambda-grid" if a == "--lambda" else a for a in argv]
    return argv


def main(argv=None) -> int:
    argv = _fix_sweep_lambda(list(sys.argv[1:] if argv is None else argv))
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command == "sweep" and args.scenario is None:
        args.scenario = "black-box"
    try:
        return args.func(args)
    except DegenerateConstraint as exc:
        print(f"degenerate constraint: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except InvariantBreach as exc:
        print(f"invariant breach: {exc}", file=sys.stderr)
        return EXIT_BREACH
    except PhysAdvError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

