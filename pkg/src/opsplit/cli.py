"""Command-line interface.

Subcommands: ``run``, ``validate``, ``report``, ``sweep``.  Exit codes:
0 success, 1 validation refusal (bad config or inadmissible schedule),
2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .harness import ConfigError, execute, load_config, report, sweep
from .solvers import InadmissibleScheduleError


def _build_parser():
    ap = argparse.ArgumentParser(
        prog="opsplit",
        description="Reflected-splitting solvers and rate experiments")
    sub = ap.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a config, write CSVs and summary")
    p_run.add_argument("config")
    p_run.add_argument("--force", action="store_true",
                       help="run even if no admissibility condition holds")
    p_run.add_argument("--backend", default="auto",
                       choices=("auto", "python", "cython"))

    p_val = sub.add_parser("validate", help="check a config without running it")
    p_val.add_argument("config")

    p_rep = sub.add_parser("report", help="tabulate summaries, emit plot data")
    p_rep.add_argument("summaries", nargs="+")

    p_sw = sub.add_parser("sweep", help="run a config across parameter values")
    p_sw.add_argument("config")
    p_sw.add_argument("--param", required=True,
                      help="dotted key, e.g. schedule.gamma")
    p_sw.add_argument("--values", required=True,
                      help="comma-separated JSON scalars")
    p_sw.add_argument("--force", action="store_true")
    p_sw.add_argument("--backend", default="auto",
                      choices=("auto", "python", "cython"))
    return ap


def _cmd_run(args):
    config = load_config(args.config)
    summary, _ = execute(config, force=args.force, backend=args.backend)
    out = config.base_dir / config.data["output_dir"]
    print(f"wrote {out}/summary.json "
          f"({len(summary['per_seed'])} seeds, backend {summary['backend']})")
    return 0


def _cmd_validate(args):
    config = load_config(args.config)
    problem = config.build_problem()
    schedule = config.build_schedule()
    from .harness import _admissibility_verdicts
    verdicts = _admissibility_verdicts(config, problem, schedule)
    admissible = (all(v.passed for v in verdicts.values())
                  if config.data["solver"] == "spd"
                  else any(v.passed for v in verdicts.values()))
    print(json.dumps({
        "config_digest": config.digest,
        "admissible": admissible,
        "conditions": {k: v.to_dict() for k, v in verdicts.items()},
    }, indent=2))
    return 0 if admissible else 1


def _cmd_report(args):
    report(args.summaries)
    return 0


def _cmd_sweep(args):
    config = load_config(args.config)
    values = []
    for tok in args.values.split(","):
        try:
            values.append(json.loads(tok))
        except json.JSONDecodeError:
            values.append(tok)
    results = sweep(config, args.param, values, force=args.force,
                    backend=args.backend)
    for value, summary in results:
        rate = summary["rate"]["slope"]
        print(f"{args.param}={value}: digest {summary['config_digest'][:12]}"
              f" slope {'-' if rate is None else f'{rate:.4f}'}")
    return 0


def main(argv=None):
    args = _build_parser().parse_args(argv)
    handlers = {"run": _cmd_run, "validate": _cmd_validate,
                "report": _cmd_report, "sweep": _cmd_sweep}
    try:
        return handlers[args.command](args)
    except (ConfigError, InadmissibleScheduleError) as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # unexpected runtime failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
