"""``ultimatum-empathy`` command line.

Exit codes: 0 success, 1 usage error, 2 numerical failure (a solver did not
converge or a validation criterion failed), 3 partial results after an
interruption.
"""

from __future__ import annotations

import argparse
import logging
import sys
from importlib import resources
from pathlib import Path

from .config import RunConfig, UsageError
from .sweep import run_sweep, to_csv

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_PARTIAL = 0, 1, 2, 3

SOURCES = {"simulate": "sim", "theory": "weak_theory", "replicator": "replicator"}


def recipe_names() -> list[str]:
    root = resources.files("ultimatum_empathy.harness") / "recipes"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cfg"))


def recipe_text(name: str) -> str:
    path = resources.files("ultimatum_empathy.harness") / "recipes" / f"{name}.cfg"
    if not path.is_file():
        raise UsageError(f"unknown recipe {name!r}; available: {', '.join(recipe_names())}")
    return path.read_text(encoding="utf-8")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="flat key = value file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override or add one setting (repeatable)")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    p.add_argument("--workers", type=int, default=1, help="worker processes (default 1)")
    p.add_argument("--out", metavar="PATH", help="CSV destination (default stdout)")
    p.add_argument("--no-timestamp", action="store_true", help="omit the generated_at header line")
    p.add_argument("-v", "--verbose", action="store_true")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ultimatum-empathy",
                     description="Ultimatum-game evolution with empathetic strategies: "
                                 "agent simulations, weak-selection theory and replicator solutions.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_ in [("simulate", "agent-based Moran simulations"),
                        ("theory", "first-order weak-selection mean offer"),
                        ("replicator", "stationary replicator solutions")]:
        _common(sub.add_parser(name, help=help_))
    sw = sub.add_parser("sweep", help="run a bundled recipe")
    sw.add_argument("recipe", nargs="?", help="recipe name; omit to list them")
    _common(sw)
    val = sub.add_parser("validate", help="run the acceptance criteria")
    val.add_argument("--only", metavar="LIST", help="comma-separated criterion keys, e.g. 1,4,T2")
    val.add_argument("--workers", type=int, default=1)
    val.add_argument("--out", metavar="PATH", help="also write the report here")
    val.add_argument("-v", "--verbose", action="store_true")
    return parser


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _run(args, command: str, recipe: str | None = None) -> int:
    cfg = RunConfig.build(args.config, recipe, args.overrides)
    if args.seed is not None:
        cfg.set("seed", args.seed)
    if args.workers < 1:
        raise UsageError("--workers must be >= 1")
    rows, interrupted = run_sweep(cfg, SOURCES[command], args.workers)
    _emit(to_csv(rows, timestamp=not args.no_timestamp), args.out)
    if interrupted:
        print("interrupted: partial results written", file=sys.stderr)
        return EXIT_PARTIAL
    if any(r["status"] == "nonconverged" for r in rows):
        print("some replicator solves did not converge (status=nonconverged)", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _validate(args) -> int:
    from .. import acceptance

    only = [x.strip() for x in args.only.split(",")] if args.only else None
    unknown = [k for k in only or () if k not in acceptance.CRITERIA]
    if unknown:
        raise UsageError(f"unknown criteria {unknown}; choose from {', '.join(acceptance.CRITERIA)}")
    lines = []
    ok = True
    for res in acceptance.run_all(only, workers=args.workers):
        line = res.line()
        print(line, flush=True)
        lines.append(line)
        ok &= res.passed
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return EXIT_OK if ok else EXIT_NUMERICAL


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.command == "validate":
            return _validate(args)
        if args.command == "sweep":
            if not args.recipe:
                print("\n".join(recipe_names()))
                return EXIT_OK
            text = recipe_text(args.recipe)
            cfg = RunConfig.build(text=text)
            command = cfg.get("command")
            if command not in SOURCES:
                raise UsageError(f"recipe {args.recipe!r} has no valid command key")
            return _run(args, command, text)
        return _run(args, args.command)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
