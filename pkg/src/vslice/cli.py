"""``vslice`` command line: validate templates, manage a catalogue file, run and compare scenarios.

Exit codes: 0 success, 1 domain violations, 2 input errors, 3 invariant violations.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Sequence

from .catalogue import Catalogue, Provenance
from .documents import dump_yaml, read_yaml, template_from_dict
from .errors import DocumentError, InvariantViolation, ScenarioInvalid, SlicingError
from .model import ProvisioningMode, SliceTemplate, validate_template
from .simulator import compare_modes, format_comparison, format_report, load_scenario, run

OK, DOMAIN, INPUT, INVARIANT = 0, 1, 2, 3

ENV_CATALOGUE = "VSLICE_CATALOGUE"
ENV_OUT = "VSLICE_OUT"
ENV_SCENARIO = "VSLICE_SCENARIO"


def _seed(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if n < 0:
        raise argparse.ArgumentTypeError("seed must be non-negative")
    return n


def _templates_in(path: Path) -> list[SliceTemplate]:
    """A file holds one template or a whole catalogue document."""
    doc = read_yaml(path)
    if isinstance(doc, dict) and "templates" in doc:
        return [template_from_dict(t, f"{path}.templates[{i}]") for i, t in enumerate(doc["templates"] or [])]
    return [template_from_dict(doc, str(path))]


def _expand(paths: Sequence[str]) -> list[Path]:
    out = []
    for p in map(Path, paths):
        out += sorted(p.rglob("*.yaml")) if p.is_dir() else [p]
    return out


def cmd_validate(args, out) -> int:
    status = OK
    for path in _expand(args.paths):
        try:
            templates = _templates_in(path)
        except DocumentError as exc:
            print(f"{path}: input-error: {exc}", file=out)
            return INPUT
        bad = False
        for tpl in templates:
            report = validate_template(tpl)
            for v in report.violations:
                print(f"{path}: {tpl.template_id or '-'}: {v}", file=out)
                bad = True
        if bad:
            status = DOMAIN
        else:
            print(f"{path}: ok ({len(templates)} template{'s' if len(templates) != 1 else ''})", file=out)
    return status


def cmd_catalogue(args, out) -> int:
    path = Path(args.catalogue)
    if args.action == "init":
        Catalogue().save(path)
        print(f"created {path}", file=out)
        return OK
    cat = Catalogue.load(path)
    if args.action == "list":
        for tid in sorted(cat.entries):
            t = cat.get(tid)
            info = t.id_info
            print(f"{tid}\t{t.flavor.value}\t{info.vertical_id}\t{info.use_case_id or '-'}\t"
                  f"{cat.provenance[tid].value}", file=out)
        return OK
    if args.action == "check":
        problems = cat.problems()
        for p in problems:
            print(p, file=out)
        if not problems:
            print(f"{path}: ok ({len(cat)} templates)", file=out)
        return DOMAIN if problems else OK
    if args.action == "add":
        templates = [t for p in _expand(args.paths) for t in _templates_in(p)]
        prov = Provenance.NON_STANDARD if args.non_standard else Provenance.STANDARD
        stored = cat.insert_batch(templates, prov)
        cat.save(path)
        for t in stored:
            print(f"added {t.template_id}", file=out)
        return OK
    if args.action == "remove":
        cat.remove(args.template_id, force=args.force)
        cat.save(path)
        print(f"removed {args.template_id}", file=out)
        return OK
    raise AssertionError(args.action)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _scenario(args):
    sc = load_scenario(args.scenario)
    return sc.with_seed(args.seed) if args.seed is not None else sc


def cmd_run(args, out) -> int:
    mode = ProvisioningMode.parse(args.mode)
    result = run(_scenario(args), mode)
    dest = Path(args.out)
    tag = mode.short
    _write(dest / f"report-{tag}.yaml", dump_yaml(result.report))
    _write(dest / f"report-{tag}.txt", format_report(result.report))
    _write(dest / f"events-{tag}.log", "".join(line + "\n" for line in result.log_lines()))
    _write(dest / f"northbound-{tag}.log", "".join(line + "\n" for line in result.trace_lines()))
    out.write(dump_yaml(result.report) if args.format == "machine" else format_report(result.report))
    return OK


def cmd_compare(args, out) -> int:
    cmp = compare_modes(_scenario(args))
    dest = Path(args.out)
    _write(dest / "compare.yaml", dump_yaml(cmp.to_dict()))
    _write(dest / "compare.txt", format_comparison(cmp))
    for res in (cmp.us, cmp.gn):
        tag = ProvisioningMode(res.report["mode"]).short
        _write(dest / f"report-{tag}.yaml", dump_yaml(res.report))
        _write(dest / f"events-{tag}.log", "".join(line + "\n" for line in res.log_lines()))
    out.write(dump_yaml(cmp.to_dict()) if args.format == "machine" else format_comparison(cmp))
    return OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vslice", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="print tracebacks on errors")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate template or catalogue files")
    p.add_argument("paths", nargs="+")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("catalogue", help="manage a catalogue file")
    p.add_argument("--catalogue", default=os.environ.get(ENV_CATALOGUE, "catalogue.yaml"),
                   help=f"catalogue file (default ${ENV_CATALOGUE} or ./catalogue.yaml)")
    acts = p.add_subparsers(dest="action", required=True)
    acts.add_parser("init")
    acts.add_parser("list")
    acts.add_parser("check")
    a = acts.add_parser("add")
    a.add_argument("paths", nargs="+")
    a.add_argument("--non-standard", action="store_true")
    a = acts.add_parser("remove")
    a.add_argument("template_id")
    a.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_catalogue)

    for name, func, helptext in (("run", cmd_run, "run a scenario under one mode"),
                                 ("compare", cmd_compare, "run a scenario under both modes")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("scenario", nargs="?" if os.environ.get(ENV_SCENARIO) else None,
                       default=os.environ.get(ENV_SCENARIO))
        if name == "run":
            p.add_argument("--mode", choices=("us", "gn"), default="us")
        p.add_argument("--seed", type=_seed, default=None)
        p.add_argument("--out", default=os.environ.get(ENV_OUT, "out"))
        p.add_argument("--format", choices=("table", "machine"), default="table")
        p.set_defaults(func=func)
    return parser


def main(argv: Sequence[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return INPUT if exc.code else OK
    try:
        return args.func(args, out)
    except (DocumentError, ScenarioInvalid, FileNotFoundError) as exc:
        print(f"input-error: {exc}", file=sys.stderr)
        return INPUT
    except InvariantViolation as exc:
        print(f"invariant-violation: {exc}", file=sys.stderr)
        return INVARIANT
    except SlicingError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        if args.verbose:
            raise
        return DOMAIN


if __name__ == "__main__":
    sys.exit(main())
