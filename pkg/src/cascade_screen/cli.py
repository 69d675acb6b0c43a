"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data or validation error,
3 training or runtime error.
"""

import argparse
import csv
import json
import os
import sys
import warnings

from . import __version__
from .dataset import LoadMode, load_csv, read_records, validate_csv
from .errors import (
    CascadeScreenError,
    EmptyDatasetError,
    InsufficientClassError,
    InvalidInputError,
    RowError,
    SchemaError,
    SpecValidationError,
    UndefinedSkewError,
)
from .experiment import (
    MODEL_ORDER,
    ExperimentConfig,
    Planner,
    dumps_report,
    evaluate_document,
    fit_final,
    load_dataset,
    run,
    write_report,
)
from .questionnaire import FEATURE_NAMES, encode_record
from .selection import JOBS_ENV
from .synth import CohortSpec, generate_cohort, write_cohort

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3

DATA_ERRORS = (SchemaError, RowError, EmptyDatasetError, InvalidInputError,
               SpecValidationError, InsufficientClassError, UndefinedSkewError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise UsageError(message)


def _jobs(args):
    if getattr(args, "jobs", None) is not None:
        return args.jobs
    env = os.environ.get(JOBS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"{JOBS_ENV} must be an integer, got {env!r}") from None
    return None


def _load_config(path, jobs=None):
    config = ExperimentConfig.load(path)
    if jobs is not None:
        raw = dict(config.raw, jobs=jobs)
        config = ExperimentConfig(raw, config.base_dir)
    return config


def _ensure_parent(path):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def _write_json(obj, path):
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        _ensure_parent(path)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def cmd_score(args):
    records = read_records(args.inp, LoadMode(args.mode))
    if args.out not in (None, "-"):
        _ensure_parent(args.out)
    out = sys.stdout if args.out in (None, "-") else open(args.out, "w", encoding="utf-8", newline="")
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(("id",) + FEATURE_NAMES + ("label",))
        for rec in records:
            fv = encode_record(rec)
            writer.writerow((rec.id, *fv.values, fv.label))
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_synth(args):
    d = {}
    if args.spec:
        with open(args.spec, encoding="utf-8") as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as exc:
                raise SpecValidationError(f"{args.spec}: not valid JSON ({exc})") from None
    if args.n is not None:
        d["n"] = args.n
    if args.seed is not None:
        d["seed"] = args.seed
    cohort = generate_cohort(CohortSpec.from_dict(d))
    _ensure_parent(args.out)
    side = write_cohort(cohort, args.out)
    for note in cohort.warnings:
        print(f"warning: {note}", file=sys.stderr)
    print(f"wrote {len(cohort.records)} rows to {args.out} (metadata: {side})", file=sys.stderr)
    return EXIT_OK


def cmd_validate(args):
    issues = validate_csv(args.inp)
    print(json.dumps([{"line": i.line, "column": i.column, "message": i.message}
                      for i in issues], indent=2))
    for issue in issues:
        print(str(issue), file=sys.stderr)
    return EXIT_DATA if issues else EXIT_OK


def cmd_train(args):
    config = _load_config(args.config, _jobs(args))
    ds, _ = load_dataset(config)
    plan = Planner(config, ds).plan(args.model)
    doc = fit_final(plan, config, ds)
    _write_json(doc, args.out)
    return EXIT_OK


def cmd_evaluate(args):
    with open(args.model, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SpecValidationError(f"{args.model}: not valid JSON ({exc})") from None
    ds = load_csv(args.inp, LoadMode(args.mode))
    _write_json(evaluate_document(doc, ds), args.out)
    return EXIT_OK


def cmd_run(args):
    config = _load_config(args.config, _jobs(args))
    out_dir = args.out_dir or os.path.join(config.base_dir, config.raw["output_dir"])

    def progress(name, entry):
        if args.quiet:
            return
        if entry["status"] == "ok":
            acc = entry["cv"]["mean_test"]["rounded"]["accuracy"]
            print(f"{name}: mean test accuracy {acc}", file=sys.stderr)
        else:
            print(f"{name}: FAILED {entry['error']}", file=sys.stderr)

    report = run(config, progress=progress)
    report_path, csv_path = write_report(report, out_dir)
    if not args.quiet:
        print(f"wrote {report_path} and {csv_path}", file=sys.stderr)
    failed = [m for m, e in report["models"].items() if e["status"] != "ok"]
    return EXIT_RUNTIME if failed and len(failed) == len(report["models"]) else EXIT_OK


def build_parser():
    parser = _Parser(prog="cascade-screen", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("score", help="encode cohort rows as 17-feature vectors")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out")
    p.add_argument("--mode", choices=[m.value for m in LoadMode], default="STRICT")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("synth", help="generate a synthetic cohort CSV")
    p.add_argument("--spec", help="JSON cohort spec (defaults apply to missing keys)")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="fit one model on the configured dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--model", required=True, choices=MODEL_ORDER)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a trained model document on a cohort")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out")
    p.add_argument("--mode", choices=[m.value for m in LoadMode], default="STRICT")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("run", help="run a full experiment and write the report")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir")
    p.add_argument("--jobs", type=int)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="list schema violations in a cohort CSV")
    p.add_argument("--in", dest="inp", required=True)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "jobs", None) is not None and args.jobs < 1:
            parser.error("--jobs must be >= 1")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return args.func(args)
    except UsageError:
        return EXIT_USAGE
    except DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        for v in getattr(exc, "violations", []):
            print(f"  {v}", file=sys.stderr)
        return EXIT_DATA
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except CascadeScreenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
