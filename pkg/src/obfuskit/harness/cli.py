"""obfuskit command line.

Exit codes: 0 success, 2 invalid input (bad flag, bad value, missing
file), 1 anything that fails while running.
"""

import argparse
import csv
import io
import json
import sys

from obfuskit.dataset import GroupSpec, SensitiveSelection, load_csv, save_csv
from obfuskit.errors import ValidationError
from obfuskit.harness.config import SCENARIOS, load_config, parse_train_spec
from obfuskit.harness.runner import load_report, run_experiment
from obfuskit.models import ModelSpec, TrainConfig, accuracy, init_model, save_model, train
from obfuskit.obfuscate import (
    DEFAULT_GROUP_SIGMA,
    GroupParams,
    IndividualParams,
    obfuscate_dataset_groups,
    obfuscate_dataset_individual,
)

EXIT_OK, EXIT_RUNTIME, EXIT_INVALID = 0, 1, 2


def _parse_groups(text, dataset):
    if text == "whole":
        return [GroupSpec.whole()]
    try:
        labels = [int(t) for t in text.split(",")]
    except ValueError:
        raise ValidationError(f"expected 'whole' or comma-separated labels, got {text!r}", "groups") from None
    return [GroupSpec.by_label(c) for c in labels]


def cmd_obfuscate(args):
    data = load_csv(args.input)
    if args.mode == "individual":
        if args.sigma is None:
            raise ValidationError("required for individual mode", "sigma")
        params = IndividualParams(args.r, args.sigma)
        selection = SensitiveSelection.fraction(data, args.select_ratio, args.seed)
        out = obfuscate_dataset_individual(data, selection, params, args.seed)
    else:
        sigma = DEFAULT_GROUP_SIGMA if args.sigma is None else args.sigma
        params = GroupParams(args.r, sigma)
        out = obfuscate_dataset_groups(data, _parse_groups(args.groups, data), params, args.seed)
    save_csv(out, args.out)
    print(f"wrote {len(out)} samples to {args.out}")


def cmd_train(args):
    data = load_csv(args.data)
    try:
        with open(args.spec) as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"not valid JSON ({exc})", "spec") from None
    m, t, seed = parse_train_spec(obj)
    spec = ModelSpec(data.dim, data.num_classes, m.architecture, m.hidden_width, m.activation,
                     m.reg_weight, data.domain)
    model = train(init_model(spec, seed), data, TrainConfig(t.epochs, t.batch_size, t.learning_rate, seed))
    save_model(model, args.out)
    print(f"train accuracy {accuracy(model, data):.4f}; model written to {args.out}")


def cmd_attack(args):
    cfg = load_config(args.config)
    if cfg.scenario != args.scenario:
        raise ValidationError(f"config is for {cfg.scenario!r}, not {args.scenario!r}", "scenario")
    out_dir = args.out or cfg.output_dir or f"runs/{cfg.scenario}"
    report = run_experiment(cfg, out_dir=out_dir, workers=args.workers)
    for i, p in enumerate(report.points):
        f1 = p.report.f1
        print(f"[{i}] r={p.r:g} f1={'-' if f1 is None else f'{f1:.3f}'} "
              f"val_acc={p.val_accuracy:.4f} delta_acc={p.delta_accuracy:+.4f}")
    print(f"report written to {out_dir}/report.json")


def summary_rows(report):
    """One flat row per sweep point: r, headline metrics and the scalar aux values."""
    rows = []
    for point in report["sweep"]:
        att = point["attack"]
        row = {"index": point["index"], "r": point["r"], "f1": att["f1"],
               "balanced_accuracy": att["balanced_accuracy"], "val_accuracy": point["val_accuracy"],
               "delta_accuracy": point["delta_accuracy"]}
        for key, value in sorted(att["aux"].items()):
            if isinstance(value, (int, float, str)) or value is None:
                row.setdefault(key, value)
        rows.append(row)
    return rows


def cmd_report(args):
    report = load_report(args.run)
    if args.format == "json":
        sys.stdout.write(json.dumps(report, sort_keys=True, indent=2) + "\n")
        return
    rows = summary_rows(report)
    fields = list(rows[0]) if rows else []
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n", restval="")
    writer.writeheader()
    writer.writerows(rows)
    sys.stdout.write(buf.getvalue())


def build_parser():
    parser = argparse.ArgumentParser(prog="obfuskit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("obfuscate", help="obfuscate a CSV dataset")
    p.add_argument("--in", dest="input", required=True, help="input CSV")
    p.add_argument("--out", required=True, help="output CSV")
    p.add_argument("--mode", required=True, choices=("individual", "group"))
    p.add_argument("--r", type=float, required=True,
                   help="coordinate ratio (individual) or augmentation ratio (group)")
    p.add_argument("--sigma", type=float, help="noise std in feature units (group default 5)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--select-ratio", type=float, default=1.0,
                   help="fraction of samples treated as sensitive (individual)")
    p.add_argument("--groups", default="whole", help="'whole' or comma-separated class labels (group)")
    p.set_defaults(func=cmd_obfuscate)

    p = sub.add_parser("train", help="train a model on a CSV dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--spec", required=True, help="JSON model spec with optional 'train' and 'seed'")
    p.add_argument("--out", required=True, help="model JSON path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("attack", help="run an experiment config")
    p.add_argument("--scenario", required=True, choices=SCENARIOS)
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (default: config output_dir or runs/<scenario>)")
    p.add_argument("--workers", type=int, help="process count (default $OBFUSKIT_THREADS, 0 = all CPUs)")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("report", help="print a finished run's report")
    p.add_argument("--run", required=True, help="run directory")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except FileNotFoundError as exc:
        print(f"error: no such file: {exc.filename}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - top-level reporter
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
