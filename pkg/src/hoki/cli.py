"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Machine-readable output goes to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import io as hio
from .baselines import temperature_fit
from .bounds import ce_bound
from .calibrator import DEFAULT_K_MAX, INIT_ACCURACY, INIT_CONFIDENCE, fit
from .core import BinPartition, InvalidInputError, max_softmax, predicted_labels
from .metrics import bin_report, confidence_stddev
from .selection import GridConfig, select_transform
from .synth import SynthConfig, generate_split
from .transform import DEFAULT_TRANSFORMS, NoiseSpec, sample_transforms

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
INIT_FLAGS = {"acc": INIT_ACCURACY, "conf": INIT_CONFIDENCE}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _emit_json(obj) -> None:
    sys.stdout.write(json.dumps(obj, sort_keys=False) + "\n")


def _read_spec(value: str) -> NoiseSpec:
    text = value.strip()
    if not text.startswith("{"):
        with open(value, "r", encoding="utf-8") as fh:
            text = fh.read()
    try:
        return NoiseSpec.from_dict(json.loads(text))
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"noise spec is not valid JSON: {exc}") from exc


def _write_csv(path, rows, header) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


# -- subcommands ------------------------------------------------------------


def cmd_synth(args) -> int:
    cfg = SynthConfig(args.n, args.classes, args.concentration, args.distortion, args.seed)
    val, test = generate_split(cfg)
    hio.save_dataset(val, args.out_val, binary=args.binary)
    hio.save_dataset(test, args.out_test, binary=args.binary)
    _emit_json({"n_val": val.n, "n_test": test.n, "classes": val.c})
    return EXIT_OK


def cmd_select(args) -> int:
    val = hio.load_dataset(args.val)
    cfg = GridConfig.with_step(args.grid_step, m=args.m, seed=args.seed)
    result = select_transform(val, cfg)
    table = result.table_csv()
    if args.out_table:
        with open(args.out_table, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(table)
    spec_json = json.dumps(result.best.to_dict())
    if args.out_spec:
        with open(args.out_spec, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(spec_json + "\n")
    _emit_json(
        {
            "best": result.best.to_dict(),
            "sigma_hat": result.sigma_hat,
            "alpha_hat": result.alpha_hat,
            "beta_hat": result.beta_hat,
            "candidates": len(result.table),
        }
    )
    return EXIT_OK


def cmd_fit(args) -> int:
    val = hio.load_dataset(args.val)
    spec = _read_spec(args.spec)
    ts = sample_transforms(spec, args.m, val.c, args.seed)
    model, diag = fit(val, ts, BinPartition(args.bins), args.k_max, INIT_FLAGS[args.init])
    hio.save_model(model, args.out_model)
    out = {
        "converged": diag.converged,
        "K_star": diag.k_star,
        "p_hat": model.p_hat,
        "partition_changes": diag.partition_changes,
        "max_residual": float(np.nanmax(diag.residuals)),
    }
    if not diag.converged:
        out["warning"] = f"bin assignment still changing after k-max={args.k_max} rounds"
        print(f"warning: {out['warning']}", file=sys.stderr)
    _emit_json(out)
    return EXIT_OK


def cmd_apply(args) -> int:
    data = hio.load_dataset(args.input)
    model = hio.load_model(args.model)
    labels = predicted_labels(data.logits)
    conf = model.predict(data.logits)
    _write_csv(
        args.out,
        ((str(y), repr(float(p))) for y, p in zip(labels.tolist(), conf.tolist())),
        ("label", "confidence"),
    )
    return EXIT_OK


def _read_confidences(path, n) -> tuple[np.ndarray, np.ndarray]:
    labels, conf = [], []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "label,confidence":
            raise hio.DatasetParseError(path, 1, "header must be label,confidence")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise hio.DatasetParseError(path, lineno, "expected 2 columns")
            try:
                labels.append(int(parts[0]))
                p = float(parts[1])
            except ValueError:
                raise hio.DatasetParseError(path, lineno, "malformed value") from None
            if not 0.0 <= p <= 1.0:
                raise hio.DatasetParseError(path, lineno, f"confidence {p} outside [0, 1]")
            conf.append(p)
    if len(conf) != n:
        raise hio.DatasetParseError(path, None, f"{len(conf)} confidences for {n} examples")
    return np.array(labels, dtype=np.int64), np.array(conf)


def cmd_eval(args) -> int:
    data = hio.load_dataset(args.input)
    if args.confidences:
        pred, conf = _read_confidences(args.confidences, data.n)
    elif args.model:
        pred = predicted_labels(data.logits)
        conf = hio.load_model(args.model).predict(data.logits)
    else:
        pred = predicted_labels(data.logits)
        conf = max_softmax(data.logits)
    if not np.all(np.isfinite(conf)):
        raise FloatingPointError("non-finite confidences")
    correct = pred == data.labels
    report = bin_report(conf, correct, BinPartition(args.bins))
    if args.out_bins:
        with open(args.out_bins, "w", encoding="utf-8", newline="\n") as fh:
            report.to_csv(fh)
    _emit_json(
        {
            "ece": report.ece(),
            "accuracy": float(np.mean(correct)),
            "confidence_stddev": confidence_stddev(conf),
            "N": data.n,
            "bins": args.bins,
        }
    )
    return EXIT_OK


def cmd_bound(args) -> int:
    sys.stdout.write(f"{ce_bound(args.ece, args.bins, args.n, args.delta):.9f}\n")
    return EXIT_OK


def cmd_compare(args) -> int:
    val = hio.load_dataset(args.val)
    test = hio.load_dataset(args.test)
    if val.c != test.c:
        raise InvalidInputError(f"class count differs: val C={val.c}, test C={test.c}")
    spec = _read_spec(args.spec)
    partition = BinPartition(args.bins)
    test_correct = test.correct()

    t0 = time.perf_counter()
    ts_model = temperature_fit(val)
    ts_time = time.perf_counter() - t0

    t0 = time.perf_counter()
    transforms = sample_transforms(spec, args.m, val.c, args.seed)
    hoki_model, diag = fit(val, transforms, partition, args.k_max)
    hoki_time = time.perf_counter() - t0

    rows = [
        ("uncalibrated", max_softmax(test.logits), 0.0),
        ("temperature", ts_model.predict(test.logits), ts_time),
        ("hoki", hoki_model.predict(test.logits), hoki_time),
    ]
    sys.stdout.write("method,test_ece,fit_seconds\n")
    for name, conf, secs in rows:
        ece_value = bin_report(conf, test_correct, partition).ece()
        sys.stdout.write(f"{name},{ece_value!r},{secs:.3f}\n")
    if not diag.converged:
        print("warning: hoki fit did not converge within k-max", file=sys.stderr)
    return EXIT_OK


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hoki", description="Logit-noise confidence calibration toolkit")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("synth", help="generate synthetic validation/test logits")
    p.add_argument("--n", type=int, required=True, help="examples per split")
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--concentration", type=float, default=0.5)
    p.add_argument("--distortion", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-val", required=True)
    p.add_argument("--out-test", required=True)
    p.add_argument("--binary", action="store_true", help="write the packed binary format")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("select", help="grid-search the noise distribution")
    p.add_argument("--val", required=True)
    p.add_argument("--grid-step", type=float, default=1.0)
    p.add_argument("--m", type=int, default=DEFAULT_TRANSFORMS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-table")
    p.add_argument("--out-spec")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("fit", help="fit the calibrator")
    p.add_argument("--val", required=True)
    p.add_argument("--spec", required=True, help="noise spec JSON file or inline JSON")
    p.add_argument("--m", type=int, default=DEFAULT_TRANSFORMS)
    p.add_argument("--bins", type=int, default=15)
    p.add_argument("--k-max", type=int, default=DEFAULT_K_MAX)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init", choices=sorted(INIT_FLAGS), default="acc")
    p.add_argument("--out-model", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("apply", help="calibrate logits with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("eval", help="ECE and per-bin reliability statistics")
    p.add_argument("--in", dest="input", required=True)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--confidences", help="CSV from `apply` (label,confidence)")
    src.add_argument("--model")
    p.add_argument("--bins", type=int, default=15)
    p.add_argument("--out-bins")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bound", help="PAC bound on the calibration error")
    p.add_argument("--ece", type=float, required=True)
    p.add_argument("--bins", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("compare", help="uncalibrated vs temperature scaling vs hoki")
    p.add_argument("--val", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--spec", required=True)
    p.add_argument("--m", type=int, default=DEFAULT_TRANSFORMS)
    p.add_argument("--bins", type=int, default=15)
    p.add_argument("--k-max", type=int, default=DEFAULT_K_MAX)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    try:
        return args.func(args)
    except (FileNotFoundError, IsADirectoryError, InvalidInputError, UnicodeDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FloatingPointError, ZeroDivisionError, OverflowError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
