"""Command-line entry point: ``ventpress <subcommand> ...``.

Configuration precedence is defaults < ``--config`` file < ``--set`` flags
< dedicated flags such as ``--seed``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import config as config_mod
from .data_model import LungSettings
from .ingest import ParseError, compute_stats, parse_csv, read_row_ids, write_csv
from .lstm import featurize, load_params, predict, save_params
from .lung_sim import generate_dataset
from .pid import track_waveform
from .plotting import KINDS, plot_data, render
from .train_eval import baseline_mean_predictor, evaluate, train


class CliError(Exception):
    pass


def _float_repr(v) -> str:
    return repr(float(v))


def _configs(args) -> dict:
    values = config_mod.load_file(args.config) if getattr(args, "config", None) else {}
    for item in getattr(args, "set", None) or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise CliError(f"--set {item!r}: expected key=value")
        values[key.strip()] = value.strip()
    if getattr(args, "seed", None) is not None:
        values["sim.seed"] = str(args.seed)
        values["train.seed"] = str(args.seed)
    return config_mod.build(values)


def _read_dataset(path):
    try:
        return parse_csv(path)
    except OSError as exc:
        raise CliError(f"{path}: {exc.strerror}") from None
    except ParseError as exc:
        raise CliError(f"{path}: {exc}") from None


def _check_writable(path):
    parent = Path(path).resolve().parent
    if not parent.is_dir():
        raise CliError(f"{path}: directory {parent} does not exist")
    if not os.access(parent, os.W_OK):
        raise CliError(f"{path}: directory {parent} is not writable")


def _write(path, data, mode="wb"):
    try:
        with open(path, mode) as fh:
            fh.write(data)
    except OSError as exc:
        raise CliError(f"{path}: {exc.strerror}") from None


def cmd_generate(args, out=sys.stdout):
    cfgs = _configs(args)
    _check_writable(args.out)
    sim = cfgs["sim"]
    d = generate_dataset(args.n, sim, workers=args.threads or 1)
    _write(args.out, write_csv(d))
    print(f"seed: {sim.seed}", file=out)
    print(f"wrote {len(d)} breaths ({d.n_rows} rows) to {args.out}", file=out)


def cmd_stats(args, out=sys.stdout):
    if args.out:
        _check_writable(args.out)
    stats = compute_stats(_read_dataset(args.input))
    out.write(stats.to_text())
    if args.out:
        _write(args.out, stats.to_json() + "\n", "w")


def cmd_train(args, out=sys.stdout):
    cfgs = _configs(args)
    _check_writable(args.out)
    d = _read_dataset(args.input)
    if not d.has_pressure:
        raise CliError(f"{args.input}: missing column 'pressure' required for training")

    def progress(epoch, loss, val):
        if args.verbose:
            print(f"epoch {epoch}: train loss {loss:.6g}, val masked MAE {val:.6g}", file=out)

    params, report = train(d, cfgs["model"], cfgs["train"], progress)
    save_params(params, args.out)
    report.checkpoint = str(args.out)
    report_path = args.report or str(args.out) + ".report.json"
    _write(report_path, report.to_json() + "\n", "w")
    val = d.subset(report.val_ids)
    base = baseline_mean_predictor(d.subset(report.train_ids), val)
    print(report.summary(), file=out)
    print(f"validation masked MAE: {evaluate(params, val).aggregate!r}", file=out)
    print(f"mean-predictor baseline: {base.result.aggregate!r} "
          f"(constant {base.constant!r})", file=out)
    print(f"checkpoint: {args.out}; report: {report_path}", file=out)


def _load_checkpoint(path):
    try:
        return load_params(path)
    except (OSError, ValueError, KeyError) as exc:
        raise CliError(f"checkpoint {path}: {exc}") from None


def cmd_eval(args, out=sys.stdout):
    params = _load_checkpoint(args.checkpoint)
    d = _read_dataset(args.input)
    if not d.has_pressure:
        raise CliError(f"{args.input}: missing column 'pressure' required for evaluation")
    if args.split_from:
        try:
            with open(args.split_from) as fh:
                ids = json.load(fh)["val_ids"]
        except (OSError, KeyError, ValueError) as exc:
            raise CliError(f"{args.split_from}: cannot read val_ids ({exc})") from None
        d = d.subset(ids)
    result = evaluate(params, d)
    print("aggregate masked MAE (mean over breaths): " + repr(result.aggregate), file=out)
    print("per (R, C):", file=out)
    for (r, c), mae in result.by_lung().items():
        print(f"  R={r:g} C={c:g}: {mae!r}", file=out)
    if args.out:
        frame = pd.DataFrame(result.rows, columns=["breath_id", "R", "C", "masked_mae"])
        _write(args.out, frame.to_csv(index=False), "w")


def cmd_predict(args, out=sys.stdout):
    params = _load_checkpoint(args.checkpoint)
    _check_writable(args.out)
    d = _read_dataset(args.input)
    ids = read_row_ids(args.input)
    preds = np.concatenate([predict(params, featurize(b)) for b in d]) if len(d) else []
    if len(preds) != len(ids):
        raise CliError(f"{args.input}: {len(ids)} rows but {len(preds)} predictions")
    lines = ["id,pressure"] + [f"{i},{float(p)!r}" for i, p in zip(ids, preds)]
    _write(args.out, "\n".join(lines) + "\n", "w")
    print(f"wrote {len(ids)} predictions to {args.out}", file=out)


def _target(spec, sim):
    n = sim.steps_per_breath
    if spec == "peep":
        return np.full(n, sim.peep)
    if spec.startswith("step:"):
        try:
            return np.full(n, sim.peep + float(spec[5:]))
        except ValueError:
            raise CliError(f"--target {spec!r}: bad step height") from None
    try:
        frame = pd.read_csv(spec)
    except OSError as exc:
        raise CliError(f"--target {spec}: {exc.strerror}") from None
    if "target" not in frame.columns:
        raise CliError(f"--target {spec}: missing column 'target'")
    return frame["target"].to_numpy(dtype=np.float64)


def cmd_pid_track(args, out=sys.stdout):
    cfgs = _configs(args)
    _check_writable(args.out)
    sim, gains = cfgs["sim"], cfgs["pid"]
    target = _target(args.target, sim)
    try:
        breath, mae = track_waveform(gains, target, LungSettings(args.R, args.C), sim)
    except ValueError as exc:
        raise CliError(f"pid-track: {exc}") from None
    frame = pd.DataFrame({"time_s": breath.time_s, "target": target,
                          "pressure": breath.pressure, "u_in": breath.u_in,
                          "u_out": breath.u_out})
    _write(args.out, frame.to_csv(index=False, float_format=_float_repr), "w")
    report = {"tracking_mae": mae, "kp": gains.kp, "ki": gains.ki, "kd": gains.kd,
              "windup_limit": gains.windup_limit, "R": args.R, "C": args.C}
    _write(str(args.out) + ".report.json", json.dumps(report, indent=2) + "\n", "w")
    print(f"tracking_mae: {mae!r}", file=out)


def cmd_plot(args, out=sys.stdout):
    _check_writable(args.out)
    d = _read_dataset(args.input)
    params = _load_checkpoint(args.checkpoint) if args.checkpoint else None
    try:
        frame = plot_data(d, args.kind, args.breath_id, params,
                          bins=args.bins, inspiratory_only=args.inspiratory_only)
    except (KeyError, ValueError) as exc:
        raise CliError(f"plot: {exc.args[0]}") from None
    svg = Path(args.out)
    csv_path = svg.with_suffix(".csv")
    title = args.kind if args.breath_id is None else f"{args.kind}, breath {args.breath_id}"
    render(frame, args.kind, svg, title)
    _write(csv_path, frame.to_csv(index=False, float_format=_float_repr), "w")
    print(f"wrote {svg} and {csv_path}", file=out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ventpress", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True, out_help="output path"):
        p.add_argument("--seed", type=int, help="seed for simulation and training")
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="config override, e.g. train.epochs=50 (repeatable)")
        p.add_argument("--threads", type=int, default=os.cpu_count(),
                       help="worker threads (default: all cores)")
        p.add_argument("--out", required=out_required, help=out_help)

    p = sub.add_parser("generate", help="simulate breaths and write a CSV")
    p.add_argument("-n", type=int, required=True, help="number of breaths")
    common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("stats", help="dataset statistics")
    p.add_argument("input")
    common(p, False, "also write the stats as JSON here")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", help="train the LSTM on a CSV with pressure")
    p.add_argument("input")
    p.add_argument("--report", help="training report JSON (default: <out>.report.json)")
    p.add_argument("-v", "--verbose", action="store_true", help="print every epoch")
    common(p, True, "checkpoint path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="masked MAE of a checkpoint on a CSV")
    p.add_argument("input")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split-from", help="training report; evaluate only its validation breaths")
    common(p, False, "per-breath CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="write id,pressure predictions")
    p.add_argument("input")
    p.add_argument("--checkpoint", required=True)
    common(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("pid-track", help="closed-loop PID baseline on the simulated lung")
    p.add_argument("--target", default="step:10",
                   help="'peep', 'step:<cmH2O above peep>' or a CSV with a target column")
    p.add_argument("-R", type=float, default=20.0)
    p.add_argument("-C", type=float, default=50.0)
    common(p, True, "trajectory CSV")
    p.set_defaults(func=cmd_pid_track)

    p = sub.add_parser("plot", help="SVG figure plus CSV of the plotted points")
    p.add_argument("input")
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--breath-id", type=int)
    p.add_argument("--checkpoint", help="needed for pred_vs_actual")
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--inspiratory-only", action="store_true",
                   help="histogram only rows with u_out = 0")
    common(p, True, "SVG path; the CSV goes next to it")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None, out=sys.stdout) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args, out=out)
    except (CliError, config_mod.ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError) as exc:
        print(f"error: {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
