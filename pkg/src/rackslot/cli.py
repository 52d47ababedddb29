"""Command-line interface: run one scenario, sweep a parameter, or
validate a configuration without running it."""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import ConfigError, config_warnings, load_config
from .metrics import DROP_BUCKET_NS
from .presets import PRESETS, preset
from .runner import QUEUE_SAMPLE_NS, Runtime
from .sweep import SWEEPABLE, sweep
from .workload import WorkloadError


def _add_config_args(sub):
    sub.add_argument("--preset", choices=sorted(PRESETS),
                     help="start from a canned scenario")
    sub.add_argument("--config", metavar="PATH",
                     help="INI file layered over the preset and defaults")
    sub.add_argument("--set", dest="overrides", action="append", default=[],
                     metavar="SECTION.KEY=VALUE",
                     help="override one config key (repeatable)")
    sub.add_argument("--seed", type=int, help="shortcut for run.seed")
    sub.add_argument("--protocol", choices=("pl2", "raw", "rds"),
                     help="shortcut for run.protocol")


def _overrides(args):
    out = []
    if args.seed is not None:
        out.append(f"run.seed={args.seed}")
    if args.protocol is not None:
        out.append(f"run.protocol={args.protocol}")
    out.extend(args.overrides)
    return out


def _load(args):
    extra = preset(args.preset) if args.preset else None
    return load_config(args.config, _overrides(args), extra)


def _write_report(report, out_dir, fmt):
    os.makedirs(out_dir, exist_ok=True)
    base = os.path.join(out_dir,
                        f"{report.label}_{report.protocol}_{report.seed}")
    paths = []
    if fmt in ("json", "both"):
        path = base + ".json"
        with open(path, "wb") as fh:
            fh.write(report.to_json_bytes())
        paths.append(path)
    if fmt in ("csv", "both"):
        path = base + ".csv"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(report.csv_header() + "\n" + report.to_csv_row() + "\n")
        paths.append(path)
    return paths


def _write_series(runtime, report, out_dir):
    base = os.path.join(out_dir,
                        f"{report.label}_{report.protocol}_{report.seed}")
    qpath = base + "_queue_depth.csv"
    with open(qpath, "w", encoding="utf-8") as fh:
        fh.write("time_ns,queue_bytes\n")
        for i, depth in enumerate(runtime.queue_series):
            fh.write(f"{i * QUEUE_SAMPLE_NS},{depth}\n")
    dpath = base + "_drops.csv"
    buckets = runtime.metrics.drop_buckets
    n = -(-report.duration_ns // DROP_BUCKET_NS) if report.duration_ns else 0
    with open(dpath, "w", encoding="utf-8") as fh:
        fh.write("time_ns,drops\n")
        for b in range(max(n, max(buckets, default=-1) + 1)):
            fh.write(f"{b * DROP_BUCKET_NS},{buckets.get(b, 0)}\n")
    return [qpath, dpath]


def _cmd_run(args):
    cfg = _load(args)
    for warning in config_warnings(cfg):
        print(f"warning: {warning}", file=sys.stderr)
    runtime = Runtime(cfg, debug=args.debug_audit)
    report = runtime.run()
    out_dir = args.out or cfg.out_dir
    paths = _write_report(report, out_dir, args.format or cfg.out_format)
    if runtime.queue_series is not None:
        paths.extend(_write_series(runtime, report, out_dir))
    if not args.quiet:
        p99 = report.latency_p99_ns
        print(f"{report.label} [{report.protocol}] seed={report.seed}: "
              f"{report.messages_completed}/{report.messages_generated} messages, "
              f"goodput {report.goodput_bps / 1e9:.2f} Gbps, "
              f"drops {report.drops_buffer_overrun}+{report.drops_unsolicited}, "
              f"p99 {'n/a' if p99 is None else f'{p99 / 1000:.1f} us'}")
        for path in paths:
            print(f"wrote {path}")
    return 0


def _parse_values(text):
    values = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        try:
            values.append(int(token))
        except ValueError:
            try:
                values.append(float(token))
            except ValueError:
                raise ConfigError(f"bad sweep value {token!r}") from None
    if not values:
        raise ConfigError("no sweep values given")
    return values


def _cmd_sweep(args):
    cfg = _load(args)  # validates the base configuration up front
    for warning in config_warnings(cfg):
        print(f"warning: {warning}", file=sys.stderr)
    values = _parse_values(args.values)
    points = sweep(args.param, values,
                   replicates=args.replicates,
                   base_seed=cfg.seed,
                   config_path=args.config,
                   overrides=_overrides(args),
                   extra=preset(args.preset) if args.preset else None,
                   jobs=args.jobs)
    out_dir = args.out or cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"sweep_{cfg.label}_{args.param}.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([p.to_dict() for p in points], fh, indent=2)
        fh.write("\n")

    print(f"{'value':>10} {'p99_us':>12} {'ci95':>10} {'loss':>12} "
          f"{'goodput_gbps':>14} {'score':>10}")
    for point in points:
        p99_mean, p99_half = point.p99_ci()
        loss_mean, _ = point.loss_ci()
        good_mean, _ = point.goodput_ci()
        score = good_mean / p99_mean if p99_mean else float("nan")
        print(f"{point.value!s:>10} {p99_mean / 1000:>12.2f} "
              f"{p99_half / 1000:>10.2f} {loss_mean:>12.6f} "
              f"{good_mean / 1e9:>14.3f} {score:>10.1f}")
    print(f"wrote {path}")
    return 0


def _cmd_validate(args):
    cfg = _load(args)
    warnings = config_warnings(cfg)
    for warning in warnings:
        print(f"warning: {warning}")
    print(f"ok: {cfg.label} [{cfg.protocol}] "
          f"{cfg.scenario.pattern} x{cfg.scenario.width} "
          f"seed={cfg.seed}"
          + (f" ({len(warnings)} warning(s))" if warnings else ""))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rackslot",
        description="Deterministic simulator of a single-switch rack "
                    "network with reservation-based, raw, and "
                    "receiver-driven transports.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute one scenario")
    _add_config_args(run_p)
    run_p.add_argument("--out", metavar="DIR", help="report directory")
    run_p.add_argument("--format", choices=("json", "csv", "both"))
    run_p.add_argument("--debug-audit", action="store_true",
                       help="run with the register audit enabled")
    run_p.add_argument("--quiet", action="store_true")
    run_p.set_defaults(fn=_cmd_run)

    sweep_p = sub.add_parser("sweep", help="run one parameter over values")
    _add_config_args(sweep_p)
    sweep_p.add_argument("--param", required=True, choices=sorted(SWEEPABLE))
    sweep_p.add_argument("--values", required=True,
                         help="comma-separated values")
    sweep_p.add_argument("--replicates", type=int, default=5)
    sweep_p.add_argument("--jobs", type=int, default=1,
                         help="worker processes")
    sweep_p.add_argument("--out", metavar="DIR")
    sweep_p.set_defaults(fn=_cmd_sweep)

    val_p = sub.add_parser("validate",
                           help="check a configuration and exit")
    _add_config_args(val_p)
    val_p.set_defaults(fn=_cmd_validate)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, WorkloadError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
