"""Experiment runner.

Subcommands:
  synth   -- aggregate three fixed triangular experts on a synthetic
             mixture stream and write loss/weight/CDF trajectories.
  load    -- fit the 21-expert calendar roster on hourly load data and
             replay the test year with confidence-weighted aggregation.
  verify  -- run the randomized property suites headlessly.

All outputs are CSV plus a flat key=value manifest; plotting is left to
downstream tools.  Exit codes: 0 success, 1 property/bound failure,
2 usage, 3 I/O.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from . import verify as verify_mod
from .data import (
    CsvSchema,
    default_generators,
    default_test_boundary,
    load_csv,
    rotating_leader_schedule,
    smooth_crossfade_schedule,
    split_train_test,
    synth_stream,
)
from .experts import triangular_cdf
from .game import GameConfig, GameLog, OnlineGame, regret_report
from .grids import GridDomain, cdf_to_row, quantile
from .roster import build_load_roster, roster_confidences, roster_forecasts

logger = logging.getLogger(__name__)

QUANTILE_LEVELS = (0.05, 0.25, 0.75, 0.95)


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


@dataclass
class RunManifest:
    """Flat record of one run: what was asked for and what came out.
    Re-running with the same config and inputs reproduces the metrics."""

    experiment: str
    config: dict
    seed: int
    inputs: list[str]
    out_dir: str
    metrics: dict = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        blob = "|".join(f"{k}={_fmt(v)}" for k, v in sorted(self.config.items()))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def write(self, path) -> None:
        lines = [
            f"experiment={self.experiment}",
            f"config_hash={self.config_hash}",
            f"seed={self.seed}",
        ]
        lines += [f"cfg_{k}={_fmt(v)}" for k, v in sorted(self.config.items())]
        lines += [f"input_{i}={p}" for i, p in enumerate(self.inputs)]
        lines.append(f"out_dir={self.out_dir}")
        lines += [f"metric_{k}={_fmt(v)}" for k, v in self.metrics.items()]
        tmp = str(path) + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        os.replace(tmp, path)


def read_manifest(path) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                k, _, v = line.partition("=")
                out[k] = v
    return out


def _regret_metrics(log: GameLog, alpha: float) -> dict:
    report = regret_report(log)
    metrics = {
        "steps": report.steps,
        "final_learner_loss": report.learner_loss,
        "min_expert_loss": float(report.expert_losses.min()),
        "final_regret_vs_best": float(report.final_regret.max()),
        "regret_bound": report.bound,
    }
    for i, loss in enumerate(report.expert_losses):
        metrics[f"expert_{i + 1}_loss"] = float(loss)
    if alpha == 0.0:
        metrics["bound_satisfied"] = report.all_bounds_satisfied
    else:
        metrics["bound_satisfied"] = "not_asserted_for_alpha>0"
    return metrics


def _write_loss_curves(path, log: GameLog) -> None:
    n = log.n
    cum_h = log.learner_cumulative()
    cum_l = log.expert_cumulative()
    header = ["t", "H", "H_avg"] + [f"L_{i + 1}" for i in range(n)]
    rows = []
    for t in range(log.steps):
        rows.append([t + 1, cum_h[t], cum_h[t] / (t + 1)] + list(cum_l[t]))
    _write_csv(path, header, rows)


def _write_weight_trajectories(path, log: GameLog) -> None:
    header = ["t"] + [f"q_{i + 1}" for i in range(log.n)]
    rows = [[t + 1] + list(log.weights[t]) for t in range(log.steps)]
    _write_csv(path, header, rows)


def _write_regret_report(path, log: GameLog, names=None) -> None:
    report = regret_report(log)
    header = [
        "expert", "final_loss", "final_regret", "final_discounted_regret",
        "max_discounted_regret", "bound", "bound_satisfied",
    ]
    rows = []
    for i in range(log.n):
        name = names[i] if names else f"expert_{i + 1}"
        rows.append([
            name,
            float(report.expert_losses[i]),
            float(report.final_regret[i]),
            float(report.final_discounted_regret[i]),
            float(report.max_discounted_regret[i]),
            report.bound,
            bool(report.bound_satisfied[i]),
        ])
    _write_csv(path, header, rows)


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------


def _run_synth_game(mode, alpha, domain, cdfs, outcomes, snapshot_steps=()):
    game = OnlineGame(GameConfig(domain, mode=mode, alpha=alpha), len(cdfs))
    snapshots = []
    wanted = set(snapshot_steps)
    for t, y in enumerate(outcomes, start=1):
        forecast = game.step(cdfs, y)
        if t in wanted:
            snapshots.append((t, forecast))
    return game, snapshots


def cmd_synth(args) -> int:
    domain = GridDomain(0.0, 1.0, args.grid)
    gens = default_generators()
    if args.method == 1:
        schedule = rotating_leader_schedule(args.steps, len(gens), args.segments)
    else:
        schedule = smooth_crossfade_schedule(args.steps, len(gens), args.segments)
    outcomes = synth_stream(gens, schedule, args.steps, args.seed)
    cdfs = [triangular_cdf(g, domain) for g in gens]

    snap_steps = sorted({int(t) for t in np.linspace(1, args.steps, num=min(8, args.steps))})
    game, snapshots = _run_synth_game(
        args.mode, args.alpha, domain, cdfs, outcomes, snap_steps
    )
    baseline, _ = _run_synth_game("wa", 0.0, domain, cdfs, outcomes)

    os.makedirs(args.out, exist_ok=True)
    game.log.to_csv(os.path.join(args.out, "game_log.csv"))
    _write_loss_curves(os.path.join(args.out, "loss_curves.csv"), game.log)
    _write_weight_trajectories(os.path.join(args.out, "weights.csv"), game.log)
    _write_regret_report(os.path.join(args.out, "regret_report.csv"), game.log)
    _write_csv(
        os.path.join(args.out, "cdf_snapshots.csv"),
        ["t", "a", "b", "d"] + [f"f_{s + 1}" for s in range(domain.d)],
        [[t] + cdf_to_row(f) for t, f in snapshots],
    )

    final = float(game.log.learner_cumulative()[-1])
    base = float(baseline.log.learner_cumulative()[-1])
    config = {
        "method": args.method, "mode": args.mode, "alpha": args.alpha,
        "steps": args.steps, "grid": args.grid, "segments": args.segments,
    }
    metrics = _regret_metrics(game.log, args.alpha)
    metrics["wa_alpha0_baseline_loss"] = base
    metrics["loss_normalized_vs_wa_alpha0"] = final / base
    if args.mode == "aa":
        metrics["bound_expression"] = "(b-a)/2*ln(N)"
    else:
        metrics["bound_expression"] = "2*(b-a)*ln(N)"
        metrics["bound_wa_form"] = 2.0 * domain.width * np.log(len(cdfs))
    manifest = RunManifest("synth", config, args.seed, [], args.out, metrics)
    manifest.write(os.path.join(args.out, "manifest.txt"))

    print(f"synth: T={args.steps} mode={args.mode} alpha={args.alpha} "
          f"loss={final:.6g} bound={game.log.bound:.6g}")
    if args.alpha == 0.0 and metrics["bound_satisfied"] is not True:
        print("regret bound violated", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# load
# ---------------------------------------------------------------------------


def _load_records(args, schema):
    if args.data:
        records, report = load_csv(args.data, schema)
        if args.split:
            boundary = datetime.fromisoformat(args.split)
        else:
            boundary = default_test_boundary(records)
        train, test = split_train_test(records, boundary)
        inputs = [args.data]
        reports = [("data", report)]
    else:
        train, rep_train = load_csv(args.train, schema)
        test, rep_test = load_csv(args.test, schema)
        inputs = [args.train, args.test]
        reports = [("train", rep_train), ("test", rep_test)]
    return train, test, inputs, reports


def cmd_load(args) -> int:
    schema = CsvSchema(
        timestamp_col=args.timestamp_col,
        load_col=args.load_col,
        temperature_col=args.temperature_col,
        delimiter=args.delimiter,
    )
    try:
        train, test, inputs, reports = _load_records(args, schema)
    except (OSError, ValueError) as exc:
        print(f"cannot ingest data: {exc}", file=sys.stderr)
        return 3

    max_train_load = max(r.load for r in train)
    domain = GridDomain(0.0, 1.05 * max_train_load, args.grid)
    experts, failures = build_load_roster(
        train, components=args.components, seed=args.seed, confidence=args.confidence
    )
    for name, reason in failures:
        print(f"roster fit failed for {name}: {reason}", file=sys.stderr)
    if len(experts) < 2 or (failures and failures[0][0] == "expert01_anytime"):
        print("roster too small to aggregate", file=sys.stderr)
        return 1

    os.makedirs(args.out, exist_ok=True)
    expert_dir = os.path.join(args.out, "experts")
    os.makedirs(expert_dir, exist_ok=True)
    for e in experts:
        with open(os.path.join(expert_dir, f"{e.name}.txt"), "w", encoding="utf-8") as fh:
            fh.write(e.model.to_text())

    game = OnlineGame(
        GameConfig(domain, mode=args.mode, alpha=args.alpha,
                   confidence_enabled=args.confidence != "off"),
        len(experts),
    )
    clipped = 0
    band_rows = []
    record_rows = []
    conf_rows = []
    prev_temp = train[-1].temperature
    for t, rec in enumerate(test, start=1):
        y = min(max(rec.load, domain.a), domain.b)
        if y != rec.load:
            clipped += 1
        p = roster_confidences(experts, rec.timestamp)
        forecasts = roster_forecasts(experts, prev_temp, domain)
        forecast = game.step(forecasts, y, p)
        if rec.timestamp.hour == args.band_hour:
            band_rows.append(
                [t, rec.timestamp.isoformat()]
                + [quantile(forecast, tau) for tau in QUANTILE_LEVELS]
                + [y]
            )
        record_rows.append([rec.timestamp.isoformat(), y, rec.temperature])
        conf_rows.append([t, rec.timestamp.isoformat()] + list(p))
        prev_temp = rec.temperature
    if clipped:
        logger.warning("%d test outcomes clipped into [%g, %g]",
                       clipped, domain.a, domain.b)

    names = [e.name for e in experts]
    game.log.to_csv(os.path.join(args.out, "game_log.csv"))
    _write_loss_curves(os.path.join(args.out, "loss_curves.csv"), game.log)
    _write_regret_report(os.path.join(args.out, "regret_report.csv"), game.log, names)
    _write_csv(
        os.path.join(args.out, "quantile_bands.csv"),
        ["t", "timestamp"] + [f"q{int(100 * tau):02d}" for tau in QUANTILE_LEVELS] + ["actual"],
        band_rows,
    )
    _write_csv(
        os.path.join(args.out, "conf_blocks.csv"),
        ["t", "timestamp"] + names,
        conf_rows,
    )
    _write_csv(
        os.path.join(args.out, "records.csv"),
        ["timestamp", "load", "temperature"],
        record_rows,
    )
    with open(os.path.join(args.out, "data_quality.txt"), "w", encoding="utf-8") as fh:
        for label, report in reports:
            for k, v in report.as_dict().items():
                fh.write(f"{label}_{k}={v}\n")
        fh.write(f"test_outcomes_clipped={clipped}\n")

    config = {
        "mode": args.mode, "confidence": args.confidence, "alpha": args.alpha,
        "grid": args.grid, "components": args.components,
        "band_hour": args.band_hour,
    }
    metrics = _regret_metrics(game.log, args.alpha)
    metrics["n_experts"] = len(experts)
    metrics["n_fit_failures"] = len(failures)
    metrics["domain_b"] = domain.b
    metrics["final_average_loss"] = float(
        game.log.learner_cumulative()[-1] / game.log.steps
    )
    manifest = RunManifest("load", config, args.seed, inputs, args.out, metrics)
    manifest.write(os.path.join(args.out, "manifest.txt"))

    print(f"load: T={game.log.steps} experts={len(experts)} mode={args.mode} "
          f"confidence={args.confidence} "
          f"avg_loss={metrics['final_average_loss']:.6g}")
    if args.alpha == 0.0 and metrics["bound_satisfied"] is not True:
        print("discounted regret bound violated", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def cmd_verify(args) -> int:
    results = verify_mod.run_all(args.seed, args.cases)
    failures = []
    for res in results:
        print(res.line())
        if not res.passed:
            failures.append({"name": res.name, "detail": res.detail,
                             "witness": res.witness})
    if failures:
        blob = json.dumps({"failures": failures}, indent=2)
        if args.report:
            with open(args.report, "w", encoding="utf-8") as fh:
                fh.write(blob + "\n")
        else:
            print(blob, file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crpsmix",
        description="Online aggregation of probabilistic forecasts under CRPS.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    out_default = os.environ.get("CRPSMIX_OUT")

    ps = sub.add_parser("synth", help="synthetic triangular-mixture experiment")
    ps.add_argument("--method", type=int, choices=(1, 2), required=True,
                    help="1: rotating leader, 2: smooth crossfade")
    ps.add_argument("--mode", choices=("aa", "wa"), default="aa")
    ps.add_argument("--alpha", type=float, default=0.001)
    ps.add_argument("--steps", type=int, default=3000)
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--grid", type=int, default=1024)
    ps.add_argument("--segments", type=int, default=6)
    ps.add_argument("--out", default=out_default)
    ps.set_defaults(func=cmd_synth)

    pl = sub.add_parser("load", help="hourly load forecasting experiment")
    pl.add_argument("--train", help="training CSV")
    pl.add_argument("--test", help="testing CSV")
    pl.add_argument("--data", help="single CSV to split by --split")
    pl.add_argument("--split", help="ISO timestamp boundary for --data")
    pl.add_argument("--mode", choices=("aa", "wa"), default="aa")
    pl.add_argument("--confidence", choices=("smooth", "binary", "off"),
                    default="smooth")
    pl.add_argument("--alpha", type=float, default=0.001)
    pl.add_argument("--grid", type=int, default=1024)
    pl.add_argument("--seed", type=int, default=0)
    pl.add_argument("--components", type=int, default=2)
    pl.add_argument("--band-hour", type=int, default=12)
    pl.add_argument("--timestamp-col", default="timestamp")
    pl.add_argument("--load-col", default="load")
    pl.add_argument("--temperature-col", default="temperature")
    pl.add_argument("--delimiter", default=",")
    pl.add_argument("--out", default=out_default)
    pl.set_defaults(func=cmd_load)

    pv = sub.add_parser("verify", help="run the property suites")
    pv.add_argument("--seed", type=int, default=0)
    pv.add_argument("--cases", type=int, default=100)
    pv.add_argument("--report", help="write the JSON failure report here")
    pv.set_defaults(func=cmd_verify)
    return parser


def _validate(parser, args) -> None:
    if args.command == "synth":
        if args.steps < 1:
            parser.error("--steps must be positive (empty run)")
        if args.grid < 1:
            parser.error("--grid must be positive")
        if not 0.0 <= args.alpha <= 1.0:
            parser.error("--alpha must lie in [0, 1]")
        if args.out is None:
            parser.error("need --out or the CRPSMIX_OUT environment variable")
    elif args.command == "load":
        if bool(args.data) == bool(args.train):
            parser.error("give either --data [--split] or --train with --test")
        if args.train and not args.test:
            parser.error("--train requires --test")
        if args.split:
            try:
                datetime.fromisoformat(args.split)
            except ValueError:
                parser.error(f"--split is not an ISO timestamp: {args.split!r}")
        if args.grid < 1:
            parser.error("--grid must be positive")
        if not 0.0 <= args.alpha <= 1.0:
            parser.error("--alpha must lie in [0, 1]")
        if args.components not in (1, 2, 3):
            parser.error("--components must be 1, 2 or 3")
        if not 0 <= args.band_hour <= 23:
            parser.error("--band-hour must be an hour 0..23")
        if args.out is None:
            parser.error("need --out or the CRPSMIX_OUT environment variable")
    elif args.command == "verify":
        if args.cases < 1:
            parser.error("--cases must be positive")


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    _validate(parser, args)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"missing file: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
