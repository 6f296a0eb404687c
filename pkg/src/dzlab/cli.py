"""Pipeline entry point.

Subcommands: simulate (persona fleets to episode JSONL), collect (live
session service), train (one predictor), eval (three-way comparison),
report (behavior/timing/accuracy renderings), sweep (persona bias
calibration).  Every run writes a manifest (resolved config, config
hash, seeds, version) next to its artifacts so it can be reproduced.
"""

from __future__ import annotations

import argparse
import asyncio
import csv
import hashlib
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .dataset import (build_dataset, export_episodes_csv, read_episodes_jsonl,
                      write_episodes_jsonl)
from .evaluate import (behavior_metrics, compare_models, decision_timing,
                       mean_refined_times, render_accuracy_report,
                       render_behavior_table, write_accuracy_csv,
                       write_behavior_csv, write_decision_timing_csv,
                       write_prediction_dump)
from .model import (GENERIC, PERSONALIZED, Hyper, LogisticModel,
                    episodes_to_features, logistic_train, train)
from .persona import (PersonaProfile, calibrate_go_bias, load_personas,
                      rollout_fleet, save_personas)
from .scenario import ConfigError, ScenarioConfig
from .session import SessionManager, create_app, serve_tcp
from .svgplot import render_timing_svg

log = logging.getLogger("dzlab")

CONFIG_ENV_VAR = "DZLAB_CONFIG"


def _load_scenario_config(path: str | None) -> ScenarioConfig:
    path = path or os.environ.get(CONFIG_ENV_VAR)
    if path:
        return ScenarioConfig.from_json(path)
    return ScenarioConfig()


def _write_manifest(out_dir: Path, command: str, resolved: dict, seeds: list[int]) -> None:
    canonical = json.dumps(resolved, sort_keys=True)
    manifest = {
        "command": command,
        "resolved_config": resolved,
        "config_hash": hashlib.sha256(canonical.encode()).hexdigest(),
        "seeds": seeds,
        "version": __version__,
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    log.info("resolved config: %s", canonical)


def _episodes_by_driver(episodes):
    by = {}
    for ep in episodes:
        by.setdefault(ep.driver_id, []).append(ep)
    return by


def _hyper_from_args(args) -> Hyper:
    return Hyper(epochs=args.epochs, lr=args.lr, batch_size=args.batch_size,
                 k_mix=args.k_mix)


def cmd_simulate(args) -> int:
    config = _load_scenario_config(args.config)
    profiles = load_personas(args.personas)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fleet = rollout_fleet(profiles, args.episodes, args.seed, config)
    episodes = [ep for name in sorted(fleet) for ep in fleet[name]]
    write_episodes_jsonl(out / "episodes.jsonl", episodes)
    export_episodes_csv(out / "episodes.csv", episodes)
    _write_manifest(out, "simulate", {
        "personas": [asdict(p) for p in profiles],
        "episodes_per_driver": args.episodes,
        "scenario": asdict(config),
    }, [args.seed])
    log.info("wrote %d episodes for %d personas to %s", len(episodes), len(profiles), out)
    return 0


def cmd_collect(args) -> int:
    config = _load_scenario_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manager = SessionManager(out, config, fast=args.fast)
    _write_manifest(out, "collect", {"scenario": asdict(config), "fast": args.fast}, [])

    async def run():
        servers = []
        if args.serve:
            host, port = args.serve.rsplit(":", 1)
            server = await serve_tcp(manager, host, int(port))
            log.info("TCP session service on %s", args.serve)
            servers.append(server.serve_forever())
        if args.http:
            import uvicorn
            host, port = args.http.rsplit(":", 1)
            app = create_app(manager, static_dir=args.static)
            uv = uvicorn.Server(uvicorn.Config(app, host=host, port=int(port),
                                               log_level="warning"))
            log.info("WebSocket/UI service on %s", args.http)
            servers.append(uv.serve())
        if not servers:
            raise ConfigError("collect needs --serve and/or --http")
        await asyncio.gather(*servers)

    try:
        asyncio.run(run())
    except KeyboardInterrupt:
        log.info("collection service stopped")
    return 0


def cmd_train(args) -> int:
    episodes = read_episodes_jsonl(args.data)
    by_driver = _episodes_by_driver(episodes)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train_samples, test_samples, meta = build_dataset(
        by_driver, W=args.window, split_seed=args.seed, holdout_fraction=args.holdout)
    if args.variant == "logistic":
        from .dataset import split_episodes
        train_eps, _ = split_episodes(by_driver, args.seed, args.holdout)
        flat = [ep for d in sorted(train_eps) for ep in train_eps[d]]
        X, y = episodes_to_features(flat)
        model, history = logistic_train(X, y)
        model.save(out / "logistic.json")
    else:
        variant = PERSONALIZED if args.variant == "personalized" else GENERIC
        hyper = _hyper_from_args(args)
        params, history = train(train_samples, meta, hyper, seed=args.seed, variant=variant)
        params.save(out / "checkpoint.json", meta)
    with open(out / "loss_history.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "loss"])
        for i, value in enumerate(history):
            w.writerow([i, repr(value)])
    with open(out / "dataset_meta.json", "w") as fh:
        json.dump(meta.to_dict(), fh, indent=2)
        fh.write("\n")
    _write_manifest(out, "train", {
        "variant": args.variant, "window": args.window, "holdout": args.holdout,
        "epochs": args.epochs, "lr": args.lr, "batch_size": args.batch_size,
        "k_mix": args.k_mix, "data": str(args.data),
        "n_train": len(train_samples), "n_test": len(test_samples),
    }, [args.seed])
    log.info("trained %s; final loss %.4f", args.variant, history[-1])
    return 0


def cmd_eval(args) -> int:
    episodes = read_episodes_jsonl(args.data)
    by_driver = _episodes_by_driver(episodes)
    seeds = [int(s) for s in args.seeds.split(",") if s != ""]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    hyper = _hyper_from_args(args)
    report, records = compare_models(by_driver, seeds, W=args.window,
                                     holdout_fraction=args.holdout, hyper=hyper,
                                     personalized_k_mix=args.k_mix)
    text = render_accuracy_report(report)
    (out / "accuracy_report.txt").write_text(text + "\n")
    write_accuracy_csv(out / "accuracy_report.csv", report)
    write_prediction_dump(out / "predictions.jsonl", records)
    _write_manifest(out, "eval", {
        "window": args.window, "holdout": args.holdout, "epochs": args.epochs,
        "lr": args.lr, "batch_size": args.batch_size, "k_mix": args.k_mix,
        "data": str(args.data),
    }, seeds)
    print(text)
    return 0


def cmd_report(args) -> int:
    episodes = read_episodes_jsonl(args.data)
    by_driver = _episodes_by_driver(episodes)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    table = behavior_metrics(by_driver)
    behavior_text = render_behavior_table(table)
    (out / "behavior_table.txt").write_text(behavior_text + "\n")
    write_behavior_csv(out / "behavior_table.csv", table)

    rows = decision_timing(episodes)
    write_decision_timing_csv(out / "decision_timing.csv", rows)
    render_timing_svg(rows, out / "decision_timing.svg")
    stop_mean, go_mean = mean_refined_times(rows)
    timing_text = (f"mean refined time-to-stop-line: stop {stop_mean:.2f}s, "
                   f"go {go_mean:.2f}s\n")
    (out / "decision_timing_summary.txt").write_text(timing_text)

    _write_manifest(out, "report", {"data": str(args.data)}, [])
    print(behavior_text)
    print()
    print(timing_text, end="")
    return 0


def cmd_sweep(args) -> int:
    with open(args.spec) as fh:
        sweep_spec = json.load(fh)
    config = _load_scenario_config(args.config)
    profiles = []
    for entry in sweep_spec["personas"]:
        target = entry.pop("target_pof_go")
        base = PersonaProfile(**{**entry, "go_bias": 0.0})
        bias, achieved = calibrate_go_bias(base, target, n_episodes=args.episodes,
                                           base_seed=args.seed, config=config)
        profiles.append(PersonaProfile(**{**entry, "go_bias": bias}))
        log.info("%s: target PofGo %.3f -> bias %+.4f (achieved %.3f)",
                 entry["name"], target, bias, achieved)
    save_personas(profiles, args.out,
                  note=f"calibrated by bisection: {args.episodes} episodes/eval, "
                       f"seed {args.seed}")
    log.info("wrote %s", args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dzlab", description=__doc__)
    parser.add_argument("--verbose", "-v", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common_train_flags(p):
        p.add_argument("--window", type=int, default=25, help="ticks per sample window")
        p.add_argument("--holdout", type=float, default=0.25)
        p.add_argument("--epochs", type=int, default=40)
        p.add_argument("--lr", type=float, default=6e-3)
        p.add_argument("--batch-size", type=int, default=300)
        mix = p.add_mutually_exclusive_group()
        mix.add_argument("--k-mix", dest="k_mix", action="store_true", default=True,
                         help="mix the common embedding into the personalized key source")
        mix.add_argument("--no-k-mix", dest="k_mix", action="store_false")

    p = sub.add_parser("simulate", help="roll persona episodes to JSONL/CSV")
    p.add_argument("--personas", default=None, help="persona fixture JSON (default: shipped)")
    p.add_argument("--episodes", type=int, required=True, help="episodes per persona")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None, help="scenario config JSON")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("collect", help="run the live session service")
    p.add_argument("--serve", default=None, help="TCP HOST:PORT for JSON-lines clients")
    p.add_argument("--http", default=None, help="HOST:PORT for WebSocket + browser UI")
    p.add_argument("--static", default=None, help="directory of built UI assets")
    p.add_argument("--out", required=True, help="episode store directory")
    p.add_argument("--fast", action="store_true", help="run ticks without wall-clock pacing")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("train", help="train one predictor")
    p.add_argument("--data", required=True, help="episodes JSONL")
    p.add_argument("--variant", choices=["personalized", "generic", "logistic"],
                   required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    add_common_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="three-way accuracy comparison")
    p.add_argument("--data", required=True)
    p.add_argument("--seeds", default="0,1,2,3,4")
    p.add_argument("--out", required=True)
    add_common_train_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="behavior table + decision-timing renderings")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("sweep", help="calibrate persona go biases by bisection")
    p.add_argument("--spec", required=True, help="sweep spec JSON (base personas + targets)")
    p.add_argument("--out", required=True, help="output persona fixture JSON")
    p.add_argument("--episodes", type=int, default=400, help="episodes per bisection probe")
    p.add_argument("--seed", type=int, default=20240)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(json.dumps({"error": str(exc), "error_type": type(exc).__name__}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
