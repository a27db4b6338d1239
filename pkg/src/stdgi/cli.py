"""Command-line entry point: ``stdgi {synth,pretrain,embed,train,eval,compare,run}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import pipeline
from .config import ExperimentConfig
from .errors import (ComparisonError, ConfigError, DivergenceError, IngestionError, ParseError,
                     StdgiError, ValidationError)
from .forecaster import MODES

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_DIVERGED = 0, 2, 3, 4
COMMANDS = ("synth", "pretrain", "embed", "train", "eval", "compare", "run")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stdgi", description=__doc__)
    p.add_argument("command", choices=COMMANDS, nargs="?")
    p.add_argument("--config", help="experiment config JSON (defaults apply to omitted keys)")
    p.add_argument("--seed", type=int, help="run a single seed instead of config.seeds")
    p.add_argument("--mode", choices=MODES, help="regressor mode for train/eval (default: both)")
    p.add_argument("--out", help="override output_dir")
    p.add_argument("--print-config", action="store_true", help="print the effective config and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def load_config(args) -> ExperimentConfig:
    raw = {}
    if args.config:
        try:
            with open(args.config) as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: invalid JSON: {exc}") from None
    if args.out:
        raw = dict(raw, output_dir=args.out)
    return ExperimentConfig.from_dict(raw)


def dispatch(cfg: ExperimentConfig, args) -> None:
    seeds = [args.seed] if args.seed is not None else list(cfg.seeds)
    modes = [args.mode] if args.mode else list(MODES)
    cmd = args.command
    if cmd == "synth":
        s = pipeline.run_synth(cfg)
        print(f"synthesized N={s['N']} T={s['T']} alpha={s['alpha']} edges={s['edges']} -> {cfg.out}")
    elif cmd == "pretrain":
        data = pipeline.load_data(cfg)
        for seed in seeds:
            h = pipeline.run_pretrain(cfg, seed, data)
            print(f"seed {seed}: init loss {h.initial_loss:.4f}, final loss {h.loss[-1]:.4f}, "
                  f"held-out accuracy {h.accuracy[-1]:.3f}")
    elif cmd == "embed":
        data = pipeline.load_data(cfg)
        for seed in seeds:
            emb = pipeline.run_embed(cfg, seed, data)
            print(f"seed {seed}: embeddings {emb.shape}")
    elif cmd == "train":
        data = pipeline.load_data(cfg)
        for seed in seeds:
            for mode in modes:
                h = pipeline.run_train(cfg, seed, mode, data)
                print(f"[{mode}] seed {seed}: val MAE {h.initial_val_mae:.4f} -> "
                      f"{min(h.val_mae):.4f} (best epoch {h.best_epoch})")
    elif cmd == "eval":
        data = pipeline.load_data(cfg)
        for seed in seeds:
            for mode in modes:
                r = pipeline.run_eval(cfg, seed, mode, data)
                cells = ", ".join(f"{h.horizon}: MAE {h.mae:.3f}" for h in r.horizons)
                print(f"[{mode}] seed {seed}: {cells}")
    elif cmd == "compare":
        cmp = pipeline.run_compare(cfg, seeds)
        print(cmp.table(cfg.data.step_minutes), end="")
        print(f"relative MAE improvement by horizon: {cmp.relative_improvement['mae']} ({cmp.trend})")
    elif cmd == "run":
        cmp, _ = pipeline.run_all(cfg, seeds)
        print(cmp.table(cfg.data.step_minutes), end="")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        cfg = load_config(args)
        if args.print_config:
            print(cfg.to_json(), end="")
            return EXIT_OK
        if args.command is None:
            parser.error("a command is required unless --print-config is given")
        dispatch(cfg, args)
    except (ConfigError, ValidationError, ComparisonError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ParseError, IngestionError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DivergenceError as exc:
        print(f"numeric divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except StdgiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
