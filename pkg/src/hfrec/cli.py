"""Command-line harness: synthesis, degradation, training, evaluation,
the component ablation, and the detail-weight sweep.

Every command takes ``--config <path.json>`` and ``--out <dir>`` and is a
pure function of its inputs: exit 0 on success, 2 on validation errors,
3 on a numerical abort.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .autodiff import GraphError
from .cpc_net import load_denoiser, save_denoiser
from .diffusion import NumericalAbort
from .experiment import (
    ConfigError,
    ExperimentConfig,
    build_dataset,
    degrade_dataset,
    evaluate,
    load_dataset,
    run_ablation,
    run_weight_sweep,
    split_dataset,
    train_variant,
    write_loss_log,
    write_metrics_csv,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _cmd_synth(cfg: ExperimentConfig, out: Path, args) -> int:
    manifest = build_dataset(cfg, out)
    print(f"wrote {len(manifest['clips'])} clips to {out}")
    return EXIT_OK


def _cmd_degrade(cfg: ExperimentConfig, out: Path, args) -> int:
    manifest = degrade_dataset(cfg, out)
    print(f"degraded {len(manifest['clips'])} clips in {out}")
    return EXIT_OK


def _data_dir(cfg: ExperimentConfig) -> Path:
    if cfg.data_dir is None:
        raise ConfigError("config must set data_dir for this command")
    return Path(cfg.data_dir)


def _cmd_train(cfg: ExperimentConfig, out: Path, args) -> int:
    pairs = load_dataset(_data_dir(cfg))
    train_pairs, _ = split_dataset(pairs, cfg.eval.holdout)
    model, log, aborted = train_variant(
        cfg, train_pairs, mode=cfg.denoiser.mode, loss=cfg.train.loss, seed=cfg.seed
    )
    out.mkdir(parents=True, exist_ok=True)
    write_loss_log(out / "train_log.csv", log)
    save_denoiser(out / "model", model)
    if aborted is not None:
        print(f"training aborted on non-finite loss at step {aborted}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"trained {cfg.train.loss} for {len(log)} steps; model at {out / 'model.ckpt'}")
    return EXIT_OK


def _cmd_eval(cfg: ExperimentConfig, out: Path, args) -> int:
    pairs = load_dataset(_data_dir(cfg))
    _, holdout = split_dataset(pairs, cfg.eval.holdout)
    if cfg.eval.model == "identity":
        model = None
        method = "identity"
    else:
        if cfg.checkpoint is None:
            raise ConfigError("config must set checkpoint (or eval.model='identity')")
        model = load_denoiser(cfg.checkpoint)
        method = "model"
    out.mkdir(parents=True, exist_ok=True)
    records = evaluate(cfg, model, holdout, out_dir=out, method=method)
    write_metrics_csv(out / "metrics.csv", records)
    print(f"wrote metrics for {len(holdout)} clips to {out / 'metrics.csv'}")
    return EXIT_OK


def _cmd_ablate(cfg: ExperimentConfig, out: Path, args) -> int:
    path = run_ablation(cfg, _data_dir(cfg), out, parallel=args.parallel)
    print(f"ablation report at {path}")
    return EXIT_OK


def _cmd_sweep(cfg: ExperimentConfig, out: Path, args) -> int:
    path = run_weight_sweep(cfg, _data_dir(cfg), out, parallel=args.parallel)
    print(f"weight sweep report at {path}")
    return EXIT_OK


_COMMANDS = {
    "synth": _cmd_synth,
    "degrade": _cmd_degrade,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "ablate": _cmd_ablate,
    "sweep-weights": _cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hfrec",
        description="Desk-scale video super-resolution training and evaluation harness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment config (JSON)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument(
            "--parallel",
            action="store_true",
            help="run independent variants in parallel processes (same results)",
        )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.from_json(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](cfg, out, args)
    except NumericalAbort as e:
        print(f"numerical abort: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, GraphError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
