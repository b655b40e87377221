"""
Command-line surface
====================
Subcommands: phantom, augment, pretrain, finetune, eval. Every handler
resolves the RunConfig (file + flags), builds an Orchestrator on the run
directory and returns the process exit code.
"""

import argparse
import logging

import torch

from src.core.config import RunConfig, get_thread_count, load_run_config
from src.core.errors import ConfigError
from src.core.orchestrator import AUGMENT_MODES, Orchestrator
from src.model.config import TaskKind

logger = logging.getLogger(__name__)

TASK_CHOICES = [t.value for t in TaskKind]


def _seed(args: argparse.Namespace) -> int | None:
    return args.seed if getattr(args, "seed", None) is not None else args.global_seed


def _config(args: argparse.Namespace) -> RunConfig:
    overrides = {}
    seed = _seed(args)
    if seed is not None:
        overrides["seed"] = seed
    return load_run_config(args.config, overrides)


def _orchestrator(args: argparse.Namespace, config: RunConfig) -> Orchestrator:
    threads = get_thread_count()
    if threads:
        torch.set_num_threads(threads)
    return Orchestrator(config, getattr(args, "out", None) or args.out_dir)


def _float_list(raw: str) -> list[float]:
    try:
        return [float(part) for part in raw.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"Expected a comma-separated list of numbers, got '{raw}'.") from None


def parse_sweep(raw: str) -> list[float] | None:
    """'lambda=0,0.1,0.2' → [0.0, 0.1, 0.2]; an empty value means the configured grid."""
    if not raw:
        return None
    key, sep, values = raw.partition("=")
    if not sep or key.strip() != "lambda":
        raise ConfigError(f"--sweep expects 'lambda=v1,v2,...', got '{raw}'.")
    lambdas = _float_list(values)
    if not lambdas or any(v < 0 for v in lambdas):
        raise ConfigError(f"--sweep needs at least one lambda >= 0, got '{raw}'.")
    return lambdas


def cmd_phantom(args: argparse.Namespace) -> int:
    config = _config(args)
    manifest = _orchestrator(args, config).phantom(args.count, args.size, config.seed)
    print(manifest)
    return 0


def cmd_augment(args: argparse.Namespace) -> int:
    config = _config(args)
    stats = _orchestrator(args, config).augment(
        args.input,
        args.mode,
        p_base=args.p_base if args.p_base is not None else config.p_base,
        lam=args.lam if args.lam is not None else config.noise_lambda,
        sigma=args.sigma if args.sigma is not None else config.noise_sigma,
        seed=config.seed,
        patch_size=args.patch_size,
    )
    if "masked_fraction" in stats:
        print(f"masked_fraction={stats['masked_fraction']!r}")
    return 0


def cmd_pretrain(args: argparse.Namespace) -> int:
    config = _config(args)
    orchestrator = _orchestrator(args, config)
    if args.sweep is not None and args.ablate:
        raise ConfigError("--sweep and --ablate are mutually exclusive.")
    if args.sweep is not None:
        print(orchestrator.sweep(parse_sweep(args.sweep)))
    elif args.ablate:
        print(orchestrator.ablate())
    else:
        print(orchestrator.pretrain().checkpoint)
    return 0


def cmd_finetune(args: argparse.Namespace) -> int:
    config = _config(args)
    result = _orchestrator(args, config).finetune(args.task, args.checkpoint)
    print(result.checkpoint)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    config = _config(args)
    sigmas = _float_list(args.sigma) if args.sigma else None
    report = _orchestrator(args, config).evaluate(args.task, args.checkpoint, sigmas=sigmas)
    for (task, metric), value in sorted(report.summary().items()):
        print(f"{task}\t{metric}\t{value!r}")
    return 0


def register_commands(subparsers: argparse._SubParsersAction) -> None:
    def command(name: str, handler, help_text: str) -> argparse.ArgumentParser:
        p = subparsers.add_parser(name, help=help_text)
        p.add_argument("--seed", type=int, default=None, help="Overrides the global/config seed.")
        p.add_argument("--out", default=None, help="Run directory (overrides --out-dir).")
        p.set_defaults(handler=handler)
        return p

    p = command("phantom", cmd_phantom, "Generate synthetic phantoms with labels and a manifest.")
    p.add_argument("--count", type=int, default=4)
    p.add_argument("--size", type=int, default=64)

    p = command("augment", cmd_augment, "Apply hierarchical masking and/or k-space noise to one FTS1 image.")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--mode", choices=AUGMENT_MODES, default="both")
    p.add_argument("--p-base", type=float, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--patch-size", type=int, default=None)

    p = command("pretrain", cmd_pretrain, "Self-supervised pretraining, optionally as a lambda sweep or ablation.")
    p.add_argument("--sweep", nargs="?", const="", default=None, metavar="lambda=V1,V2,...")
    p.add_argument("--ablate", action="store_true")

    p = command("finetune", cmd_finetune, "Asymmetric fine-tuning with a frozen encoder.")
    p.add_argument("--task", choices=TASK_CHOICES, required=True)
    p.add_argument("--checkpoint", required=True)

    p = command("eval", cmd_eval, "Evaluate a checkpoint on the test split and write metrics.csv.")
    p.add_argument("--task", choices=TASK_CHOICES, required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--sigma", default=None, help="Comma-separated noise levels for denoise evaluation.")
