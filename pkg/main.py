import argparse
import logging
import sys

from dotenv import load_dotenv

load_dotenv()

from src.core.errors import SSPFError
from src.core.logger import setup_logging
from src.interfaces.cli import register_commands

logger = logging.getLogger(__name__)

IO_EXIT_CODE = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sspf",
        description="Frequency-aware self-supervised pretraining for MRI-like images.",
    )
    parser.add_argument("--seed", dest="global_seed", type=int, default=None, help="Run seed (overrides the config).")
    parser.add_argument("--out-dir", default="runs/latest", help="Run directory for this invocation.")
    parser.add_argument("--config", default=None, help="Flat key=value RunConfig file.")
    subparsers = parser.add_subparsers(dest="command", required=True)
    register_commands(subparsers)
    return parser


def main(argv: list[str] | None = None) -> int:
    setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except SSPFError as e:
        logger.error("%s | %s", type(e).__name__, e)
        return e.exit_code
    except OSError as e:
        logger.error("I/O failure | %s", e)
        return IO_EXIT_CODE


if __name__ == "__main__":
    sys.exit(main())
