"""
Kac Reservoir Command-Line Entry Point

Runs one experiment subcommand against a JSON experiment config and writes
its CSV/JSON artifacts.

Subcommands:
- simulate: Replica ensemble of the jump process
- moments: Closed-form moments and the RK4 number law
- spectrum: Gap and second gap of the generator
- entropy: Relative-entropy decay, closed form and Monte Carlo
- bk-solve: Boltzmann-Kac equation on the velocity grid
- chaos: Propagation-of-chaos experiment
- verify: Full acceptance suite with a pass/fail table

Environment Variables:
    See .env.example (KAC_OUTPUT_DIR, KAC_THREADS, KAC_LOG_LEVEL, KAC_LOG_DIR).

Exit Codes:
    0 success, 1 unexpected error, 2 invalid config, 3 numerical contract
    violation, 4 failed verification, 130 interrupted

Usage:
    python -m src.main verify --config configs/default.json --out results
"""

import argparse
import os
import sys
from typing import Optional, Sequence

from dotenv import load_dotenv

from src.utils.logger import logger

# Load environment variables from .env file
dotenv_path = os.path.join(os.path.dirname(__file__), "..", ".env")
loaded_dotenv = load_dotenv(dotenv_path=dotenv_path)

if loaded_dotenv:
    logger.info(f".env file loaded successfully from {dotenv_path}")
else:
    logger.debug(f"No .env file at {dotenv_path}; using process environment and defaults")

from src.commands import COMMANDS  # noqa: E402
from src.utils.config import KAC_OUTPUT_DIR, config_hash, env_threads, load_config  # noqa: E402
from src.utils.errors import ConfigError, NumericalContractError  # noqa: E402

DEFAULT_CONFIG = os.path.join(os.path.dirname(__file__), "..", "configs", "default.json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kac-reservoir",
        description="Grand-canonical Kac model: simulation, spectra, entropy and Boltzmann-Kac limit",
    )
    parser.add_argument("command", choices=sorted(COMMANDS), help="Subcommand to run")
    parser.add_argument("--config", default=DEFAULT_CONFIG, help="Experiment config (JSON)")
    parser.add_argument("--out", default=None, help=f"Output directory (default: $KAC_OUTPUT_DIR or {KAC_OUTPUT_DIR})")
    parser.add_argument("--threads", type=int, default=None, help="Worker processes for replica ensembles")
    parser.add_argument("--seed", type=int, default=None, help="Override the config seed (0 <= seed < 2^64)")
    parser.add_argument("--quick", action="store_true", help="Smaller sample sizes (verify and chaos)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config).with_seed(args.seed)
        threads = env_threads() if args.threads is None else args.threads
        if threads < 1:
            raise ConfigError([f"--threads: must be >= 1, got {threads}"], "--threads")
        out_dir = args.out or KAC_OUTPUT_DIR
        os.makedirs(out_dir, exist_ok=True)
        logger.info(
            f"[Main] {args.command}: config={args.config} hash={config_hash(config)} "
            f"seed={config.seed} threads={threads} out={out_dir}"
        )
        status = COMMANDS[args.command](config, out_dir, threads, args.quick)
        logger.info(f"[Main] {args.command} finished with exit code {status}")
        return status
    except KeyboardInterrupt:
        logger.info("[Main] KeyboardInterrupt received. Stopping.")
        return 130
    except ConfigError as e:
        logger.error(f"[Main] Invalid configuration ({e.source or args.config}):")
        for message in e.errors:
            logger.error(f"[Main]   - {message}")
        return 2
    except NumericalContractError as e:
        logger.error(f"[Main] Numerical contract violated in {args.command}: {type(e).__name__}: {e}")
        return 3
    except Exception as e:
        logger.exception(f"[Main] An unexpected error occurred: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
