"""Application entrypoint for the sky-image nowcasting pipeline."""

from __future__ import annotations

import argparse
import logging
import os
from typing import NoReturn, Optional, Sequence

from .commands import CommandContext, CommandError, register_all
from .config import default_jobs, load_config
from .errors import ConfigError, DataError
from .infra.scheduler import DayScheduler
from .infra.store import ArtifactStore, StoreLockedError

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_DATA = 3

_LOGGER = logging.getLogger(__name__)


class CliArgumentParser(argparse.ArgumentParser):
    """Argument parser that raises exceptions instead of exiting."""

    def error(self, message: str) -> NoReturn:  # pragma: no cover - passthrough
        raise CommandError(message)

    def exit(self, status: int = 0, message: Optional[str] = None) -> NoReturn:  # pragma: no cover
        if message:
            raise CommandError(message.strip(), exit_code=status or EXIT_CONFIG)
        raise CommandError("command aborted", exit_code=status)


def configure_logging() -> None:
    root_logger = logging.getLogger()
    if not root_logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        root_logger.addHandler(handler)

    log_level_name = os.getenv("LOG_LEVEL", "INFO").upper().strip()
    log_level = getattr(logging, log_level_name, logging.INFO)
    if not isinstance(log_level, int):
        log_level = logging.INFO
    root_logger.setLevel(log_level)
    logging.captureWarnings(True)


def build_parser() -> CliArgumentParser:
    parser = CliArgumentParser(
        prog="sky_nowcast",
        description="Estimate and nowcast solar irradiance from ground-based sky images.",
    )
    parser.add_argument(
        "--config", default=None, help="pipeline JSON (defaults to $SKY_NOWCAST_CONFIG or the bundled file)"
    )
    parser.add_argument("--site", default=None, help="site key from the config (defaults to its default_site)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--jobs", type=int, default=None, help="parallel day partitions (defaults to $SKY_NOWCAST_JOBS)"
    )
    parser.add_argument("--out", required=True, help="output directory for artifacts")
    parser.add_argument("--dry-run", action="store_true", help="compute and report without writing anything")
    subparsers = parser.add_subparsers(dest="command", required=True)
    register_all(subparsers)
    return parser


async def run(argv: Optional[Sequence[str]] = None) -> int:
    configure_logging()
    try:
        args = build_parser().parse_args(argv)
        config = load_config(args.config)
        site = config.site_config(args.site)
        jobs = args.jobs if args.jobs is not None else default_jobs()
        context = CommandContext(
            config=config,
            site=site,
            store=ArtifactStore(args.out),
            scheduler=DayScheduler(jobs),
            seed=args.seed,
            dry_run=args.dry_run,
        )
        _LOGGER.debug("Running %s for site %s with %d jobs", args.command, site.name, jobs)
        if args.dry_run:
            await args.handler(context, args)
        else:
            async with context.store.exclusive():
                await args.handler(context, args)
    except CommandError as exc:
        if exc.exit_code == EXIT_OK:
            return EXIT_OK
        _LOGGER.error("Usage error: %s", exc)
        return exc.exit_code
    except ConfigError as exc:
        _LOGGER.error("Configuration error: %s", exc)
        return EXIT_CONFIG
    except DataError as exc:
        _LOGGER.error("Data error: %s", exc)
        return EXIT_DATA
    except StoreLockedError as exc:
        _LOGGER.error("%s", exc)
        return EXIT_FAILURE
    except Exception:
        _LOGGER.exception("Command failed")
        return EXIT_FAILURE
    return EXIT_OK


__all__ = [
    "CliArgumentParser",
    "EXIT_CONFIG",
    "EXIT_DATA",
    "EXIT_FAILURE",
    "EXIT_OK",
    "LOG_FORMAT",
    "build_parser",
    "run",
]
