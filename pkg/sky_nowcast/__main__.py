"""Allow running the package as a module."""

import asyncio
import sys

from .app import run


if __name__ == "__main__":  # pragma: no cover - module entrypoint
    sys.exit(asyncio.run(run()))
