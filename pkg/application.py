from __future__ import annotations

import sys
from typing import Sequence

from dotenv import load_dotenv

from config import Config
from src.controllers.commands import ExperimentHarness
from src.extensions import init_logging


def create_app(config_class: type[Config] = Config) -> ExperimentHarness:
    """Initializes and configures the experiment harness."""

    # Load environment variables from .env if present (local dev)
    try:
        load_dotenv()
    except Exception:
        pass

    init_logging(config_class.PTYCHO_LOG_LEVEL)
    return ExperimentHarness(config_class)


def main(argv: Sequence[str] | None = None) -> int:
    app = create_app()
    return app.run(sys.argv[1:] if argv is None else argv)


if __name__ == '__main__':
    sys.exit(main())
