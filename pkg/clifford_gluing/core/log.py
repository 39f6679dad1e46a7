import logging

from clifford_gluing.core.config import settings


def configure_logging(level: str | None = None) -> None:
    """Configure structured logging once for the CLI and the HTTP app."""
    logging.basicConfig(
        level=getattr(logging, (level or settings.LOG_LEVEL).upper(), logging.INFO),
        format="%(asctime)s | %(levelname)s | %(name)s | %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )
