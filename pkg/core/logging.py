"""
Logging Configuration
"""

import sys
from typing import Optional
from loguru import logger
from .config import get_settings


def setup_logging(level: Optional[str] = None):
    """Configure logging for the toolkit.

    Results may be written to stdout, so the console sink goes to stderr.
    """
    settings = get_settings()
    level = level or settings.log_level

    # Remove default logger
    logger.remove()

    log_format = (
        "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | "
        "<level>{level: <8}</level> | "
        "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> | "
        "<level>{message}</level>"
    )

    logger.add(
        sys.stderr,
        format=log_format,
        level=level,
        colorize=True
    )

    # File logging (if specified)
    if settings.log_file:
        logger.add(
            settings.log_file,
            format=log_format,
            level=level,
            rotation="1 day",
            retention="7 days",
            compression="zip"
        )


def get_logger():
    """Get configured logger instance"""
    return logger
