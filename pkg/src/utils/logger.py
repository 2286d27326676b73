"""
Logging Configuration Module

This module configures the application-wide logging system with
consistent formatting and appropriate log levels.

Features:
    - Timestamp in ISO format
    - Module/function context
    - Console and rotating file output
    - Level and log directory taken from the environment

Environment Variables:
    - KAC_LOG_LEVEL: DEBUG, INFO, WARNING, ERROR (default INFO)
    - KAC_LOG_DIR: directory for kac_reservoir.log (default logs)

Usage:
    from src.utils.logger import logger

    logger.debug("Per-step detail")
    logger.info("Run milestone")
    logger.warning("Soft precondition violated")
    logger.error("Run failed")
"""

import logging
import os
import sys
from logging.handlers import RotatingFileHandler

from dotenv import load_dotenv

load_dotenv()

LOG_LEVEL = os.getenv("KAC_LOG_LEVEL", "INFO").upper()
LOG_DIR = os.getenv("KAC_LOG_DIR", "logs")

# Ensure logs directory exists
os.makedirs(LOG_DIR, exist_ok=True)

# Configure logging format
formatter = logging.Formatter(
    "%(asctime)s - %(levelname)s - %(name)s - %(message)s",
    datefmt="%Y-%m-%d %H:%M:%S",
)

# Create and configure file handler
file_handler = RotatingFileHandler(
    os.path.join(LOG_DIR, "kac_reservoir.log"),
    maxBytes=10_000_000,  # 10MB
    backupCount=5,
)
file_handler.setFormatter(formatter)

# Create and configure console handler
console_handler = logging.StreamHandler(sys.stdout)
console_handler.setFormatter(formatter)

# Create and configure logger
logger = logging.getLogger("KacReservoir")
logger.setLevel(getattr(logging, LOG_LEVEL, logging.INFO))
if not logger.handlers:
    logger.addHandler(file_handler)
    logger.addHandler(console_handler)
