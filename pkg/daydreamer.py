#!/usr/bin/env python3
"""Command-line entry point for training and inspecting world-model agents."""
import sys

from dotenv import load_dotenv

# Load environment variables FIRST
load_dotenv()

# Set up logging before anything else
from config.logging_config import setup_logging, suppress_library_console_output  # noqa: E402
setup_logging()
suppress_library_console_output()

from commands.cli import run_cli  # noqa: E402


if __name__ == "__main__":
    sys.exit(run_cli())
