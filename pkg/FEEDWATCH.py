#!/usr/bin/env python3
"""
feedwatch launcher
Runs the command line from the repository root: python3 FEEDWATCH.py <subcommand> ...
"""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), "src"))

from pipeline_cli import run  # noqa: E402

if __name__ == "__main__":
    sys.exit(run())
