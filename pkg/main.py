#!/usr/bin/env python3
"""
RAFT Performability Toolkit
Command-line entry point: python main.py run S1-cdf-by-cluster-size
"""

import sys

from api.cli import main

if __name__ == "__main__":
    sys.exit(main())
