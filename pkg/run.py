"""
IQB command-line runner.

Usage:
    python run.py validate -c data/config/iqb.example.yaml
    python run.py score -c data/config/iqb.example.yaml ndt=ndt.csv --level min

Equivalent to `python -m backend.main ...`.
"""

import sys

from backend.main import main

if __name__ == "__main__":
    sys.exit(main())
