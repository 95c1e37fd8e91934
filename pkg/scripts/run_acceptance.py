"""Run the acceptance matrix and write a JSON report.

Equivalent to ``polyaprod verify``; prints one PASS/FAIL line per criterion
to stderr and exits 1 if any criterion fails.

Usage::

    python3 -u scripts/run_acceptance.py --seed 42 -o report.json
"""

import sys

from polyaprod.cli import run

if __name__ == "__main__":
    sys.exit(run(["verify", *sys.argv[1:]]))
