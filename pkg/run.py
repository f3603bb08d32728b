#!/usr/bin/env python3
"""
SkIn - Entry Point
Run a subcommand: synth, train, eval, bench, inspect
"""

import os
import sys

# Single-threaded BLAS; must be set before numpy is imported.
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

# Add app directory to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from skin.cli import main

if __name__ == "__main__":
    sys.exit(main())
