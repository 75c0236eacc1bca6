#!/usr/bin/env python3
"""
Convergence study runner for the axisymmetric elasticity solver.
Runs the command-line study without starting the FastAPI server.

    python main.py --experiment 2 --degree 1 --n 4,6,8 --format markdown

To run the API server, use: uvicorn src.main:app --reload
"""

import sys

from src.cli import main


if __name__ == "__main__":
    sys.exit(main())
