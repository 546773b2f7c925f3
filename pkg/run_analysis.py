#!/usr/bin/env python3
"""
Landmark variability analysis entry point
Thin wrapper around the command-line front end, e.g.

    python run_analysis.py simulate --out output/demo --analyze
"""

import sys
from pathlib import Path

project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from src.cli.main import main  # noqa: E402

if __name__ == '__main__':
    sys.exit(main())
