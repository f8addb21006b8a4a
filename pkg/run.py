"""Entry point: ``python run.py <simulate|fit|path|tune|eval> ...``."""

import sys

from repgraph.cli import main

if __name__ == "__main__":
    sys.exit(main())
