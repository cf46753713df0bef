"""
Entry point for running the toolkit as a module.
Usage: python -m app {analyze|train|evaluate|verify|oracle|export-config} ...
"""

import sys

from app.main import main

if __name__ == "__main__":
    sys.exit(main())
