"""
Main entry point for the Grid Carbon Atlas CLI.
"""

import sys

from carbon_atlas.cli import main

if __name__ == "__main__":
    sys.exit(main())
