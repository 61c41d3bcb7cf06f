#!/usr/bin/env python3
"""Grid-search the hidden rotation; writes out/toy_b/toy_b.csv."""

import sys

from spdot.cli import main

if __name__ == "__main__":
    sys.exit(main(["toy-b", "--out", "out/toy_b", *sys.argv[1:]]))
