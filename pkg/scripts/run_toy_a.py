#!/usr/bin/env python3
"""Sweep the congruence-recovery experiment; writes out/toy_a/toy_a.csv."""

import sys

from spdot.cli import main

if __name__ == "__main__":
    sys.exit(main(["toy-a", "--out", "out/toy_a", *sys.argv[1:]]))
