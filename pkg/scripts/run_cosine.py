#!/usr/bin/env python3
"""Compare the three transport-cost configurations on paired cosine trials.

Writes out/cosine/cosine.csv plus the generated timeseries datasets, then
chains the covariance conversion and a Sinkhorn adaptation so the full
file-level pipeline output lands under out/cosine/.
"""

import sys

from spdot.cli import main

if __name__ == "__main__":
    root = "out/cosine"
    code = main(["cosine", "--out", root, *sys.argv[1:]])
    if code == 0:
        code = main(["covariance", f"{root}/source_timeseries.json",
                     "--out", f"{root}/cov_source"])
    if code == 0:
        code = main(["covariance", f"{root}/target_timeseries.json",
                     "--out", f"{root}/cov_target"])
    if code == 0:
        code = main(["adapt", f"{root}/cov_source/covariances.json",
                     f"{root}/cov_target/covariances.json",
                     "--solver", "sinkhorn", "--lambda", "auto",
                     "--out", f"{root}/adapted"])
    sys.exit(code)
