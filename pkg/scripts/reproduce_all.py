#!/usr/bin/env python3
"""Rebuild every bound-versus-solution experiment into out/reproduce_<name>."""

import os
import sys

from fraccomp.cli import main as cli_main


def main():
    base = sys.argv[1] if len(sys.argv) > 1 else "out"
    failures = 0
    for name in ("ex1", "e3", "e4", "prop32", "monotone_linear"):
        out = os.path.join(base, f"reproduce_{name}")
        code = cli_main(["reproduce", name, "--out", out])
        failures += 0 if code == 0 else 1
    return 0 if failures == 0 else 1


if __name__ == "__main__":
    sys.exit(main())
