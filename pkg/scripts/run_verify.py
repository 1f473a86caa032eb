#!/usr/bin/env python3
"""Run every verification suite with a fixed seed and summarise the verdicts.

Equivalent to `fraccomp verify --suite all`, kept as a script so a full
property sweep is one command from a fresh checkout."""

import sys

from fraccomp.suites import SUITES, run_suite


def main():
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 7
    n_fail = 0
    for name in SUITES:
        print(f"--- suite {name} (seed {seed})")
        for row in run_suite(name, seed=seed):
            print(row.line())
            n_fail += 0 if row.holds else 1
    print(f"--- {'all suites passed' if n_fail == 0 else f'{n_fail} checks failed'}")
    return 0 if n_fail == 0 else 1


if __name__ == "__main__":
    sys.exit(main())
