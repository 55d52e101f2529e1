#!/usr/bin/env python3
"""Sweep the example gallery and print each entry's verdict table.

Usage:
    python demos/run_gallery.py              # all entries
    python demos/run_gallery.py r5-cubic mnw-torus
    python demos/run_gallery.py --cfl        # also print .cfl one-liners
"""

import sys
import time

from confolkit import gallery


def main(argv):
    want_cfl = "--cfl" in argv
    names = [a for a in argv if not a.startswith("-")] or list(gallery.names())
    width = max(len(n) for n in names)
    failures = 0
    for name in names:
        t0 = time.time()
        entry = gallery.build(name)
        ok, got, mismatched = entry.verify()
        dt = time.time() - t0
        mark = "ok" if ok else "MISMATCH"
        print(f"{name:<{width}}  {mark:8s} ({dt:5.2f}s)")
        for check, status in got.items():
            suffix = "" if check not in mismatched else \
                f"   <- expected {entry.expected[check]}"
            print(f"    {check:20s} {status}{suffix}")
        for note in entry.notes:
            print(f"    # {note}")
        if want_cfl:
            print("    " + entry.to_cfl().strip())
        failures += 0 if ok else 1
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
