#!/usr/bin/env python3
"""Example external model: answers each batch with the mean of every row."""
import sys


def main() -> int:
    for header in sys.stdin:
        tag, k, p = header.split()
        if tag != "BATCH":
            print(f"unexpected header: {header!r}", file=sys.stderr)
            return 1
        out = []
        for _ in range(int(k)):
            row = [float(v) for v in sys.stdin.readline().split(",")]
            out.append(repr(sum(row) / int(p)))
        sys.stdout.write("\n".join(out) + "\n")
        sys.stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
