#!/usr/bin/env python3
"""Build a full JSONL dataset (instances, references, prompts) per family."""

import argparse
from pathlib import Path

from paretogen.cli import main as cli
from paretogen.problems import FAMILIES


def run(argv):
    code = cli([str(a) for a in argv])
    if code != 0:
        raise SystemExit(f"stage {argv[0]!r} exited with {code}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", type=Path, default=Path("dataset"))
    parser.add_argument("--count", type=int, default=50, help="instances per family")
    parser.add_argument("--n", default="10..20", help="decision dimension or range")
    parser.add_argument("--seed", type=int, default=2024)
    parser.add_argument("--k", type=int, default=20, help="frontier size")
    parser.add_argument("--workers", type=int, default=None)
    args = parser.parse_args()

    args.out_dir.mkdir(parents=True, exist_ok=True)
    for family in FAMILIES:
        base = args.out_dir / family
        run([
            "generate", "--family", family, "--count", args.count,
            "--n", args.n, "--seed", args.seed,
            "--out", f"{base}.instances.jsonl",
        ])
        solve = [
            "solve", "--in", f"{base}.instances.jsonl",
            "--out", f"{base}.solved.jsonl", "--k", args.k,
        ]
        if args.workers:
            solve += ["--workers", args.workers]
        run(solve)
        run([
            "encode", "--in", f"{base}.solved.jsonl",
            "--out", f"{base}.prompts.jsonl", "--k", args.k,
        ])
        print(f"{family}: wrote {base}.instances/.solved/.prompts .jsonl")


if __name__ == "__main__":
    main()
