"""Run the three canned three-body scenarios and print their verdicts.

Branch files (JSON lines and CSV) go to ``<out>/<scenario>/``.

    python3 scripts/reproduce_all.py --out runs
"""

import argparse
import json
import sys
import time
from pathlib import Path

from sbalanced import cli


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="runs")
    parser.add_argument("--mu-one-big", type=float, default=0.99)
    parser.add_argument("--mu-two-big", type=float, default=0.01)
    args = parser.parse_args(argv)

    mus = {"equal-masses": None, "one-big-two-small": args.mu_one_big,
           "two-big-one-small": args.mu_two_big}
    status = 0
    for name, mu in mus.items():
        t0 = time.perf_counter()
        spec = cli.scenario_spec(name, mu, output_path=str(Path(args.out) / name))
        result = cli.run_follow(spec)
        for label, b in result.all_branches():
            cli.summarize_branch(label, b)
        cli.export(result, Path(spec.output_path))
        verdict = cli.scenario_verdict(name, result)
        print(f"== {name} ({time.perf_counter() - t0:.1f}s)")
        print(json.dumps(verdict, indent=2))
        status |= result.failed
    return int(status)


if __name__ == "__main__":
    sys.exit(main())
