"""Run ``verify-all`` on every bundled scenario and print a summary table."""
import argparse
from pathlib import Path

from hillscope import scenario_path
from hillscope.cli import run

NAMES = ("model", "oscillator", "perturbed_model")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out", help="parent output directory")
    ap.add_argument("--no-svg", action="store_true")
    args = ap.parse_args()
    rows = []
    for name in NAMES:
        argv = ["verify-all", str(scenario_path(name)), "--out", str(Path(args.out) / name)]
        if args.no_svg:
            argv.append("--no-svg")
        code, man = run(argv)
        n_pass = sum(c["pass"] for c in man.checks) if man else 0
        n_all = len(man.checks) if man else 0
        rows.append((name, code, n_pass, n_all, man.wall_time if man else float("nan")))
    print(f"\n{'scenario':<18}{'exit':>5}{'checks':>10}{'seconds':>9}")
    for name, code, n_pass, n_all, wall in rows:
        print(f"{name:<18}{code:>5}{f'{n_pass}/{n_all}':>10}{wall:>9.1f}")


if __name__ == "__main__":
    main()
