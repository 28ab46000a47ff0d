"""Largest cylinder exit angle as a function of the roof ratio lambda = eps_A / eps_B.

For the model the exit angle of the parabola with vertex height y_m through
the roof lambda * y_m is atan(1 / sqrt(lambda - 1)); it drops below 44 degrees
only for lambda > 1 + 1 / tan(44 deg)^2.
"""
import argparse
import math

from hillscope import load_scenario, scenario_path
from hillscope.seifert import build_chart, property3_check


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scenario", default="oscillator")
    ap.add_argument("--eps-b", type=float, default=0.01)
    ap.add_argument("--lams", type=float, nargs="+", default=[1.4, 1.8, 2.0, 2.1, 2.2, 2.5, 3.0])
    args = ap.parse_args()
    cfg = load_scenario(scenario_path(args.scenario))
    sp = cfg.experiment.seifert
    chart = build_chart(cfg.system, sp.q0, sp.extent, sp.height)
    print(f"threshold for 44 deg in the model: lambda > {1 + 1 / math.tan(math.radians(44)) ** 2:.4f}")
    for lam in args.lams:
        rep = property3_check(chart, lam * args.eps_b, args.eps_b)
        model = math.degrees(math.atan(1 / math.sqrt(lam - 1)))
        print(f"lambda={lam:<5g} max exit angle={rep.measured['max_angle_deg']:7.2f}  "
              f"model parabola={model:7.2f}  pass={rep.passed}")


if __name__ == "__main__":
    main()
