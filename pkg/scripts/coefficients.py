"""Tabulate h, g, delta and the guarantee coefficients over alpha, and the
random-alpha coefficient as a function of the interval start beta."""

import argparse

import numpy as np

from lbfl.pipeline import eval_delta, eval_g, eval_h, fixed_alpha_coefficients, schedule_coefficients


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=11)
    steps = ap.parse_args(argv).steps
    print(f"{'alpha':>6} {'h':>9} {'g':>9} {'delta':>7} {'fixed-coeff':>12}")
    for a in np.linspace(0.6, 0.95, steps):
        f, c = fixed_alpha_coefficients(float(a))
        print(f"{a:6.3f} {eval_h(a):9.4f} {eval_g(a):9.4f} {eval_delta(a):7.4f} {max(f, c):12.4f}")
    print(f"\n{'beta':>6} {'F-coeff':>9} {'C-coeff':>9}")
    for b in np.linspace(0.55, 0.9, steps):
        f, c = schedule_coefficients(float(b))
        print(f"{b:6.3f} {f:9.4f} {c:9.4f}")


if __name__ == "__main__":
    main()
