#!/usr/bin/env python3
"""Rising-bubble benchmark runs; prints the terminal bubble observables."""
import sys

from nschfem.experiments import run_rising_bubble


def main(case="1", h="1/32", t_end="3.0"):
    case = int(case)
    if "/" in h:
        num, den = h.split("/")
        h = float(num) / float(den)
    else:
        h = float(h)
    final, records = run_rising_bubble(case, h, t_end=float(t_end))
    last = records[-1]
    print(f"case {case}, h = {h:g}: y_b({last.t:g}) = {last.y_b:.4f}, "
          f"v_b = {last.v_b:.4f}, energy {last.energy.total:.4f}")


if __name__ == "__main__":
    main(*sys.argv[1:])
