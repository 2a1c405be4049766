"""
Demo 1: the special functions behind the link model

Shows:
- J0 turning an antenna mismatch distance into a correlation
- the Marcum Q1 function next to its two-polynomial approximation
- where that approximation stops being usable
- the Lambert W identity used by the closed-form rate

Run with ``python3 demos/01_special_functions.py``.
"""

import numpy as np

from pa_linksim.specfun import bessel_j0, lambert_w0, marcum_q1, marcum_q1_approx


def correlation_vs_distance():
    print("Correlation J0(2 pi d / lambda) against mismatch d (in wavelengths)")
    for d in (0.0, 0.05, 0.1, 0.2, 0.383, 0.5):
        print(f"  d = {d:5.3f} lambda   rho = {bessel_j0(2 * np.pi * d):+.6f}")


def approximation_error_vs_s():
    # worst error over rho for each noncentrality s
    rho = np.linspace(0.0, 40.0, 4001)
    print("\nMax |Q1 - approx| over rho, per s")
    for s in (0.5, 1, 2, 3, 4, 5, 6, 8, 10):
        err = np.max(np.abs(marcum_q1(s, rho) - marcum_q1_approx(s, rho)))
        print(f"  s = {s:4.1f}   {err:.3f}")
    print("  The fit is good for small s and degrades fast past s ~ 5.")


def lambert_identity():
    print("\nLambert W0: w e^w should give back y")
    for y in (0.1, 1.0, 10.0, 10**2.5, 1e6):
        w = lambert_w0(y)
        print(f"  y = {y:10.4g}   w = {w:.12f}   w e^w - y = {w * np.exp(w) - y:+.1e}")


if __name__ == "__main__":
    correlation_vs_distance()
    approximation_error_vs_s()
    lambert_identity()
