#!/usr/bin/env python3
"""Generate the embedded triangle and edge quadrature tables.

Triangle rules for degree >= 3 are collapsed product rules on the reference
triangle {x, y >= 0, x + y <= 1}: the Duffy substitution x = s, y = t(1 - s)
turns the triangle integral into
    int_0^1 int_0^1 f(s, t(1-s)) (1-s) ds dt,
so an n-point Gauss-Jacobi rule (weight (1-s) on [0,1]) in s times an n-point
Gauss-Legendre rule in t integrates total degree 2n-1 exactly. Degrees 1 and 2
use the classic centroid and symmetric three-point rules. Edge rules are
Gauss-Legendre on [0,1].

Every emitted table is checked here against the exact monomial integrals
  int_T x^a y^b = a! b! / (a+b+2)!   and   int_0^1 x^a = 1/(a+1)
to ~1e-15 relative before printing; the crate's unit tests repeat the check.
"""

from fractions import Fraction
from math import factorial

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


def duffy_rule(degree: int):
    n = (degree + 2) // 2  # ceil((d+1)/2)
    xs, ws = roots_jacobi(n, 1.0, 0.0)  # weight (1-x) on [-1,1]
    s = (xs + 1.0) / 2.0
    ws = ws / 4.0
    xt, wt = roots_legendre(n)
    t = (xt + 1.0) / 2.0
    wtt = wt / 2.0
    pts, wq = [], []
    for i in range(n):
        for j in range(n):
            pts.append((s[i], t[j] * (1.0 - s[i])))
            wq.append(ws[i] * wtt[j])
    return pts, wq


def fixed_rule(degree: int):
    if degree == 1:
        return [(1.0 / 3.0, 1.0 / 3.0)], [0.5]
    if degree == 2:
        s, h = 1.0 / 6.0, 2.0 / 3.0
        return [(s, s), (h, s), (s, h)], [1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0]
    return duffy_rule(degree)


def check_triangle(degree, pts, wq):
    worst = 0.0
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            exact = Fraction(factorial(a) * factorial(b), factorial(a + b + 2))
            approx = sum(w * x**a * y**b for (x, y), w in zip(pts, wq))
            err = abs(approx - float(exact)) / max(float(exact), 1e-300)
            worst = max(worst, err)
    return worst


def edge_rule(degree: int):
    n = (degree + 2) // 2
    x, w = roots_legendre(n)
    return ((x + 1.0) / 2.0).tolist(), (w / 2.0).tolist()


def check_edge(degree, pts, wq):
    worst = 0.0
    for a in range(degree + 1):
        exact = 1.0 / (a + 1)
        approx = sum(w * x**a for x, w in zip(pts, wq))
        worst = max(worst, abs(approx - exact) / exact)
    return worst


def fmt(v: float) -> str:
    return np.format_float_scientific(v, precision=16, unique=False)


def main():
    print("// Generated by scripts/gen_quadrature.py; do not edit by hand.")
    print("// (points, weights) on the reference triangle (0,0)-(1,0)-(0,1);")
    print("// weights sum to 1/2. Verified against exact monomial integrals.")
    for d in range(1, 11):
        pts, wq = fixed_rule(d)
        err = check_triangle(d, pts, wq)
        assert err < 5e-15, (d, err)
        print(f"// degree {d}: {len(pts)} points, max monomial error {err:.2e}")
        rows = ", ".join(f"[{fmt(x)}, {fmt(y)}, {fmt(w)}]" for (x, y), w in zip(pts, wq))
        print(f"pub(super) const TRI_D{d}: [[f64; 3]; {len(pts)}] = [{rows}];")
    print()
    print("// Gauss-Legendre rules on [0, 1]; columns are (point, weight).")
    for d in range(1, 12):
        pts, wq = edge_rule(d)
        err = check_edge(d, pts, wq)
        assert err < 5e-15, (d, err)
        print(f"// degree {d}: {len(pts)} points, max monomial error {err:.2e}")
        rows = ", ".join(f"[{fmt(x)}, {fmt(w)}]" for x, w in zip(pts, wq))
        print(f"pub(super) const EDGE_D{d}: [[f64; 2]; {len(pts)}] = [{rows}];")


if __name__ == "__main__":
    main()
