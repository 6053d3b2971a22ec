#!/usr/bin/env python3
"""Chebyshev coefficients of exp(x) sqrt(x) K_n(x), n = 0, 1, as a function of w = 2/x on [0, 1].

Prints C++ array initializers for include/rapidkrig/bessel.hpp.
"""
import mpmath as mp

mp.mp.dps = 50
NODES = 96


def scaled_k(n, w):
    if w == 0:
        return mp.sqrt(mp.pi / 2)
    x = 2 / w
    return mp.exp(x) * mp.sqrt(x) * mp.besselk(n, x)


def cheb_coeffs(f):
    # Chebyshev-Gauss nodes on u in [-1, 1], w = (u + 1) / 2.
    theta = [mp.pi * (j + mp.mpf(1) / 2) / NODES for j in range(NODES)]
    vals = [f((mp.cos(t) + 1) / 2) for t in theta]
    return [2 * mp.fsum(v * mp.cos(k * t) for v, t in zip(vals, theta)) / NODES for k in range(NODES)]


for n in (0, 1):
    c = cheb_coeffs(lambda w: scaled_k(n, w))
    last = max(k for k, ck in enumerate(c) if abs(ck) > mp.mpf("1e-18") * abs(c[0]))
    print(f"// n = {n}: {last + 1} terms")
    print(",\n".join(mp.nstr(ck, 20, min_fixed=-1, max_fixed=-1) for ck in c[: last + 1]))
