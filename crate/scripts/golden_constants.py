#!/usr/bin/env python3
"""Regenerate crates/core/data/golden_constants.csv with mpmath.

Every value is computed from the defining integral at high working precision
with tanh-sinh quadrature; the abs_err_bound column is the quadrature's own
error estimate padded by a safety factor.  The Rust constants module must
reproduce these numbers; it never rewrites this file.
"""
import sys
import mpmath as mp

mp.mp.dps = 50


def amplitude(d, a):
    d, a = mp.mpf(d), mp.mpf(a)
    return a * mp.power(2, a - 1) * mp.power(mp.pi, -d / 2) * mp.gamma((d + a) / 2) / mp.gamma(1 - a / 2)


def gamma_boundary(a, p):
    # t = 1 - u^(1/(2-a)) on [1/2, 1] removes the (1-t)^(1-a) endpoint behaviour;
    # t = v^m on [0, 1/2] removes the t^min(p, a-p-1) behaviour.
    a, p = mp.mpf(a), mp.mpf(p)
    q = a - p - 1
    k = 1 / (2 - a)

    def near_one(u):
        s = mp.power(u, k)
        lt = mp.log1p(-s)
        return mp.expm1(p * lt) * (-mp.expm1(q * lt)) / (s * s) * k

    e0 = min(p, q, mp.mpf(0))
    m = 1 / (1 + e0)

    def near_zero(v):
        t = mp.power(v, m)
        return (mp.power(t, p) - 1) * (1 - mp.power(t, q)) / mp.power(1 - t, 1 + a) * m * mp.power(v, m - 1)

    v1, e1 = mp.quad(near_one, [0, mp.power(mp.mpf(1) / 2, 2 - a)], error=True, maxdegree=10)
    v2, e2 = mp.quad(near_zero, [0, mp.power(mp.mpf(1) / 2, 1 / m)], error=True, maxdegree=10)
    return v1 + v2, e1 + e2


def sphere_area(k):
    # (k-1)-dimensional measure of the unit sphere in R^k
    k = mp.mpf(k)
    return 2 * mp.power(mp.pi, k / 2) / mp.gamma(k / 2)


def c_boundary(d, a, p):
    g, e = gamma_boundary(a, p)
    a_ = mp.mpf(a)
    fac = amplitude(d, a) * sphere_area(d - 1) / 2 * mp.beta((a_ + 1) / 2, mp.mpf(d - 1) / 2)
    return fac * g, abs(fac) * e


def h_profile(d, a, s):
    d_, a_, s = mp.mpf(d), mp.mpf(a), mp.mpf(s)
    pref = 2 * mp.pi * mp.power(mp.pi, (d_ - 3) / 2) / mp.gamma((d_ - 1) / 2)

    def f(th):
        c = mp.cos(th)
        root = mp.sqrt((s - 1) * (s + 1) + c * c)
        if c >= 0:
            num = root + c
        else:
            num = (s - 1) * (s + 1) / (root - c)
        return mp.power(mp.sin(th), d_ - 2) * mp.power(num, 1 + a_) / root

    v, e = mp.quad(f, [0, mp.pi / 2, mp.pi], error=True)
    return pref * v, abs(pref) * e


def c_origin(d, a, p, dps=40):
    # s = 1 + v^(1/(2-a)) on [1, 2]; s = 2 w^(-1/(a-p)) on [2, inf).
    with mp.workdps(dps):
        d_, a_, p_ = mp.mpf(d), mp.mpf(a), mp.mpf(p)
        m = d_ - a_ + p_
        k1 = 1 / (2 - a_)
        k2 = 1 / (a_ - p_)

        def near_one(v):
            e = mp.power(v, k1)
            s = 1 + e
            h, _ = h_profile(d, a, s)
            l = mp.log1p(e)
            return mp.expm1(p_ * l) * (-mp.expm1(-m * l)) / (e * e) * s * mp.power(2 + e, -1 - a_) * h * k1

        def tail(w):
            s = 2 * mp.power(w, -k2)
            h, _ = h_profile(d, a, s)
            f = (mp.power(s, p_) - 1) * (1 - mp.power(s, -m)) * s * mp.power((s - 1) * (s + 1), -1 - a_) * h
            return f * s * k2 / w

        v1, e1 = mp.quad(near_one, [0, 1], error=True)
        v2, e2 = mp.quad(tail, [0, 1], error=True)
        amp = amplitude(d, a)
        return amp * (v1 + v2), abs(amp) * (e1 + e2)


def fmt(x):
    return mp.nstr(x, 25, min_fixed=-5, max_fixed=5)


def main(out):
    rows = []
    for d, a in [(1, 1.0), (2, 1.5), (3, 0.8), (2, 1.99), (2, 1.2), (3, 1.0)]:
        rows.append(("amplitude", d, a, 0, amplitude(d, a), mp.mpf(10) ** -40))
    for a, p in [(1.5, 0.9), (0.5, 0.25), (1.0, 0.5), (1.5, 0.75), (1.9, 0.95), (1.2, -0.5), (0.8, 0.4), (1.2, 0.6)]:
        v, e = gamma_boundary(a, p)
        rows.append(("gamma", 0, a, p, v, max(10 * e, mp.mpf(10) ** -30)))
    for d, a, p in [(2, 1.0, 0.5), (2, 1.5, 0.9), (3, 0.8, 0.4), (2, 1.2, 0.6), (2, 1.5, 0.75), (3, 1.0, 0.5)]:
        v, e = c_boundary(d, a, p)
        rows.append(("c-boundary", d, a, p, v, max(10 * e, mp.mpf(10) ** -30)))
    for d, a, s in [(2, 1.0, 2.0), (2, 1.0, 1.0), (3, 1.5, 1.5), (2, 1.2, 10.0)]:
        v, e = h_profile(d, a, s)
        rows.append(("h-profile", d, a, s, v, max(10 * e, mp.mpf(10) ** -30)))
    for d, a, p in [(2, 1.2, 0.6), (3, 1.5, 1.0), (2, 1.2, 0.3), (2, 1.2, 0.9)]:
        v, e = c_origin(d, a, p)
        rows.append(("c-origin", d, a, p, v, max(10 * e, mp.mpf(10) ** -20)))
        print("c-origin", d, a, p, v, e, file=sys.stderr)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("family,d,alpha,p,value,abs_err_bound\n")
        for fam, d, a, p, v, e in rows:
            fh.write(f"{fam},{d},{a},{p},{fmt(v)},{mp.nstr(e, 3)}\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "crates/core/data/golden_constants.csv")
