"""Independent reference computations used by the tests.

They share only the device current expression with the package and use
plain bisection and sampling instead of the closed forms and Newton
solvers of the implementation.
"""

import numpy as np

from sramflip.device import inverter_node_current


def vtc_bisect(inv, vdd, vin, iters=200):
    """Output voltage balancing the inverter currents, by vectorized bisection."""
    vin = np.atleast_1d(np.asarray(vin, dtype=float))
    lo = np.full_like(vin, -0.5 * vdd)
    hi = np.full_like(vin, 1.5 * vdd)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        # the net current into the output falls as vout rises
        pos = inverter_node_current(vin, mid, inv, vdd) > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
        if np.all(hi - lo < 1e-16):
            break
    return 0.5 * (lo + hi)


def switching_threshold(inv, vdd):
    """vin at which vout = vin, by bisection on vin."""
    lo, hi = 0.0, vdd
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if vtc_bisect(inv, vdd, mid)[0] > mid:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _max_feasible(fn, s_hi, iters=60):
    """Largest s in [0, s_hi] with fn(s) >= 0 for fn decreasing in s (vectorized)."""
    lo = np.zeros_like(s_hi)
    hi = s_hi.copy()
    ok0 = fn(lo) >= 0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        good = fn(mid) >= 0
        lo = np.where(good, mid, lo)
        hi = np.where(good, hi, mid)
    return np.where(ok0, lo, 0.0)


def brute_force_snm(latch, h=1e-4):
    """Largest axis-aligned square in each butterfly lobe, by sliding its corner.

    Butterfly axes are x = vout2 = vin1 and y = vout1 = vin2; curve 1 is
    y = f1(x) and curve 2 is x = f2(y). Both curves are sampled by
    bisection and linearly interpolated. For each lower-left abscissa x on
    a grid of step ``h`` the lowest admissible corner ordinate is taken
    (it is always the best choice) and the largest fitting side found by
    bisection.

    Returns ``(state0 side, state1 side)`` for the upper-left and
    lower-right lobes.
    """
    vdd = latch.vdd
    g = np.arange(-0.5 * vdd, 1.5 * vdd + h / 2, h)
    f1s = vtc_bisect(latch.inv1, vdd, g)
    f2s = vtc_bisect(latch.inv2, vdd, g)
    f1 = lambda x: np.interp(x, g, f1s)
    f2 = lambda y: np.interp(y, g, f2s)
    # y such that f2(y) = x, i.e. the inverse of curve 2 (decreasing)
    f2_inv = lambda x: np.interp(x, f2s[::-1], g[::-1])
    # crossings from sign changes of f2(f1(x)) - x on the sample grid
    xg = np.arange(0.0, vdd + h / 2, h)
    r = f2(f1(xg)) - xg
    k = np.nonzero(np.sign(r[:-1]) * np.sign(r[1:]) < 0)[0]
    if len(k) != 3:
        raise ValueError(f"oracle found {len(k)} crossings")
    xc = xg[k] - r[k] * h / (r[k + 1] - r[k])
    x0, xm, x1 = xc
    y0, ym, y1 = f1(xc)

    # upper-left lobe, inside [x0, xm] x [ym, y0]: x >= f2(y) and y <= f1(x)
    xs = np.arange(x0, xm, h)
    ylo = np.maximum(f2_inv(xs), ym)
    s0 = _max_feasible(lambda s: f1(xs + s) - s - ylo, np.minimum(xm - xs, y0 - ylo))
    # lower-right lobe, inside [xm, x1] x [y1, ym]: y >= f1(x) and x <= f2(y)
    xs = np.arange(xm, x1, h)
    ys = f1(xs)
    s1 = _max_feasible(lambda s: f2(ys + s) - s - xs, np.minimum(x1 - xs, ym - ys))
    return float(s0.max()), float(s1.max())
