"""Compiled inner loops for the Monte-Carlo engines.

The kernels consume pre-drawn standard normals so that random streams stay
under the control of numpy generators on the Python side; the kernels
themselves are deterministic and release the GIL.
"""

import math

import numba
import numpy as np

from .errors import ModelError

Q_E = 1.602176634e-19

# parameter vector layout for the latch kernel
P_VDD, P_UT = 0, 1
P_INV1, P_INV2 = 2, 9  # I0n, Vthn, nn, I0p, Vthp, np, dV
P_C1, P_C2, P_ACCESS, P_FMAX, P_PSD_SCALE = 16, 17, 18, 19, 20
N_PARAMS = 21

# running-state vector layout
S_X, S_Y, S_TXM, S_TYM, S_TTF = 0, 1, 2, 3, 4

RUNNING, FLIPPED, BLOWUP = 0, 1, 2


@numba.njit(inline="always")
def _node(vin, vout, p, o):
    vdd = p[P_VDD]
    ut = p[P_UT]
    ve = vin + p[o + 6]
    up = p[o + 3] * math.exp((vdd - ve + p[o + 4]) / (p[o + 5] * ut)) * -math.expm1(-(vdd - vout) / ut)
    dn = p[o] * math.exp((ve - p[o + 1]) / (p[o + 2] * ut)) * -math.expm1(-vout / ut)
    return up - dn, abs(up) + abs(dn)


@numba.njit(inline="always")
def _frac(a, b, level):
    d = b - a
    if d == 0.0:
        return 1.0
    return min(max((level - a) / d, 0.0), 1.0)


@numba.njit(nogil=True, cache=True)
def latch_chunk(state, step0, p, xi, dt, substeps, xm, ym, stop_on_flip, rec, decim):
    """Advance the latch over ``len(xi)`` noise intervals.

    Each interval of length ``dt`` holds one noise-current sample per node
    with variance ``S(v) * fmax``, ``S`` taken at the start of the interval.
    The deterministic drift is integrated with ``substeps`` explicit Euler
    sub-steps per interval.

    Returns ``(status, steps_done, n_recorded)``.
    """
    vdd = p[P_VDD]
    c1 = p[P_C1]
    c2 = p[P_C2]
    scale = p[P_FMAX] * p[P_PSD_SCALE]
    acc = p[P_ACCESS]
    lo = -0.5 * vdd
    hi = 1.5 * vdd
    h = dt / substeps
    x = state[S_X]
    y = state[S_Y]
    nrec = 0
    status = RUNNING
    k = 0
    for k in range(xi.shape[0]):
        t0 = (step0 + k) * dt
        i2, s2 = _node(y, x, p, P_INV2)
        i1, s1 = _node(x, y, p, P_INV1)
        n2 = math.sqrt((2.0 * Q_E * s2 + acc) * scale) * xi[k, 0]
        n1 = math.sqrt((2.0 * Q_E * s1 + acc) * scale) * xi[k, 1]
        for j in range(substeps):
            if j > 0:
                i2, s2 = _node(y, x, p, P_INV2)
                i1, s1 = _node(x, y, p, P_INV1)
            xn = x + h * (i2 + n2) / c2
            yn = y + h * (i1 + n1) / c1
            tp = t0 + j * h
            if state[S_TXM] < 0.0 and xn >= xm:
                state[S_TXM] = tp + h * _frac(x, xn, xm)
            if state[S_TYM] < 0.0 and yn <= ym:
                state[S_TYM] = tp + h * _frac(y, yn, ym)
            if state[S_TTF] < 0.0 and xn >= yn:
                state[S_TTF] = tp + h * _frac(x - y, xn - yn, 0.0)
                if stop_on_flip:
                    status = FLIPPED
            x = xn
            y = yn
            if not (lo <= x <= hi and lo <= y <= hi):
                status = BLOWUP
                break
        if decim > 0 and (step0 + k + 1) % decim == 0 and nrec < rec.shape[0]:
            rec[nrec, 0] = t0 + dt
            rec[nrec, 1] = x
            rec[nrec, 2] = y
            nrec += 1
        if status != RUNNING:
            break
    state[S_X] = x
    state[S_Y] = y
    return status, k + 1, nrec


@numba.njit(nogil=True, cache=True)
def ou_chunk(v, threshold, decay, step_sd, bridge_var, normals, uniforms):
    """Exact OU transitions with Brownian-bridge crossing detection.

    Returns ``(v, k)`` where ``k`` is the index of the step during which the
    threshold was first crossed, or -1.
    """
    for k in range(normals.shape[0]):
        vn = v * decay + step_sd * normals[k]
        if vn >= threshold:
            return vn, k
        # probability that the path crossed between two sub-threshold samples
        if uniforms[k] < math.exp(-2.0 * (threshold - v) * (threshold - vn) / bridge_var):
            return vn, k
        v = vn
    return v, -1


def pack_params(latch, fmax, psd_scale):
    """Flatten a LatchConfig into the kernel parameter vector."""
    p = np.empty(N_PARAMS)
    p[P_VDD] = latch.vdd
    ut = latch.inv1.nmos.UT
    for inv in (latch.inv1, latch.inv2):
        for dev in (inv.nmos, inv.pmos):
            if not math.isclose(dev.UT, ut, rel_tol=1e-12):
                raise ModelError("transient kernel requires a common thermal voltage")
    p[P_UT] = ut
    for o, inv in ((P_INV1, latch.inv1), (P_INV2, latch.inv2)):
        p[o : o + 7] = (
            inv.nmos.I0,
            inv.nmos.Vth,
            inv.nmos.n,
            inv.pmos.I0,
            inv.pmos.Vth,
            inv.pmos.n,
            inv.dV,
        )
    p[P_C1] = latch.C1
    p[P_C2] = latch.C2
    p[P_ACCESS] = latch.access_noise
    p[P_FMAX] = fmax
    p[P_PSD_SCALE] = psd_scale
    return p
