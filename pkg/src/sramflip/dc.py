"""Static analysis of the latch: VTCs, butterfly plot, SNM, equilibria.

State vectors are ordered ``(x, y) = (vout2, vout1)`` throughout, which is
also the butterfly axes convention: horizontal ``vin1 = vout2``, vertical
``vout1 = vin2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .device import (
    InverterParams,
    LatchConfig,
    inverter_node_current,
    inverter_partials,
)
from .errors import DomainError, ModelError, NumericalError, PreconditionError

SQRT2 = math.sqrt(2.0)
RESIDUAL_TOL = 1e-12
TANGENCY_TOL = 1e-7  # V; two crossings closer than this count as one touch


@dataclass(frozen=True)
class Curve:
    """Uniformly sampled voltage-transfer curve."""

    vin: np.ndarray
    vout: np.ndarray

    def samples(self):
        return list(zip(self.vin.tolist(), self.vout.tolist()))


def _log_gate(ve, inv: InverterParams, vdd: float):
    n, p = inv.nmos, inv.pmos
    log_gn = math.log(n.I0) + (ve - n.Vth) / (n.n * n.UT)
    log_gp = math.log(p.I0) + (vdd - ve + p.Vth) / (p.n * p.UT)
    return log_gn, log_gp


def vtc_output(vin, inv: InverterParams, vdd: float):
    """Output voltage solving ``inverter_node_current(vin, vout) = 0``.

    With a common thermal voltage the current balance is a quadratic in
    ``exp(-vout/UT)`` and is solved in closed form (vectorized). Otherwise
    each point is bracketed and solved with Brent's method.
    """
    vin = np.asarray(vin, dtype=float)
    ut = inv.nmos.UT
    if not math.isclose(ut, inv.pmos.UT, rel_tol=1e-12):
        out = np.array([_vtc_bracketed(v, inv, vdd) for v in np.ravel(vin)])
        return out.reshape(vin.shape) if vin.ndim else float(out[0])
    ve = vin + inv.dV
    log_gn, log_gp = _log_gate(ve, inv, vdd)
    # r a^2 + (1 - r) a - b = 0 with a = exp(-vout/UT), b = exp(-vdd/UT)
    r = np.exp(log_gn - log_gp)
    b = math.exp(-vdd / ut)
    disc = np.sqrt((1.0 - r) ** 2 + 4.0 * r * b)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(r <= 1.0, 2.0 * b / ((1.0 - r) + disc), ((r - 1.0) + disc) / (2.0 * r))
    out = -ut * np.log(a)
    if not np.all(np.isfinite(out)):
        raise ModelError("VTC undefined for these device parameters")
    return out if vin.ndim else float(out)


def _vtc_bracketed(vin, inv, vdd):
    f = lambda vo: inverter_node_current(vin, vo, inv, vdd)
    lo, hi = 0.0, vdd
    if not f(lo) > 0 > f(hi):
        raise ModelError(f"VTC root not bracketed at vin={vin!r}")
    return brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def vtc_slope(vin, inv: InverterParams, vdd: float):
    """Small-signal gain dvout/dvin along the VTC."""
    vout = vtc_output(vin, inv, vdd)
    d_in, d_out = inverter_partials(vin, vout, inv, vdd)
    return -d_in / d_out


def vtc(inv: InverterParams, vdd: float, grid_step: float = 1e-3) -> Curve:
    """Sample the VTC on a uniform input grid from 0 to vdd."""
    if not 0 < grid_step <= 1e-3 + 1e-15:
        raise DomainError("grid_step must lie in (0, 1 mV]")
    m = int(round(vdd / grid_step))
    vin = np.linspace(0.0, vdd, m + 1)
    vout = vtc_output(vin, inv, vdd)
    resid = np.max(np.abs(inverter_node_current(vin, vout, inv, vdd)))
    if resid >= 1e-15:
        raise ModelError(f"VTC residual {resid:.3g} A exceeds 1e-15 A")
    return Curve(vin, vout)


@dataclass
class ButterflyData:
    """Both VTCs in the common butterfly axes.

    ``curve2_reflected`` holds inverter 2 with its axes swapped, i.e. the
    points ``(vout2, vin2)``. Crossings are sorted by increasing x.
    """

    latch: LatchConfig
    curve1: Curve
    curve2: Curve
    crossings: list
    classification: str

    @property
    def curve2_reflected(self) -> Curve:
        return Curve(self.curve2.vout, self.curve2.vin)

    @property
    def functional(self) -> bool:
        return self.classification == "functional"


def _loop_map(latch: LatchConfig):
    f1 = lambda x: vtc_output(x, latch.inv1, latch.vdd)
    f2 = lambda y: vtc_output(y, latch.inv2, latch.vdd)
    return f1, f2


def find_crossings(latch: LatchConfig, grid_step: float = 1e-3):
    """All intersections of the two butterfly curves, sorted by x.

    Sign changes of ``g(x) = f2(f1(x)) - x`` are detected on a grid ten times
    finer than ``grid_step`` and each root is refined with Brent's method on
    the exact VTC expressions.
    """
    f1, f2 = _loop_map(latch)
    g = lambda x: f2(f1(x)) - x
    vdd = latch.vdd
    xs = np.linspace(0.0, vdd, int(round(vdd / grid_step)) * 10 + 1)
    gs = g(xs)
    roots = []
    for i in np.nonzero(gs == 0.0)[0]:
        roots.append(float(xs[i]))
    idx = np.nonzero(np.sign(gs[:-1]) * np.sign(gs[1:]) < 0)[0]
    for i in idx:
        roots.append(brentq(g, xs[i], xs[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps))
    roots.sort()
    return [(x, float(f1(x))) for x in roots]


def classify_crossings(crossings) -> str:
    if len(crossings) != 3:
        return "defective"
    xs = [c[0] for c in crossings]
    if min(np.diff(xs)) < TANGENCY_TOL:
        return "defective"
    return "functional"


def butterfly(latch: LatchConfig, grid_step: float = 1e-3) -> ButterflyData:
    c1 = vtc(latch.inv1, latch.vdd, grid_step)
    c2 = vtc(latch.inv2, latch.vdd, grid_step)
    crossings = find_crossings(latch, grid_step)
    return ButterflyData(latch, c1, c2, crossings, classify_crossings(crossings))


@dataclass(frozen=True)
class SnmResult:
    """Inscribed-square static noise margin.

    ``lobe_squares`` is ``(state0, state1)``: the square protecting the state
    near (0, vdd) and the one protecting the state near (vdd, 0).
    """

    snm: float
    lobe_squares: tuple
    side: str
    # rotated abscissa of each lobe's largest square diagonal
    u_at_max: tuple = field(default=(math.nan, math.nan), compare=False)


def _invert_monotone(inv, vdd, target, guess):
    """Solve ``x - f(x) = target`` elementwise (the left side is increasing)."""
    x = np.array(guess, dtype=float)
    for _ in range(60):
        fx = vtc_output(x, inv, vdd)
        fp = vtc_slope(x, inv, vdd)
        step = (x - fx - target) / (1.0 - fp)
        x = x - step
        if np.all(np.abs(step) < 1e-15):
            break
    bad = np.abs(x - vtc_output(x, inv, vdd) - target) > 1e-13
    for i in np.nonzero(np.atleast_1d(bad))[0]:
        t = np.atleast_1d(target)[i]
        h = lambda s: s - vtc_output(s, inv, vdd) - t
        x[i] = brentq(h, -2 * vdd, 3 * vdd, xtol=1e-16)
    return x


def _lobe_gap(latch: LatchConfig, u, guess_x, guess_y):
    """Signed distance along (1, 1)/sqrt2 from curve 2 to curve 1 at rotated abscissa u."""
    vdd = latch.vdd
    x = _invert_monotone(latch.inv1, vdd, SQRT2 * u, guess_x)
    y = _invert_monotone(latch.inv2, vdd, -SQRT2 * u, guess_y)
    v1 = (x + vtc_output(x, latch.inv1, vdd)) / SQRT2
    v2 = (y + vtc_output(y, latch.inv2, vdd)) / SQRT2
    return v1 - v2


def _lobe_max(latch, dense1, dense2, u_lo, u_hi, sign, n=2001):
    u = np.linspace(u_lo, u_hi, n)
    # initial guesses by interpolation on densely sampled curves
    gx = np.interp(SQRT2 * u, dense1[0] - dense1[1], dense1[0])
    gy = np.interp(-SQRT2 * u, dense2[0] - dense2[1], dense2[0])
    d = sign * _lobe_gap(latch, u, gx, gy)
    k = int(np.argmax(d))
    if 0 < k < n - 1:
        # parabolic vertex through the three best samples
        h = u[1] - u[0]
        den = d[k - 1] - 2 * d[k] + d[k + 1]
        off = 0.5 * h * (d[k - 1] - d[k + 1]) / den if den < 0 else 0.0
        uk = u[k] + off
        dk = sign * _lobe_gap(
            latch, np.array([uk]), np.array([gx[k]]), np.array([gy[k]])
        )[0]
        if dk >= d[k]:
            return dk, uk
    return d[k], u[k]


def snm(b: ButterflyData) -> SnmResult:
    """Largest inscribed square of each lobe, rotated-axes method.

    In coordinates rotated by 45 degrees the diagonal of an axis-aligned
    square between the curves is a vertical gap; its maximum over a lobe
    divided by sqrt(2) is the square side.
    """
    if not b.functional:
        raise PreconditionError("SNM is defined only for functional (3-crossing) cells")
    latch = b.latch
    vdd = latch.vdd
    xs = np.linspace(-0.5 * vdd, 1.5 * vdd, 4001)
    dense1 = (xs, vtc_output(xs, latch.inv1, vdd))
    dense2 = (xs, vtc_output(xs, latch.inv2, vdd))
    (x0, y0), (xm, ym), (x1, y1) = b.crossings
    u0, um, u1 = (x0 - y0) / SQRT2, (xm - ym) / SQRT2, (x1 - y1) / SQRT2
    g0, ua = _lobe_max(latch, dense1, dense2, u0, um, +1.0)
    g1, ub = _lobe_max(latch, dense1, dense2, um, u1, -1.0)
    s0, s1 = max(g0, 0.0) / SQRT2, max(g1, 0.0) / SQRT2
    side = "state0" if s0 <= s1 else "state1"
    s0, s1 = float(s0), float(s1)
    return SnmResult(min(s0, s1), (s0, s1), side, (float(ua), float(ub)))


def snm_squares(b: ButterflyData, res: SnmResult):
    """Lower-left corner and side ``(x, y, s)`` of each lobe's largest square."""
    latch, vdd = b.latch, b.latch.vdd
    out = []
    for u, sign in zip(res.u_at_max, (1.0, -1.0)):
        x = _invert_monotone(latch.inv1, vdd, np.array([SQRT2 * u]), np.array([0.5 * vdd]))[0]
        y = _invert_monotone(latch.inv2, vdd, np.array([-SQRT2 * u]), np.array([0.5 * vdd]))[0]
        p1 = (x, float(vtc_output(x, latch.inv1, vdd)))
        p2 = (float(vtc_output(y, latch.inv2, vdd)), y)
        lo = p2 if sign > 0 else p1
        hi = p1 if sign > 0 else p2
        out.append((float(lo[0]), float(lo[1]), float(max(hi[0] - lo[0], 0.0))))
    return tuple(out)


# --- equilibria -------------------------------------------------------------


def latch_currents(latch: LatchConfig, x, y):
    """Net node currents (into vout2, into vout1) at state (x, y) = (vout2, vout1)."""
    i2 = inverter_node_current(y, x, latch.inv2, latch.vdd)
    i1 = inverter_node_current(x, y, latch.inv1, latch.vdd)
    return i2, i1


def drift(latch: LatchConfig, x, y):
    """Deterministic state velocity (dx/dt, dy/dt) in V/s."""
    i2, i1 = latch_currents(latch, x, y)
    return i2 / latch.C2, i1 / latch.C1


def drift_jacobian(latch: LatchConfig, x: float, y: float) -> np.ndarray:
    """Analytic 2x2 Jacobian of :func:`drift` (1/s)."""
    d2_in, d2_out = inverter_partials(y, x, latch.inv2, latch.vdd)
    d1_in, d1_out = inverter_partials(x, y, latch.inv1, latch.vdd)
    return np.array(
        [
            [d2_out / latch.C2, d2_in / latch.C2],
            [d1_in / latch.C1, d1_out / latch.C1],
        ],
        dtype=float,
    )


def current_scale(latch: LatchConfig) -> float:
    """Largest saturated on-current of the four devices; unit of normalized residuals."""
    scale = 0.0
    for inv in (latch.inv1, latch.inv2):
        for p in (inv.nmos, inv.pmos):
            scale = max(scale, p.I0 * math.exp((latch.vdd - abs(p.Vth)) / (p.n * p.UT)))
    return scale


def normalized_residual(latch: LatchConfig, x: float, y: float) -> float:
    i2, i1 = latch_currents(latch, x, y)
    return math.hypot(i2, i1) / current_scale(latch)


def _newton(latch, x, y, damped=False, maxiter=100):
    s = np.array([x, y], dtype=float)
    scale = current_scale(latch)
    caps = np.array([latch.C2, latch.C1])
    for _ in range(maxiter):
        i = np.array(latch_currents(latch, s[0], s[1]))
        res = np.hypot(*i) / scale
        J = drift_jacobian(latch, s[0], s[1]) * caps[:, None]
        step = np.linalg.solve(J, -i)
        if damped:
            lam = 1.0
            while lam > 1e-6:
                trial = s + lam * step
                if np.hypot(*latch_currents(latch, *trial)) / scale < res:
                    break
                lam *= 0.5
            step = lam * step
        s = s + step
        if np.max(np.abs(step)) < 1e-16 or res < 1e-17:
            break
    return s, normalized_residual(latch, s[0], s[1])


def refine_equilibrium(latch: LatchConfig, x: float, y: float):
    """Newton polish of a DC solution; damped Newton as fallback."""
    try:
        s, res = _newton(latch, x, y)
    except np.linalg.LinAlgError:
        s, res = np.array([x, y]), math.inf
    if not res < RESIDUAL_TOL or np.max(np.abs(s - [x, y])) > 5e-3:
        s, res = _newton(latch, x, y, damped=True)
    if not res < RESIDUAL_TOL:
        raise NumericalError(
            "equilibrium Newton iteration did not converge",
            {"seed": (x, y), "last": tuple(s), "residual": res},
        )
    return float(s[0]), float(s[1]), res


def classify_point(jac: np.ndarray) -> str:
    ev = np.linalg.eigvals(jac)
    if np.all(ev.real < 0):
        return "stable"
    if np.sum(ev.real > 0) == 1 and np.all(np.abs(ev.imag) == 0):
        return "saddle"
    return "unstable"


@dataclass
class EquilibriumSet:
    """Stable states (X0, Y0), (X1, Y1) and the saddle (XM, YM)."""

    stable0: tuple
    stable1: tuple
    unstable: tuple
    jacobians: dict
    residuals: dict

    @property
    def X0(self):
        return self.stable0[0]

    @property
    def Y0(self):
        return self.stable0[1]

    @property
    def X1(self):
        return self.stable1[0]

    @property
    def Y1(self):
        return self.stable1[1]

    @property
    def XM(self):
        return self.unstable[0]

    @property
    def YM(self):
        return self.unstable[1]

    def eigenvalues(self, name: str) -> np.ndarray:
        return np.linalg.eigvals(self.jacobians[name])

    def kinds(self) -> dict:
        return {k: classify_point(j) for k, j in self.jacobians.items()}

    def as_dict(self) -> dict:
        out = {}
        for k in ("stable0", "unstable", "stable1"):
            ev = self.eigenvalues(k)
            out[k] = {
                "x_V": getattr(self, k)[0],
                "y_V": getattr(self, k)[1],
                "kind": classify_point(self.jacobians[k]),
                "eigenvalues_per_s": [[float(e.real), float(e.imag)] for e in ev],
                "residual": self.residuals[k],
            }
        return out


def equilibria(latch: LatchConfig, grid_step: float = 1e-3) -> EquilibriumSet:
    """Locate and classify the three DC solutions of a functional cell."""
    crossings = find_crossings(latch, grid_step)
    if classify_crossings(crossings) != "functional":
        raise PreconditionError(
            f"cell has {len(crossings)} crossing(s); equilibria need a functional cell"
        )
    names = ("stable0", "unstable", "stable1")
    pts, jac, res = {}, {}, {}
    for name, (x, y) in zip(names, crossings):
        xr, yr, r = refine_equilibrium(latch, x, y)
        pts[name] = (xr, yr)
        jac[name] = drift_jacobian(latch, xr, yr)
        res[name] = r
    eq = EquilibriumSet(pts["stable0"], pts["stable1"], pts["unstable"], jac, res)
    kinds = eq.kinds()
    if kinds != {"stable0": "stable", "unstable": "saddle", "stable1": "stable"}:
        raise NumericalError("unexpected equilibrium signature", {"kinds": kinds})
    return eq


def distances(eq: EquilibriumSet):
    """(dX, dY) = (XM - X0, Y0 - YM) for the retained state (X0, Y0)."""
    dx = eq.XM - eq.X0
    dy = eq.Y0 - eq.YM
    if not (dx > 0 and dy > 0):
        raise NumericalError(
            "inconsistent equilibrium ordering", {"dX": dx, "dY": dy}
        )
    return dx, dy


def distances_alt(eq: EquilibriumSet):
    """(XM - X0, Y1 - YM): the alternative vertical distance, for comparison only.

    With the usual ordering Y1 < YM this vertical distance is negative.
    """
    return eq.XM - eq.X0, eq.Y1 - eq.YM
