"""Closed-form mean-time-to-failure predictors and their Monte-Carlo check.

All predictors reduce the latch to a scalar Ornstein-Uhlenbeck variable
``vv`` along the line from the retained state ``(X0, Y0)`` to the saddle
``(XM, YM)``:

    dvv/dt = -2 pi fp vv + eta(t)

with stationary deviation ``sigma_vv`` and failure threshold ``dvv``.
Exponentials are handled in log space; the linear-scale wrappers return
``inf`` on overflow.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate, special

from . import _kernels as K
from . import dc, linear
from .device import LatchConfig
from .errors import DomainError

SQRT_PI = math.sqrt(math.pi)
# above this z the erf-weighted integral equals Dawson's integral to e^(-z^2)
Z_ASYMPTOTIC = 25.0


def _positive(**kw):
    for k, v in kw.items():
        if not (v > 0 and math.isfinite(v)):
            raise DomainError(f"{k} must be positive and finite, got {v!r}")


def delta_vv(dX: float, dY: float) -> float:
    """Euclidean distance from the retained state to the saddle."""
    _positive(dX=dX, dY=dY)
    return math.hypot(dX, dY)


def sigma_vv(dX: float, dY: float, sigma1: float, sigma2: float) -> float:
    """Deviation of the projection of two uncorrelated node noises on the flip line."""
    _positive(dX=dX, dY=dY, sigma1=sigma1, sigma2=sigma2)
    d2 = dX * dX + dY * dY
    return math.sqrt((dX * dX * sigma1**2 + dY * dY * sigma2**2) / d2)


def _exp_or_inf(log_value: float) -> float:
    try:
        return math.exp(log_value)
    except OverflowError:
        return math.inf


def kish_log_mttf(dvv: float, sigma: float, fp: float) -> float:
    """Natural log of Kish's band-limited white-noise MTTF."""
    if not dvv >= 0:
        raise DomainError("dvv must be non-negative")
    _positive(sigma=sigma, fp=fp)
    return math.log(math.sqrt(3.0) / 2.0) + 0.5 * (dvv / sigma) ** 2 - math.log(fp)


def kish_mttf(dvv: float, sigma: float, fp: float) -> float:
    """``(sqrt(3)/2) exp((dvv/sigma)^2 / 2) / fp``; ``inf`` when it overflows."""
    return _exp_or_inf(kish_log_mttf(dvv, sigma, fp))


def _scaled_erf_integral(z: float) -> float:
    """``exp(-z^2) * int_0^z exp(u^2) erf(u) du``.

    Written with ``s = z - u`` the integrand ``exp(-s(2z - s)) erf(z - s)``
    is bounded by one and decays away from ``s = 0``, so the adaptive
    Gauss-Kronrod rule never sees an overflow.
    """
    if z == 0.0:
        return 0.0
    if z > Z_ASYMPTOTIC:
        return float(special.dawsn(z))
    f = lambda s: math.exp(-s * (2.0 * z - s)) * math.erf(z - s)
    val, _ = integrate.quad(f, 0.0, z, epsabs=0.0, epsrel=1e-12, limit=200, points=[min(z, 1.0 / z)])
    return val


def _z(dvv, sigma):
    return dvv / (math.sqrt(2.0) * sigma)


def nobile_log_mttf(dvv: float, sigma: float, fp: float) -> float:
    """Natural log of Nobile's first-passage MTTF (``-inf`` for dvv = 0)."""
    if not dvv >= 0:
        raise DomainError("dvv must be non-negative")
    _positive(sigma=sigma, fp=fp)
    z = _z(dvv, sigma)
    if z == 0.0:
        return -math.inf
    bracket = SQRT_PI * special.dawsn(z) + _scaled_erf_integral(z)
    return z * z + math.log(bracket) - math.log(math.pi * fp)


def nobile_mttf(dvv: float, sigma: float, fp: float) -> float:
    """``(1/(pi fp)) [sqrt(pi) int_0^z e^{u^2} du + int_0^z e^{u^2} erf(u) du]``.

    ``z = dvv / (sqrt(2) sigma)``. The first integral is evaluated as
    ``exp(z^2) * dawsn(z)``, the second by quadrature of the rescaled
    integrand; beyond ``z = 25`` it is replaced by ``exp(z^2) * dawsn(z)``
    (exact up to a relative ``exp(-z^2)``).
    """
    return _exp_or_inf(nobile_log_mttf(dvv, sigma, fp))


def ou_log_mfpt(dvv: float, sigma: float, fp: float) -> float:
    """Log of the exact OU mean first-passage time from 0 to ``dvv``.

    ``T = (sqrt(pi)/theta) int_0^z exp(u^2) (1 + erf(u)) du`` with
    ``theta = 2 pi fp``, the solution of the backward Kolmogorov equation
    for the scalar model with stationary deviation ``sigma``.
    """
    if not dvv >= 0:
        raise DomainError("dvv must be non-negative")
    _positive(sigma=sigma, fp=fp)
    z = _z(dvv, sigma)
    if z == 0.0:
        return -math.inf
    bracket = special.dawsn(z) + _scaled_erf_integral(z)
    return z * z + math.log(SQRT_PI * bracket / (2.0 * math.pi * fp))


def ou_mfpt(dvv: float, sigma: float, fp: float) -> float:
    return _exp_or_inf(ou_log_mfpt(dvv, sigma, fp))


def ou_first_passage_mc(
    fp: float,
    sigma: float,
    threshold: float,
    n: int,
    seed: int,
    step: float = 2e-3,
    threads: int = 1,
):
    """Monte-Carlo mean first-passage time of the scalar OU model.

    ``dv = -theta v dt + sqrt(2 theta sigma^2) dW`` from ``v(0) = 0`` until
    ``v >= threshold``. Transitions are sampled exactly on a grid of
    ``step / theta``; crossings between grid points are caught with the
    Brownian-bridge probability, and a crossing is dated at the middle of
    its step. Trial ``i`` uses ``PCG64(stream_seed(seed, i))``.

    Returns ``(mean, std_error)``.
    """
    from .noise import stream_seed

    if n < 1:
        raise DomainError("n must be >= 1")
    _positive(fp=fp, sigma=sigma, step=step)
    if threshold <= 0.0:
        return 0.0, 0.0
    theta = 2.0 * math.pi * fp
    h = step / theta
    decay = math.exp(-theta * h)
    var = sigma * sigma * -math.expm1(-2.0 * theta * h)
    sd = math.sqrt(var)

    def one(i):
        rng = np.random.Generator(np.random.PCG64(stream_seed(seed, i)))
        v, k0, chunk = 0.0, 0, 1 << 12
        while True:
            normals = rng.standard_normal(chunk)
            uniforms = rng.random(chunk)
            v, k = K.ou_chunk(v, threshold, decay, sd, var, normals, uniforms)
            if k >= 0:
                return (k0 + k + 0.5) * h
            k0 += chunk
            chunk = min(2 * chunk, 1 << 18)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            times = np.array(list(pool.map(one, range(n))))
    else:
        times = np.array([one(i) for i in range(n)])
    se = float(np.std(times, ddof=1) / math.sqrt(n)) if n > 1 else math.nan
    return float(np.mean(times)), se


@dataclass(frozen=True)
class PredictorBundle:
    dX: float
    dY: float
    dvv: float
    sigma1: float
    sigma2: float
    sigma_vv: float
    fp: float
    mttf_kish: float
    mttf_nobile: float
    log_mttf_kish: float
    log_mttf_nobile: float
    overflow: bool

    @property
    def z(self) -> float:
        return _z(self.dvv, self.sigma_vv)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["z"] = self.z
        return d


def bundle_from_parts(dX, dY, sigma1, sigma2, fp) -> PredictorBundle:
    dvv = delta_vv(dX, dY)
    svv = sigma_vv(dX, dY, sigma1, sigma2)
    lk = kish_log_mttf(dvv, svv, fp)
    ln = nobile_log_mttf(dvv, svv, fp)
    mk, mn = _exp_or_inf(lk), _exp_or_inf(ln)
    return PredictorBundle(
        dX, dY, dvv, sigma1, sigma2, svv, fp, mk, mn, lk, ln, math.isinf(mk) or math.isinf(mn)
    )


def predict(latch: LatchConfig):
    """Analytic MTTF predictions for a functional cell.

    Returns ``(PredictorBundle, LinearizedModel, EquilibriumSet)``.
    """
    eq = dc.equilibria(latch)
    dX, dY = dc.distances(eq)
    model = linear.linearize(latch, eq)
    return bundle_from_parts(dX, dY, model.sigma1, model.sigma2, model.fp), model, eq
