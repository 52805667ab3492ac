import math

import mpmath as mp
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sramflip import dc, predictors as P
from sramflip.errors import DomainError

S = 1 / math.sqrt(2)  # sigma for which z equals dvv


def _nobile_mp(z, fp=1.0):
    """High-precision reference: (1/(pi fp)) [sqrt(pi) int e^{u^2} + int e^{u^2} erf(u)]."""
    with mp.workdps(40):
        z = mp.mpf(z)
        a = mp.quad(lambda u: mp.exp(u * u), [0, z])
        b = mp.quad(lambda u: mp.exp(u * u) * mp.erf(u), [0, z])
        return (mp.sqrt(mp.pi) * a + b) / (mp.pi * fp)


def _ou_mp(z, fp=1.0):
    with mp.workdps(40):
        z = mp.mpf(z)
        inner = mp.quad(lambda u: mp.exp(u * u) * (1 + mp.erf(u)), [0, z])
        return mp.sqrt(mp.pi) * inner / (2 * mp.pi * fp)


def test_delta_vv():
    assert P.delta_vv(3e-3, 4e-3) == pytest.approx(5e-3, rel=1e-15)
    assert P.delta_vv(0.01, 1e-12) == pytest.approx(0.01, rel=1e-12)
    for bad in ((0.0, 1.0), (1.0, -1.0), (float("nan"), 1.0)):
        with pytest.raises(DomainError):
            P.delta_vv(*bad)


def test_sigma_vv():
    assert P.sigma_vv(1.0, 1.0, 0.3, 0.3) == pytest.approx(0.3, rel=1e-15)
    assert P.sigma_vv(1.0, 1e-9, 0.3, 0.7) == pytest.approx(0.3, rel=1e-12)
    assert P.sigma_vv(3.0, 4.0, 1.0, 2.0) == pytest.approx(math.sqrt(2.92), rel=1e-15)
    with pytest.raises(DomainError):
        P.sigma_vv(1.0, 1.0, 0.0, 1.0)


@settings(max_examples=100, deadline=None)
@given(
    dx=st.floats(1e-4, 0.2),
    dy=st.floats(1e-4, 0.2),
    s1=st.floats(1e-4, 0.01),
    s2=st.floats(1e-4, 0.01),
)
def test_sigma_vv_bounded(dx, dy, s1, s2):
    assert min(s1, s2) * (1 - 1e-12) <= P.sigma_vv(dx, dy, s1, s2) <= max(s1, s2) * (1 + 1e-12)


def test_kish_values():
    assert P.kish_mttf(0.0, 1.0, 1.0) == pytest.approx(math.sqrt(3) / 2, rel=1e-15)
    assert P.kish_mttf(2.0, 1.0, 1.0) == pytest.approx(math.sqrt(3) / 2 * math.e**2, rel=1e-14)
    assert P.kish_mttf(2.0, 1.0, 1.0) == pytest.approx(6.400, abs=1e-3)
    assert P.kish_mttf(2.0, 1.0, 2e6) == pytest.approx(P.kish_mttf(2.0, 1.0, 1e6) / 2, rel=1e-15)
    assert P.kish_mttf(80.0, 1.0, 1.0) == math.inf
    assert math.isfinite(P.kish_log_mttf(80.0, 1.0, 1.0))
    with pytest.raises(DomainError):
        P.kish_mttf(1.0, 0.0, 1.0)


@pytest.mark.parametrize("z", [1e-3, 0.1, 0.5, 1.0, 2.0, 2.05, 3.0, 3.55, 5.0, 10.0, 20.0, 24.9])
def test_nobile_against_high_precision(z):
    ref = _nobile_mp(z)
    got = P.nobile_log_mttf(z, S, 1.0)
    assert got == pytest.approx(float(mp.log(ref)), abs=1e-9)
    if z < 20:
        assert P.nobile_mttf(z, S, 1.0) == pytest.approx(float(ref), rel=1e-8)


def test_nobile_reference_points():
    assert P.nobile_mttf(1.0, S, 1.0) == pytest.approx(1.0847604, rel=1e-7)
    assert P.nobile_mttf(0.0, S, 1.0) == 0.0
    z = 1e-3
    assert P.nobile_mttf(z, S, 1.0) == pytest.approx(z / math.sqrt(math.pi), rel=1e-3)


def test_nobile_asymptotic_branch():
    zs = P.Z_ASYMPTOTIC
    # adjacent doubles on either side of the switch
    below = P.nobile_log_mttf(zs, S, 1.0)
    above = P.nobile_log_mttf(math.nextafter(zs, math.inf), S, 1.0)
    assert above == pytest.approx(below, abs=1e-10)
    for z in (30.0, 100.0):
        assert P.nobile_log_mttf(z, S, 1.0) == pytest.approx(float(mp.log(_nobile_mp(z))), abs=1e-9)
    assert P.nobile_mttf(30.0, S, 1.0) == math.inf


@settings(max_examples=60, deadline=None)
@given(dvv=st.floats(1e-4, 0.05), sigma=st.floats(1e-3, 1e-2), fp=st.floats(1e5, 1e8), k=st.floats(1.01, 2.0))
def test_nobile_monotone(dvv, sigma, fp, k):
    base = P.nobile_log_mttf(dvv, sigma, fp)
    assert P.nobile_log_mttf(dvv * k, sigma, fp) > base
    assert P.nobile_log_mttf(dvv, sigma * k, fp) < base
    assert P.nobile_log_mttf(dvv, sigma, fp * k) < base


def test_overflow_safety_and_order():
    prev_k = prev_n = -math.inf
    for z in [0.5 * i for i in range(1, 41)]:
        lk, ln = P.kish_log_mttf(z, S, 1.0), P.nobile_log_mttf(z, S, 1.0)
        assert math.isfinite(lk) and math.isfinite(ln)
        assert lk > prev_k and ln > prev_n
        prev_k, prev_n = lk, ln
        if z >= 1.5:
            assert lk > ln


def test_kish_nobile_large_z_ratio():
    z = 20.0
    ratio = math.exp(P.kish_log_mttf(z, S, 1.0) - P.nobile_log_mttf(z, S, 1.0))
    assert ratio == pytest.approx(math.sqrt(3) * math.pi * z / (1 + math.sqrt(math.pi)), rel=5e-3)


@pytest.mark.parametrize("z", [0.5, 1.0, 2.0, 4.0])
def test_ou_mfpt_against_high_precision(z):
    assert P.ou_mfpt(z, S, 1.0) == pytest.approx(float(_ou_mp(z)), rel=1e-9)


def test_ou_mc_matches_exact_mfpt():
    fp, sigma = 1e6, 1e-3
    thr = math.sqrt(2) * sigma  # z = 1
    mean, se = P.ou_first_passage_mc(fp, sigma, thr, 4000, seed=21)
    assert abs(mean - P.ou_mfpt(thr, sigma, fp)) < 3 * se


def test_ou_mc_trivial_cases():
    assert P.ou_first_passage_mc(1e6, 1e-3, 0.0, 100, 0) == (0.0, 0.0)
    a = P.ou_first_passage_mc(1e6, 1e-3, 1e-3, 200, 3)
    b = P.ou_first_passage_mc(1e7, 1e-3, 1e-3, 200, 3)
    assert b[0] == pytest.approx(a[0] / 10, rel=1e-12)
    assert P.ou_first_passage_mc(1e6, 1e-3, 1e-3, 50, 3, threads=2) == P.ou_first_passage_mc(1e6, 1e-3, 1e-3, 50, 3)


def test_predict_bundle_consistency(nominal):
    latch = nominal.worst_case(0.058)
    b, model, eq = P.predict(latch)
    assert (b.dX, b.dY) == (eq.XM - eq.X0, eq.Y0 - eq.YM)
    assert b.dvv == pytest.approx(math.dist(eq.stable0, eq.unstable), rel=1e-12)
    assert b.sigma_vv == pytest.approx(P.sigma_vv(b.dX, b.dY, model.sigma1, model.sigma2), rel=1e-15)
    assert b.sigma_vv <= max(b.sigma1, b.sigma2)
    assert b.fp == model.fp
    assert b.mttf_kish > b.mttf_nobile > 0
    assert not b.overflow
    assert set(b.as_dict()) >= {"dX", "dY", "dvv", "sigma_vv", "sigma1", "sigma2", "fp", "mttf_kish", "mttf_nobile", "z"}


@pytest.mark.xfail(strict=True, reason="predicted z spans 2.2 to 7.4 on the calibrated line; ratio only in [4, 7] for z in ~[2.31, 3.71]")
def test_calibrated_ratio_within_4_and_7(nominal):
    for dv in (0.055, 0.056, 0.057, 0.058, 0.059):
        b = P.predict(nominal.worst_case(dv))[0]
        assert 4.0 <= b.mttf_kish / b.mttf_nobile <= 7.0


def test_predict_rejects_defective(nominal):
    from sramflip.errors import PreconditionError

    with pytest.raises(PreconditionError):
        P.predict(nominal.worst_case(0.065))
