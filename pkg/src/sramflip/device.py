"""Weak-inversion MOS and inverter model of the retention latch.

Every transistor follows the exponential subthreshold law

    I_ds = I0 * exp((V_gs - V_th) / (n * U_T)) * (1 - exp(-V_ds / U_T))

for n-type devices; p-type devices use the mirrored expression
``I_p(vgs, vds) = -I_n(-vgs, -vds)`` with a signed (negative) threshold.
Process variability enters each inverter as a series voltage source
``dv`` added to its input.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np
from scipy import constants

from .errors import DomainError

Q_E = constants.elementary_charge
K_B = constants.Boltzmann


def thermal_voltage(temperature: float) -> float:
    """kT/q in volts."""
    return K_B * temperature / Q_E


@dataclass(frozen=True)
class MosParams:
    """Subthreshold device card.

    ``Vth`` is signed: positive for n-type, negative for p-type.
    """

    polarity: Literal["n", "p"]
    I0: float
    Vth: float
    n: float
    UT: float = field(default_factory=lambda: thermal_voltage(300.0))

    def __post_init__(self):
        if self.polarity not in ("n", "p"):
            raise DomainError(f"polarity must be 'n' or 'p', got {self.polarity!r}")
        if not self.I0 > 0:
            raise DomainError("I0 must be positive")
        if not self.n >= 1:
            raise DomainError("slope factor n must be >= 1")
        if not self.UT > 0:
            raise DomainError("UT must be positive")


@dataclass(frozen=True)
class InverterParams:
    nmos: MosParams
    pmos: MosParams
    dV: float = 0.0


@dataclass(frozen=True)
class LatchConfig:
    """Cross-coupled inverter pair in hold mode.

    Inverter 1 drives node ``vout1`` from input ``vout2``; inverter 2 drives
    ``vout2`` from ``vout1``. ``C1`` loads ``vout1`` and ``C2`` loads ``vout2``.
    """

    vdd: float
    inv1: InverterParams
    inv2: InverterParams
    C1: float
    C2: float
    temperature: float = 300.0
    access_noise: float = 0.0

    def __post_init__(self):
        if not self.vdd > 0:
            raise DomainError("vdd must be positive")
        if not (self.C1 > 0 and self.C2 > 0):
            raise DomainError("node capacitances must be positive")
        if not self.access_noise >= 0:
            raise DomainError("access_noise must be non-negative")

    @property
    def dv1(self) -> float:
        return self.inv1.dV

    @property
    def dv2(self) -> float:
        return self.inv2.dV

    def with_variability(self, dv1: float, dv2: float) -> LatchConfig:
        return replace(
            self,
            inv1=replace(self.inv1, dV=float(dv1)),
            inv2=replace(self.inv2, dV=float(dv2)),
        )

    def worst_case(self, dv: float) -> LatchConfig:
        """Cell on the line dV1 = -dV2 = dv."""
        return self.with_variability(dv, -dv)

    def swapped(self) -> LatchConfig:
        """Exchange the roles of the two inverters (mirror across the diagonal)."""
        return replace(self, inv1=self.inv2, inv2=self.inv1, C1=self.C2, C2=self.C1)


def _check_finite(*values):
    for v in values:
        if not np.all(np.isfinite(v)):
            raise DomainError("non-finite voltage passed to the device model")


def mos_current(vgs, vds, p: MosParams):
    """Drain-to-source current (A); positive for an n-type device with vds > 0.

    Accepts scalars or numpy arrays.
    """
    _check_finite(vgs, vds)
    if p.polarity == "p":
        vgs, vds = -np.asarray(vgs), -np.asarray(vds)
        vth = -p.Vth
        sign = -1.0
    else:
        vth = p.Vth
        sign = 1.0
    i = p.I0 * np.exp((vgs - vth) / (p.n * p.UT)) * -np.expm1(-np.asarray(vds) / p.UT)
    return sign * i


def mos_conductances(vgs, vds, p: MosParams):
    """Partial derivatives (dI/dvgs, dI/dvds) of :func:`mos_current`."""
    _check_finite(vgs, vds)
    if p.polarity == "p":
        vgs_n, vds_n, vth = -np.asarray(vgs), -np.asarray(vds), -p.Vth
    else:
        vgs_n, vds_n, vth = np.asarray(vgs), np.asarray(vds), p.Vth
    g = p.I0 * np.exp((vgs_n - vth) / (p.n * p.UT))
    gm = g * -np.expm1(-vds_n / p.UT) / (p.n * p.UT)
    gds = g * np.exp(-vds_n / p.UT) / p.UT
    # the double sign flip of the mirror leaves the derivatives unchanged
    return gm, gds


def _branch_currents(vin, vout, inv: InverterParams, vdd: float):
    ve = np.asarray(vin) + inv.dV
    i_up = -mos_current(ve - vdd, np.asarray(vout) - vdd, inv.pmos)
    i_down = mos_current(ve, vout, inv.nmos)
    return i_up, i_down


def inverter_node_current(vin, vout, inv: InverterParams, vdd: float):
    """Net current (A) charging the inverter output node.

    The input is seen through the series variability source:
    ``vin_eff = vin + inv.dV``.
    """
    _check_finite(vin, vout)
    i_up, i_down = _branch_currents(vin, vout, inv, vdd)
    return i_up - i_down


def inverter_partials(vin, vout, inv: InverterParams, vdd: float):
    """(dI_net/dvin, dI_net/dvout) of :func:`inverter_node_current`."""
    ve = np.asarray(vin) + inv.dV
    gm_p, gds_p = mos_conductances(ve - vdd, np.asarray(vout) - vdd, inv.pmos)
    gm_n, gds_n = mos_conductances(ve, vout, inv.nmos)
    # i_up = -I_p(ve - vdd, vout - vdd)
    return -gm_p - gm_n, -gds_p - gds_n


def node_noise_psd(vin, vout, inv: InverterParams, vdd: float, access_noise: float = 0.0):
    """One-sided white current-noise PSD (A^2/Hz) injected at the output node.

    Shot noise ``2q|I|`` of both branch currents plus an optional constant
    contribution standing in for the access transistors.
    """
    _check_finite(vin, vout)
    i_up, i_down = _branch_currents(vin, vout, inv, vdd)
    return 2.0 * Q_E * (np.abs(i_up) + np.abs(i_down)) + access_noise


# Calibrated default: SNM ~ 60 mV at VDD = 200 mV, worst-case failure
# boundary near 60 mV, f_p of a few MHz and ms-scale MTTF at 55 mV.
DEFAULT_VDD = 0.2
DEFAULT_TEMPERATURE = 300.0
DEFAULT_I0 = 25e-9
DEFAULT_VTH = 0.40
DEFAULT_SLOPE = 2.5
DEFAULT_CAPACITANCE = 0.25e-15


def default_latch(dv1: float = 0.0, dv2: float = 0.0) -> LatchConfig:
    """Matched latch with the calibrated default device cards."""
    ut = thermal_voltage(DEFAULT_TEMPERATURE)
    nmos = MosParams("n", DEFAULT_I0, DEFAULT_VTH, DEFAULT_SLOPE, ut)
    pmos = MosParams("p", DEFAULT_I0, -DEFAULT_VTH, DEFAULT_SLOPE, ut)
    return LatchConfig(
        vdd=DEFAULT_VDD,
        inv1=InverterParams(nmos, pmos, dv1),
        inv2=InverterParams(nmos, pmos, dv2),
        C1=DEFAULT_CAPACITANCE,
        C2=DEFAULT_CAPACITANCE,
        temperature=DEFAULT_TEMPERATURE,
    )
