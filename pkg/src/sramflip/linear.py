"""Small-signal stochastic model of the latch around its retained state.

Near ``(X0, Y0)`` the node voltages obey the linear SDE

    d(dv) = A dv dt + B dW

with ``A`` the drift Jacobian and ``B B^T = diag(S_k / (2 C_k^2))``; ``S_k``
is the one-sided current-noise PSD of node ``k``, so its two-sided
intensity is ``S_k / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import dc
from .device import LatchConfig, node_noise_psd
from .errors import NumericalError, PreconditionError


@dataclass
class LinearizedModel:
    """Linearized dynamics at the retained state.

    ``sigma1`` and ``sigma2`` are the stationary deviations of the first and
    second state coordinates, i.e. of ``vout2`` and ``vout1``.
    """

    A: np.ndarray
    B: np.ndarray
    flip_direction: np.ndarray
    sigma1: float = math.nan
    sigma2: float = math.nan
    fp: float = math.nan
    covariance: np.ndarray | None = None
    oscillatory: bool = False
    node_psd: tuple = field(default=(math.nan, math.nan))

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.A)

    def report(self) -> dict:
        return {
            "fp_Hz": self.fp,
            "sigma1_V": self.sigma1,
            "sigma2_V": self.sigma2,
            "eigenvalues_per_s": [[float(e.real), float(e.imag)] for e in self.eigenvalues],
            "flip_direction": [float(v) for v in self.flip_direction],
            "oscillatory": self.oscillatory,
        }


def _is_hurwitz(A) -> bool:
    return bool(np.all(np.linalg.eigvals(A).real < 0))


def linearize(latch: LatchConfig, eq: dc.EquilibriumSet) -> LinearizedModel:
    x0, y0 = eq.stable0
    A = dc.drift_jacobian(latch, x0, y0)
    if not _is_hurwitz(A):
        raise PreconditionError("drift Jacobian at the retained state is not Hurwitz")
    s_x = float(node_noise_psd(y0, x0, latch.inv2, latch.vdd, latch.access_noise))
    s_y = float(node_noise_psd(x0, y0, latch.inv1, latch.vdd, latch.access_noise))
    B = np.diag([math.sqrt(s_x / 2.0) / latch.C2, math.sqrt(s_y / 2.0) / latch.C1])
    d = np.array([eq.XM - x0, eq.YM - y0])
    model = LinearizedModel(A=A, B=B, flip_direction=d / np.linalg.norm(d), node_psd=(s_x, s_y))
    model.covariance = stationary_covariance(model)
    model.sigma1, model.sigma2 = (float(v) for v in np.sqrt(np.diag(model.covariance)))
    model.fp = noise_bandwidth(model)
    return model


def stationary_covariance(model: LinearizedModel) -> np.ndarray:
    """Solve ``A S + S A^T + B B^T = 0`` for the 2x2 symmetric ``S``."""
    A = model.A
    if not _is_hurwitz(A):
        raise PreconditionError("stationary covariance needs a Hurwitz drift matrix")
    Q = model.B @ model.B.T
    (a11, a12), (a21, a22) = A
    # unknowns (s11, s12, s22)
    M = np.array(
        [
            [2 * a11, 2 * a12, 0.0],
            [a21, a11 + a22, a12],
            [0.0, 2 * a21, 2 * a22],
        ]
    )
    rhs = -np.array([Q[0, 0], Q[0, 1], Q[1, 1]])
    try:
        s11, s12, s22 = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("singular Lyapunov system", {"A": A.tolist()}) from exc
    return np.array([[s11, s12], [s12, s22]])


def stationary_sigma(model: LinearizedModel):
    """(sigma1, sigma2): square roots of the stationary covariance diagonal."""
    S = stationary_covariance(model)
    return float(math.sqrt(S[0, 0])), float(math.sqrt(S[1, 1]))


def noise_bandwidth(model: LinearizedModel) -> float:
    """|lambda|/2pi of the eigenmode best aligned with the flip direction."""
    if not _is_hurwitz(model.A):
        raise PreconditionError("noise bandwidth needs a Hurwitz drift matrix")
    lam, vecs = np.linalg.eig(model.A)
    proj = np.abs(vecs.conj().T @ model.flip_direction) / np.linalg.norm(vecs, axis=0)
    k = int(np.argmax(proj))
    if abs(lam[k].imag) > 0:
        model.oscillatory = True
    return float(abs(lam[k].real) / (2.0 * math.pi))
