"""Transient-noise Monte Carlo of the nonlinear latch.

Each experiment starts from ``(vout2, vout1) = (0, vdd)`` and integrates

    C_k dv_k/dt = I_net,k(v) + i_n,k(t)

where ``i_n,k`` is band-limited white noise: a new independent Gaussian
sample of variance ``S_k(v) * fmax`` every ``dt = 1/(2 fmax)``, held
constant in between. The time to failure (TTF) is the first instant at
which ``vout2 >= vout1``.

Random streams: experiment ``i`` of a run with master seed ``s`` draws from
``PCG64(stream_seed(s, i))``, where ``stream_seed`` hashes ``(s, i)``
through ``numpy.random.SeedSequence(s, spawn_key=(i,))``. Results therefore
depend only on ``(s, i)``, never on the worker count or scheduling.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from . import dc
from .device import LatchConfig
from .errors import CensoringError, DomainError, NumericalError, PreconditionError

log = logging.getLogger(__name__)

_FIRST_CHUNK = 1 << 12
_MAX_CHUNK = 1 << 18


@dataclass(frozen=True)
class NoiseRunConfig:
    fmax: float = 1e9
    t_max: float = 0.02
    n_experiments: int = 100
    seed: int = 0
    record_trajectory: bool = False
    decimation: int = 100
    substeps: int = 1
    psd_scale: float = 1.0
    max_censored_fraction: float = 0.10

    def __post_init__(self):
        if not self.fmax > 0:
            raise DomainError("fmax must be positive")
        if not self.t_max > 0:
            raise DomainError("t_max must be positive")
        if self.n_experiments < 1:
            raise DomainError("n_experiments must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be an unsigned 64-bit integer")
        if self.substeps < 1 or self.decimation < 1:
            raise DomainError("substeps and decimation must be >= 1")
        if self.psd_scale < 0:
            raise DomainError("psd_scale must be non-negative")

    @property
    def dt(self) -> float:
        return 1.0 / (2.0 * self.fmax)

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.t_max / self.dt - 1e-9))


def stream_seed(seed: int, index: int) -> int:
    """64-bit seed of experiment ``index`` derived from the master ``seed``."""
    ss = np.random.SeedSequence(seed, spawn_key=(index,))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class Trajectory:
    """Decimated time series of the state (t, vout2, vout1)."""

    t: np.ndarray
    vout2: np.ndarray
    vout1: np.ndarray

    def __len__(self):
        return len(self.t)


@dataclass
class ExperimentResult:
    index: int
    seed: int
    ttf: float | None
    t_xm: float | None
    t_ym: float | None
    final_state: tuple
    trajectory: Trajectory | None = None

    @property
    def censored(self) -> bool:
        return self.ttf is None


def _thresholds(latch: LatchConfig):
    try:
        eq = dc.equilibria(latch)
    except PreconditionError:
        return math.inf, -math.inf
    return eq.XM, eq.YM


def transient(
    latch: LatchConfig,
    cfg: NoiseRunConfig,
    experiment_index: int = 0,
    thresholds=None,
    run_after_flip: float = 0.0,
) -> ExperimentResult:
    """Run one retention experiment until the bit flips or ``t_max`` elapses.

    Args:
        thresholds: ``(XM, YM)`` for the threshold diagnostic; computed from
            the equilibria when omitted (infinite for defective cells).
        run_after_flip: keep integrating this long past the TTF, so that the
            recorded trajectory shows the full transition.
    """
    if thresholds is None:
        thresholds = _thresholds(latch)
    xm, ym = thresholds
    seed = stream_seed(cfg.seed, experiment_index)
    rng = np.random.Generator(np.random.PCG64(seed))
    p = K.pack_params(latch, cfg.fmax, cfg.psd_scale)
    dt = cfg.dt
    state = np.array([0.0, latch.vdd, -1.0, -1.0, -1.0])
    decim = cfg.decimation if cfg.record_trajectory else 0
    parts = [np.array([[0.0, 0.0, latch.vdd]])]
    n_total = cfg.n_steps
    done = 0
    chunk = _FIRST_CHUNK
    stop_at = n_total
    while done < stop_at:
        m = min(chunk, stop_at - done)
        xi = rng.standard_normal((m, 2))
        rec = np.empty((m // decim + 1 if decim else 0, 3))
        stop_on_flip = run_after_flip <= 0.0
        status, steps, nrec = K.latch_chunk(
            state, done, p, xi, dt, cfg.substeps, xm, ym, stop_on_flip, rec, decim
        )
        if nrec:
            parts.append(rec[:nrec].copy())
        done += steps
        if status == K.BLOWUP:
            raise NumericalError(
                "integration blow-up: node voltage left [-vdd/2, 3 vdd/2]",
                {"experiment": experiment_index, "t": done * dt, "state": state[:2].tolist()},
            )
        if status == K.FLIPPED:
            break
        if state[K.S_TTF] >= 0.0 and run_after_flip > 0.0:
            stop_at = min(n_total, int(math.ceil((state[K.S_TTF] + run_after_flip) / dt)))
        chunk = min(2 * chunk, _MAX_CHUNK)
    if cfg.record_trajectory and (done % decim or len(parts) == 1):
        parts.append(np.array([[done * dt, state[0], state[1]]]))
    traj = None
    if cfg.record_trajectory:
        arr = np.concatenate(parts)
        traj = Trajectory(arr[:, 0], arr[:, 1], arr[:, 2])

    def _opt(v):
        return None if v < 0.0 else float(v)

    return ExperimentResult(
        experiment_index,
        seed,
        _opt(state[K.S_TTF]),
        _opt(state[K.S_TXM]),
        _opt(state[K.S_TYM]),
        (float(state[0]), float(state[1])),
        traj,
    )


def detect_ttf(traj: Trajectory) -> float | None:
    """First time vout2 >= vout1, linearly interpolated between samples."""
    if len(traj) < 2:
        raise DomainError("trajectory needs at least two samples")
    gap = traj.vout2 - traj.vout1
    hit = np.nonzero(gap >= 0.0)[0]
    if not len(hit):
        return None
    k = int(hit[0])
    if k == 0:
        return float(traj.t[0])
    g0, g1 = gap[k - 1], gap[k]
    return float(traj.t[k - 1] + (traj.t[k] - traj.t[k - 1]) * (-g0) / (g1 - g0))


def _first_crossing(t, v, level, upward):
    hit = np.nonzero(v >= level if upward else v <= level)[0]
    if not len(hit):
        return None
    k = int(hit[0])
    if k == 0:
        return float(t[0])
    return float(t[k - 1] + (t[k] - t[k - 1]) * (level - v[k - 1]) / (v[k] - v[k - 1]))


def threshold_diagnostic(traj: Trajectory, eq: dc.EquilibriumSet):
    """(t_XM, t_YM): first times vout2 >= XM and vout1 <= YM."""
    return (
        _first_crossing(traj.t, traj.vout2, eq.XM, True),
        _first_crossing(traj.t, traj.vout1, eq.YM, False),
    )


@dataclass
class TtfBatch:
    """Outcome of every experiment of a run, in experiment order."""

    experiments: list = field(default_factory=list)

    @property
    def ttf_samples(self) -> list:
        return [e.ttf for e in self.experiments if not e.censored]

    @property
    def censored_count(self) -> int:
        return sum(e.censored for e in self.experiments)

    @property
    def seeds(self) -> list:
        return [e.seed for e in self.experiments]


@dataclass(frozen=True)
class MttfEstimate:
    mean: float
    std_error: float
    n_effective: int
    censored_count: int


def summarize(batch: TtfBatch) -> MttfEstimate:
    s = np.array(batch.ttf_samples, dtype=float)
    if not len(s):
        return MttfEstimate(math.nan, math.nan, 0, batch.censored_count)
    se = float(np.std(s, ddof=1) / math.sqrt(len(s))) if len(s) > 1 else math.nan
    return MttfEstimate(float(np.mean(s)), se, len(s), batch.censored_count)


def run_batch(latch: LatchConfig, cfg: NoiseRunConfig, threads: int = 1) -> TtfBatch:
    """All experiments of a run; order and values independent of ``threads``."""
    thresholds = _thresholds(latch)

    def one(i):
        return transient(latch, cfg, i, thresholds)

    indices = range(cfg.n_experiments)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, indices))
    else:
        results = [one(i) for i in indices]
    return TtfBatch(results)


def mttf_estimate(latch: LatchConfig, cfg: NoiseRunConfig, threads: int = 1):
    """Mean time to failure over ``cfg.n_experiments`` experiments.

    Returns ``(MttfEstimate, TtfBatch)``. Raises :class:`CensoringError`
    (with the batch attached as ``.batch``) when more than
    ``cfg.max_censored_fraction`` of the experiments never flip.
    """
    batch = run_batch(latch, cfg, threads)
    frac = batch.censored_count / cfg.n_experiments
    if frac > cfg.max_censored_fraction:
        err = CensoringError(frac, cfg.max_censored_fraction)
        err.batch = batch
        raise err
    est = summarize(batch)
    log.info(
        "dV1=%.4g dV2=%.4g: MTTF %.4g s +- %.2g (%d flips, %d censored)",
        latch.dv1, latch.dv2, est.mean, est.std_error, est.n_effective, est.censored_count,
    )
    return est, batch
