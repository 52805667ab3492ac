"""Double DC sweep over the variability plane (dV1, dV2)."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import dc
from .device import LatchConfig
from .errors import DomainError, SramFlipError

log = logging.getLogger(__name__)

FUNCTIONAL = "functional"
MARGINAL = "marginal"
DEFECTIVE = "defective"


@dataclass(frozen=True)
class SweepSpec:
    range_min: float = -0.25
    range_max: float = 0.25
    step: float = 1e-3
    snm_marginal_threshold: float = 10e-3

    def __post_init__(self):
        if not self.step > 0:
            raise DomainError("sweep step must be positive")
        if not self.range_min < self.range_max:
            raise DomainError("sweep range is empty")

    def axis(self) -> np.ndarray:
        m = int(math.floor((self.range_max - self.range_min) / self.step + 1e-9))
        # round to the grid so that dV1 = -dV2 matches exactly
        return np.round(self.range_min + self.step * np.arange(m + 1), 12)


@dataclass(frozen=True)
class CellRecord:
    dV1: float
    dV2: float
    classification: str
    snm: float | None = None
    diagnostic: str | None = None


def classify_cell(latch_template: LatchConfig, dv1: float, dv2: float, threshold: float = 10e-3) -> CellRecord:
    latch = latch_template.with_variability(dv1, dv2)
    try:
        crossings = dc.find_crossings(latch)
        if dc.classify_crossings(crossings) != FUNCTIONAL:
            return CellRecord(dv1, dv2, DEFECTIVE)
        b = dc.ButterflyData(latch, None, None, crossings, FUNCTIONAL)
        s = dc.snm(b).snm
    except (SramFlipError, ArithmeticError, ValueError) as exc:
        return CellRecord(dv1, dv2, DEFECTIVE, None, f"{type(exc).__name__}: {exc}")
    if s <= 0.0:
        return CellRecord(dv1, dv2, DEFECTIVE, s)
    cls = MARGINAL if s <= threshold else FUNCTIONAL
    return CellRecord(dv1, dv2, cls, s)


def _row(args):
    latch, dv1, axis, threshold = args
    return [classify_cell(latch, dv1, float(dv2), threshold) for dv2 in axis]


def sweep(latch_template: LatchConfig, spec: SweepSpec, workers: int = 1) -> list[list[CellRecord]]:
    """Classify every grid cell; ``grid[i][j]`` has dV1 = axis[i], dV2 = axis[j].

    Rows are independent; with ``workers > 1`` they are spread over a
    process pool. The result does not depend on the worker count.
    """
    axis = spec.axis()
    tasks = [(latch_template, float(d1), axis, spec.snm_marginal_threshold) for d1 in axis]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            grid = list(pool.map(_row, tasks, chunksize=max(1, len(tasks) // (8 * workers))))
    else:
        grid = [_row(t) for t in tasks]
    n_diag = sum(c.diagnostic is not None for row in grid for c in row)
    if n_diag:
        log.warning("%d cells failed numerically and were marked defective", n_diag)
    return grid


@dataclass
class WorstCaseLine:
    """Cells on dV1 = -dV2 ordered by dV1, with the failure boundary bracket."""

    cells: list
    last_working: float | None
    first_defective: float | None

    @property
    def boundary(self) -> float | None:
        if self.last_working is None or self.first_defective is None:
            return None
        return 0.5 * (self.last_working + self.first_defective)


def worst_case_line(grid) -> WorstCaseLine:
    cells = sorted(
        (c for row in grid for c in row if math.isclose(c.dV1, -c.dV2, abs_tol=1e-12)),
        key=lambda c: c.dV1,
    )
    if not cells:
        return WorstCaseLine([], None, None)
    last_ok = first_bad = None
    for c in cells:
        if c.dV1 < 0:
            continue
        if c.classification == DEFECTIVE:
            first_bad = c.dV1
            break
        last_ok = c.dV1
    return WorstCaseLine(cells, last_ok, first_bad)


def refine_boundary(latch_template: LatchConfig, lo: float, hi: float, tol: float = 1e-6) -> float:
    """Bisect the functional/defective transition on dV1 = -dV2 between lo and hi."""

    def working(dv):
        return dc.classify_crossings(dc.find_crossings(latch_template.worst_case(dv))) == FUNCTIONAL

    if not working(lo) or working(hi):
        raise DomainError("boundary not bracketed by [lo, hi]")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if working(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def equiprob_radius(sigma: float, tail_prob: float) -> float:
    """Radius of the circle outside which an isotropic 2-D Gaussian has mass ``tail_prob``."""
    if not 0.0 < tail_prob < 1.0:
        raise DomainError("tail probability must lie in (0, 1)")
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    return sigma * math.sqrt(-2.0 * math.log(tail_prob))


def grid_arrays(grid):
    """(dv1, dv2, class code, snm) arrays; code 0 functional, 1 marginal, 2 defective."""
    codes = {FUNCTIONAL: 0, MARGINAL: 1, DEFECTIVE: 2}
    dv1 = np.array([[c.dV1 for c in row] for row in grid])
    dv2 = np.array([[c.dV2 for c in row] for row in grid])
    code = np.array([[codes[c.classification] for c in row] for row in grid])
    snm = np.array([[np.nan if c.snm is None else c.snm for c in row] for row in grid])
    return dv1, dv2, code, snm
