import math

import numpy as np
import pytest

from sramflip import variability as V
from sramflip.errors import DomainError


@pytest.fixture(scope="module")
def coarse(nominal):
    spec = V.SweepSpec(-0.1, 0.1, 0.01)
    return spec, V.sweep(nominal, spec)


def test_axis():
    ax = V.SweepSpec(-0.25, 0.25, 1e-3).axis()
    assert len(ax) == 501 and ax[0] == -0.25 and ax[-1] == 0.25 and ax[250] == 0.0
    with pytest.raises(DomainError):
        V.SweepSpec(0.1, 0.0, 1e-3)
    with pytest.raises(DomainError):
        V.SweepSpec(0.0, 0.1, 0.0)


def test_classify_cases(nominal):
    c = V.classify_cell(nominal, 0.0, 0.0)
    assert c.classification == V.FUNCTIONAL and c.snm == pytest.approx(0.061, abs=0.006)
    assert V.classify_cell(nominal, 0.055, -0.055).classification == V.MARGINAL
    d = V.classify_cell(nominal, 0.065, -0.065)
    assert d.classification == V.DEFECTIVE and d.snm is None


def test_map_reflection_symmetry(coarse):
    _, grid = coarse
    n = len(grid)
    for i in range(n):
        for j in range(n):
            a, b = grid[i][j], grid[j][i]
            assert a.classification == b.classification
            if a.snm is not None:
                assert a.snm == pytest.approx(b.snm, abs=1e-9)


def test_crown_topology(coarse):
    """Along every ray from the origin the classes run green, orange, red, never back."""
    _, grid = coarse
    rank = {V.FUNCTIONAL: 0, V.MARGINAL: 1, V.DEFECTIVE: 2}
    n = len(grid)
    c = n // 2
    for di, dj in ((1, 0), (0, 1), (1, 1), (1, -1), (-1, 1), (-1, -1), (-1, 0), (0, -1)):
        seq = [rank[grid[c + k * di][c + k * dj].classification] for k in range(c + 1)]
        assert seq == sorted(seq)
    assert grid[c][c].classification == V.FUNCTIONAL
    # the worst-case corners fail, the matched diagonal survives longer
    assert grid[-1][0].classification == V.DEFECTIVE
    assert grid[c + 5][c + 5].classification != V.DEFECTIVE


def test_defective_cells_have_no_positive_snm(coarse):
    _, grid = coarse
    for row in grid:
        for cell in row:
            if cell.classification == V.DEFECTIVE:
                assert cell.snm is None or cell.snm <= 0


def test_refinement_keeps_classes(nominal, coarse):
    """Halving the step only changes classes within one step of a boundary."""
    spec, grid = coarse
    fine_spec = V.SweepSpec(-0.1, 0.1, 0.005)
    fine = V.sweep(nominal, fine_spec)
    for i, row in enumerate(grid):
        for j, cell in enumerate(row):
            f = fine[2 * i][2 * j]
            assert (f.dV1, f.dV2) == (cell.dV1, cell.dV2)
            assert f.classification == cell.classification


def test_worker_count_does_not_matter(nominal):
    spec = V.SweepSpec(0.0, 0.06, 0.02)
    assert V.sweep(nominal, spec, workers=1) == V.sweep(nominal, spec, workers=2)


def test_worst_case_line(nominal, coarse):
    _, grid = coarse
    line = V.worst_case_line(grid)
    assert [c.dV1 for c in line.cells] == sorted(c.dV1 for c in line.cells)
    assert line.last_working == pytest.approx(0.06) and line.first_defective == pytest.approx(0.07)
    b = V.refine_boundary(nominal, 0.055, 0.065, tol=1e-6)
    assert 0.055 <= b <= 0.065
    assert V.worst_case_line([]).cells == []


def test_snm_strictly_decreasing_on_line(nominal):
    prev = math.inf
    for dv in np.arange(0.0, 0.0605, 0.0005):
        c = V.classify_cell(nominal, dv, -dv)
        assert c.classification != V.DEFECTIVE
        assert c.snm < prev
        prev = c.snm


def test_equiprob_radius():
    assert V.equiprob_radius(2.0, math.exp(-0.5)) == pytest.approx(2.0, rel=1e-14)
    assert V.equiprob_radius(1.0, 1e-5) == pytest.approx(4.7985, rel=1e-4)
    assert V.equiprob_radius(1.0, 1 - 1e-12) < 1e-5
    with pytest.raises(DomainError):
        V.equiprob_radius(1.0, 1.0)
    # Monte-Carlo check of the Rayleigh tail
    rng = np.random.default_rng(7)
    r = V.equiprob_radius(1.0, 0.01)
    z = rng.standard_normal((400_000, 2))
    frac = np.mean(np.hypot(z[:, 0], z[:, 1]) > r)
    assert frac == pytest.approx(0.01, abs=4 * math.sqrt(0.01 * 0.99 / 400_000))


def test_grid_arrays(coarse):
    _, grid = coarse
    dv1, dv2, code, snm = V.grid_arrays(grid)
    assert dv1.shape == code.shape == (21, 21)
    assert set(np.unique(code)) <= {0, 1, 2}
    assert np.all(np.isnan(snm[code == 2]))
