"""Result persistence: CSV tables, JSON sidecars, SVG figures and the run manifest.

Numbers are written with ``repr`` so a CSV round-trips to the exact
doubles. Figures are drawn from the same in-memory data after the CSV is
written and never feed back into it. SVGs carry no date and use a fixed
hash salt, so identical data give identical files.
"""

from __future__ import annotations

import csv
import json
import math
import platform
import sys
from datetime import datetime, timezone
from pathlib import Path

import matplotlib
import numpy as np
from matplotlib.colors import ListedColormap
from matplotlib.figure import Figure
from matplotlib.patches import Rectangle

from . import __version__
from .errors import DomainError

_SVG_RC = {"svg.hashsalt": "sramflip", "svg.fonttype": "path"}


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return repr(float(v))


def write_csv(path: Path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])
    return path


def read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (float, np.floating)):
        f = float(o)
        # JSON has no inf/nan
        return f if math.isfinite(f) else repr(f)
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    return o


def write_json(path: Path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path


def _save_svg(fig: Figure, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context(_SVG_RC):
        fig.savefig(path, format="svg", metadata={"Date": None})
    return path


# --- butterfly --------------------------------------------------------------


def butterfly_rows(b):
    c1, c2 = b.curve1, b.curve2
    if len(c1.vin) != len(c2.vin):
        raise DomainError("curves must share the sweep grid")
    return zip(c1.vin, c1.vout, c2.vin, c2.vout)


def write_butterfly(out: Path, b, snm_res=None, squares=None, svg=True, stem="butterfly") -> list[Path]:
    out = Path(out)
    paths = [write_csv(out / f"{stem}.csv", ["vin1_V", "vout1_V", "vin2_V", "vout2_V"], butterfly_rows(b))]
    side = {
        "dV1_V": b.latch.dv1,
        "dV2_V": b.latch.dv2,
        "classification": b.classification,
        "crossings": [{"vout2_V": x, "vout1_V": y} for x, y in b.crossings],
        "snm_V": None if snm_res is None else snm_res.snm,
    }
    if snm_res is not None:
        side["lobes"] = {
            name: {"side_V": s, "lower_left_V": None if squares is None else list(squares[i][:2])}
            for i, (name, s) in enumerate(zip(("state0", "state1"), snm_res.lobe_squares))
        }
        side["limiting_lobe"] = snm_res.side
    paths.append(write_json(out / f"{stem}.json", side))
    if svg:
        paths.append(_save_svg(butterfly_figure(b, squares), out / f"{stem}.svg"))
    return paths


def butterfly_figure(b, squares=None) -> Figure:
    fig = Figure(figsize=(4.5, 4.5))
    ax = fig.add_subplot()
    r = b.curve2_reflected
    ax.plot(b.curve1.vin * 1e3, b.curve1.vout * 1e3, color="C0", label="inverter 1")
    ax.plot(r.vin * 1e3, r.vout * 1e3, color="C1", label="inverter 2 (mirrored)")
    for x, y in b.crossings:
        ax.plot(x * 1e3, y * 1e3, "ko", ms=4)
    for x, y, s in squares or ():
        if s > 0:
            ax.add_patch(Rectangle((x * 1e3, y * 1e3), s * 1e3, s * 1e3, fill=False, ls="--", color="0.3"))
    vdd = b.latch.vdd * 1e3
    ax.set_xlim(0, vdd)
    ax.set_ylim(0, vdd)
    ax.set_aspect("equal")
    ax.set_xlabel("vin1 = vout2 [mV]")
    ax.set_ylabel("vout1 = vin2 [mV]")
    ax.set_title(f"dV1 = {b.latch.dv1 * 1e3:g} mV, dV2 = {b.latch.dv2 * 1e3:g} mV")
    ax.legend(loc="upper right", fontsize="small")
    fig.tight_layout()
    return fig


# --- variability map --------------------------------------------------------


def write_sweep(out: Path, grid, svg=True, stem="sweep") -> list[Path]:
    out = Path(out)
    rows = (
        (c.dV1 * 1e3, c.dV2 * 1e3, c.classification, None if c.snm is None else c.snm * 1e3)
        for row in grid
        for c in row
    )
    paths = [write_csv(out / f"{stem}.csv", ["dV1_mV", "dV2_mV", "class", "snm_mV"], rows)]
    if svg:
        paths.append(_save_svg(sweep_figure(grid), out / f"{stem}.svg"))
    return paths


def sweep_figure(grid) -> Figure:
    from .variability import grid_arrays

    dv1, dv2, code, _ = grid_arrays(grid)
    fig = Figure(figsize=(5, 4.5))
    ax = fig.add_subplot()
    cmap = ListedColormap(["#2ca02c", "#ff7f0e", "#d62728"])
    ax.pcolormesh(dv1 * 1e3, dv2 * 1e3, code, cmap=cmap, vmin=-0.5, vmax=2.5, shading="nearest")
    lim = max(abs(dv1).max(), abs(dv2).max()) * 1e3
    ax.plot([-lim, lim], [lim, -lim], "k--", lw=0.8)
    ax.set_xlabel("dV1 [mV]")
    ax.set_ylabel("dV2 [mV]")
    ax.set_aspect("equal")
    ax.set_title("green: functional, orange: marginal, red: defective", fontsize="small")
    fig.tight_layout()
    return fig


# --- noise runs -------------------------------------------------------------


def write_trajectory(path: Path, traj) -> Path:
    return write_csv(path, ["t_s", "vout2_V", "vout1_V"], zip(traj.t, traj.vout2, traj.vout1))


def write_ttf_batch(path: Path, batch) -> Path:
    rows = ((e.index, e.seed, e.ttf, e.censored) for e in batch.experiments)
    return write_csv(path, ["experiment", "seed", "ttf_s", "censored"], rows)


MTTF_HEADER = ["dv_mV", "mttf_s", "stderr_s", "n_flips", "n_censored", "seed"]


def write_mttf(path: Path, rows) -> Path:
    """``rows``: iterables of (dv_V, MttfEstimate, master seed)."""
    out = []
    for dv, est, seed in rows:
        se = None if not math.isfinite(est.std_error) else est.std_error
        out.append((dv * 1e3, est.mean, se, est.n_effective, est.censored_count, seed))
    return write_csv(path, MTTF_HEADER, out)


def read_mttf(path: Path) -> list[dict]:
    rows = read_csv(path)
    if not rows or "dv_mV" not in rows[0] or "mttf_s" not in rows[0]:
        raise DomainError(f"{path} is not an MTTF table")
    return [
        {
            "dv_mV": float(r["dv_mV"]),
            "mttf_s": float(r["mttf_s"]),
            "stderr_s": float(r["stderr_s"]) if r.get("stderr_s") else math.nan,
        }
        for r in rows
    ]


COMPARE_HEADER = ["dv_mV", "mttf_sim_s", "stderr_s", "mttf_kish_s", "mttf_nobile_s"]


def join_compare(sim_rows, predictions, tol_mV=1e-9):
    """Join simulated MTTFs with predictor bundles on dv; lists must match exactly.

    ``sim_rows`` are dicts from :func:`read_mttf`; ``predictions`` maps
    ``dv_mV`` to a PredictorBundle.
    """
    if not sim_rows or not predictions:
        raise DomainError("nothing to compare")
    sim_dv = sorted(r["dv_mV"] for r in sim_rows)
    pred_dv = sorted(predictions)
    if len(sim_dv) != len(pred_dv) or any(abs(a - b) > tol_mV for a, b in zip(sim_dv, pred_dv)):
        raise DomainError(f"dv lists differ: simulated {sim_dv} vs predicted {pred_dv}")
    out = []
    for r, dv in zip(sorted(sim_rows, key=lambda r: r["dv_mV"]), pred_dv):
        p = predictions[dv]
        out.append((dv, r["mttf_s"], r["stderr_s"], p.mttf_kish, p.mttf_nobile))
    return out


def write_compare(out: Path, rows, svg=True, stem="compare") -> list[Path]:
    out = Path(out)
    clean = [tuple(None if isinstance(v, float) and math.isnan(v) else v for v in r) for r in rows]
    paths = [write_csv(out / f"{stem}.csv", COMPARE_HEADER, clean)]
    if svg:
        paths.append(_save_svg(compare_figure(rows), out / f"{stem}.svg"))
    return paths


def compare_figure(rows) -> Figure:
    a = np.array([[float(v) for v in r] for r in rows])
    fig = Figure(figsize=(5, 4))
    ax = fig.add_subplot()
    se = np.nan_to_num(a[:, 2])
    ax.errorbar(a[:, 0], a[:, 1], yerr=se, fmt="o-", color="C0", label="simulation")
    ax.plot(a[:, 0], a[:, 3], "s--", color="C3", label="Kish")
    ax.plot(a[:, 0], a[:, 4], "^--", color="C2", label="Nobile")
    ax.set_yscale("log")
    ax.set_xlabel("dV1 = -dV2 [mV]")
    ax.set_ylabel("MTTF [s]")
    ax.legend(fontsize="small")
    fig.tight_layout()
    return fig


# --- manifest ---------------------------------------------------------------


def write_manifest(out: Path, command: list[str], config_snapshot: dict, seeds, outputs, started: datetime) -> Path:
    """Everything needed to regenerate the outputs: rerun ``command`` with
    ``--config manifest.json``; the seeds are derived from the master seed."""
    out = Path(out)
    finished = datetime.now(timezone.utc)
    doc = {
        "command": list(command),
        "config": config_snapshot,
        "seeds": seeds,
        "version": __version__,
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "platform": platform.platform(),
        "started": started.isoformat(),
        "finished": finished.isoformat(),
        "outputs": sorted(str(Path(p).relative_to(out)) if Path(p).is_relative_to(out) else str(p) for p in outputs),
    }
    return write_json(out / "manifest.json", doc)
