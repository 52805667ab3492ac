"""Run configuration: TOML schema for the latch, the sweep and the noise runs.

Schema (SI units; every key optional, defaults from ``data/default.toml``)::

    [latch]
    vdd, temperature, C1, C2, access_noise, dv1, dv2
    [latch.nmos]            # I0, Vth, n, UT (UT defaults to kT/q)
    [latch.pmos]            # Vth is signed, negative for p-type
    [latch.inv1.nmos] ...   # optional per-inverter overrides of the cards
    [sweep]
    range_min, range_max, step, snm_marginal_threshold
    [noise]
    fmax, t_max, n_experiments, seed, decimation, substeps, psd_scale,
    max_censored_fraction

A ``manifest.json`` written by the CLI is also accepted: its ``config``
member holds the fully resolved snapshot in the same layout.
"""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, fields
from importlib import resources
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .device import InverterParams, LatchConfig, MosParams, thermal_voltage
from .errors import ConfigError, SramFlipError
from .noise import NoiseRunConfig
from .variability import SweepSpec

_LATCH_KEYS = {"vdd", "temperature", "C1", "C2", "access_noise", "dv1", "dv2", "nmos", "pmos", "inv1", "inv2"}
_MOS_KEYS = {"I0", "Vth", "n", "UT"}
_SWEEP_KEYS = {f.name for f in fields(SweepSpec)}
_NOISE_KEYS = {f.name for f in fields(NoiseRunConfig)} - {"record_trajectory"}


@dataclass(frozen=True)
class RunConfig:
    latch: LatchConfig
    sweep: SweepSpec
    noise: NoiseRunConfig

    def snapshot(self) -> dict:
        """Fully resolved configuration, loadable again by :func:`from_dict`."""
        lt = self.latch

        def card(p: MosParams):
            return {"I0": p.I0, "Vth": p.Vth, "n": p.n, "UT": p.UT}

        latch = {
            "vdd": lt.vdd,
            "temperature": lt.temperature,
            "C1": lt.C1,
            "C2": lt.C2,
            "access_noise": lt.access_noise,
            "dv1": lt.dv1,
            "dv2": lt.dv2,
            "inv1": {"nmos": card(lt.inv1.nmos), "pmos": card(lt.inv1.pmos)},
            "inv2": {"nmos": card(lt.inv2.nmos), "pmos": card(lt.inv2.pmos)},
        }
        noise = asdict(self.noise)
        noise.pop("record_trajectory")
        return {"latch": latch, "sweep": asdict(self.sweep), "noise": noise}


def _default_doc() -> dict:
    text = resources.files("sramflip").joinpath("data/default.toml").read_text()
    return tomllib.loads(text)


def _check_keys(table: dict, allowed: set, where: str):
    if not isinstance(table, dict):
        raise ConfigError(f"[{where}] must be a table")
    unknown = sorted(set(table) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(unknown)}")


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _mos(polarity, card: dict, ut_default: float, where: str) -> MosParams:
    _check_keys(card, _MOS_KEYS, where)
    try:
        return MosParams(polarity, float(card["I0"]), float(card["Vth"]), float(card["n"]), float(card.get("UT", ut_default)))
    except KeyError as exc:
        raise ConfigError(f"missing key {exc} in [{where}]") from None


def from_dict(doc: dict) -> RunConfig:
    """Build a :class:`RunConfig` from a parsed document layered over the defaults."""
    _check_keys(doc, {"latch", "sweep", "noise"}, "top level")
    for name, allowed in (("latch", _LATCH_KEYS), ("sweep", _SWEEP_KEYS), ("noise", _NOISE_KEYS)):
        _check_keys(doc.get(name, {}), allowed, name)
    user_latch = doc.get("latch", {})
    merged = _merge(_default_doc(), doc)
    lt = merged["latch"]
    try:
        temperature = float(lt["temperature"])
        ut = thermal_voltage(temperature)
        invs = []
        for name, dv in (("inv1", lt["dv1"]), ("inv2", lt["dv2"])):
            over = user_latch.get(name, {})
            _check_keys(over, {"nmos", "pmos"}, f"latch.{name}")
            nmos = _merge(lt["nmos"], over.get("nmos", {}))
            pmos = _merge(lt["pmos"], over.get("pmos", {}))
            invs.append(
                InverterParams(
                    _mos("n", nmos, ut, f"latch.{name}.nmos"),
                    _mos("p", pmos, ut, f"latch.{name}.pmos"),
                    float(dv),
                )
            )
        latch = LatchConfig(
            vdd=float(lt["vdd"]),
            inv1=invs[0],
            inv2=invs[1],
            C1=float(lt["C1"]),
            C2=float(lt["C2"]),
            temperature=temperature,
            access_noise=float(lt["access_noise"]),
        )
        sweep = SweepSpec(**{k: float(v) for k, v in merged["sweep"].items()})
        nz = dict(merged["noise"])
        for k in ("n_experiments", "seed", "decimation", "substeps"):
            if k in nz:
                nz[k] = int(nz[k])
        noise = NoiseRunConfig(**nz)
    except ConfigError:
        raise
    except (SramFlipError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
    return RunConfig(latch, sweep, noise)


def loads(text: str, source: str = "<string>") -> RunConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        # the decoder message carries "(at line L, column C)"
        raise ConfigError(f"{source}: {exc}") from exc
    return from_dict(doc)


def load(path: str | Path | None = None) -> RunConfig:
    """Read a TOML config (or a run manifest); ``None`` gives the defaults."""
    if path is None:
        return from_dict({})
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    if path.suffix == ".json":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return from_dict(doc.get("config", doc))
    return loads(text, str(path))
