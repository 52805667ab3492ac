import json

import pytest

from sramflip import config
from sramflip.device import default_latch
from sramflip.errors import ConfigError


def test_defaults_match_calibrated_latch():
    cfg = config.load(None)
    assert cfg.latch == default_latch()
    assert cfg.sweep.step == 1e-3 and cfg.sweep.range_min == -0.25
    assert cfg.noise.fmax == 1e9 and cfg.noise.n_experiments == 100


def test_overrides_and_per_inverter_cards():
    cfg = config.loads(
        """
        [latch]
        vdd = 0.25
        dv1 = 0.01
        [latch.nmos]
        n = 2.0
        [latch.inv2.pmos]
        I0 = 5e-9
        [noise]
        seed = 42
        """
    )
    assert cfg.latch.vdd == 0.25 and cfg.latch.dv1 == 0.01
    assert cfg.latch.inv1.nmos.n == 2.0 and cfg.latch.inv2.nmos.n == 2.0
    assert cfg.latch.inv1.pmos.I0 == 25e-9 and cfg.latch.inv2.pmos.I0 == 5e-9
    assert cfg.noise.seed == 42


def test_parse_error_reports_line():
    with pytest.raises(ConfigError, match="line 3"):
        config.loads("[latch]\nvdd = 0.2\nC1 = = 3\n", "bad.toml")


@pytest.mark.parametrize(
    "text",
    [
        "[latch]\nvddd = 0.2\n",
        "[bogus]\n",
        "[latch.nmos]\nI0 = -1.0\n",
        "[noise]\nfmax = 0\n",
        "[sweep]\nstep = 0\n",
        "[latch]\nvdd = 'x'\n",
    ],
)
def test_invalid_configs(text):
    with pytest.raises(ConfigError):
        config.loads(text)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        config.load(tmp_path / "nope.toml")


def test_snapshot_round_trip(tmp_path):
    cfg = config.loads("[latch]\ndv1 = 0.03\ndv2 = -0.02\n[latch.inv1.nmos]\nVth = 0.41\n[noise]\nseed = 7\n")
    snap = cfg.snapshot()
    assert config.from_dict(snap) == cfg
    p = tmp_path / "manifest.json"
    p.write_text(json.dumps({"config": snap}))
    assert config.load(p) == cfg
