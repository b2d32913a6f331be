import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypsig.config import ConfigError, ExperimentConfig, from_json, parse_config, read_file


def _write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_empty_file_needs_mode(tmp_path):
    with pytest.raises(ConfigError) as exc:
        parse_config(_write(tmp_path, ""))
    assert exc.value.key == "mode"


def test_negative_beta(tmp_path):
    with pytest.raises(ConfigError) as exc:
        parse_config(_write(tmp_path, "[experiment]\nmode = Simulate\n[model]\nbeta = -1\n"))
    assert exc.value.key == "beta" and "beta > 0" in str(exc.value)


def test_ini_sections(tmp_path):
    text = """
# comment
[experiment]
mode = ward_check
[model]
N = 3
dims = 8x8
beta = 0.7
gauge_fix = external-field
epsilon = 0.25
[run]
kernel = Metropolis
sweeps = 500
therm = auto
symmetry_moves = yes
ward_probes = n0, two_point
[output]
out = results/w
"""
    cfg = parse_config(_write(tmp_path, text))
    assert cfg.mode == "WardCheck" and cfg.N == 3 and cfg.dims == [8, 8] and cfg.beta == 0.7
    assert cfg.gauge_fix == "external_field" and cfg.epsilon == 0.25 and cfg.kernel == "metropolis"
    assert cfg.therm is None and cfg.symmetry_moves is True and cfg.ward_probes == ["n0", "two_point"]
    assert cfg.lattice_spec().epsilon == 0.25


def test_keys_before_header_and_json(tmp_path):
    cfg = parse_config(_write(tmp_path, "mode = Spectrum\n[model]\nN = 4\n"))
    assert cfg.mode == "Spectrum" and cfg.N == 4
    cfg = parse_config(_write(tmp_path, json.dumps({"mode": "ChainExact", "alpha": [0, 1], "L": [2, 4]}), "c.json"))
    assert cfg.alpha == [0.0, 1.0] and cfg.L == [2, 4]


def test_flags_override_file(tmp_path):
    p = _write(tmp_path, "[experiment]\nmode = Simulate\n[run]\nsweeps = 10\nseed = 4\n")
    cfg = parse_config(p, {"sweeps": 99, "dims": "4,4,4", "measure-every": 3})
    assert cfg.sweeps == 99 and cfg.seed == 4 and cfg.dims == [4, 4, 4] and cfg.measure_every == 3
    assert ExperimentConfig().sweeps == 10000


@pytest.mark.parametrize("text,key", [
    ("mode = Simulate\nfoo = 1\n", "foo"),
    ("[experiment]\nmode = Simulate\n[run]\nbeta = 1\n", "beta"),
    ("[experiment]\nmode = Simulate\n[extra]\nx = 1\n", "extra"),
    ("mode = Dance\n", "mode"),
    ("[experiment]\nmode = Simulate\n[model]\nN = 9\n", "N"),
    ("[experiment]\nmode = ChainExact\n[model]\nN = 3\n", "N"),
    ("[experiment]\nmode = Simulate\n[model]\nbeta = 0.01\n", "beta"),
    ("[experiment]\nmode = Simulate\n[model]\ngauge_fix = periodic\n", "gauge_fix"),
    ("[experiment]\nmode = Simulate\n[model]\ngauge_fix = external_field\n", "epsilon"),
    ("[experiment]\nmode = Simulate\n[model]\ndims = 4,4,4,4\n", "dims"),
    ("[experiment]\nmode = Simulate\n[run]\nkernel = gibbs\n", "kernel"),
    ("[experiment]\nmode = Simulate\n[run]\nsweeps = many\n", "sweeps"),
    ("[experiment]\nmode = Simulate\n[run]\nsweeps = -5\n", "sweeps"),
    ("[experiment]\nmode = Simulate\n[run]\nmeasure_every = 0\n", "measure_every"),
    ("[experiment]\nmode = Simulate\n[run]\nward_probes = n9\n", "ward_probes"),
    ("[experiment]\nmode = Simulate\n[run]\nparallel = maybe\n", "parallel"),
    ("[experiment]\nmode = CrossValidate\n[solver]\nL = 8, 16\n", "L"),
    ("[experiment]\nmode = ChainExact\n[solver]\nnodes = 2\n", "nodes"),
    ("[experiment]\nmode = ChainExact\n[solver]\nrho_max = -3\n", "rho_max"),
])
def test_rejections(tmp_path, text, key):
    with pytest.raises(ConfigError) as exc:
        parse_config(_write(tmp_path, text))
    assert exc.value.key == key


def test_unreadable_or_malformed(tmp_path):
    with pytest.raises(ConfigError):
        read_file(tmp_path / "missing.ini")
    with pytest.raises(ConfigError):
        read_file(_write(tmp_path, "{not json", "x.json"))
    with pytest.raises(ConfigError):
        read_file(_write(tmp_path, "[experiment\nmode = x"))


finite = st.floats(0.05, 50.0, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(
    st.sampled_from(["Simulate", "ChainExact", "Spectrum", "WardCheck", "CrossValidate"]),
    finite,
    st.lists(st.floats(-3, 3, allow_nan=False), min_size=1, max_size=4),
    st.integers(0, 2**64 - 1),
    st.booleans(),
    st.one_of(st.none(), st.integers(0, 10**6)),
)
def test_json_round_trip(mode, beta, alpha, seed, sym, therm):
    flags = {"mode": mode, "beta": beta, "alpha": alpha, "seed": seed, "symmetry_moves": sym, "therm": therm}
    if mode == "CrossValidate":
        flags["L"] = [8]
    cfg = parse_config(None, flags)
    again = from_json(cfg.to_json())
    assert again == cfg and again.config_hash() == cfg.config_hash()


def test_hash_changes_with_content():
    a = parse_config(None, {"mode": "Spectrum"})
    b = parse_config(None, {"mode": "Spectrum", "N": 3})
    assert a.config_hash() != b.config_hash() and len(a.config_hash()) == 64
