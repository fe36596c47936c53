from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semiquant.config import (CHECK_NAMES, DEFAULT_SEED, DEFAULT_TOLERANCES, ConfigError,
                              load_config, parse_config, parse_pgrid, parse_points)

CONFIGS = sorted((Path(__file__).parent.parent / "configs").glob("*.conf"))

MINIMAL = """\
[geometry]
factors = 1

[hamiltonian]
preset = rotation

[run]
p = 4, 8
"""


def test_example_configs_exist():
    assert len(CONFIGS) >= 10


@pytest.mark.parametrize("path", CONFIGS, ids=lambda p: p.stem)
def test_shipped_configs_parse_and_round_trip(path):
    cfg = load_config(path)
    again = parse_config(cfg.to_text())
    assert again == cfg
    assert again.to_text() == cfg.to_text()


def test_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.seed == DEFAULT_SEED
    assert cfg.p_grid == (4, 8)
    assert cfg.tolerance("spectrum") == DEFAULT_TOLERANCES["spectrum"]
    assert set(cfg.checks) <= set(CHECK_NAMES)


def test_round_trip_preserves_awkward_values():
    text = MINIMAL + """
[window]
center = 0.1
half_width = sqrt(2)
order = inf

[tolerances]
spectrum = 3.0000000000000004e-11
"""
    cfg = parse_config(text)
    assert cfg.get("window", "half_width") == np.sqrt(2)
    assert parse_config(cfg.to_text()) == cfg


@pytest.mark.parametrize("text,expected", [("10..14", (10, 11, 12, 13, 14)),
                                           ("100..400 step 100", (100, 200, 300, 400)),
                                           ("8, 16, 32", (8, 16, 32))])
def test_pgrid(text, expected):
    assert parse_pgrid(text) == expected


@pytest.mark.parametrize("bad", ["5..3", "1..4 step 0", "1.5, 2"])
def test_pgrid_rejects(bad):
    with pytest.raises(ValueError):
        parse_pgrid(bad)


def test_points():
    pts = parse_points("0.6:0.4/0.5:0; 0.2:1")
    assert len(pts) == 2 and len(pts[0][0]) == 2


@pytest.mark.parametrize("extra,line,field", [
    ("bogus = 1\n", 9, "run.bogus"),
    ("checks = rrh, nonsense\n", 9, "run.checks"),
    ("p = a..b\n", 9, "run.p"),
    ("[tolerances]\nspectrum = -1\n", 10, "tolerances.spectrum"),
    ("[tolerances]\nweyl = 0\n", 10, "tolerances.weyl"),
    ("[nowhere]\n", 9, "nowhere"),
])
def test_errors_carry_line_and_field(extra, line, field):
    with pytest.raises(ConfigError) as err:
        parse_config(MINIMAL + extra)
    assert err.value.line == line
    assert err.value.field == field
    assert f"line {line}" in str(err.value)


def test_semantic_errors():
    with pytest.raises(ConfigError, match="twists"):
        parse_config(MINIMAL.replace("factors = 1", "factors = 1\ntwists = 0, 0"))
    with pytest.raises(ConfigError, match="factor"):
        parse_config(MINIMAL.replace("rotation", "product:1,sqrt(2)"))
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config(MINIMAL + "p = 3\n")


finite = st.floats(min_value=1e-300, max_value=1e300, allow_nan=False, allow_infinity=False)


@settings(max_examples=60, deadline=None)
@given(tol=finite, center=st.floats(-5, 5), seed=st.integers(0, 2 ** 31),
       ps=st.lists(st.integers(1, 500), min_size=1, max_size=6, unique=True))
def test_round_trip_property(tol, center, seed, ps):
    text = (MINIMAL.replace("p = 4, 8", f"p = {', '.join(map(str, sorted(ps)))}\nseed = {seed}")
            + f"\n[window]\ncenter = {center!r}\n\n[tolerances]\nweyl = {tol!r}\n")
    cfg = parse_config(text)
    assert cfg.tolerance("weyl") == tol and cfg.seed == seed
    assert parse_config(cfg.to_text()) == cfg
