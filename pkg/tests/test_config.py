import json
import math
from pathlib import Path

import numpy as np
import pytest

from fracrothe.config import (
    ConfigValidationError,
    ParseError,
    build_problem,
    config_schema,
    example51_config,
    parse_config,
)
from fracrothe.presets import EXAMPLE51_SLOPE, RAMP_SLOPE
from fracrothe.spaceop import DirichletLaplacian1D, ScaledOperator, ZeroOperator

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

MINIMAL = {"delay": 1.0, "horizon": 2.0, "subdivisions": 8}


def parse(**changes):
    return parse_config(json.dumps({**MINIMAL, **changes}))


def test_defaults():
    config = parse()
    assert config.terms == []
    assert config.space.interior_nodes == 64
    assert config.forcing.preset == "identity_delay"
    assert config.output.trajectory_path == "trajectory.csv"
    assert config.seed == 0
    assert config.manufactured is None


def test_alpha_error_names_the_field():
    with pytest.raises(ConfigValidationError, match=r"terms\[0\]\.alpha must be in \(0,1\)"):
        parse(terms=[{"a": 1.0, "alpha": 1.0}])


def test_delay_after_horizon():
    with pytest.raises(ConfigValidationError, match="delay <= horizon"):
        parse(delay=3.0)


def test_step_bound():
    with pytest.raises(ConfigValidationError, match="subdivisions"):
        parse(delay=2.0, horizon=4.0, subdivisions=2)


@pytest.mark.parametrize(
    "changes, fragment",
    [
        ({"terms": [{"a": -1.0, "alpha": 0.5}]}, r"terms\[0\]\.a"),
        ({"space": {"interior_nodes": 0}}, "space.interior_nodes"),
        ({"space": {"operator": "biharmonic"}}, "space.operator"),
        ({"history": {"preset": "nope"}}, "history"),
        ({"forcing": {"preset": "mms", "gamma": 0.5}}, "forcing.gamma"),
        ({"forcing": {"preset": "mms"}, "history": {"preset": "sine_mode"}}, "history must be omitted"),
        ({"unknown": 1}, "unknown"),
    ],
)
def test_validation_messages(changes, fragment):
    with pytest.raises(ConfigValidationError, match=fragment):
        parse(**changes)


def test_parse_errors():
    with pytest.raises(ParseError):
        parse_config("{not json")
    with pytest.raises(ParseError):
        parse_config("[1, 2]")


@pytest.mark.parametrize("name", ["example51.json", "mms.json", "constant.json"])
def test_shipped_configs_parse(name):
    config = parse_config((CONFIGS / name).read_bytes())
    spec = build_problem(config)
    assert spec.grid.n == config.subdivisions


def test_build_operators():
    assert isinstance(build_problem(parse(space={"operator": "zero", "interior_nodes": 3})).operator, ZeroOperator)
    assert isinstance(build_problem(parse()).operator, DirichletLaplacian1D)
    assert isinstance(build_problem(parse(space={"operator": "negated_laplacian"})).operator, ScaledOperator)


def test_polynomial_history():
    config = parse(space={"interior_nodes": 3}, history={"preset": "polynomial", "coefficients": [1.0, 2.0, 3.0]})
    spec = build_problem(config)
    shape = np.sin(math.pi * np.array([0.25, 0.5, 0.75]))
    # chi(-0.5) = 1 - 1 + 0.75
    np.testing.assert_allclose(spec.history.source(-0.5), 0.75 * shape)


def test_subdivision_override():
    spec = build_problem(parse(), subdivisions=32)
    assert spec.grid.n == 32


def test_example51_config_histories():
    for ramp, slope in ((False, EXAMPLE51_SLOPE), (True, RAMP_SLOPE)):
        spec = build_problem(example51_config(16, ramp=ramp))
        top = spec.history.samples[0, 31] / spec.history.samples[-1, 31]
        assert top == pytest.approx(1.0 - slope * 2 * math.pi)


def test_schema_lists_fields():
    schema = config_schema()
    assert {"delay", "horizon", "subdivisions", "terms", "space", "history", "forcing"} <= set(schema["properties"])
