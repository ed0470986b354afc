"""Run configuration: JSON schema, validation and problem construction."""

from __future__ import annotations

import json
import math
from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from fracrothe.errors import FracRotheError
from fracrothe.fracgrid import FractionalTerm, make_grid
from fracrothe.mms import ManufacturedSolution, build_mms_spec
from fracrothe.presets import EXAMPLE51_DELAY, EXAMPLE51_SLOPE, RAMP_SLOPE
from fracrothe.spaceop import DirichletLaplacian1D, ScaledOperator, ZeroOperator
from fracrothe.stepper import ProblemSpec, make_problem


class ConfigError(FracRotheError, ValueError):
    """Raised for malformed or invalid configuration files."""


class ParseError(ConfigError):
    pass


class ConfigValidationError(ConfigError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class TermConfig(_Strict):
    a: float
    alpha: float

    @field_validator("a")
    @classmethod
    def _weight(cls, v: float) -> float:
        if not (math.isfinite(v) and v >= 0.0):
            raise ValueError("must be finite and >= 0")
        return v

    @field_validator("alpha")
    @classmethod
    def _order(cls, v: float) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError("must be in (0,1)")
        return v


class SpaceConfig(_Strict):
    interior_nodes: int = Field(64, ge=1)
    length: float = Field(1.0, gt=0.0)
    operator: Literal["laplacian", "zero", "negated_laplacian"] = "laplacian"


class SineModeHistory(_Strict):
    preset: Literal["sine_mode"]
    k: int = Field(1, ge=1)
    amplitude: float = 1.0


class PolynomialHistory(_Strict):
    """``(c_0 + c_1 t + c_2 t^2 + ...) sin(k pi x / L)``."""

    preset: Literal["polynomial"]
    coefficients: list[float] = Field(min_length=1)
    k: int = Field(1, ge=1)


class Example51History(_Strict):
    preset: Literal["example51", "example51_ramp"]


HistoryConfig = Annotated[
    Union[SineModeHistory, PolynomialHistory, Example51History], Field(discriminator="preset")
]


class IdentityDelayForcing(_Strict):
    preset: Literal["identity_delay"]


class MmsForcing(_Strict):
    preset: Literal["mms"]
    gamma: float = 2.0
    beta: float = 1.0
    k: int = Field(1, ge=1)

    @field_validator("gamma")
    @classmethod
    def _gamma(cls, v: float) -> float:
        if not v > 1.0:
            raise ValueError("must be > 1 for manufactured solutions")
        return v


class ConstantForcing(_Strict):
    preset: Literal["constant"]
    value: float = 0.0


ForcingConfig = Annotated[
    Union[IdentityDelayForcing, MmsForcing, ConstantForcing], Field(discriminator="preset")
]


class OutputConfig(_Strict):
    trajectory_path: str = "trajectory.csv"
    diagnostics_path: str = "diagnostics.json"
    study_path: str = "convergence.csv"
    report_path: str = "verify.json"


class RunConfig(_Strict):
    delay: float = Field(gt=0.0)
    horizon: float = Field(gt=0.0)
    subdivisions: int = Field(ge=1)
    terms: list[TermConfig] = Field(default_factory=list)
    space: SpaceConfig = SpaceConfig()
    history: Optional[HistoryConfig] = None
    forcing: ForcingConfig = IdentityDelayForcing(preset="identity_delay")
    output: OutputConfig = OutputConfig()
    seed: int = 0

    @model_validator(mode="after")
    def _grid(self) -> "RunConfig":
        if self.delay > self.horizon:
            raise ValueError(
                f"delay must satisfy delay <= horizon (nu <= T), got delay={self.delay!r} > horizon={self.horizon!r}"
            )
        step = self.delay / self.subdivisions
        if step >= min(1.0, self.delay):
            raise ValueError(
                f"subdivisions too small: step delay/subdivisions = {step!r} must be < min(1, delay)"
            )
        if isinstance(self.forcing, MmsForcing):
            if self.history is not None:
                raise ValueError("history must be omitted with the mms forcing (it is the exact solution)")
            if self.space.operator != "laplacian":
                raise ValueError("the mms forcing requires space.operator = 'laplacian'")
        return self

    @property
    def fractional_terms(self) -> tuple[FractionalTerm, ...]:
        return tuple(FractionalTerm(t.a, t.alpha) for t in self.terms)

    @property
    def manufactured(self) -> ManufacturedSolution | None:
        if isinstance(self.forcing, MmsForcing):
            return ManufacturedSolution(self.forcing.gamma, self.forcing.beta, self.forcing.k, self.space.length)
        return None


def _location(loc: tuple) -> str:
    out = ""
    for part in loc:
        if isinstance(part, int):
            out += f"[{part}]"
        elif part in ("sine_mode", "polynomial", "example51", "example51_ramp",
                      "identity_delay", "mms", "constant"):
            # discriminated-union tag, not a user-visible field
            continue
        else:
            out += f".{part}" if out else str(part)
    return out


def format_validation_error(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        where = _location(err["loc"])
        message = err["msg"].removeprefix("Value error, ")
        lines.append(f"{where} {message}" if where else message)
    return "; ".join(lines)


def parse_config(text: bytes | str) -> RunConfig:
    try:
        data = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ParseError("config must be a JSON object")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigValidationError(format_validation_error(exc)) from exc


def config_schema() -> dict:
    return RunConfig.model_json_schema()


def example51_config(subdivisions: int = 256, ramp: bool = False) -> RunConfig:
    return RunConfig(
        delay=EXAMPLE51_DELAY,
        horizon=EXAMPLE51_DELAY,
        subdivisions=subdivisions,
        terms=[TermConfig(a=1.0, alpha=0.5)],
        space=SpaceConfig(interior_nodes=64, length=1.0),
        history=Example51History(preset="example51_ramp" if ramp else "example51"),
        forcing=IdentityDelayForcing(preset="identity_delay"),
    )


def _operator(space: SpaceConfig):
    if space.operator == "zero":
        return ZeroOperator(space.interior_nodes)
    laplacian = DirichletLaplacian1D(space.interior_nodes, space.length)
    if space.operator == "negated_laplacian":
        return ScaledOperator(laplacian, -1.0)
    return laplacian


def _nodes(space: SpaceConfig) -> np.ndarray:
    return np.arange(1, space.interior_nodes + 1) * (space.length / (space.interior_nodes + 1))


def build_problem(config: RunConfig, subdivisions: int | None = None) -> ProblemSpec:
    """Problem described by ``config``, optionally on a different ``n``."""
    n = config.subdivisions if subdivisions is None else subdivisions
    grid = make_grid(config.delay, config.horizon, n)
    terms = config.fractional_terms
    ms = config.manufactured
    if ms is not None:
        return build_mms_spec(ms, terms, grid, config.space.interior_nodes, config.space.length)

    op = _operator(config.space)
    x = _nodes(config.space)
    length = config.space.length
    history_config = config.history or SineModeHistory(preset="sine_mode")
    if isinstance(history_config, SineModeHistory):
        shape = history_config.amplitude * np.sin(history_config.k * math.pi * x / length)

        def history(t: float) -> np.ndarray:
            return shape

    elif isinstance(history_config, PolynomialHistory):
        shape = np.sin(history_config.k * math.pi * x / length)
        # numpy wants the highest power first
        coefficients = list(reversed(history_config.coefficients))

        def history(t: float) -> np.ndarray:
            return float(np.polyval(coefficients, t)) * shape

    else:
        slope = EXAMPLE51_SLOPE if history_config.preset == "example51" else RAMP_SLOPE
        shape = np.sin(math.pi * x / length)

        def history(t: float) -> np.ndarray:
            return (1.0 + slope * t) * shape

    forcing_config = config.forcing
    if isinstance(forcing_config, ConstantForcing):
        constant = np.full(op.dimension, forcing_config.value)

        def forcing(t: float, delayed: np.ndarray) -> np.ndarray:
            return constant

    else:

        def forcing(t: float, delayed: np.ndarray) -> np.ndarray:
            return delayed

    return make_problem(grid, terms, op, forcing, history)
