"""Scenario configuration files (JSON)."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..errors import ContractViolation


class ConfigError(ContractViolation):
    """Configuration could not be parsed or failed validation."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class RingNetwork(_Strict):
    kind: Literal["ring"]
    n: int
    self_weight: float = 1 / 3


class ExplicitNetwork(_Strict):
    kind: Literal["explicit"]
    rows: list[list[float]]


NetworkSpec = Annotated[Union[RingNetwork, ExplicitNetwork], Field(discriminator="kind")]


class BuildingSpec(_Strict):
    a_lo: float
    a_hi: float
    c: float = 1.0

    @model_validator(mode="after")
    def _check(self):
        if not self.a_lo < 0 < self.a_hi:
            raise ValueError(f"capacity must satisfy a_lo < 0 < a_hi, got [{self.a_lo}, {self.a_hi}]")
        if not self.c > 0:
            raise ValueError("c must be positive")
        return self


class ExplicitBuildings(_Strict):
    kind: Literal["explicit"]
    items: list[BuildingSpec]


class SampledBuildings(_Strict):
    """First ``small_count`` buildings get symmetric boxes ``[-m, m]`` with
    ``m ~ U(small_magnitude)``; the rest draw ``a_hi ~ U(large_upper)`` and
    ``a_lo ~ U(large_lower)``."""

    kind: Literal["sampled"]
    small_count: int = 2
    small_magnitude: tuple[float, float] = (0.5, 0.75)
    large_upper: tuple[float, float] = (2.0, 3.0)
    large_lower: tuple[float, float] = (-3.0, -2.0)
    c: float = 1.0

    @model_validator(mode="after")
    def _check(self):
        problems = []
        m_lo, m_hi = self.small_magnitude
        if not 0 < m_lo <= m_hi:
            problems.append("small_magnitude must satisfy 0 < lo <= hi")
        u_lo, u_hi = self.large_upper
        if not 0 < u_lo <= u_hi:
            problems.append("large_upper range must be positive (lo < 0 < hi)")
        l_lo, l_hi = self.large_lower
        if not l_lo <= l_hi < 0:
            problems.append("large_lower range must be negative (lo < 0 < hi)")
        if self.small_count < 0:
            problems.append("small_count must be >= 0")
        if not self.c > 0:
            problems.append("c must be positive")
        if problems:
            raise ValueError("; ".join(problems))
        return self


BuildingsSpec = Annotated[Union[ExplicitBuildings, SampledBuildings], Field(discriminator="kind")]


class SetpointSpec(_Strict):
    sigma: float = Field(gt=0)
    s0: float = 0.0


class ScenarioConfig(_Strict):
    n: int
    T: int = Field(ge=1)
    beta: float = Field(gt=0)
    seed: int = 0
    round_seconds: float = Field(default=4.0, gt=0)
    psi: Literal["quadratic"] = "quadratic"
    network: NetworkSpec
    buildings: BuildingsSpec
    setpoint: SetpointSpec
    virtual_split: Literal["uniform", "proportional"] = "uniform"
    absolute_regret_scaling: Literal["mean", "sum"] = "mean"
    output_dir: str = "out"

    @model_validator(mode="after")
    def _cross_checks(self):
        problems = []
        if self.n < 3:
            problems.append(
                f"n = {self.n}: at least 3 agents are needed so that every agent "
                "has two distinct neighbours (min-degree-2 network assumption)"
            )
        if isinstance(self.network, RingNetwork) and self.network.n != self.n:
            problems.append(f"network.n = {self.network.n} differs from n = {self.n}")
        if isinstance(self.network, ExplicitNetwork):
            rows = self.network.rows
            if len(rows) != self.n or any(len(r) != self.n for r in rows):
                problems.append(f"network.rows must be a {self.n}x{self.n} matrix")
        if isinstance(self.buildings, ExplicitBuildings) and len(self.buildings.items) != self.n:
            problems.append(f"{len(self.buildings.items)} buildings listed for n = {self.n}")
        if isinstance(self.buildings, SampledBuildings) and self.buildings.small_count > self.n:
            problems.append("buildings.small_count exceeds n")
        if problems:
            raise ValueError("; ".join(problems))
        return self

    def with_seed(self, seed: int | None) -> "ScenarioConfig":
        return self if seed is None else self.model_copy(update={"seed": int(seed)})


def _format_validation(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"  {loc}: {e['msg']}")
    return "invalid scenario config:\n" + "\n".join(lines)


def parse_config(data: dict) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigError(_format_validation(err)) from None


def load_config(path) -> ScenarioConfig:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: parse error at line {err.lineno}, column {err.colno}: {err.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return parse_config(data)


def load_buildings_file(path) -> list[BuildingSpec]:
    """Building list from ``[{...}, ...]`` or ``{"buildings": [...]}``."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: parse error at line {err.lineno}, column {err.colno}: {err.msg}") from None
    if isinstance(data, dict):
        if set(data) != {"buildings"}:
            raise ConfigError(f"{path}: expected a list or an object with a single 'buildings' key")
        data = data["buildings"]
    if not isinstance(data, list) or not data:
        raise ConfigError(f"{path}: building list must be a nonempty array")
    try:
        return [BuildingSpec.model_validate(item) for item in data]
    except ValidationError as err:
        raise ConfigError(_format_validation(err)) from None
