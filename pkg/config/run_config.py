"""
Run configuration: a JSON document validated with pydantic, with line-precise errors.
"""

import json
import re
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from core.assembly import Constants
from core.critical_point import MinimaxOptions
from core.eigensolver import EigenOptions
from core.grid import Grid, build_grid
from core.nonlinearity import NonlinearitySpec, load_custom_table, make_builtin, make_power
from core.verify import VerifyOptions


class ConfigError(ValueError):
    """設定ファイルの構文・検証エラー（行番号付き）"""


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class DomainConfig(_Section):
    a: float = 0.0
    b: float = 1.0
    n: int = Field(64, ge=1)

    @model_validator(mode="after")
    def _check_interval(self):
        if not self.b > self.a:
            raise ValueError(f"b must be greater than a (got a={self.a}, b={self.b})")
        return self

    def grid(self) -> Grid:
        return build_grid(self.a, self.b, self.n)


class ConstantsConfig(_Section):
    C: float = Field(1.0, gt=0)
    rho: float = 0.0
    p: float = Field(2.0, gt=1)

    def constants(self) -> Constants:
        return Constants(C=self.C, rho=self.rho, p=self.p)


class NonlinearityConfig(_Section):
    kind: Literal["h1", "h2", "h3", "power", "custom"] = "h2"
    lam: float = Field(0.0, alias="lambda")
    theta: float = 0.5
    t0: float = Field(2.0, gt=1)
    t1: float = Field(0.5, gt=0)
    custom_table_path: str | None = None
    relaxed: bool = False

    @model_validator(mode="after")
    def _check_parameters(self):
        upper_ok = self.theta <= 1 if self.relaxed else self.theta < 1
        if not (self.theta > 0 and upper_ok):
            interval = "(0, 1]" if self.relaxed else "(0, 1)"
            raise ValueError(f"theta must lie in {interval} (got {self.theta})")
        if not self.t1 < self.t0:
            raise ValueError(f"t1 must be smaller than t0 (got t1={self.t1}, t0={self.t0})")
        if self.kind == "custom" and not self.custom_table_path:
            raise ValueError("custom nonlinearity requires custom_table_path")
        return self

    def spec(self, p: float) -> NonlinearitySpec:
        match self.kind:
            case "power":
                return make_power(self.lam, p)
            case "custom":
                return load_custom_table(self.custom_table_path, p)
            case _:
                return make_builtin(
                    self.kind, self.lam, self.theta, self.t0, self.t1, p, relaxed=self.relaxed
                )


class SolverConfig(_Section):
    tol: float = Field(1e-8, gt=0)
    max_iter: int = Field(5000, ge=1)
    restarts: int = Field(8, ge=1)
    seed: int = 0
    m_knots: int = Field(33, ge=16)
    k: int = Field(1, ge=1)
    lambda2: bool = False
    r_max: float = Field(1e6, gt=0)

    def eigen_options(self, workers: int = 1) -> EigenOptions:
        # 固有値は臨界点より厳しい許容誤差で解く
        return EigenOptions(
            seed=self.seed,
            restarts=self.restarts,
            tol=min(self.tol, 1e-9),
            max_iter=self.max_iter,
            workers=workers,
        )

    def minimax_options(self, workers: int = 1) -> MinimaxOptions:
        return MinimaxOptions(
            m=self.m_knots,
            tol=self.tol,
            max_iter=self.max_iter,
            seed=self.seed,
            r_max=self.r_max,
            eigen=self.eigen_options(workers),
        )


class VerifyConfig(_Section):
    samples: int = Field(200, ge=1)
    recipe: Literal["smoothed-gaussian", "bumps", "mixed"] = "mixed"
    delta: float = Field(0.5, gt=0)
    gamma: float = Field(0.75, gt=0, lt=1)
    rho_list: list[float] = Field(default_factory=lambda: [1e-1, 1e-2, 1e-3, 1e-4, 1e-5])
    drift_threshold: float = Field(0.25, gt=0)
    abs_tol: float = Field(1e-10, ge=0)
    decay_factor: float = Field(1e-3, gt=0, lt=1)
    refine: bool = True

    @field_validator("rho_list")
    @classmethod
    def _check_rho_list(cls, value: list[float]) -> list[float]:
        if not value:
            raise ValueError("rho_list must not be empty")
        if any(rho <= 0 for rho in value):
            raise ValueError("rho_list entries must be positive")
        if any(b >= a for a, b in zip(value, value[1:])):
            raise ValueError("rho_list must be strictly decreasing")
        return value

    def options(self) -> VerifyOptions:
        return VerifyOptions(
            delta=self.delta,
            gamma=self.gamma,
            abs_tol=self.abs_tol,
            drift_threshold=self.drift_threshold,
            decay_factor=self.decay_factor,
            refine=self.refine,
            rho_list=tuple(self.rho_list),
        )


class Config(_Section):
    domain: DomainConfig = Field(default_factory=DomainConfig)
    constants: ConstantsConfig = Field(default_factory=ConstantsConfig)
    nonlinearity: NonlinearityConfig = Field(default_factory=NonlinearityConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    verify: VerifyConfig = Field(default_factory=VerifyConfig)

    def dump_json(self) -> str:
        return self.model_dump_json(by_alias=True, indent=2)

    def with_seed(self, seed: int | None) -> "Config":
        if seed is None:
            return self
        return self.model_copy(update={"solver": self.solver.model_copy(update={"seed": seed})})


def _line_of(text: str, loc: tuple) -> int:
    """検証エラーの位置 loc に対応するキーの行番号（見つからなければ最後に見つかった親の行）"""
    position = 0
    for key in loc:
        if not isinstance(key, str):
            continue
        match = re.compile(rf'"{re.escape(key)}"\s*:').search(text, position)
        if match is None:
            break
        position = match.start()
    return text.count("\n", 0, position) + 1


def parse_config(text: str, source: str = "<config>") -> Config:
    """
    JSON テキストから Config を作成

    Raises:
        ConfigError: JSON 構文エラー（行・列）または検証エラー（フィールドのパスと行）
    """
    try:
        data = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as e:
        raise ConfigError(f"{source}:{e.lineno}:{e.colno}: invalid JSON: {e.msg}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{source}:1: configuration must be a JSON object")
    try:
        return Config.model_validate(data)
    except ValidationError as e:
        error = e.errors()[0]
        loc = tuple(error["loc"])
        field_path = ".".join(str(part) for part in loc)
        raise ConfigError(f"{source}:{_line_of(text, loc)}: {field_path}: {error['msg']}") from e


def load_config(path: str | Path | None) -> Config:
    """設定ファイルを読み込む（None なら全て既定値）"""
    if path is None:
        return Config()
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"{path}: cannot read configuration: {e}") from e
    return parse_config(text, source=str(path))
