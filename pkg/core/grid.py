"""
Uniform grids on a bounded interval and grid functions with zero exterior extension.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import GridMismatchError


@dataclass(frozen=True)
class Grid:
    """区間 (a, b) 上の一様グリッド（内部節点 n 個、外部では関数値 0）"""

    a: float
    b: float
    n: int

    @cached_property
    def h(self) -> float:
        """節点間隔 (b - a) / (n + 1)"""
        return (self.b - self.a) / (self.n + 1)

    @cached_property
    def nodes(self) -> np.ndarray:
        """内部節点 a + (i + 1) h（セル中心）"""
        nodes = self.a + self.h * np.arange(1, self.n + 1, dtype=float)
        nodes.setflags(write=False)
        return nodes

    @property
    def length(self) -> float:
        return self.b - self.a

    def function(self, values) -> "GridFunction":
        """節点値から GridFunction を作成"""
        return GridFunction(self, values)

    def zeros(self) -> "GridFunction":
        return GridFunction(self, np.zeros(self.n))

    def basis(self, i: int) -> "GridFunction":
        """i 番目の単位ベクトル e_i"""
        values = np.zeros(self.n)
        values[i] = 1.0
        return GridFunction(self, values)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """X^p_0(Omega) の離散版の元（節点値、Omega の外では 0）"""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.n,):
            raise ValueError(
                f"expected {self.grid.n} nodal values, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("grid function values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __neg__(self) -> "GridFunction":
        return GridFunction(self.grid, -self.values)

    def __add__(self, other: "GridFunction") -> "GridFunction":
        ensure_same_grid(self.grid, other.grid)
        return GridFunction(self.grid, self.values + other.values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        ensure_same_grid(self.grid, other.grid)
        return GridFunction(self.grid, self.values - other.values)

    def __mul__(self, scalar: float) -> "GridFunction":
        return GridFunction(self.grid, scalar * self.values)

    __rmul__ = __mul__

    def is_zero(self) -> bool:
        return not np.any(self.values)


def build_grid(a: float, b: float, n: int) -> Grid:
    """
    一様グリッドを構築

    Args:
        a: 左端点
        b: 右端点
        n: 内部節点数 (n >= 1)

    Returns:
        Grid
    """
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError(f"domain endpoints must be finite, got ({a}, {b})")
    if b <= a:
        raise ValueError(f"domain requires b > a, got a={a}, b={b}")
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ValueError(f"interior node count must be an integer >= 1, got {n}")
    return Grid(float(a), float(b), int(n))


def refine_grid(grid: Grid) -> Grid:
    """n -> 2n + 1 の細分化（端点を保ち h を半分にする）"""
    return Grid(grid.a, grid.b, 2 * grid.n + 1)


def ensure_same_grid(expected: Grid, actual: Grid) -> None:
    if expected != actual:
        raise GridMismatchError(f"grid mismatch: {actual} is not {expected}")


def lp_norm(u: GridFunction, p: float) -> float:
    """
    離散 L^p ノルム (h * sum |u_i|^p)^(1/p)

    Args:
        u: グリッド関数
        p: 指数 (p > 1)
    """
    return float(lp_norm_values(u.values, u.grid.h, p))


def lp_norm_values(values: np.ndarray, h: float, p: float) -> np.ndarray:
    """最後の軸について離散 L^p ノルムを計算（アンサンブル一括評価用）"""
    if p <= 1:
        raise ValueError(f"p must be > 1, got {p}")
    return (h * np.sum(np.abs(values) ** p, axis=-1)) ** (1.0 / p)
