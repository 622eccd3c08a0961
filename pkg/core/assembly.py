"""
Discrete realization of the bilinear form E_{L,p} and the potential operator A_p.

Functions are piecewise constant on cells of width h centred at the grid nodes, so a
same-cell pair never contributes. Interior pairs are split by centre distance:

  * near pairs (|x_i - x_j| < 1) use the exact cell-pair integral of |x - y|^{-1},
  * far pairs (|x_i - x_j| >= 1) use the midpoint weight h^2 / |x_i - x_j|.

Pairs with one point outside Omega and |x - y| < 1 collapse into the local weight
kappa(x). In the far-field bracket every pair with a point outside Omega vanishes
identically (u = v = 0 there cancels the psi_p(u(x)) v(x) term), so only Omega x Omega
pairs are summed. On a uniform grid all pair weights depend only on the offset |i - j|
and are stored per offset.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import polars as pl
from scipy.special import xlog1py

from .grid import Grid, GridFunction, ensure_same_grid

logger = logging.getLogger(__name__)

# 中心間距離 k*h がちょうど 1 のペアを遠方側に分類するための許容誤差
_CUTOFF_TOL = 1e-12


@dataclass(frozen=True)
class Constants:
    """正規化定数 C_{N,p}, rho_N と指数 p（N = 1 固定）"""

    C: float = 1.0
    rho: float = 0.0
    p: float = 2.0
    N: int = 1

    def __post_init__(self):
        if not (math.isfinite(self.C) and self.C > 0):
            raise ValueError(f"normalizing constant C must be > 0, got {self.C}")
        if not math.isfinite(self.rho):
            raise ValueError(f"rho must be finite, got {self.rho}")
        if not (math.isfinite(self.p) and self.p > 1):
            raise ValueError(f"p must be > 1, got {self.p}")
        if self.N != 1:
            raise ValueError(f"only N = 1 is supported, got N={self.N}")


@dataclass(frozen=True, eq=False)
class AssembledForm:
    """E_{L,p} の重みテーブル一式（オフセット k = |i - j| ごとに保持）"""

    grid: Grid
    constants: Constants
    near_weights: np.ndarray = field(repr=False)
    far_offsets: np.ndarray = field(repr=False)
    far_weights: np.ndarray = field(repr=False)
    kappa: np.ndarray = field(repr=False)
    mass: float

    @property
    def p(self) -> float:
        return self.constants.p

    @property
    def band(self) -> int:
        """近傍帯の幅（近傍オフセット数）"""
        return len(self.near_weights)

    def near_pairs(self) -> list[tuple[int, int, float]]:
        """近傍ペア (row, col, weight) の明示リスト（row < col）"""
        return [
            (i, i + k, float(w))
            for k, w in enumerate(self.near_weights, start=1)
            for i in range(self.grid.n - k)
        ]

    def far_pairs(self) -> list[tuple[int, int, float]]:
        """遠方ペア (row, col, weight) の明示リスト（row < col）"""
        return [
            (i, i + int(k), float(w))
            for k, w in zip(self.far_offsets, self.far_weights)
            for i in range(self.grid.n - int(k))
        ]


def odd_power(t, p: float):
    """psi_p(t) = |t|^{p-2} t を要素ごとに計算（t = 0 でも nan を出さない形）"""
    t = np.asarray(t, dtype=float)
    return np.sign(t) * np.abs(t) ** (p - 1.0)


def cell_pair_integral(h: float, k: int) -> float:
    """
    中心間距離 k*h の2セル上の二重積分 int_0^h int_{kh}^{(k+1)h} dy dx / |x - y|

    t -> t ln t の二階差分 h * [F(k+1) - 2F(k) + F(k-1)] を log1p 形で評価する。

    Args:
        h: セル幅 (h > 0)
        k: オフセット (k >= 1)
    """
    if not (h > 0 and math.isfinite(h)):
        raise ValueError(f"cell width must be positive, got {h}")
    if isinstance(k, bool) or int(k) != k or k < 1:
        raise ValueError(
            f"offset must be an integer >= 1, got {k} (same-cell pairs contribute zero)"
        )
    k = int(k)
    return float(h * (xlog1py(k + 1, 1.0 / k) + xlog1py(k - 1, -1.0 / k)))


def boundary_weight(grid: Grid, constants: Constants) -> np.ndarray:
    """
    境界重み kappa(x) = C * int_{B_1(x) \\ Omega} |x - y|^{-1} dy を節点で評価

    Returns:
        長さ n の非負配列
    """
    x = grid.nodes
    left = -np.log(np.minimum(1.0, x - grid.a))
    right = -np.log(np.minimum(1.0, grid.b - x))
    return constants.C * (left + right)


def assemble_form(grid: Grid, constants: Constants) -> AssembledForm:
    """
    E_{L,p} の評価に必要な重みテーブルを事前計算

    Args:
        grid: 一様グリッド
        constants: 正規化定数と p

    Returns:
        AssembledForm（不変）
    """
    h = grid.h
    offsets = np.arange(1, grid.n)
    distances = offsets * h
    near_mask = distances < 1.0 - _CUTOFF_TOL

    near_weights = np.array(
        [constants.C * cell_pair_integral(h, int(k)) for k in offsets[near_mask]],
        dtype=float,
    )
    far_offsets = offsets[~near_mask].astype(int)
    far_weights = constants.C * h * h / (far_offsets * h)
    kappa = boundary_weight(grid, constants)

    for array in (near_weights, far_offsets, far_weights, kappa):
        array.setflags(write=False)

    logger.debug(
        f"assembled form: n={grid.n}, h={h:.3e}, band={len(near_weights)}, "
        f"far offsets={len(far_offsets)}"
    )
    return AssembledForm(
        grid=grid,
        constants=constants,
        near_weights=near_weights,
        far_offsets=far_offsets,
        far_weights=far_weights,
        kappa=kappa,
        mass=constants.rho * h,
    )


# ---------------------------------------------------------------------------
# 配列レベルの評価（最後の軸が節点、先頭の軸はアンサンブルとして一括処理）
# ---------------------------------------------------------------------------


def near_pairing(form: AssembledForm, U: np.ndarray, V: np.ndarray) -> np.ndarray:
    """<A_p' u, v>: |x - y| < 1 の全ペア（内部近傍ペア + 外部との kappa 項）"""
    p = form.p
    h = form.grid.h
    total = np.sum(form.kappa * h * odd_power(U, p) * V, axis=-1)
    for k, weight in enumerate(form.near_weights, start=1):
        dU = U[..., k:] - U[..., :-k]
        dV = V[..., k:] - V[..., :-k]
        total = total + weight * np.sum(odd_power(dU, p) * dV, axis=-1)
    return total


def remainder_pairing(form: AssembledForm, U: np.ndarray, V: np.ndarray) -> np.ndarray:
    """<A_p'' u, v>: 遠方ブラケット + 零次項 rho_N"""
    p = form.p
    psiU = odd_power(U, p)
    total = form.mass * np.sum(psiU * V, axis=-1)
    for k, weight in zip(form.far_offsets, form.far_weights):
        dU = U[..., k:] - U[..., :-k]
        dV = V[..., k:] - V[..., :-k]
        bracket = (
            odd_power(dU, p) * dV
            - psiU[..., :-k] * V[..., :-k]
            - psiU[..., k:] * V[..., k:]
        )
        total = total + weight * np.sum(bracket, axis=-1)
    return total


def energy_values(form: AssembledForm, U: np.ndarray, V: np.ndarray) -> np.ndarray:
    """E_{L,p}(u, v) の一括評価"""
    return near_pairing(form, U, V) + remainder_pairing(form, U, V)


def apply_near(form: AssembledForm, U: np.ndarray) -> np.ndarray:
    """A_p' u の双対ベクトル"""
    p = form.p
    h = form.grid.h
    r = form.kappa * h * odd_power(U, p)
    for k, weight in enumerate(form.near_weights, start=1):
        s = weight * odd_power(U[..., k:] - U[..., :-k], p)
        r[..., k:] += s
        r[..., :-k] -= s
    return r


def apply_remainder(form: AssembledForm, U: np.ndarray) -> np.ndarray:
    """A_p'' u の双対ベクトル"""
    p = form.p
    psiU = odd_power(U, p)
    r = form.mass * psiU
    for k, weight in zip(form.far_offsets, form.far_weights):
        s = odd_power(U[..., k:] - U[..., :-k], p)
        r[..., k:] += weight * (s - psiU[..., k:])
        r[..., :-k] += weight * (-s - psiU[..., :-k])
    return r


def apply_values(form: AssembledForm, U: np.ndarray) -> np.ndarray:
    """A_p u = A_p' u + A_p'' u"""
    return apply_near(form, U) + apply_remainder(form, U)


# ---------------------------------------------------------------------------
# GridFunction API
# ---------------------------------------------------------------------------


def energy(form: AssembledForm, u: GridFunction, v: GridFunction) -> float:
    """
    離散 E_{L,p}(u, v)

    ペア和は非順序ペア i < j を1回ずつ数える（連続版の 1/2 を吸収）。
    kappa 項と零次項はセル測度 h を持つ。
    """
    ensure_same_grid(form.grid, u.grid)
    ensure_same_grid(form.grid, v.grid)
    return float(energy_values(form, u.values, v.values))


def apply_Ap(form: AssembledForm, u: GridFunction) -> np.ndarray:
    """r . v = energy(form, u, v) を満たす双対ベクトル r = A_p u"""
    ensure_same_grid(form.grid, u.grid)
    return apply_values(form, u.values)


def apply_Ap_split(form: AssembledForm, u: GridFunction) -> tuple[np.ndarray, np.ndarray]:
    """(A_p' u, A_p'' u) の組"""
    ensure_same_grid(form.grid, u.grid)
    return apply_near(form, u.values), apply_remainder(form, u.values)


def seminorm(form: AssembledForm, u: GridFunction) -> float:
    """離散 [u]_p = (2 <A_p' u, u>)^{1/p}"""
    ensure_same_grid(form.grid, u.grid)
    return float(seminorm_values(form, u.values))


def seminorm_values(form: AssembledForm, U: np.ndarray) -> np.ndarray:
    value = 2.0 * near_pairing(form, U, U)
    return np.maximum(value, 0.0) ** (1.0 / form.p)


def energy_matrix(form: AssembledForm) -> np.ndarray:
    """p = 2 のエネルギー行列 M_ij = energy(e_i, e_j)"""
    if form.p != 2:
        raise ValueError(f"the energy matrix is only defined for p = 2, got p={form.p}")
    return apply_values(form, np.eye(form.grid.n))


def dump_weights(form: AssembledForm, directory: str | Path) -> list[Path]:
    """重みテーブルをデバッグ用 CSV に書き出す（(row, col, weight) と (node, value)）"""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    schema = {"row": pl.Int64, "col": pl.Int64, "weight": pl.Float64}
    written = []
    for name, pairs in (("near_weights", form.near_pairs()), ("far_weights", form.far_pairs())):
        path = directory / f"{name}.csv"
        pl.DataFrame(pairs, schema=schema, orient="row").write_csv(path)
        written.append(path)
    path = directory / "kappa.csv"
    pl.DataFrame({"node": np.arange(form.grid.n), "value": form.kappa}).write_csv(path)
    written.append(path)
    logger.info(f"重みテーブルを書き出しました: {directory}")
    return written
