"""
Knot-field minimax engine shared by the mountain-pass, linking and second-eigenvalue solvers.

A knot field is a finite set of grid functions (knots) with an adjacency structure. Pinned
knots never move. Each iteration locates the highest free knot, moves it by a climbing step
(descent orthogonal to the local tangent space of the field, ascent along it) and relaxes its
free neighbours by descent orthogonal to their tangent spaces.
"""

import logging
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

logger = logging.getLogger(__name__)

_MAX_BACKTRACK = 40
_ARMIJO = 1e-4


class Landscape(Protocol):
    """探索対象の汎関数（ノット値の一括評価と L^2 勾配）"""

    def values(self, U: np.ndarray) -> np.ndarray: ...

    def gradient(self, u: np.ndarray) -> np.ndarray: ...

    def residual(self, u: np.ndarray, gradient: np.ndarray) -> float: ...

    def project(self, u: np.ndarray, direction: np.ndarray) -> np.ndarray: ...

    def retract(self, u: np.ndarray) -> np.ndarray: ...

    def monitor(self, u: np.ndarray, gradient: np.ndarray) -> float: ...


@dataclass
class KnotField:
    """
    ノットの集合と隣接構造

    Attributes:
        knots: (K, n) 配列
        pinned: 固定ノットのマスク
        neighbors: 各ノットの隣接ノット番号
        dimension: 接空間の次元（パスなら 1）
        chain: True ならノット番号順の1次元パス（弧長の再配置を行う）
    """

    knots: np.ndarray
    pinned: np.ndarray
    neighbors: list[tuple[int, ...]]
    dimension: int = 1
    chain: bool = False

    @classmethod
    def path(cls, knots: np.ndarray) -> "KnotField":
        """両端を固定した1次元パス"""
        count = len(knots)
        pinned = np.zeros(count, dtype=bool)
        pinned[[0, -1]] = True
        neighbors = [
            tuple(j for j in (i - 1, i + 1) if 0 <= j < count) for i in range(count)
        ]
        return cls(np.array(knots, dtype=float), pinned, neighbors, dimension=1, chain=True)


@dataclass(frozen=True)
class ClimbOptions:
    tol: float = 1e-8
    max_iter: int = 5000
    relax_sweeps: int = 3
    initial_step: float = 0.1
    max_step: float = 10.0
    redistribute_every: int = 25


@dataclass
class ClimbResult:
    knots: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    index: int
    point: np.ndarray = field(repr=False)
    value: float
    residual: float
    iterations: int
    converged: bool
    trace: list[dict] = field(default_factory=list, repr=False)
    monitor: list[tuple[float, float]] = field(default_factory=list, repr=False)


def tangent_basis(
    knots: np.ndarray, index: int, field_: KnotField, landscape: Landscape
) -> np.ndarray:
    """隣接ノットとの差分から接空間の正規直交基底 (n, d) を作る"""
    u = knots[index]
    diffs = [landscape.project(u, knots[j] - u) for j in field_.neighbors[index]]
    if not diffs:
        return np.zeros((u.size, 0))
    left, singular, _ = np.linalg.svd(np.array(diffs).T, full_matrices=False)
    if singular[0] <= 0:
        return np.zeros((u.size, 0))
    rank = min(field_.dimension, int(np.sum(singular > 1e-12 * singular[0])))
    return left[:, :rank]


def _merit(landscape: Landscape, u: np.ndarray, gradient: np.ndarray) -> float:
    return float(np.linalg.norm(landscape.project(u, gradient)))


def _climb_step(landscape, u, gradient, basis, step, max_step):
    along = basis @ (basis.T @ gradient)
    direction = landscape.project(u, -gradient + 2.0 * along)
    merit = _merit(landscape, u, gradient)
    for _ in range(_MAX_BACKTRACK):
        trial = landscape.retract(u + step * direction)
        if np.all(np.isfinite(trial)):
            trial_gradient = landscape.gradient(trial)
            trial_merit = _merit(landscape, trial, trial_gradient)
            if np.isfinite(trial_merit):
                if trial_merit <= merit:
                    return trial, min(step * 1.25, max_step)
                if trial_merit <= 2.0 * merit:
                    return trial, step * 0.5
        step *= 0.5
    return u, step


def _relax_step(landscape, u, value, basis, step, max_step):
    gradient = landscape.gradient(u)
    along = basis @ (basis.T @ gradient)
    direction = landscape.project(u, -(gradient - along))
    slope = float(np.dot(direction, direction))
    if slope <= 0 or not np.isfinite(slope):
        return u, value, step
    for _ in range(_MAX_BACKTRACK):
        trial = landscape.retract(u + step * direction)
        trial_value = float(landscape.values(trial[None, :])[0])
        if np.isfinite(trial_value) and trial_value <= value - _ARMIJO * step * slope:
            return trial, trial_value, min(step * 1.5, max_step)
        step *= 0.5
    return u, value, step


def _redistribute(knots: np.ndarray, top: int, landscape: Landscape) -> np.ndarray:
    """最高ノットの両側で弧長が等間隔になるようにノットを置き直す"""
    out = knots.copy()
    for lo, hi in ((0, top), (top, len(knots) - 1)):
        if hi - lo < 2:
            continue
        segment = knots[lo : hi + 1]
        lengths = np.linalg.norm(np.diff(segment, axis=0), axis=1)
        cumulative = np.concatenate([[0.0], np.cumsum(lengths)])
        if cumulative[-1] <= 0:
            continue
        targets = np.linspace(0.0, cumulative[-1], hi - lo + 1)[1:-1]
        for offset, s in enumerate(targets, start=1):
            i = min(int(np.searchsorted(cumulative, s, side="right")) - 1, len(segment) - 2)
            w = (s - cumulative[i]) / lengths[i] if lengths[i] > 0 else 0.0
            out[lo + offset] = landscape.retract((1.0 - w) * segment[i] + w * segment[i + 1])
    return out


def climb(field_: KnotField, landscape: Landscape, options: ClimbOptions) -> ClimbResult:
    """
    ノット場の最高点を鞍点へ導くミニマックス反復

    Args:
        field_: 初期ノット場（固定ノットは更新されない）
        landscape: 汎関数
        options: 反復設定

    Returns:
        ClimbResult（未収束でも最良の反復値を含む）
    """
    knots = np.array(field_.knots, dtype=float)
    values = np.asarray(landscape.values(knots), dtype=float)
    free = np.flatnonzero(~field_.pinned)
    if free.size == 0:
        raise ValueError("knot field has no free knots")
    steps = np.full(len(knots), options.initial_step)
    trace: list[dict] = []
    monitor: list[tuple[float, float]] = []

    best: tuple[float, int, np.ndarray, float] | None = None
    converged = False
    iteration = 0
    for iteration in range(1, options.max_iter + 1):
        top = int(free[np.argmax(values[free])])
        u = knots[top]
        gradient = landscape.gradient(u)
        residual = landscape.residual(u, gradient)
        trace.append(
            {
                "iteration": iteration,
                "knot": top,
                "value": float(values[top]),
                "residual": residual,
                "step": float(steps[top]),
            }
        )
        monitor.append((float(values[top]), landscape.monitor(u, gradient)))
        if best is None or residual < best[0]:
            best = (residual, top, u.copy(), float(values[top]))
        if residual <= options.tol:
            converged = True
            break

        basis = tangent_basis(knots, top, field_, landscape)
        knots[top], steps[top] = _climb_step(
            landscape, u, gradient, basis, steps[top], options.max_step
        )
        values[top] = float(landscape.values(knots[top][None, :])[0])

        for _ in range(options.relax_sweeps):
            for j in field_.neighbors[top]:
                if field_.pinned[j]:
                    continue
                basis_j = tangent_basis(knots, j, field_, landscape)
                knots[j], values[j], steps[j] = _relax_step(
                    landscape, knots[j], values[j], basis_j, steps[j], options.max_step
                )

        if field_.chain and options.redistribute_every and iteration % options.redistribute_every == 0:
            knots = _redistribute(knots, top, landscape)
            values = np.asarray(landscape.values(knots), dtype=float)

        if iteration % 500 == 0:
            logger.debug(f"minimax iteration {iteration}: value={values[top]:.6e}, residual={residual:.3e}")

    residual, top, point, value = best
    if converged:
        top = trace[-1]["knot"]
        point = knots[top].copy()
        value = float(values[top])
        residual = trace[-1]["residual"]
    return ClimbResult(
        knots=knots,
        values=values,
        index=top,
        point=point,
        value=value,
        residual=residual,
        iterations=iteration,
        converged=converged,
        trace=trace,
        monitor=monitor,
    )
