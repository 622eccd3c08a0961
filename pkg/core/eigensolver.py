"""
First eigenpair by Rayleigh-quotient minimization on M_p, the dense p = 2 spectrum, and a
path-minimax estimate of the second eigenvalue.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import eigh

from .assembly import (
    AssembledForm,
    Constants,
    apply_values,
    assemble_form,
    energy_matrix,
    odd_power,
)
from .errors import SolverError
from .functionals import rayleigh_values
from .grid import GridFunction, ensure_same_grid
from .minimax import ClimbOptions, KnotField, climb

logger = logging.getLogger(__name__)

_ARMIJO = 1e-4
_MIN_STEP = 1e-16


@dataclass(frozen=True)
class EigenOptions:
    """固有値ソルバーの設定"""

    seed: int = 0
    restarts: int = 8
    tol: float = 1e-9
    max_iter: int = 5000
    workers: int = 1
    path_knots: int = 33
    heuristic_tol: float = 1e-7

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError(f"restarts must be >= 1, got {self.restarts}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")


@dataclass(frozen=True)
class EigenPair:
    """固有値 lambda と J_p = 1 に正規化した固有関数"""

    value: float
    function: GridFunction = field(repr=False)
    residual: float
    iterations: int
    restarts_used: int
    converged: bool = True
    heuristic: bool = False

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "residual": self.residual,
            "iterations": self.iterations,
            "restarts_used": self.restarts_used,
            "converged": self.converged,
            "label": "HEURISTIC" if self.heuristic else None,
        }


@dataclass(frozen=True)
class SpectrumP2:
    """p = 2 の離散スペクトル（昇順、D 正規直交な固有ベクトル）"""

    values: np.ndarray
    functions: list[GridFunction] = field(repr=False)
    constants: Constants

    def to_dict(self) -> dict:
        return {
            "values": self.values.tolist(),
            "constants": {"C": self.constants.C, "rho": self.constants.rho, "p": self.constants.p},
        }


def project_to_manifold(values: np.ndarray, h: float, p: float) -> np.ndarray:
    """M_p = {||u||_p^p = p} への動径射影 pi_M（最後の軸について）"""
    total = h * np.sum(np.abs(values) ** p, axis=-1, keepdims=True)
    return values * (p / total) ** (1.0 / p)


def fix_sign(values: np.ndarray) -> np.ndarray:
    """最初の非零成分が正になるよう符号をそろえる"""
    nonzero = np.flatnonzero(values)
    if nonzero.size and values[nonzero[0]] < 0:
        return -values
    return values


def _residual_values(form: AssembledForm, values: np.ndarray) -> tuple[float, float, np.ndarray]:
    p = form.p
    h = form.grid.h
    mu = float(rayleigh_values(form, values))
    r = apply_values(form, values) - mu * h * odd_power(values, p)
    residual = h ** ((p - 1.0) / p) * float(np.linalg.norm(r))
    return mu, residual, r


def eigen_residual(form: AssembledForm, u: GridFunction) -> tuple[float, float]:
    """
    固有値残差

    mu = rayleigh(u)、残差は h^{1/p'} ||A_p u - mu h psi_p(u)||_2（双対ノルムの代理）。

    Returns:
        (mu, residual)
    """
    ensure_same_grid(form.grid, u.grid)
    if u.is_zero():
        raise ValueError("the eigen residual is undefined at u = 0")
    mu, residual, _ = _residual_values(form, u.values)
    return mu, residual


def smoothed_start(rng: np.random.Generator, n: int, passes: int = 2) -> np.ndarray:
    """i.i.d. 標準正規を隣接平均で平滑化した初期値（外部は 0）"""
    values = rng.standard_normal(n)
    for _ in range(passes):
        padded = np.pad(values, 1)
        values = (padded[:-2] + padded[1:-1] + padded[2:]) / 3.0
    return values


def _descend(
    form: AssembledForm, start: np.ndarray, opts: EigenOptions
) -> tuple[np.ndarray, float, float, int, bool]:
    """M_p 上の射影勾配法（Armijo バックトラック、成功時は刻み幅を倍にする）"""
    p = form.p
    h = form.grid.h
    u = project_to_manifold(start, h, p)
    mu, residual, r = _residual_values(form, u)
    step = 1.0 / max(abs(mu), 1.0)

    for iteration in range(1, opts.max_iter + 1):
        if residual <= opts.tol:
            return u, mu, residual, iteration - 1, True
        direction = -r / h
        slope = float(np.dot(r, r)) / h
        while step >= _MIN_STEP:
            trial = project_to_manifold(u + step * direction, h, p)
            trial_mu, trial_residual, trial_r = _residual_values(form, trial)
            decrease = step * slope
            roundoff = decrease < 1e3 * np.finfo(float).eps * max(abs(mu), 1.0)
            if trial_mu <= mu - _ARMIJO * decrease or (
                roundoff and trial_mu <= mu + 1e2 * np.finfo(float).eps * max(abs(mu), 1.0)
                and trial_residual < residual
            ):
                u, mu, residual, r = trial, trial_mu, trial_residual, trial_r
                step *= 2.0
                break
            step *= 0.5
        else:
            # 刻み幅が下限に達した（丸め誤差の領域）
            return u, mu, residual, iteration, residual <= opts.tol
    return u, mu, residual, opts.max_iter, residual <= opts.tol


def first_eigenpair(form: AssembledForm, opts: EigenOptions | None = None) -> EigenPair:
    """
    lambda_1 = inf_{M_p} rayleigh を複数の乱数初期値からの射影勾配法で計算

    Args:
        form: 組み立て済みの双線形形式
        opts: seed, restarts, tol, max_iter, workers

    Returns:
        EigenPair（J_p = 1、最初の非零成分が正）

    Raises:
        SolverError: 全ての初期値で収束しなかった場合（最良の反復値を report に保持）
    """
    opts = opts or EigenOptions()
    n = form.grid.n
    children = np.random.SeedSequence(opts.seed).spawn(opts.restarts)

    def run(index: int):
        rng = np.random.default_rng(children[index])
        return _descend(form, smoothed_start(rng, n), opts)

    if opts.workers > 1:
        with ThreadPoolExecutor(max_workers=opts.workers) as executor:
            outcomes = list(executor.map(run, range(opts.restarts)))
    else:
        outcomes = [run(index) for index in range(opts.restarts)]

    converged = [i for i, outcome in enumerate(outcomes) if outcome[4]]
    pool = converged or list(range(opts.restarts))
    # 最小値、同値なら再始動番号の小さい方
    chosen = min(pool, key=lambda i: (outcomes[i][1], i))
    u, mu, residual, iterations, ok = outcomes[chosen]

    pair = EigenPair(
        value=float(mu),
        function=form.grid.function(fix_sign(u)),
        residual=float(residual),
        iterations=int(iterations),
        restarts_used=opts.restarts,
        converged=ok,
    )
    if not ok:
        raise SolverError(
            f"first eigenpair did not converge after {opts.max_iter} iterations x "
            f"{opts.restarts} restarts (best residual {residual:.3e})",
            report=pair,
        )
    logger.debug(f"first eigenpair: lambda_1={mu:.12f}, restart={chosen}, residual={residual:.3e}")
    return pair


def spectrum_p2(form: AssembledForm) -> SpectrumP2:
    """
    p = 2 の一般化固有値問題 M w = lambda (h I) w を密行列で解く

    Raises:
        ValueError: p != 2、またはエネルギー行列が対称でない場合
    """
    if form.p != 2:
        raise ValueError(f"the dense spectrum is only available for p = 2, got p={form.p}")
    M = energy_matrix(form)
    scale = max(float(np.max(np.abs(M))), 1.0)
    if not np.allclose(M, M.T, rtol=0.0, atol=1e-12 * scale):
        raise ValueError("energy matrix is not symmetric")
    M = 0.5 * (M + M.T)
    n = form.grid.n
    values, vectors = eigh(M, form.grid.h * np.eye(n))
    functions = [form.grid.function(fix_sign(vectors[:, i])) for i in range(n)]
    return SpectrumP2(values=values, functions=functions, constants=form.constants)


class SphereLandscape:
    """M_p 上の Rayleigh 商（射影勾配と動径レトラクション）"""

    def __init__(self, form: AssembledForm):
        self.form = form
        self.h = form.grid.h
        self.p = form.p

    def values(self, U: np.ndarray) -> np.ndarray:
        return rayleigh_values(self.form, U)

    def gradient(self, u: np.ndarray) -> np.ndarray:
        _, _, r = _residual_values(self.form, u)
        return r / self.h

    def residual(self, u: np.ndarray, gradient: np.ndarray) -> float:
        return self.h ** ((self.p - 1.0) / self.p) * float(np.linalg.norm(gradient * self.h))

    def project(self, u: np.ndarray, direction: np.ndarray) -> np.ndarray:
        normal = odd_power(u, self.p)
        return direction - (np.dot(direction, normal) / np.dot(normal, normal)) * normal

    def retract(self, u: np.ndarray) -> np.ndarray:
        return project_to_manifold(u, self.h, self.p)

    def monitor(self, u: np.ndarray, gradient: np.ndarray) -> float:
        return self.residual(u, gradient)


def second_eigenvalue_heuristic(
    form: AssembledForm, phi1: GridFunction, opts: EigenOptions | None = None
) -> EigenPair:
    """
    phi_1 と -phi_1 を結ぶ M_p 上のパスのミニマックスで lambda_2 を推定

    初期パスは pi_M(cos(pi s) phi_1 + sin(pi s) w)。w は同じ定数で p = 2 に組み立てた形式の
    第2固有関数を phi_1 に直交化したもので、p = 2 ではパスの最高点が最初から第2固有関数になる。
    p != 2 では HEURISTIC ラベル付きで返す。
    """
    ensure_same_grid(form.grid, phi1.grid)
    opts = opts or EigenOptions()
    h = form.grid.h
    p = form.p
    n = form.grid.n
    if n < 2:
        raise ValueError("a sign-changing critical point needs at least two nodes")

    anchor = project_to_manifold(phi1.values, h, p)
    linear = form if p == 2 else assemble_form(form.grid, replace(form.constants, p=2.0))
    w = project_to_manifold(spectrum_p2(linear).functions[1].values, h, p)
    w = w - (np.dot(w, anchor) / np.dot(anchor, anchor)) * anchor
    w = w * (np.linalg.norm(anchor) / np.linalg.norm(w))

    s = np.linspace(0.0, 1.0, opts.path_knots)[:, None]
    knots = project_to_manifold(np.cos(np.pi * s) * anchor + np.sin(np.pi * s) * w, h, p)
    knots[0], knots[-1] = anchor, -anchor

    landscape = SphereLandscape(form)
    result = climb(
        KnotField.path(knots),
        landscape,
        ClimbOptions(
            tol=opts.heuristic_tol,
            max_iter=opts.max_iter,
            initial_step=1.0 / max(abs(float(rayleigh_values(form, anchor))), 1.0),
        ),
    )
    values = fix_sign(result.point)
    mu, residual, _ = _residual_values(form, values)
    pair = EigenPair(
        value=float(mu),
        function=form.grid.function(values),
        residual=float(residual),
        iterations=result.iterations,
        restarts_used=1,
        converged=result.converged,
        heuristic=p != 2,
    )
    if not result.converged:
        raise SolverError(
            f"second eigenvalue path minimax did not converge (best residual {residual:.3e})",
            report=pair,
        )
    logger.debug(f"second eigenvalue estimate: {mu:.10f} (heuristic={p != 2})")
    return pair
