"""
Nontrivial critical points of Phi(u) = (1/p) E_{L,p}(u, u) - int G(u):
mountain pass below lambda_1 and linking between consecutive p = 2 eigenvalues.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .assembly import AssembledForm, seminorm_values
from .eigensolver import (
    EigenOptions,
    SpectrumP2,
    first_eigenpair,
    project_to_manifold,
    smoothed_start,
)
from .errors import ConditionError, LinkingGeometryError, RadiiSelectionError, SolverError
from .functionals import cerami_quantity, phi_arrays, phi_value, rayleigh_values, weak_residual
from .grid import GridFunction, ensure_same_grid, lp_norm_values
from .minimax import ClimbOptions, ClimbResult, KnotField, climb
from .nonlinearity import (
    ConditionReport,
    NonlinearitySpec,
    check_growth_conditions,
    check_lower_power_bound,
)

logger = logging.getLogger(__name__)

_RADIUS_BISECTIONS = 8


@dataclass(frozen=True)
class MinimaxOptions:
    """ミニマックスソルバーの設定"""

    m: int = 33
    tol: float = 1e-8
    max_iter: int = 5000
    seed: int = 0
    relax_sweeps: int = 3
    lambda_margin: float = 1e-6
    gap_tol: float = 1e-6
    nontrivial_floor: float = 1e-6
    rho0: float = 1.0
    rho_min: float = 1e-8
    r_max: float = 1e6
    sphere_samples: int = 16
    arc_points: int = 16
    t_points: int = 17
    eigen: EigenOptions = field(default_factory=EigenOptions)

    def __post_init__(self):
        if self.m < 16:
            raise ValueError(f"path knot count m must be >= 16, got {self.m}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")


@dataclass(frozen=True)
class RadiiTarget:
    """
    半径選択の対象

    Attributes:
        sphere_directions: 球面 S_rho 上で Phi >= 0 を確認する方向 (K, n)
        ray_directions: Phi(R d) <= 0 を要求する方向 (L, n)。先頭が u_1 = R d_0 になる
        lambda_level: lambda_1 または lambda_{k+1}
    """

    sphere_directions: np.ndarray
    ray_directions: np.ndarray
    lambda_level: float


@dataclass(frozen=True)
class PathEnsemble:
    """0 から u_1 へのパス（両端固定のノット列）"""

    endpoints: tuple[GridFunction, GridFunction]
    knots: list[GridFunction] = field(repr=False)

    @property
    def m(self) -> int:
        return len(self.knots)

    @classmethod
    def straight(cls, u1: GridFunction, m: int) -> "PathEnsemble":
        if m < 16:
            raise ValueError(f"path knot count m must be >= 16, got {m}")
        t = np.linspace(0.0, 1.0, m)
        knots = [u1.grid.function(s * u1.values) for s in t]
        return cls((u1.grid.zeros(), u1), knots)

    def as_array(self) -> np.ndarray:
        return np.array([knot.values for knot in self.knots])


@dataclass(frozen=True)
class LinkingGeometry:
    """リンキング集合 A, B とその構成要素"""

    k: int
    A0: np.ndarray = field(repr=False)
    u0: GridFunction = field(repr=False)
    R: float
    rho: float
    lambda_tilde: float
    level: float
    A_samples: np.ndarray = field(repr=False)
    B_samples: np.ndarray = field(repr=False)
    rays: np.ndarray = field(repr=False)
    ray_pinned: np.ndarray = field(repr=False)
    sup_A: float
    inf_B: float
    distance: float
    tol: float = 1e-10
    form: AssembledForm | None = field(default=None, repr=False)

    def in_B0(self, u: GridFunction) -> bool:
        """B_0 の判定: rayleigh(u) >= lambda_{k+1} - tol"""
        if self.form is None:
            raise ValueError("geometry has no attached form")
        return bool(rayleigh_values(self.form, u.values) >= self.level - self.tol)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "R": self.R,
            "rho": self.rho,
            "lambda_tilde": self.lambda_tilde,
            "lambda_k_plus_1": self.level,
            "sup_phi_A": self.sup_A,
            "inf_phi_B": self.inf_B,
            "dist_0_M": self.distance,
            "A0_size": int(len(self.A0)),
            "A_samples": int(len(self.A_samples)),
            "B_samples": int(len(self.B_samples)),
        }


@dataclass(frozen=True)
class SolverReport:
    """臨界点ソルバーの結果"""

    critical_value: float
    solution: GridFunction = field(repr=False)
    residual: float
    phi_at_solution: float
    trace: list[dict] = field(repr=False)
    rho_used: float
    R_used: float
    cerami_monitor: np.ndarray = field(repr=False)
    geometry: LinkingGeometry | None = field(default=None, repr=False)
    endpoint: GridFunction | None = field(default=None, repr=False)
    iterations: int = 0
    converged: bool = False
    mode: str = "mountain-pass"
    p: float = 2.0
    knots: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "converged": self.converged,
            "critical_value": self.critical_value,
            "phi_at_solution": self.phi_at_solution,
            "residual": self.residual,
            "lp_norm": float(
                lp_norm_values(self.solution.values, self.solution.grid.h, self.p)
            ),
            "iterations": self.iterations,
            "rho_used": self.rho_used,
            "R_used": self.R_used,
            "cerami_final": float(self.cerami_monitor[-1, 1]) if len(self.cerami_monitor) else None,
            "geometry": self.geometry.to_dict() if self.geometry is not None else None,
        }


class FlatLandscape:
    """Phi を X^p_0 の離散版上で扱う（制約なし）"""

    def __init__(self, form: AssembledForm, g: NonlinearitySpec):
        self.form = form
        self.g = g
        self.h = form.grid.h

    def values(self, U: np.ndarray) -> np.ndarray:
        return phi_value(self.form, U, self.g)

    def gradient(self, u: np.ndarray) -> np.ndarray:
        _, gradient, _ = phi_arrays(self.form, u, self.g)
        return gradient / self.h

    def residual(self, u: np.ndarray, gradient: np.ndarray) -> float:
        return weak_residual(self.form, u, gradient * self.h)

    def project(self, u: np.ndarray, direction: np.ndarray) -> np.ndarray:
        return direction

    def retract(self, u: np.ndarray) -> np.ndarray:
        return u

    def monitor(self, u: np.ndarray, gradient: np.ndarray) -> float:
        return cerami_quantity(self.form, u, gradient * self.h)


def _operator_step(form: AssembledForm, amplitude: float) -> float:
    """A_p の対角の大きさから初期刻み幅を見積もる"""
    h = form.grid.h
    diagonal = (
        float(np.max(form.kappa))
        + 2.0 * (float(np.sum(form.near_weights)) + float(np.sum(form.far_weights))) / h
        + abs(form.constants.rho)
    )
    scale = (form.p - 1.0) * diagonal * max(amplitude, 1e-3) ** (form.p - 2.0)
    return 1.0 / max(scale, 1e-12)


def _require_conditions(g: NonlinearitySpec) -> ConditionReport:
    report = check_growth_conditions(g)
    if not report.passed:
        raise ConditionError(
            f"nonlinearity {g.kind} fails growth conditions: {', '.join(report.failures())}",
            report=report,
        )
    return report


def choose_radii(
    form: AssembledForm,
    g: NonlinearitySpec,
    target: RadiiTarget,
    opts: MinimaxOptions | None = None,
) -> tuple[float, float, GridFunction]:
    """
    半径 rho と R を選ぶ

    rho は rho_0 2^{-j} を走査し、球面方向で min Phi(rho v / ||v||) >= 0 となる最初の値。
    R は 1 から倍々に増やし、全ての ray 方向で Phi(R d) <= 0 かつ ||R d_0|| > rho となる最初の値を
    直前の失敗値との二分法で詰めたもの。

    Returns:
        (rho, R, u_1 = R d_0)

    Raises:
        RadiiSelectionError: rho_min まで下げても rho が見つからない、または r_max を超えた場合
    """
    opts = opts or MinimaxOptions()
    h = form.grid.h
    directions = np.atleast_2d(np.asarray(target.sphere_directions, dtype=float))
    norms = seminorm_values(form, directions)
    if np.any(norms <= 0):
        raise ValueError("sphere directions must have positive seminorm")
    unit = directions / norms[:, None]

    rho = opts.rho0
    sphere_min = math.nan
    while rho >= opts.rho_min:
        sphere_min = float(np.min(phi_value(form, rho * unit, g)))
        if sphere_min >= 0:
            break
        rho *= 0.5
    else:
        raise RadiiSelectionError(
            f"no sphere radius down to {opts.rho_min} keeps Phi >= 0 "
            f"(last infimum {sphere_min:.3e}); is lambda below lambda_level={target.lambda_level}?"
        )

    rays = np.atleast_2d(np.asarray(target.ray_directions, dtype=float))
    ray_norm = float(seminorm_values(form, rays[0]))

    def ray_ok(radius: float) -> tuple[bool, float]:
        top = float(np.max(phi_value(form, radius * rays, g)))
        return top <= 0 and radius * ray_norm > rho, top

    R = 1.0
    ray_max = math.nan
    while R <= opts.r_max:
        ok, ray_max = ray_ok(R)
        if ok:
            break
        R *= 2.0
    else:
        raise RadiiSelectionError(
            f"no R up to {opts.r_max} gives Phi(R u0) <= 0 (last maximum {ray_max:.3e})"
        )
    if R > 1.0:
        # 最後に失敗した R/2 との間を二分して R を詰める
        low = 0.5 * R
        for _ in range(_RADIUS_BISECTIONS):
            middle = 0.5 * (low + R)
            ok, top = ray_ok(middle)
            if ok:
                R, ray_max = middle, top
            else:
                low = middle

    eps = (
        (target.lambda_level - g.lam) / (target.lambda_level + 1.0)
        if target.lambda_level > -1
        else math.nan
    )
    logger.debug(
        f"radii chosen: rho={rho:.3e}, R={R:.3e}, sphere min={sphere_min:.3e}, "
        f"ray max={ray_max:.3e}, eps={eps:.3e}, h={h:.3e}"
    )
    return rho, R, form.grid.function(R * rays[0])


def _sphere_directions(form: AssembledForm, anchors: list[np.ndarray], count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(2)[1])
    randoms = [smoothed_start(rng, form.grid.n) for _ in range(count)]
    return np.array(anchors + randoms)


def _finish(
    form: AssembledForm,
    g: NonlinearitySpec,
    result: ClimbResult,
    opts: MinimaxOptions,
    rho: float,
    R: float,
    mode: str,
    geometry: LinkingGeometry | None = None,
    endpoint: GridFunction | None = None,
) -> SolverReport:
    solution = result.point
    value, gradient, _ = phi_arrays(form, solution, g)
    residual = weak_residual(form, solution, gradient)
    norm = float(lp_norm_values(solution, form.grid.h, form.p))
    report = SolverReport(
        critical_value=float(value),
        solution=form.grid.function(solution),
        residual=residual,
        phi_at_solution=float(value),
        trace=result.trace,
        rho_used=rho,
        R_used=R,
        cerami_monitor=np.array(result.monitor, dtype=float).reshape(-1, 2),
        geometry=geometry,
        endpoint=endpoint,
        iterations=result.iterations,
        converged=result.converged,
        mode=mode,
        p=form.p,
        knots=result.knots,
    )

    if norm <= opts.nontrivial_floor and float(np.max(result.values)) <= opts.tol:
        raise SolverError("path collapsed toward the trivial solution u = 0", report=report)
    if not result.converged:
        raise SolverError(
            f"{mode} did not converge in {result.iterations} iterations "
            f"(best residual {result.residual:.3e})",
            report=report,
        )
    if norm <= opts.nontrivial_floor or value < -opts.tol:
        raise SolverError(
            f"{mode} converged to a trivial point (lp_norm={norm:.3e}, Phi={value:.3e})",
            report=report,
        )
    if norm <= rho / 2:
        logger.warning(f"solution norm {norm:.3e} is below rho/2 = {rho / 2:.3e}")
    return report


def mountain_pass(
    form: AssembledForm,
    g: NonlinearitySpec,
    opts: MinimaxOptions | None = None,
    endpoint: GridFunction | None = None,
) -> SolverReport:
    """
    lambda < lambda_1 の場合の峠の補題によるミニマックス

    直線パス 0 -> u_1 から始め、最高ノットの登り降りと隣接ノットの緩和を繰り返す。

    Args:
        form: 組み立て済みの双線形形式
        g: (g1)-(g3) を満たす非線形項
        opts: 設定
        endpoint: u_1 を直接与える場合（省略時は choose_radii で決める）

    Returns:
        SolverReport

    Raises:
        ConditionError: (g1)-(g3) の不成立、または lambda >= lambda_1 - margin
        SolverError: 収束しない、またはパスが 0 に潰れた場合
    """
    opts = opts or MinimaxOptions()
    conditions = _require_conditions(g)
    lam = conditions.g1_limit
    eig = first_eigenpair(form, opts.eigen)
    if lam >= eig.value - opts.lambda_margin:
        raise ConditionError(
            f"mountain pass requires lambda < lambda_1 - margin, got lambda={lam:.6g}, "
            f"lambda_1={eig.value:.6g}",
            report=conditions,
        )

    phi1 = eig.function.values
    directions = _sphere_directions(form, [phi1], opts.sphere_samples, opts.seed)
    rho, R, u1 = choose_radii(form, g, RadiiTarget(directions, phi1[None, :], eig.value), opts)
    if endpoint is not None:
        ensure_same_grid(form.grid, endpoint.grid)
        u1 = endpoint

    path = PathEnsemble.straight(u1, opts.m)
    amplitude = float(np.max(np.abs(u1.values)))
    result = climb(
        KnotField.path(path.as_array()),
        FlatLandscape(form, g),
        ClimbOptions(
            tol=opts.tol,
            max_iter=opts.max_iter,
            relax_sweeps=opts.relax_sweeps,
            initial_step=_operator_step(form, amplitude),
        ),
    )
    report = _finish(form, g, result, opts, rho, R, "mountain-pass", endpoint=u1)
    logger.debug(f"mountain pass: c={report.critical_value:.10g}, residual={report.residual:.3e}")
    return report


def _A0_samples(spectrum: SpectrumP2, k: int, h: float, opts: MinimaxOptions) -> np.ndarray:
    """最初の k 個の固有関数の張る空間の単位球面の対称メッシュ（M_2 へ射影）"""
    basis = np.array([spectrum.functions[i].values for i in range(k)])
    if k == 1:
        coefficients = np.array([[1.0], [-1.0]])
    elif k == 2:
        angles = np.pi * np.arange(2 * opts.arc_points) / opts.arc_points
        coefficients = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    else:
        rng = np.random.default_rng(np.random.SeedSequence(opts.seed).spawn(3)[2])
        half = rng.standard_normal((opts.sphere_samples, k))
        half /= np.linalg.norm(half, axis=1, keepdims=True)
        coefficients = np.concatenate([half, -half])
    return project_to_manifold(coefficients @ basis, h, 2.0)


def _ray_neighbors(rays: np.ndarray, count: int) -> list[tuple[int, ...]]:
    distances = np.linalg.norm(rays[:, None, :] - rays[None, :, :], axis=-1)
    np.fill_diagonal(distances, np.inf)
    order = np.argsort(distances, axis=1, kind="stable")
    return [tuple(int(j) for j in row[:count]) for row in order]


def build_linking_geometry_p2(
    form: AssembledForm,
    spectrum: SpectrumP2,
    k: int,
    lambda_tilde: float,
    g: NonlinearitySpec,
    opts: MinimaxOptions | None = None,
) -> LinkingGeometry:
    """
    lambda_k < lambda_tilde <= lambda < lambda_{k+1} (p = 2) のリンキング幾何を構成

    A_0 は最初の k 個の固有関数の張る空間の M_2 上の対称サンプル、u_0 = pi_M(phi_{k+1})、
    B のサンプルは第 k 固有空間までと D 直交な方向の rho 球面上の点。
    サンプル上で sup Phi(A) <= inf Phi(B) を確認する。

    Raises:
        ValueError: p != 2 または k の範囲外
        ConditionError: G(t) >= (lambda_tilde/p)|t|^p がサンプル上で成り立たない場合
        LinkingGeometryError: スペクトルギャップ不足、または sup Phi(A) > inf Phi(B)
    """
    opts = opts or MinimaxOptions()
    if form.p != 2:
        raise ValueError(
            f"linking geometry needs exact eigenspaces (p = 2); use mountain_pass for p={form.p}"
        )
    n = form.grid.n
    h = form.grid.h
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < n, got k={k}, n={n}")
    lam_k, lam_next = float(spectrum.values[k - 1]), float(spectrum.values[k])
    if lam_next - lam_k < opts.gap_tol:
        raise LinkingGeometryError(
            f"spectral gap lambda_{k + 1} - lambda_{k} = {lam_next - lam_k:.3e} is too small"
        )
    if not (lam_k + opts.gap_tol <= lambda_tilde <= g.lam < lam_next - opts.gap_tol):
        raise LinkingGeometryError(
            f"need lambda_{k} < lambda_tilde <= lambda < lambda_{k + 1} with gaps >= {opts.gap_tol}: "
            f"{lam_k:.6g} < {lambda_tilde:.6g} <= {g.lam:.6g} < {lam_next:.6g}"
        )
    holds, worst_t, worst_slack = check_lower_power_bound(g, lambda_tilde)
    if not holds:
        raise ConditionError(
            f"condition G(t) >= (lambda_tilde/p)|t|^p fails at t={worst_t:.3e} (slack {worst_slack:.3e})"
        )

    A0 = _A0_samples(spectrum, k, h, opts)
    u0 = project_to_manifold(spectrum.functions[k].values, h, 2.0)

    # B の方向: u_0, 高次の固有関数, 最初の k 個の固有空間と D 直交化した乱数
    low = np.array([spectrum.functions[i].values for i in range(k)])
    rng = np.random.default_rng(np.random.SeedSequence(opts.seed).spawn(4)[3])
    randoms = np.array([smoothed_start(rng, n) for _ in range(opts.sphere_samples)])
    randoms = randoms - (h * randoms @ low.T) @ low
    higher = [spectrum.functions[i].values for i in range(k + 1, min(k + 4, n))]
    b_directions = np.array([u0, *higher, *randoms])

    # A の弧: R pi_M((1 - s) a + s u_0)、s = 0 は線分の端点 R a
    s = np.linspace(0.0, 1.0, opts.arc_points)[:, None]
    arcs = [project_to_manifold((1.0 - s) * a + s * u0, h, 2.0) for a in A0]
    rays = np.concatenate([arcs[0]] + [arc[:-1] for arc in arcs[1:]])
    ray_pinned = np.zeros(len(rays), dtype=bool)
    ray_pinned[0] = True
    for index in range(1, len(arcs)):
        ray_pinned[len(arcs[0]) + (index - 1) * (opts.arc_points - 1)] = True

    rho, R, _ = choose_radii(
        form, g, RadiiTarget(b_directions, np.concatenate([u0[None, :], rays]), lam_next), opts
    )
    distance = 0.9 * float(np.min(seminorm_values(form, np.concatenate([A0, u0[None, :]]))))
    while rho >= R * distance:
        R *= 2.0
        if R > opts.r_max:
            raise LinkingGeometryError(f"cannot achieve rho < R dist(0, M) below R = {opts.r_max}")

    t = np.linspace(0.0, 1.0, opts.t_points)[:, None, None]
    segments = (R * t * A0[None, :, :]).reshape(-1, n)
    A_samples = np.concatenate([segments, R * rays])
    b_norms = seminorm_values(form, b_directions)
    B_samples = rho * b_directions / b_norms[:, None]

    phi_A = phi_value(form, A_samples, g)
    phi_B = phi_value(form, B_samples, g)
    sup_A, inf_B = float(np.max(phi_A)), float(np.min(phi_B))
    if sup_A > inf_B:
        worst = int(np.argmax(phi_A))
        raise LinkingGeometryError(
            f"sup Phi(A) = {sup_A:.3e} exceeds inf Phi(B) = {inf_B:.3e}",
            sample_index=worst,
            values=(sup_A, inf_B),
        )

    logger.debug(f"linking geometry: k={k}, R={R:.3e}, rho={rho:.3e}, sup A={sup_A:.3e}, inf B={inf_B:.3e}")
    return LinkingGeometry(
        k=k,
        A0=A0,
        u0=form.grid.function(u0),
        R=R,
        rho=rho,
        lambda_tilde=float(lambda_tilde),
        level=lam_next,
        A_samples=A_samples,
        B_samples=B_samples,
        rays=R * rays,
        ray_pinned=ray_pinned,
        sup_A=sup_A,
        inf_B=inf_B,
        distance=distance,
        form=form,
    )


def cone_field(geometry: LinkingGeometry, t_points: int) -> KnotField:
    """
    錐 X = {t u : u in A} のノット場（ray ごとに t 方向のノット列）

    t = 0, t = 1 と、線分上にある ray（R a, a in A_0）のノットは A 上にあるので固定。
    """
    rays = geometry.rays
    count, n = rays.shape
    t = np.linspace(0.0, 1.0, t_points)
    knots = (t[None, :, None] * rays[:, None, :]).reshape(-1, n)
    pinned = np.zeros((count, t_points), dtype=bool)
    pinned[:, 0] = True
    pinned[:, -1] = True
    pinned[geometry.ray_pinned, :] = True

    across = _ray_neighbors(rays, 2 * geometry.k)
    neighbors: list[tuple[int, ...]] = []
    for r in range(count):
        for j in range(t_points):
            along = [r * t_points + jj for jj in (j - 1, j + 1) if 0 <= jj < t_points]
            side = [other * t_points + j for other in across[r]]
            neighbors.append(tuple(along + side))
    return KnotField(knots, pinned.reshape(-1), neighbors, dimension=geometry.k + 1)


def solve_linking(
    form: AssembledForm,
    g: NonlinearitySpec,
    geometry: LinkingGeometry,
    opts: MinimaxOptions | None = None,
) -> SolverReport:
    """
    リンキングのミニマックス（錐のノット場を A 上で固定して変形）

    成功条件は mountain_pass と同じに加えて c >= inf Phi(B) - tol。
    """
    opts = opts or MinimaxOptions()
    _require_conditions(g)
    holds, worst_t, _ = check_lower_power_bound(g, geometry.lambda_tilde)
    if not holds:
        raise ConditionError(
            f"lower power bound G(t) >= (lambda_tilde/p)|t|^p fails at t={worst_t:.3e} "
            f"for lambda_tilde={geometry.lambda_tilde}"
        )

    field_ = cone_field(geometry, opts.t_points)
    amplitude = float(np.max(np.abs(geometry.rays)))
    result = climb(
        field_,
        FlatLandscape(form, g),
        ClimbOptions(
            tol=opts.tol,
            max_iter=opts.max_iter,
            relax_sweeps=opts.relax_sweeps,
            initial_step=_operator_step(form, amplitude),
            redistribute_every=0,
        ),
    )
    report = _finish(form, g, result, opts, geometry.rho, geometry.R, "linking", geometry=geometry)
    if report.critical_value < geometry.inf_B - opts.tol:
        raise SolverError(
            f"critical value {report.critical_value:.6e} is below inf Phi(B) = {geometry.inf_B:.6e}",
            report=report,
        )
    return report

