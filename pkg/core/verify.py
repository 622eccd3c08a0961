"""
Inequality harness: the logarithmic Sobolev inequality, the operator-split bounds, the
corollary estimates and the asymptotics of Phi at the origin, evaluated over seeded ensembles.
"""

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field, replace
from enum import StrEnum

import numpy as np
import polars as pl
from scipy.special import xlogy

from .assembly import (
    AssembledForm,
    assemble_form,
    energy_values,
    near_pairing,
    remainder_pairing,
    seminorm_values,
)
from .eigensolver import smoothed_start
from .functionals import phi_value, rayleigh_values
from .grid import Grid, GridFunction, lp_norm_values, refine_grid
from .nonlinearity import NonlinearitySpec

logger = logging.getLogger(__name__)

# 表示する最悪サンプル数
_WORST = 5


class Recipe(StrEnum):
    SMOOTHED_GAUSSIAN = "smoothed-gaussian"
    BUMPS = "bumps"
    MIXED = "mixed"


@dataclass(frozen=True, eq=False)
class Ensemble:
    """シード付きの乱数関数の集合（(count, n) 配列）"""

    grid: Grid
    functions: np.ndarray = field(repr=False)
    seed: int
    recipe: Recipe

    def __len__(self) -> int:
        return len(self.functions)

    def members(self) -> list[GridFunction]:
        return [self.grid.function(values) for values in self.functions]


@dataclass(frozen=True)
class VerifyOptions:
    delta: float = 0.5
    gamma: float = 0.75
    abs_tol: float = 1e-10
    drift_threshold: float = 0.25
    decay_factor: float = 1e-3
    refine: bool = True
    rho_list: tuple[float, ...] = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5)
    corollary2_rhos: tuple[float, ...] = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
    origin_decay: float = 0.05

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if not 0 < self.gamma < 1:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")


@dataclass(frozen=True)
class InequalityReport:
    """
    不等式検査の結果

    per_sample は (lhs, rhs, slack) の行。slack = rhs - lhs で、rhs は宣言した定数を含む。
    """

    name: str
    per_sample: np.ndarray = field(repr=False)
    empirical_constant: float
    refinement_drift: float | None
    passed: bool
    parameters: dict[str, float | str | list[float]] = field(default_factory=dict)

    def worst(self, count: int = _WORST) -> list[dict]:
        order = np.argsort(self.per_sample[:, 2], kind="stable")[:count]
        return [
            {
                "sample": int(i),
                "lhs": float(self.per_sample[i, 0]),
                "rhs": float(self.per_sample[i, 1]),
                "slack": float(self.per_sample[i, 2]),
            }
            for i in order
        ]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "empirical_constant": self.empirical_constant,
            "refinement_drift": self.refinement_drift,
            "parameters": self.parameters,
            "samples": int(len(self.per_sample)),
            "worst": self.worst(),
        }

    def to_frame(self) -> pl.DataFrame:
        return pl.DataFrame(
            {
                "sample": np.arange(len(self.per_sample)),
                "lhs": self.per_sample[:, 0],
                "rhs": self.per_sample[:, 1],
                "slack": self.per_sample[:, 2],
            }
        )


# ---------------------------------------------------------------------------
# アンサンブル
# ---------------------------------------------------------------------------


def _bump(x: np.ndarray, center: float, width: float) -> np.ndarray:
    return np.exp(-(((x - center) / width) ** 2))


def _boundary_bump(rng: np.random.Generator, grid: Grid) -> np.ndarray:
    h = grid.h
    distance = rng.uniform(1.0, 5.0) * h
    center = grid.a + distance if rng.random() < 0.5 else grid.b - distance
    width = max(rng.uniform(0.02, 0.08) * grid.length, h)
    return _bump(grid.nodes, center, width)


def _random_bumps(rng: np.random.Generator, grid: Grid) -> np.ndarray:
    values = np.zeros(grid.n)
    for _ in range(int(rng.integers(1, 4))):
        center = rng.uniform(grid.a, grid.b)
        width = rng.uniform(2.0 * grid.h, max(grid.length / 4.0, 2.0 * grid.h))
        values += rng.standard_normal() * _bump(grid.nodes, center, width)
    return values


def _force_sign_change(values: np.ndarray) -> np.ndarray:
    if values.size < 2 or (np.any(values > 0) and np.any(values < 0)):
        return values
    half = values.size // 2
    magnitude = np.abs(values)
    return np.concatenate([-magnitude[:half], magnitude[half:]])


def sample_ensemble(grid: Grid, count: int, seed: int, recipe: str = "mixed") -> Ensemble:
    """
    シード付き乱数関数の集合を作成

    i % 10 == 0 の要素は境界から 5h 以内に集中したバンプ、i % 10 == 1 の要素は符号を変える。
    細分化グリッドで同じシードを使うと同じ乱数列から再標本化される（値は一致しない）。

    Args:
        grid: グリッド
        count: 要素数 (>= 1)
        seed: シード
        recipe: "smoothed-gaussian", "bumps", "mixed"
    """
    if count < 1:
        raise ValueError(f"ensemble size must be >= 1, got {count}")
    recipe = Recipe(recipe)
    children = np.random.SeedSequence(seed).spawn(count)
    functions = np.empty((count, grid.n))
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        if i % 10 == 0:
            values = _boundary_bump(rng, grid)
        elif recipe is Recipe.SMOOTHED_GAUSSIAN or (recipe is Recipe.MIXED and rng.random() < 0.5):
            values = smoothed_start(rng, grid.n)
        else:
            values = _random_bumps(rng, grid)
        if i % 10 == 1:
            values = _force_sign_change(values)
        if not np.any(values):
            values[grid.n // 2] = 1.0
        functions[i] = values * 10.0 ** rng.uniform(-2.0, 2.0)
    functions.setflags(write=False)
    return Ensemble(grid=grid, functions=functions, seed=seed, recipe=recipe)


# ---------------------------------------------------------------------------
# 共通処理
# ---------------------------------------------------------------------------


def drift(coarse: float, fine: float) -> float:
    """|C_fine - C_coarse| / max(|C_coarse|, |C_fine|, 1)"""
    return abs(fine - coarse) / max(abs(coarse), abs(fine), 1.0)


def _report(
    name: str,
    lhs: np.ndarray,
    rhs: np.ndarray,
    constant: float,
    opts: VerifyOptions,
    parameters: dict | None = None,
) -> InequalityReport:
    slack = rhs - lhs
    per_sample = np.column_stack([lhs, rhs, slack])
    passed = bool(
        math.isfinite(constant)
        and np.all(np.isfinite(per_sample))
        and np.all(slack >= -opts.abs_tol)
    )
    return InequalityReport(
        name=name,
        per_sample=per_sample,
        empirical_constant=float(constant),
        refinement_drift=None,
        passed=passed,
        parameters=parameters or {},
    )


def _with_refinement(
    report: InequalityReport,
    form: AssembledForm,
    ensemble: Ensemble,
    check: Callable[[AssembledForm, Ensemble], InequalityReport],
    opts: VerifyOptions,
) -> InequalityReport:
    """n -> 2n + 1 で同じシードから再標本化し、定数のドリフトを付与"""
    if not opts.refine:
        return report
    fine_grid = refine_grid(form.grid)
    fine_form = assemble_form(fine_grid, form.constants)
    fine = check(fine_form, sample_ensemble(fine_grid, len(ensemble), ensemble.seed, ensemble.recipe))
    value = drift(report.empirical_constant, fine.empirical_constant)
    parameters = dict(report.parameters, fine_constant=fine.empirical_constant)
    return replace(
        report,
        refinement_drift=value,
        passed=report.passed and value <= opts.drift_threshold,
        parameters=parameters,
    )


def _power_sum(form: AssembledForm, U: np.ndarray) -> np.ndarray:
    """||u||_p^p"""
    return form.grid.h * np.sum(np.abs(U) ** form.p, axis=-1)


def _log_integral(form: AssembledForm, U: np.ndarray) -> np.ndarray:
    """int |u|^p ln|u|（0 ln 0 = 0）"""
    A = np.abs(U)
    return form.grid.h * np.sum(xlogy(A**form.p, A), axis=-1)


# ---------------------------------------------------------------------------
# 対数 Sobolev 不等式
# ---------------------------------------------------------------------------


def log_sobolev_required(form: AssembledForm, U: np.ndarray) -> np.ndarray:
    """
    各サンプルで必要な定数

    k0_req(u) = [(p^2/N) int |u|^p ln|u| - E(u, u) - (p^2/N) ||u||_p^p ln||u||_p] / ||u||_p^p
    """
    p = form.p
    N = form.constants.N
    S = _power_sum(form, U)
    E = energy_values(form, U, U)
    # ln ||u||_p = ln(S) / p
    return ((p * p / N) * _log_integral(form, U) - E - (p / N) * S * np.log(S)) / S


def check_log_sobolev(
    form: AssembledForm, ensemble: Ensemble, opts: VerifyOptions | None = None
) -> InequalityReport:
    """
    対数 Sobolev 不等式の経験定数 k0 = max k0_req

    per_sample は ||u||_p^p で割った形（lhs = k0_req, rhs = k0 + abs_tol）。
    """
    opts = opts or VerifyOptions()
    U = ensemble.functions
    required = log_sobolev_required(form, U)
    constant = float(np.max(required))
    scale = np.maximum(1.0, np.abs(required))
    invariance = max(
        float(np.max(np.abs(log_sobolev_required(form, s * U) - required) / scale)) for s in (0.1, 10.0)
    )
    report = _report(
        "log_sobolev",
        required,
        np.full_like(required, constant + opts.abs_tol),
        constant,
        opts,
        {"p": form.p, "scale_invariance_error": invariance},
    )
    return _with_refinement(
        report, form, ensemble, lambda f, e: check_log_sobolev(f, e, replace(opts, refine=False)), opts
    )


# ---------------------------------------------------------------------------
# 作用素分解の評価
# ---------------------------------------------------------------------------


def lemma1_ratio(form: AssembledForm, U: np.ndarray) -> np.ndarray:
    """|E(u, u) - (1/2)[u]^p| / ||u||_p^p"""
    half_seminorm = near_pairing(form, U, U)
    return np.abs(energy_values(form, U, U) - half_seminorm) / _power_sum(form, U)


def lemma2_ratio(form: AssembledForm, U: np.ndarray, V: np.ndarray) -> np.ndarray:
    """|<A_p'' u, v>| / (||u||_p^{p-1} ||v||_p)"""
    h = form.grid.h
    p = form.p
    denominator = lp_norm_values(U, h, p) ** (p - 1.0) * lp_norm_values(V, h, p)
    return np.abs(remainder_pairing(form, U, V)) / denominator


def remainder_bound(form: AssembledForm) -> float:
    """
    lemma 比の事前上界 |rho| + (2^{p-1} + 1) S

    S は遠方ペアの重みの行和の最大値 max_i sum_j w_ij / h。Holder の不等式から
    |<A_p'' u, v>| <= (|rho| + (2^{p-1} + 1) S) ||u||_p^{p-1} ||v||_p。
    """
    rows = np.zeros(form.grid.n)
    for k, weight in zip(form.far_offsets, form.far_weights):
        rows[k:] += weight
        rows[:-k] += weight
    spread = float(np.max(rows, initial=0.0)) / form.grid.h
    return abs(form.constants.rho) + (2.0 ** (form.p - 1.0) + 1.0) * spread


def _lemma1(form: AssembledForm, ensemble: Ensemble, opts: VerifyOptions) -> InequalityReport:
    U = ensemble.functions
    ratio = lemma1_ratio(form, U)
    constant = float(np.max(ratio))
    invariance = float(np.max(np.abs(lemma1_ratio(form, 3.0 * U) - ratio) / np.maximum(1.0, ratio)))
    bound = remainder_bound(form)
    return _report(
        "lemma1",
        ratio,
        np.full_like(ratio, bound),
        constant,
        opts,
        {"p": form.p, "scale_invariance_error": invariance, "bound": bound},
    )


def _lemma2(form: AssembledForm, ensemble: Ensemble, opts: VerifyOptions) -> InequalityReport:
    U = ensemble.functions
    first, second = (U[:-1], U[1:]) if len(U) > 1 else (U, U)
    ratio = lemma2_ratio(form, first, second)
    constant = float(np.max(ratio))
    scaled = lemma2_ratio(form, 3.0 * first, 0.5 * second)
    invariance = float(np.max(np.abs(scaled - ratio) / np.maximum(1.0, ratio)))
    bound = remainder_bound(form)
    return _report(
        "lemma2",
        ratio,
        np.full_like(ratio, bound),
        constant,
        opts,
        {"p": form.p, "scale_invariance_error": invariance, "bound": bound},
    )


def check_lemma_bounds(
    form: AssembledForm, ensemble: Ensemble, opts: VerifyOptions | None = None
) -> tuple[InequalityReport, InequalityReport]:
    """
    |E(u, u) - (1/2)[u]^p| <= C ||u||_p^p と |<A_p'' u, v>| <= C ||u||_p^{p-1} ||v||_p の経験定数

    lemma2 のペアは連続する要素 (u_i, u_{i+1})。各比は remainder_bound と比較する。
    """
    opts = opts or VerifyOptions()
    coarse = replace(opts, refine=False)
    reports = []
    for check in (_lemma1, _lemma2):
        report = check(form, ensemble, coarse)
        reports.append(
            _with_refinement(report, form, ensemble, lambda f, e, c=check: c(f, e, coarse), opts)
        )
    return reports[0], reports[1]


# ---------------------------------------------------------------------------
# 系
# ---------------------------------------------------------------------------


def _unit_seminorm(form: AssembledForm, U: np.ndarray) -> np.ndarray:
    return U / seminorm_values(form, U)[:, None]


def corollary2_ratios(
    form: AssembledForm, U: np.ndarray, gamma: float, rhos: tuple[float, ...]
) -> np.ndarray:
    """r(rho) = int |rho v|^p (ln(1 + |rho v|))^gamma / rho^p（||v|| = 1、行がサンプル、列が rho）"""
    p = form.p
    h = form.grid.h
    V = _unit_seminorm(form, U)
    columns = []
    for rho in rhos:
        A = np.abs(rho * V)
        columns.append(h * np.sum(A**p * np.log1p(A) ** gamma, axis=-1) / rho**p)
    return np.column_stack(columns)


def _corollary1(form: AssembledForm, ensemble: Ensemble, opts: VerifyOptions) -> InequalityReport:
    U = ensemble.functions
    p = form.p
    A = np.abs(U)
    lhs = form.grid.h * np.sum(np.abs(xlogy(A**p, A)), axis=-1)
    seminorm_p = 2.0 * near_pairing(form, U, U)
    norm = lp_norm_values(U, form.grid.h, p)
    denominator = seminorm_p + norm ** (p + opts.delta) + 1.0
    ratio = lhs / denominator
    constant = float(np.max(ratio))
    return _report(
        "corollary1",
        ratio,
        np.full_like(ratio, constant + opts.abs_tol),
        constant,
        opts,
        {"p": p, "delta": opts.delta},
    )


def _corollary2(form: AssembledForm, ensemble: Ensemble, opts: VerifyOptions) -> InequalityReport:
    ratios = corollary2_ratios(form, ensemble.functions, opts.gamma, opts.corollary2_rhos)
    monotone = np.all(np.diff(ratios, axis=1) <= 0, axis=1)
    decay = ratios[:, -1] / ratios[:, 0]
    rhs = np.full_like(decay, opts.decay_factor)
    # 単調でないサンプルは不合格として slack を負にする
    lhs = np.where(monotone, decay, opts.decay_factor + 1.0)
    return _report(
        "corollary2",
        lhs,
        rhs,
        float(np.max(decay)),
        opts,
        {"gamma": opts.gamma, "decay_factor": opts.decay_factor, "rhos": list(opts.corollary2_rhos)},
    )


def corollary3_ratio(form: AssembledForm, U: np.ndarray) -> np.ndarray:
    """||u||_p = 1 に正規化して int_{|u| > 1} |u|^p ln|u| / [u]^p"""
    p = form.p
    W = U / lp_norm_values(U, form.grid.h, p)[:, None]
    A = np.abs(W)
    lhs = form.grid.h * np.sum(np.where(A > 1.0, xlogy(A**p, A), 0.0), axis=-1)
    return lhs / (2.0 * near_pairing(form, W, W))


def _corollary3(form: AssembledForm, ensemble: Ensemble, opts: VerifyOptions) -> InequalityReport:
    ratio = corollary3_ratio(form, ensemble.functions)
    constant = float(np.max(ratio))
    return _report(
        "corollary3",
        ratio,
        np.full_like(ratio, constant + opts.abs_tol),
        constant,
        opts,
        {"p": form.p},
    )


def check_corollaries(
    form: AssembledForm,
    ensemble: Ensemble,
    delta: float | None = None,
    gamma: float | None = None,
    opts: VerifyOptions | None = None,
) -> tuple[InequalityReport, InequalityReport, InequalityReport]:
    """
    系 1-3 の経験的検査

    Args:
        delta: 系 1 の delta (> 0)
        gamma: 系 2 の gamma in (0, 1)
    """
    opts = opts or VerifyOptions()
    opts = replace(
        opts,
        delta=opts.delta if delta is None else delta,
        gamma=opts.gamma if gamma is None else gamma,
    )
    coarse = replace(opts, refine=False)
    reports = []
    for check in (_corollary1, _corollary2, _corollary3):
        report = check(form, ensemble, coarse)
        reports.append(
            _with_refinement(report, form, ensemble, lambda f, e, c=check: c(f, e, coarse), opts)
        )
    return tuple(reports)


# ---------------------------------------------------------------------------
# 原点での漸近挙動と球面下界
# ---------------------------------------------------------------------------


def origin_errors(
    form: AssembledForm, g: NonlinearitySpec, U: np.ndarray, rho_list: tuple[float, ...]
) -> np.ndarray:
    """e(rho) = |Phi(rho v) - (1/p) E(rho v, rho v) + (lambda/p) ||rho v||_p^p| / rho^p（||v|| = 1）"""
    p = form.p
    h = form.grid.h
    V = _unit_seminorm(form, U)
    columns = []
    for rho in rho_list:
        W = rho * V
        potential = h * np.sum(g.G(W), axis=-1)
        columns.append(np.abs(g.lam / p * _power_sum(form, W) - potential) / rho**p)
    return np.column_stack(columns)


def check_origin_asymptotics(
    form: AssembledForm,
    g: NonlinearitySpec,
    rho_list: tuple[float, ...] | None = None,
    ensemble: Ensemble | None = None,
    opts: VerifyOptions | None = None,
) -> InequalityReport:
    """
    Phi(u) = (1/p) E(u, u) - (lambda/p) ||u||_p^p + o(||u||^p) の検査

    e(rho) が rho_list に沿って非増加で、最後の値が最初の値の origin_decay 倍未満なら合格。
    """
    opts = opts or VerifyOptions()
    rho_list = tuple(rho_list or opts.rho_list)
    if any(b >= a for a, b in zip(rho_list, rho_list[1:])):
        raise ValueError(f"rho_list must be strictly decreasing, got {rho_list}")
    ensemble = ensemble or sample_ensemble(form.grid, 20, 0, "mixed")
    errors = origin_errors(form, g, ensemble.functions, rho_list)
    # abs_tol までの増加は丸め誤差として許容
    monotone = np.all(np.diff(errors, axis=1) <= opts.abs_tol, axis=1)
    lhs = np.where(monotone, errors[:, -1], errors[:, 0] + 1.0)
    rhs = opts.origin_decay * errors[:, 0]
    scale = np.maximum(errors[:, 0], opts.abs_tol)
    return _report(
        "origin_asymptotics",
        lhs,
        rhs,
        float(np.max(errors[:, -1] / scale)),
        opts,
        {"lambda": g.lam, "rho_list": list(rho_list), "decay": opts.origin_decay},
    )


def check_sphere_lower_bound(
    form: AssembledForm,
    g: NonlinearitySpec,
    lambda_level: float,
    rho: float,
    ensemble: Ensemble,
    opts: VerifyOptions | None = None,
) -> InequalityReport:
    """
    球面下界 Phi(rho u / ||u||) >= (rho / ||u||)^p [(1 - eps) I(u) - (lambda + eps)] を u in M_p で検査

    eps = (lambda_level - lambda) / (lambda_level + 1)（lambda_level > -1 のとき）。
    """
    opts = opts or VerifyOptions()
    if lambda_level <= -1:
        raise ValueError(f"lambda_level must exceed -1, got {lambda_level}")
    p = form.p
    eps = (lambda_level - g.lam) / (lambda_level + 1.0)
    U = ensemble.functions
    M = U * (p / _power_sum(form, U))[:, None] ** (1.0 / p)
    norms = seminorm_values(form, M)
    lhs = phi_value(form, rho * M / norms[:, None], g)
    quotient = rayleigh_values(form, M)
    rhs = (rho / norms) ** p * ((1.0 - eps) * quotient - (g.lam + eps))
    # per_sample は (rhs, lhs) の順で、slack = Phi - 下界
    return _report(
        "sphere_lower_bound",
        rhs,
        lhs,
        eps,
        opts,
        {"rho": rho, "eps": eps, "lambda_level": lambda_level},
    )


# ---------------------------------------------------------------------------
# 一括実行
# ---------------------------------------------------------------------------


def run_suite(
    form: AssembledForm,
    ensemble: Ensemble,
    g: NonlinearitySpec | None = None,
    opts: VerifyOptions | None = None,
) -> list[InequalityReport]:
    """全ての不等式検査を決められた順序で実行"""
    opts = opts or VerifyOptions()
    reports = [check_log_sobolev(form, ensemble, opts)]
    reports.extend(check_lemma_bounds(form, ensemble, opts))
    reports.extend(check_corollaries(form, ensemble, opts=opts))
    if g is not None:
        reports.append(check_origin_asymptotics(form, g, opts.rho_list, ensemble, opts))
    for report in reports:
        logger.debug(f"{report.name}: constant={report.empirical_constant:.6e}, passed={report.passed}")
    return reports
