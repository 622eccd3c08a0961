"""
Nonlinearities g with primitives G, and numerical checks of the growth conditions (g1)-(g3).
"""

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from enum import StrEnum
from pathlib import Path

import numpy as np
import polars as pl
from scipy.integrate import quad_vec
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator

from .assembly import odd_power

logger = logging.getLogger(__name__)

# 原始関数テーブルの範囲と密度
_TABLE_MIN = 1e-12
_TABLE_MAX = 1e8
_PER_DECADE = 128
_QUAD_TOL = 1e-10

# (g2) 判定で成長指数を 1 とみなす幅
_EXPONENT_BAND = 0.05
# (g3) の q(t) がこれを超えれば正とみなす
_G3_FLOOR = 1e-6


class NonlinearityKind(StrEnum):
    H1 = "h1"
    H2 = "h2"
    H3 = "h3"
    POWER = "power"
    CUSTOM = "custom"


class TabulatedPrimitive:
    """
    R(t) = int_0^t f(s) ds を対数間隔テーブルと Hermite 補間で評価する原始関数

    構築時にテーブルを全て作るため、評価は読み取り専用でスレッドセーフ。
    """

    def __init__(
        self,
        f: Callable[[np.ndarray], np.ndarray],
        odd: bool = True,
        breakpoints: tuple[float, ...] = (),
        p: float = 2.0,
    ):
        """
        Args:
            f: 被積分関数（配列を受け取りベクトル化されていること）
            odd: f が奇関数なら正側テーブルのみを共有
            breakpoints: f が滑らかでない点（テーブル節点に追加）
            p: テーブル最小値未満で |t|^p のスケーリングに使う指数
        """
        self.f = f
        self.odd = odd
        self.positive = self._build_side(lambda s: f(s), breakpoints, p)
        self.negative = (
            self.positive
            if odd
            else self._build_side(lambda s: -f(-s), breakpoints, p)
        )

    @staticmethod
    def _build_side(side_f, breakpoints, p):
        decades = int(round(math.log10(_TABLE_MAX / _TABLE_MIN)))
        nodes = np.geomspace(_TABLE_MIN, _TABLE_MAX, decades * _PER_DECADE + 1)
        extra = [b for b in breakpoints if _TABLE_MIN < b < _TABLE_MAX]
        nodes = np.unique(np.concatenate([[0.0], nodes, extra]))
        increments = _interval_integrals(side_f, nodes[:-1], nodes[1:])
        values = np.concatenate([[0.0], np.cumsum(increments)])
        slopes = side_f(nodes)
        return _Side(side_f, nodes, CubicHermiteSpline(nodes, values, slopes), p)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        s = np.abs(t)
        if self.odd:
            result = self.positive(s)
        else:
            result = np.where(t >= 0, self.positive(s), self.negative(s))
        return float(result) if result.ndim == 0 else result


@dataclass(frozen=True)
class _Side:
    f: Callable
    nodes: np.ndarray
    spline: CubicHermiteSpline
    p: float

    def __call__(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        flat = s.ravel()
        top = self.nodes[-1]
        values = np.array(self.spline(np.minimum(flat, top)), dtype=float)
        # テーブル最小値未満は |t|^p でスケール
        floor = float(self.spline(_TABLE_MIN))
        values = np.where(flat < _TABLE_MIN, floor * (flat / _TABLE_MIN) ** self.p, values)
        beyond = flat > top
        if np.any(beyond):
            values[beyond] = self._tail(flat[beyond])
        return values.reshape(s.shape)

    def _tail(self, points: np.ndarray) -> np.ndarray:
        """テーブル上端より外側: 昇順に並べた点の間を一括積分して累積"""
        top = self.nodes[-1]
        ordered, inverse = np.unique(points, return_inverse=True)
        left = np.concatenate([[top], ordered[:-1]])
        increments = _interval_integrals(self.f, left, ordered)
        return (float(self.spline(top)) + np.cumsum(increments))[inverse.ravel()]


def _interval_integrals(side_f: Callable, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """区間 [left_i, right_i] ごとの int f を quad_vec でまとめて計算"""
    widths = right - left
    # 各区間を [0, 1] に写し、区間ごとの大きさで正規化して相対精度をそろえる
    scale = np.abs(side_f(0.5 * (left + right))) * widths
    scale = np.where(scale > 0, scale, 1.0)

    def integrand(s):
        return widths * side_f(left + s * widths) / scale

    increments, _ = quad_vec(integrand, 0.0, 1.0, epsrel=_QUAD_TOL, epsabs=0.0)
    return increments * scale


@dataclass(frozen=True, eq=False)
class NonlinearitySpec:
    """非線形項 g と原始関数 G（G(0) = 0）およびパラメータ"""

    kind: NonlinearityKind
    lam: float
    theta: float
    t0: float
    t1: float
    p: float
    g: Callable = field(repr=False)
    G: Callable = field(repr=False)
    odd: bool = True
    source: str | None = None

    def to_dict(self) -> dict:
        return {
            "kind": str(self.kind),
            "lambda": self.lam,
            "theta": self.theta,
            "t0": self.t0,
            "t1": self.t1,
            "p": self.p,
            "odd": self.odd,
            "source": self.source,
        }


def _vectorized(func: Callable) -> Callable:
    def wrapper(t):
        t = np.asarray(t, dtype=float)
        result = func(t)
        return float(result) if np.ndim(result) == 0 else result

    return wrapper


def _validate_parameters(theta: float, t0: float, t1: float, p: float, relaxed: bool):
    if not (math.isfinite(p) and p > 1):
        raise ValueError(f"p must be > 1, got {p}")
    upper_ok = theta <= 1 if relaxed else theta < 1
    if not (theta > 0 and upper_ok):
        interval = "(0, 1]" if relaxed else "(0, 1)"
        raise ValueError(f"theta must lie in {interval}, got {theta}")
    if not t0 > 1:
        raise ValueError(f"t0 must be > 1, got {t0}")
    if not 0 < t1 < t0:
        raise ValueError(f"t1 must lie in (0, t0), got t1={t1}, t0={t0}")


def _hermite_is_monotone(secant: float, m0: float, m1: float) -> bool:
    """端点の傾き m0, m1 を持つ三次 Hermite が増加関数か（Fritsch-Carlson の単調領域）"""
    if secant <= 0 or m0 < 0 or m1 < 0:
        return False
    alpha, beta = m0 / secant, m1 / secant
    excess = alpha + beta - 2.0
    if excess <= 0 or 2.0 * alpha + beta - 3.0 <= 0 or alpha + 2.0 * beta - 3.0 <= 0:
        return True
    return alpha - (2.0 * alpha + beta - 3.0) ** 2 / (3.0 * excess) >= 0


def _h3_bridge(lam: float, theta: float, t0: float, t1: float, p: float) -> CubicHermiteSpline:
    """
    h3 の (t1, t0) 上の補間（両端で値と一階微分を一致させる単調な三次 Hermite）

    Raises:
        ValueError: 値と傾きを一致させると単調にならないパラメータの場合
    """
    log_t0 = math.log(t0)
    values = [lam * t1 ** (p - 1), t0 ** (p - 1) * log_t0**theta]
    slopes = [
        lam * (p - 1) * t1 ** (p - 2),
        (p - 1) * t0 ** (p - 2) * log_t0**theta + theta * t0 ** (p - 2) * log_t0 ** (theta - 1),
    ]
    secant = (values[1] - values[0]) / (t0 - t1)
    if not _hermite_is_monotone(secant, *slopes):
        raise ValueError(
            f"h3 bridge on ({t1}, {t0}) is not monotone for lambda={lam}, theta={theta}, p={p} "
            f"(values {values[0]:.4g} -> {values[1]:.4g}, slopes {slopes[0]:.4g}, {slopes[1]:.4g})"
        )
    return CubicHermiteSpline([t1, t0], values, slopes)


def make_builtin(
    kind: str,
    lam: float,
    theta: float = 0.5,
    t0: float = 2.0,
    t1: float = 0.5,
    p: float = 2.0,
    relaxed: bool = False,
) -> NonlinearitySpec:
    """
    組み込みの非線形項 h1, h2, h3 を構築

    Args:
        kind: "h1", "h2", "h3"
        lam: (g1) の極限値 lambda
        theta: 対数の指数 (0 < theta < 1)
        t0, t1: h3 の区間端 (0 < t1 < t0, t0 > 1)
        p: 指数
        relaxed: True なら theta = 1 も受け付ける（境界ケースの検査用）

    Returns:
        NonlinearitySpec
    """
    kind = NonlinearityKind(kind)
    _validate_parameters(theta, t0, t1, p, relaxed)

    breakpoints: tuple[float, ...] = ()
    if kind is NonlinearityKind.H1:

        def rest(t):
            # (ln(e + |t|))^theta - 1 = expm1(theta log1p(log1p(|t| / e)))
            return lam * odd_power(t, p) * np.expm1(theta * np.log1p(np.log1p(np.abs(t) / np.e)))

    elif kind is NonlinearityKind.H2:

        def rest(t):
            return odd_power(t, p) * np.log1p(np.abs(t)) ** theta

    elif kind is NonlinearityKind.H3:
        bridge = _h3_bridge(lam, theta, t0, t1, p)
        breakpoints = (t1, t0)

        def rest(t):
            s = np.abs(t)
            psi = odd_power(t, p)
            outer = psi * (np.abs(np.log(np.maximum(s, t0))) ** theta - lam)
            middle = np.sign(t) * bridge(np.clip(s, t1, t0)) - lam * psi
            return np.where(s <= t1, 0.0, np.where(s >= t0, outer, middle))

    else:
        raise ValueError(f"{kind} is not a builtin nonlinearity")

    table = TabulatedPrimitive(rest, odd=True, breakpoints=breakpoints, p=p)

    @_vectorized
    def g(t):
        return lam * odd_power(t, p) + rest(t)

    @_vectorized
    def G(t):
        return lam * np.abs(t) ** p / p + table(t)

    logger.debug(f"nonlinearity {kind} built: lambda={lam}, theta={theta}, p={p}")
    return NonlinearitySpec(kind, float(lam), float(theta), float(t0), float(t1), float(p), g, G)


def make_power(lam: float, p: float) -> NonlinearitySpec:
    """g = lambda psi_p（G は厳密な閉形式 lambda |t|^p / p）"""
    if not p > 1:
        raise ValueError(f"p must be > 1, got {p}")

    @_vectorized
    def g(t):
        return lam * odd_power(t, p)

    @_vectorized
    def G(t):
        return lam * np.abs(t) ** p / p

    return NonlinearitySpec(
        NonlinearityKind.POWER, float(lam), math.nan, math.nan, math.nan, float(p), g, G
    )


def make_custom(
    g_func: Callable,
    p: float,
    G_func: Callable | None = None,
    lam: float = 0.0,
    odd: bool = False,
    source: str | None = None,
) -> NonlinearitySpec:
    """
    任意の非線形項を登録

    Args:
        g_func: ベクトル化された g
        p: 指数
        G_func: 既知の原始関数（None ならテーブル積分）
        lam: G を (lam/p)|t|^p + 残差 に分解する際の lambda（精度のため）
        odd: g が奇関数か
        source: 出典（CSV パスなど）
    """
    if not p > 1:
        raise ValueError(f"p must be > 1, got {p}")
    g = _vectorized(g_func)
    if G_func is None:

        def rest(t):
            return np.asarray(g_func(t), dtype=float) - lam * odd_power(t, p)

        table = TabulatedPrimitive(rest, odd=odd, p=p)

        @_vectorized
        def G(t):
            return lam * np.abs(t) ** p / p + table(t)

    else:
        G = _vectorized(G_func)
    return NonlinearitySpec(
        NonlinearityKind.CUSTOM, float(lam), math.nan, math.nan, math.nan, float(p),
        g, G, odd=odd, source=source,
    )


def load_custom_table(path: str | Path, p: float) -> NonlinearitySpec:
    """
    CSV テーブル (ヘッダー "t,g"、t > 0 で狭義単調増加) から奇拡張した非線形項を作成

    テーブル内は単調 (PCHIP) 補間、最後の点より外側は |t|^{p-1} でスケールする。
    """
    path = Path(path)
    frame = pl.read_csv(path)
    if frame.columns != ["t", "g"]:
        raise ValueError(f"{path}: expected header 't,g', got {','.join(frame.columns)}")
    t = frame["t"].cast(pl.Float64).to_numpy()
    values = frame["g"].cast(pl.Float64).to_numpy()
    if len(t) < 2:
        raise ValueError(f"{path}: at least two rows are required")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(values))):
        raise ValueError(f"{path}: table entries must be finite")
    if t[0] <= 0 or np.any(np.diff(t) <= 0):
        raise ValueError(f"{path}: t must be positive and strictly increasing")

    interpolant = PchipInterpolator(np.concatenate([[0.0], t]), np.concatenate([[0.0], values]))
    t_last, g_last = float(t[-1]), float(values[-1])

    def g_func(x):
        x = np.asarray(x, dtype=float)
        s = np.abs(x)
        inside = interpolant(np.minimum(s, t_last))
        outside = g_last * (s / t_last) ** (p - 1)
        return np.sign(x) * np.where(s <= t_last, inside, outside)

    logger.info(f"カスタム非線形項を読み込みました: {path} ({len(t)} 行)")
    return make_custom(g_func, p, odd=True, source=str(path))


def eval_G(spec: NonlinearitySpec, t: float) -> float:
    """G(t) = int_0^t g(s) ds"""
    if not math.isfinite(t):
        raise ValueError(f"G requires a finite argument, got {t}")
    value = spec.G(t)
    if not math.isfinite(value):
        raise FloatingPointError(f"primitive evaluation failed at t={t}")
    return float(value)


# ---------------------------------------------------------------------------
# 成長条件の検査
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TGridSpec:
    """対数間隔サンプル |t| in [lo, hi]（両符号）"""

    lo: float = 1e-6
    hi: float = 1e6
    per_decade: int = 10

    def positive(self) -> np.ndarray:
        decades = max(1, int(round(math.log10(self.hi / self.lo))))
        return np.geomspace(self.lo, self.hi, decades * self.per_decade + 1)

    def samples(self) -> np.ndarray:
        positive = self.positive()
        return np.concatenate([-positive[::-1], positive])


@dataclass(frozen=True)
class ConditionReport:
    """(g1)-(g3) の数値検査結果"""

    g1_limit: float
    g2_limit: float
    g3_feasible: bool
    g3_beta: float | None
    g3_t0: float | None
    g1_passed: bool
    g2_passed: bool
    g2_exponent: float
    samples: dict[str, list[float]] = field(repr=False)

    @property
    def passed(self) -> bool:
        return self.g1_passed and self.g2_passed and self.g3_feasible

    def failures(self) -> list[str]:
        names = []
        if not self.g1_passed:
            names.append("g1")
        if not self.g2_passed:
            names.append("g2")
        if not self.g3_feasible:
            names.append("g3")
        return names

    def to_dict(self) -> dict:
        return {
            "g1_limit": _json_float(self.g1_limit),
            "g2_limit": _json_float(self.g2_limit),
            "g2_exponent": _json_float(self.g2_exponent),
            "g3_feasible": self.g3_feasible,
            "g3_beta": self.g3_beta,
            "g3_t0": self.g3_t0,
            "g1_passed": self.g1_passed,
            "g2_passed": self.g2_passed,
            "passed": self.passed,
        }


def _json_float(value: float) -> float | str:
    return value if math.isfinite(value) else str(value)


def _aitken(sequence: np.ndarray) -> float:
    """収束列の最後の3項から Aitken の Delta^2 加速で極限を推定"""
    x0, x1, x2 = (float(v) for v in sequence[-3:])
    d1, d2 = x1 - x0, x2 - x1
    denominator = d2 - d1
    if abs(denominator) <= 1e-14 * max(1.0, abs(x2)):
        return x2
    estimate = x2 - d2 * d2 / denominator
    # 加速が暴れた場合は最後の値を採用
    if abs(estimate - x2) > 10.0 * abs(d2) + 1e-14:
        return x2
    return estimate


def _g1_side(spec: NonlinearitySpec, t: np.ndarray) -> float:
    # t は |t| の小さい順、最小の3デケードで推定
    decades = np.array([t[0] * 100.0, t[0] * 10.0, t[0]]) * np.sign(t[0])
    ratios = np.asarray(spec.g(decades)) / odd_power(decades, spec.p)
    return _aitken(ratios)


def _g2_side(spec: NonlinearitySpec, t: np.ndarray, per_decade: int) -> tuple[float, float]:
    tail = t[-(3 * per_decade + 1):]
    ratio = np.asarray(spec.g(tail)) / odd_power(tail, spec.p)
    magnitude = np.abs(ratio)
    if np.all(magnitude <= 1e-300):
        return 0.0, -math.inf
    keep = magnitude > 1e-300
    x = np.log(np.log(np.abs(tail[keep])))
    y = np.log(magnitude[keep])
    exponent = float(np.polyfit(x, y, 1)[0])
    if exponent < 1.0 - _EXPONENT_BAND:
        return 0.0, exponent
    if exponent <= 1.0 + _EXPONENT_BAND:
        return float(ratio[-1] / np.log(np.abs(tail[-1]))), exponent
    return math.inf, exponent


def _g3_search(
    spec: NonlinearitySpec, t_all: np.ndarray
) -> tuple[bool, float | None, float | None, np.ndarray]:
    p = spec.p
    q = np.full_like(t_all, np.nan)
    outside = np.abs(t_all) > 1.0
    t_out = t_all[outside]
    q[outside] = (t_out * np.asarray(spec.g(t_out)) - p * np.asarray(spec.G(t_out))) * np.log(
        np.abs(t_out)
    ) / np.abs(t_out) ** p

    magnitudes = np.unique(np.abs(t_out))
    for candidate in magnitudes:
        window = q[np.abs(t_all) >= candidate]
        lowest = float(np.min(window))
        if lowest > _G3_FLOOR:
            return True, min(lowest, 0.99), float(candidate), q
    return False, None, None, q


def check_growth_conditions(spec: NonlinearitySpec, t_grid: TGridSpec | None = None) -> ConditionReport:
    """
    (g1)-(g3) を対数間隔サンプルで数値検査

    Args:
        spec: 非線形項
        t_grid: サンプル範囲（既定 1e-6 ... 1e6、両符号）

    Returns:
        ConditionReport（不成立でも例外は投げない）
    """
    t_grid = t_grid or TGridSpec()
    positive = t_grid.positive()
    t_all = t_grid.samples()

    g1_pos = _g1_side(spec, positive)
    g1_neg = _g1_side(spec, -positive)
    g1_passed = bool(
        math.isfinite(g1_pos)
        and math.isfinite(g1_neg)
        and abs(g1_pos - g1_neg) <= 1e-3 * max(1.0, abs(g1_pos))
    )

    g2_pos, exponent_pos = _g2_side(spec, positive, t_grid.per_decade)
    g2_neg, exponent_neg = _g2_side(spec, -positive, t_grid.per_decade)
    g2_limit = g2_pos if abs(g2_pos) >= abs(g2_neg) else g2_neg
    g2_passed = g2_limit == 0.0

    g3_feasible, beta, t0, q = _g3_search(spec, t_all)

    samples = {
        "t": t_all.tolist(),
        "g": np.asarray(spec.g(t_all)).tolist(),
        "G": np.asarray(spec.G(t_all)).tolist(),
        "q": q.tolist(),
    }
    report = ConditionReport(
        g1_limit=float(g1_pos),
        g2_limit=float(g2_limit),
        g3_feasible=g3_feasible,
        g3_beta=beta,
        g3_t0=t0,
        g1_passed=g1_passed,
        g2_passed=bool(g2_passed),
        g2_exponent=max(exponent_pos, exponent_neg),
        samples=samples,
    )
    logger.debug(f"growth conditions for {spec.kind}: {report.to_dict()}")
    return report


@dataclass(frozen=True)
class SuperlinearityReport:
    """G(t)/|t|^p の超線形性の検査結果"""

    monotone_from: float | None
    crossings: dict[float, float | None]
    eq11_holds: bool | None
    ratio_min: float
    ratio_max: float
    samples: dict[str, list[float]] = field(repr=False)

    @property
    def unbounded(self) -> bool:
        growth = self.ratio_max - self.ratio_min
        return self.monotone_from is not None and growth > 1e-9 * max(1.0, abs(self.ratio_min))

    def to_dict(self) -> dict:
        return {
            "monotone_from": self.monotone_from,
            "crossings": {str(level): t for level, t in self.crossings.items()},
            "eq11_holds": self.eq11_holds,
            "ratio_min": self.ratio_min,
            "ratio_max": self.ratio_max,
        }


def check_superlinearity(
    spec: NonlinearitySpec,
    t_max: float = 1e6,
    levels: tuple[float, ...] = (1.0, 2.0, 4.0, 8.0),
    report: ConditionReport | None = None,
    per_decade: int = 20,
) -> SuperlinearityReport:
    """
    G(t)/|t|^p が最終的に単調増加し任意の水準を超えるかを検査

    crossings[a] は G(t) >= (a/p)|t|^p が以降の全サンプルで成り立つ最小の |t|
    （R の選択で使う M に相当）。

    Args:
        spec: 非線形項（(g3) を満たすこと）
        t_max: 最大サンプル
        levels: 水準 a のリスト
        report: 既存の ConditionReport（g3 の beta, t0 を利用）
    """
    p = spec.p
    t_start = report.g3_t0 if report is not None and report.g3_t0 else math.e
    t_start = min(t_start, t_max / 10.0)
    decades = max(1, int(math.ceil(math.log10(t_max / t_start))))
    t = np.geomspace(t_start, t_max, decades * per_decade + 1)
    ratio = np.minimum(
        np.asarray(spec.G(t)) / t**p, np.asarray(spec.G(-t)) / t**p
    )

    # 末尾から見て単調非減少が続く最初の点
    nondecreasing = np.diff(ratio) >= -1e-12 * np.maximum(1.0, np.abs(ratio[1:]))
    monotone_from = None
    if nondecreasing.size == 0 or nondecreasing[-1]:
        start = nondecreasing.size
        while start > 0 and nondecreasing[start - 1]:
            start -= 1
        monotone_from = float(t[start])

    crossings: dict[float, float | None] = {}
    for level in levels:
        above = ratio >= level / p
        crossing = None
        if above[-1]:
            idx = len(above) - 1
            while idx > 0 and above[idx - 1]:
                idx -= 1
            crossing = float(t[idx])
        crossings[level] = crossing

    eq11_holds = None
    if report is not None and report.g3_feasible and report.g3_t0 is not None:
        beta, t0 = report.g3_beta, report.g3_t0
        mask = t >= t0
        base = min(float(spec.G(t0)), float(spec.G(-t0))) / t0**p
        bound = base + beta * np.log(np.log(t[mask]) / math.log(t0))
        eq11_holds = bool(np.all(ratio[mask] >= bound - 1e-6 * np.maximum(1.0, np.abs(bound))))

    return SuperlinearityReport(
        monotone_from=monotone_from,
        crossings=crossings,
        eq11_holds=eq11_holds,
        ratio_min=float(np.min(ratio)),
        ratio_max=float(np.max(ratio)),
        samples={"t": t.tolist(), "ratio": ratio.tolist()},
    )


def check_lower_power_bound(
    spec: NonlinearitySpec, lambda_tilde: float, t_grid: TGridSpec | None = None
) -> tuple[bool, float, float]:
    """
    G(t) >= (lambda_tilde / p) |t|^p をサンプル上で検査

    Returns:
        (成立するか, 最悪の t, 最悪の相対余裕)
    """
    t = (t_grid or TGridSpec()).samples()
    slack = (np.asarray(spec.G(t)) - lambda_tilde * np.abs(t) ** spec.p / spec.p) / np.abs(t) ** spec.p
    worst = int(np.argmin(slack))
    return bool(slack[worst] >= -1e-9), float(t[worst]), float(slack[worst])


def growth_bound_constant(spec: NonlinearitySpec, eps: float, t_grid: TGridSpec | None = None) -> float:
    """|g(t)| <= eps |t|^{p-1} |ln|t|| + C_eps |t|^{p-1} を満たす最小のサンプル C_eps"""
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    t = (t_grid or TGridSpec()).samples()
    power = np.abs(t) ** (spec.p - 1)
    excess = (np.abs(np.asarray(spec.g(t))) - eps * power * np.abs(np.log(np.abs(t)))) / power
    return float(max(0.0, np.max(excess)))
