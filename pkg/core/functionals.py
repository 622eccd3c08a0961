"""
Potentials, Rayleigh quotient and energy functionals built on the assembled form.
"""

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .assembly import (
    AssembledForm,
    apply_values,
    energy_values,
    odd_power,
    seminorm_values,
)
from .grid import GridFunction, ensure_same_grid

if TYPE_CHECKING:
    from .nonlinearity import NonlinearitySpec


@dataclass(frozen=True)
class FunctionalValue:
    """汎関数の値・勾配・内訳"""

    value: float
    gradient: np.ndarray | None = field(default=None, repr=False)
    diagnostics: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "gradient_norm": None
            if self.gradient is None
            else float(np.linalg.norm(self.gradient)),
            "diagnostics": dict(self.diagnostics),
        }


def psi_p(t, p: float):
    """
    psi_p(t) = |t|^{p-2} t（奇関数、狭義単調増加）

    Args:
        t: スカラーまたは配列
        p: 指数 (p > 1)
    """
    if p <= 1:
        raise ValueError(f"p must be > 1, got {p}")
    result = odd_power(t, p)
    return float(result) if np.ndim(result) == 0 else result


def I_p(form: AssembledForm, u: GridFunction) -> float:
    """I_p(u) = (1/p) E_{L,p}(u, u)"""
    ensure_same_grid(form.grid, u.grid)
    return float(energy_values(form, u.values, u.values)) / form.p


def J_p(u: GridFunction, p: float) -> float:
    """J_p(u) = (1/p) ||u||_p^p"""
    if p <= 1:
        raise ValueError(f"p must be > 1, got {p}")
    return float(u.grid.h * np.sum(np.abs(u.values) ** p)) / p


def rayleigh(form: AssembledForm, u: GridFunction) -> float:
    """Rayleigh 商 I_p(u) / J_p(u)（0 次斉次）"""
    ensure_same_grid(form.grid, u.grid)
    if u.is_zero():
        raise ValueError("the Rayleigh quotient is undefined at u = 0")
    return float(rayleigh_values(form, u.values))


def rayleigh_values(form: AssembledForm, U: np.ndarray) -> np.ndarray:
    """Rayleigh 商の一括評価 E(u, u) / (h sum |u|^p)"""
    denominator = form.grid.h * np.sum(np.abs(U) ** form.p, axis=-1)
    return energy_values(form, U, U) / denominator


def phi_lambda(form: AssembledForm, u: GridFunction, lam: float) -> FunctionalValue:
    """Phi_lambda(u) = I_p(u) - lambda J_p(u) とその勾配"""
    ensure_same_grid(form.grid, u.grid)
    p = form.p
    h = form.grid.h
    energy_part = float(energy_values(form, u.values, u.values)) / p
    potential_part = J_p(u, p)
    gradient = apply_values(form, u.values) - lam * h * odd_power(u.values, p)
    return FunctionalValue(
        value=energy_part - lam * potential_part,
        gradient=gradient,
        diagnostics={"I_p": energy_part, "J_p": potential_part},
    )


def phi(form: AssembledForm, u: GridFunction, g: "NonlinearitySpec") -> FunctionalValue:
    """
    Phi(u) = (1/p) E_{L,p}(u, u) - int_Omega G(u) dx とその勾配

    勾配は <Phi'(u), v> = E_{L,p}(u, v) - int_Omega g(u) v dx の双対ベクトル。
    """
    ensure_same_grid(form.grid, u.grid)
    value, gradient, parts = phi_arrays(form, u.values, g)
    return FunctionalValue(value=value, gradient=gradient, diagnostics=parts)


def phi_arrays(
    form: AssembledForm, values: np.ndarray, g: "NonlinearitySpec"
) -> tuple[float, np.ndarray, dict[str, float]]:
    """ソルバー内部用: (Phi, Phi', 内訳) を配列で返す"""
    h = form.grid.h
    energy_part = float(energy_values(form, values, values)) / form.p
    potential_part = h * float(np.sum(g.G(values)))
    gradient = apply_values(form, values) - h * g.g(values)
    value = energy_part - potential_part
    if not (np.isfinite(value) and np.all(np.isfinite(gradient))):
        raise FloatingPointError("nonlinearity evaluation produced non-finite values")
    return value, gradient, {"I_p": energy_part, "int_G": potential_part}


def phi_value(form: AssembledForm, values: np.ndarray, g: "NonlinearitySpec") -> np.ndarray:
    """Phi の値のみを一括評価（アンサンブル・サンプル評価用）"""
    h = form.grid.h
    return energy_values(form, values, values) / form.p - h * np.sum(g.G(values), axis=-1)


def weak_residual(form: AssembledForm, values: np.ndarray, gradient: np.ndarray) -> float:
    """弱形式残差 max_i |<Phi'(u), e_i>| / (1 + ||A_p u||_2)"""
    Au = apply_values(form, values)
    return float(np.max(np.abs(gradient)) / (1.0 + np.linalg.norm(Au)))


def cerami_quantity(form: AssembledForm, values: np.ndarray, gradient: np.ndarray) -> float:
    """C(c) 条件の量 (1 + ||u||) ||Phi'(u)||（ノルムは半ノルム、双対側はユークリッド代理）"""
    norm = float(seminorm_values(form, values))
    return (1.0 + norm) * float(np.linalg.norm(gradient))
