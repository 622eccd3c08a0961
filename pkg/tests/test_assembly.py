import math

import hypothesis.strategies as st
import numpy as np
import polars as pl
import pytest
from hypothesis import given, settings
from scipy.integrate import quad

from core.assembly import (
    Constants,
    apply_Ap,
    apply_Ap_split,
    assemble_form,
    boundary_weight,
    cell_pair_integral,
    dump_weights,
    energy,
    energy_matrix,
    near_pairing,
    odd_power,
    remainder_pairing,
    seminorm,
)
from core.eigensolver import spectrum_p2
from core.errors import GridMismatchError
from core.functionals import I_p
from core.grid import build_grid


def _cell_pair_quad(h: float, k: int) -> float:
    # 内側の積分は閉形式、外側は端点の対数特異性を quad に任せる
    def inner(x):
        return math.log1p(h / (k * h - x))

    value, _ = quad(inner, 0.0, h, epsabs=1e-15, epsrel=1e-13, limit=200)
    return value


def _brute_force_energy(form, u, v):
    """非順序ペアを直接数える二重和"""
    grid = form.grid
    p = form.p
    C = form.constants.C
    h = grid.h
    x = grid.nodes
    psi = lambda t: odd_power(t, p)  # noqa: E731
    total = 0.0
    for i in range(grid.n):
        total += form.kappa[i] * h * psi(u[i]) * v[i]
        total += form.constants.rho * h * psi(u[i]) * v[i]
        for j in range(i + 1, grid.n):
            distance = x[j] - x[i]
            if distance < 1.0 - 1e-12:
                total += C * cell_pair_integral(h, j - i) * psi(u[i] - u[j]) * (v[i] - v[j])
            else:
                weight = C * h * h / distance
                total += weight * (
                    psi(u[i] - u[j]) * (v[i] - v[j]) - psi(u[i]) * v[i] - psi(u[j]) * v[j]
                )
    return total


def _far_cell_weight(h: float, distance: float) -> float:
    """セル対上の 1/|x - y| の積分（x - y は三角分布）"""
    value, _ = quad(
        lambda s: (h - abs(s)) / (distance + s), -h, h, points=[0.0], epsabs=0.0, epsrel=1e-13
    )
    return value


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_far_field_bracket_matches_cell_quadrature(p):
    grid = build_grid(0.0, 3.0, 32)
    form = assemble_form(grid, Constants(p=p))
    # 同符号の関数では遠方ブラケットの各項が非正になり、打ち消し合わない
    u = np.sin(np.pi * (grid.nodes - grid.a) / (grid.b - grid.a)) + 0.2
    expected = 0.0
    for i in range(grid.n):
        for j in range(i + 1, grid.n):
            distance = (j - i) * grid.h
            if distance < 1.0 - 1e-12:
                continue
            bracket = abs(u[i] - u[j]) ** p - abs(u[i]) ** p - abs(u[j]) ** p
            expected += _far_cell_weight(grid.h, distance) * bracket
    actual = float(remainder_pairing(form, u, u))
    assert expected < 0
    # 中点則とセル積分の差は O(h^2)
    assert actual == pytest.approx(expected, rel=5e-3)


@pytest.mark.parametrize("h", [1e-3, 1e-2, 1e-1])
def test_adjacent_cell_integral_is_exact(h):
    assert cell_pair_integral(h, 1) == pytest.approx(2 * h * math.log(2), abs=1e-12)
    assert cell_pair_integral(h, 1) == pytest.approx(_cell_pair_quad(h, 1), abs=1e-12)


@pytest.mark.parametrize("k", [2, 3, 10, 1000])
def test_cell_integral_matches_quadrature(k):
    h = 1e-2
    assert cell_pair_integral(h, k) == pytest.approx(_cell_pair_quad(h, k), rel=1e-10)


def test_far_cell_integral_approaches_midpoint_weight():
    h = 1e-3
    k = 5000
    assert cell_pair_integral(h, k) == pytest.approx(h * h / (k * h), rel=1e-6)


@pytest.mark.parametrize("k", [0, -1, 1.5, True])
def test_cell_integral_rejects_bad_offsets(k):
    with pytest.raises(ValueError):
        cell_pair_integral(0.1, k)


def test_boundary_weight_at_midpoint():
    grid = build_grid(0.0, 1.0, 1)
    kappa = boundary_weight(grid, Constants())
    assert kappa[0] == pytest.approx(2 * math.log(2), abs=1e-10)


@pytest.mark.parametrize("a, b, n", [(0.0, 1.0, 9), (0.0, 3.0, 11), (-0.2, 0.3, 4)])
def test_boundary_weight_matches_quadrature(a, b, n):
    grid = build_grid(a, b, n)
    kappa = boundary_weight(grid, Constants(C=1.7))
    for x, value in zip(grid.nodes, kappa):
        expected = 0.0
        if x - 1.0 < a:
            expected += quad(lambda y: 1.0 / (x - y), x - 1.0, a)[0]
        if x + 1.0 > b:
            expected += quad(lambda y: 1.0 / (y - x), b, x + 1.0)[0]
        assert value == pytest.approx(1.7 * expected, rel=1e-9, abs=1e-12)
    assert np.all(kappa >= 0)


def test_constants_are_validated():
    with pytest.raises(ValueError):
        Constants(C=0.0)
    with pytest.raises(ValueError):
        Constants(p=1.0)
    with pytest.raises(ValueError):
        Constants(rho=math.inf)
    with pytest.raises(ValueError):
        Constants(N=2)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
@pytest.mark.parametrize("constants", [(1.0, 0.0), (2.0, 5.0), (0.5, -3.0)])
def test_energy_matches_brute_force(p, constants, rng):
    # 区間長 3 で近傍ペアと遠方ペアの両方が現れる
    grid = build_grid(0.0, 3.0, 11)
    C, rho = constants
    form = assemble_form(grid, Constants(C=C, rho=rho, p=p))
    assert len(form.far_offsets) > 0
    for _ in range(5):
        u = rng.standard_normal(grid.n)
        v = rng.standard_normal(grid.n)
        expected = _brute_force_energy(form, u, v)
        actual = energy(form, grid.function(u), grid.function(v))
        assert actual == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_apply_is_dual_of_energy(form_p, rng):
    grid = form_p.grid
    u = grid.function(rng.standard_normal(grid.n))
    r = apply_Ap(form_p, u)
    for _ in range(10):
        v = grid.function(rng.standard_normal(grid.n))
        assert np.dot(r, v.values) == pytest.approx(energy(form_p, u, v), rel=1e-12, abs=1e-12)


def test_split_sums_to_full_operator(form_p, rng):
    grid = form_p.grid
    for _ in range(100):
        u = grid.function(rng.standard_normal(grid.n))
        near, rest = apply_Ap_split(form_p, u)
        np.testing.assert_array_equal(near + rest, apply_Ap(form_p, u))
        half = float(near_pairing(form_p, u.values, u.values))
        assert half == pytest.approx(0.5 * seminorm(form_p, u) ** form_p.p, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_gradient_matches_central_differences(p, rng):
    grid = build_grid(0.0, 2.5, 12)
    form = assemble_form(grid, Constants(p=p, rho=0.7))
    eps = 1e-6
    tolerance = 1e-6 if p == 2.0 else 1e-4
    for _ in range(50):
        # 節点値とその差を 0 から離す
        values = np.sort(rng.uniform(0.5, 3.0, grid.n)) + 0.05 * np.arange(grid.n)
        values = rng.permutation(values) * rng.choice([-1.0, 1.0])
        u = grid.function(values)
        gradient = apply_Ap(form, u)
        fd = np.empty(grid.n)
        for i in range(grid.n):
            step = grid.basis(i) * eps
            fd[i] = (I_p(form, u + step) - I_p(form, u - step)) / (2 * eps)
        error = np.linalg.norm(fd - gradient) / np.linalg.norm(gradient)
        assert error < tolerance


@settings(max_examples=100, deadline=None)
@given(
    seed=st.integers(min_value=0, max_value=2**32 - 1),
    t=st.floats(min_value=0.05, max_value=20.0),
    p=st.sampled_from([1.5, 2.0, 3.0]),
    sign=st.sampled_from([-1.0, 1.0]),
)
def test_energy_is_p_homogeneous(seed, t, p, sign):
    grid = build_grid(0.0, 1.0, 12)
    form = assemble_form(grid, Constants(p=p))
    u = grid.function(np.random.default_rng(seed).standard_normal(grid.n))
    scaled = u * (sign * t)
    assert energy(form, scaled, scaled) == pytest.approx(t**p * energy(form, u, u), rel=1e-10)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**32 - 1))
def test_p2_energy_is_symmetric(seed):
    grid = build_grid(0.0, 2.0, 10)
    form = assemble_form(grid, Constants(rho=-0.4))
    generator = np.random.default_rng(seed)
    u = grid.function(generator.standard_normal(grid.n))
    v = grid.function(generator.standard_normal(grid.n))
    assert energy(form, u, v) == pytest.approx(energy(form, v, u), rel=1e-12, abs=1e-12)


def test_constant_function_has_positive_seminorm(form_p):
    u = form_p.grid.function(np.ones(form_p.grid.n))
    assert seminorm(form_p, u) > 0


def test_energy_rejects_foreign_grid(form_p2):
    other = build_grid(0.0, 2.0, form_p2.grid.n)
    u = other.function(np.ones(other.n))
    with pytest.raises(GridMismatchError):
        energy(form_p2, u, u)


def test_energy_matrix_is_symmetric_and_p2_only(form_p2):
    M = energy_matrix(form_p2)
    np.testing.assert_allclose(M, M.T, atol=1e-12)
    with pytest.raises(ValueError):
        energy_matrix(assemble_form(form_p2.grid, Constants(p=3.0)))


def test_spectrum_is_affine_in_constants(unit_grid):
    reference = spectrum_p2(assemble_form(unit_grid, Constants())).values
    for C, rho in [(1.0, 0.0), (2.0, 5.0), (0.5, -3.0)]:
        values = spectrum_p2(assemble_form(unit_grid, Constants(C=C, rho=rho))).values
        np.testing.assert_allclose(values, C * reference + rho, rtol=0.0, atol=1e-8)


def test_dump_weights_writes_triples(tmp_path):
    grid = build_grid(0.0, 3.0, 11)
    form = assemble_form(grid, Constants())
    paths = dump_weights(form, tmp_path / "weights")
    assert [path.name for path in paths] == ["near_weights.csv", "far_weights.csv", "kappa.csv"]

    near = pl.read_csv(paths[0])
    assert near.columns == ["row", "col", "weight"]
    assert near.height == sum(grid.n - k for k in range(1, form.band + 1))
    assert (near["col"] > near["row"]).all()
    kappa = pl.read_csv(paths[2])
    np.testing.assert_allclose(kappa["value"].to_numpy(), form.kappa)
