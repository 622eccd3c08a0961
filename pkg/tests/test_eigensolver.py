import math

import numpy as np
import pytest

from core.assembly import Constants, assemble_form
from core.eigensolver import (
    EigenOptions,
    eigen_residual,
    first_eigenpair,
    project_to_manifold,
    second_eigenvalue_heuristic,
    spectrum_p2,
)
from core.errors import SolverError
from core.functionals import J_p, rayleigh
from core.grid import build_grid


def test_first_eigenvalue_matches_dense_spectrum(form_p2):
    pair = first_eigenpair(form_p2, EigenOptions(seed=0))
    spectrum = spectrum_p2(form_p2)
    assert pair.converged
    assert pair.value == pytest.approx(spectrum.values[0], abs=1e-8)
    assert pair.residual <= 1e-9
    assert J_p(pair.function, 2.0) == pytest.approx(1.0, rel=1e-12)
    # eigh の固有ベクトルは J_2 = 1/2 に正規化されている
    np.testing.assert_allclose(
        pair.function.values, math.sqrt(2.0) * spectrum.functions[0].values, atol=1e-6
    )


def test_ground_state_has_one_sign(form_p2):
    pair = first_eigenpair(form_p2)
    assert np.all(pair.function.values > 0)


def test_restarts_are_deterministic_across_workers(small_grid):
    form = assemble_form(small_grid, Constants(rho=1.5))
    serial = first_eigenpair(form, EigenOptions(seed=7, restarts=4, workers=1))
    threaded = first_eigenpair(form, EigenOptions(seed=7, restarts=4, workers=3))
    np.testing.assert_array_equal(serial.function.values, threaded.function.values)
    assert serial.value == threaded.value


def test_first_eigenpair_for_p3(small_grid, rng):
    form = assemble_form(small_grid, Constants(p=3.0))
    pair = first_eigenpair(form, EigenOptions(tol=1e-6, restarts=3, max_iter=20000))
    mu, residual = eigen_residual(form, pair.function)
    assert mu == pytest.approx(pair.value, rel=1e-12)
    assert residual <= 1e-6
    for _ in range(20):
        u = small_grid.function(rng.standard_normal(small_grid.n))
        assert rayleigh(form, u) >= pair.value - 1e-9


def test_non_convergence_carries_best_iterate(form_p2):
    with pytest.raises(SolverError) as excinfo:
        first_eigenpair(form_p2, EigenOptions(max_iter=1, restarts=2))
    report = excinfo.value.report
    assert report is not None
    assert not report.converged
    assert report.to_dict()["converged"] is False


def test_options_are_validated():
    with pytest.raises(ValueError):
        EigenOptions(restarts=0)
    with pytest.raises(ValueError):
        EigenOptions(tol=0.0)


def test_spectrum_is_sorted_and_orthonormal(form_p2):
    spectrum = spectrum_p2(form_p2)
    assert np.all(np.diff(spectrum.values) > 0)
    V = np.array([u.values for u in spectrum.functions])
    h = form_p2.grid.h
    np.testing.assert_allclose(h * V @ V.T, np.eye(len(V)), atol=1e-10)
    for u in spectrum.functions:
        nonzero = np.flatnonzero(u.values)
        assert u.values[nonzero[0]] > 0


def test_spectrum_needs_p2(small_grid):
    with pytest.raises(ValueError):
        spectrum_p2(assemble_form(small_grid, Constants(p=3.0)))


def test_eigen_residual_is_small_for_dense_eigenvectors(form_p2):
    spectrum = spectrum_p2(form_p2)
    for k in (0, 3, 10):
        mu, residual = eigen_residual(form_p2, spectrum.functions[k])
        assert mu == pytest.approx(spectrum.values[k], rel=1e-10)
        assert residual < 1e-9


def test_projection_to_manifold(rng):
    values = rng.standard_normal((3, 10))
    projected = project_to_manifold(values, 0.1, 3.0)
    np.testing.assert_allclose(0.1 * np.sum(np.abs(projected) ** 3, axis=1), 3.0)


@pytest.mark.slow
def test_second_eigenvalue_heuristic_matches_spectrum():
    grid = build_grid(0.0, 1.0, 32)
    form = assemble_form(grid, Constants())
    first = first_eigenpair(form)
    second = second_eigenvalue_heuristic(form, first.function, EigenOptions(max_iter=20000))
    assert not second.heuristic
    assert second.to_dict()["label"] is None
    assert second.value == pytest.approx(spectrum_p2(form).values[1], abs=1e-6)
    # 第2固有関数は符号を変える
    assert second.function.values.min() < 0 < second.function.values.max()


@pytest.mark.slow
def test_second_eigenvalue_heuristic_on_default_grid(form_p2):
    first = first_eigenpair(form_p2)
    second = second_eigenvalue_heuristic(form_p2, first.function)
    spectrum = spectrum_p2(form_p2)
    assert second.converged
    assert second.value == pytest.approx(spectrum.values[1], abs=1e-4)
    assert second.residual <= 1e-7
    # 第3固有値の鞍点に落ちていない
    assert abs(second.value - spectrum.values[2]) > 0.1
    mu, _ = eigen_residual(form_p2, second.function)
    assert mu == pytest.approx(second.value, rel=1e-12)


def test_second_eigenvalue_needs_two_nodes():
    grid = build_grid(0.0, 1.0, 1)
    form = assemble_form(grid, Constants())
    first = first_eigenpair(form)
    with pytest.raises(ValueError):
        second_eigenvalue_heuristic(form, first.function)
