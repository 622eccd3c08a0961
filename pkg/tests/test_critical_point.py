import numpy as np
import pytest

from core.assembly import Constants, assemble_form, seminorm_values
from core.critical_point import (
    MinimaxOptions,
    PathEnsemble,
    RadiiTarget,
    build_linking_geometry_p2,
    choose_radii,
    mountain_pass,
    solve_linking,
)
from core.eigensolver import EigenOptions, first_eigenpair, spectrum_p2
from core.errors import ConditionError, LinkingGeometryError, RadiiSelectionError
from core.functionals import phi, phi_value
from core.grid import build_grid, lp_norm
from core.nonlinearity import make_builtin, make_power


@pytest.fixture(scope="module")
def form32():
    return assemble_form(build_grid(0.0, 1.0, 32), Constants())


@pytest.fixture(scope="module")
def h2_zero():
    return make_builtin("h2", 0.0, theta=0.5)


def test_straight_path_needs_enough_knots(form32):
    u1 = form32.grid.function(np.ones(form32.grid.n))
    path = PathEnsemble.straight(u1, 16)
    assert path.m == 16
    assert path.knots[0].is_zero()
    np.testing.assert_array_equal(path.knots[-1].values, u1.values)
    with pytest.raises(ValueError):
        PathEnsemble.straight(u1, 8)
    with pytest.raises(ValueError):
        MinimaxOptions(m=15)


def test_choose_radii_separates_sphere_and_ray(form32, h2_zero):
    phi1 = first_eigenpair(form32).function.values
    rng = np.random.default_rng(3)
    directions = np.array([phi1, *rng.standard_normal((4, form32.grid.n))])
    target = RadiiTarget(directions, phi1[None, :], lambda_level=1.0)
    rho, R, u1 = choose_radii(form32, h2_zero, target)

    unit = directions / seminorm_values(form32, directions)[:, None]
    assert np.min(phi_value(form32, rho * unit, h2_zero)) >= 0
    assert phi(form32, u1, h2_zero).value <= 0
    assert R * float(seminorm_values(form32, phi1)) > rho


def test_choose_radii_tightens_R_below_first_doubling(form32):
    spectrum = spectrum_p2(form32)
    g = make_builtin("h2", float(spectrum.values[:2].mean()))
    u0 = spectrum.functions[1].values
    target = RadiiTarget(u0[None, :], u0[None, :], lambda_level=float(spectrum.values[1]))
    rho, R, u1 = choose_radii(form32, g, target)

    doubled = 1.0
    while phi_value(form32, doubled * u0[None, :], g)[0] > 0:
        doubled *= 2.0
    assert 0.5 * doubled < R <= doubled
    assert phi(form32, u1, g).value <= 0
    np.testing.assert_allclose(u1.values, R * u0)


def test_choose_radii_reports_unreachable_ray(form32, h2_zero):
    phi1 = first_eigenpair(form32).function.values
    target = RadiiTarget(phi1[None, :], phi1[None, :], lambda_level=1.0)
    with pytest.raises(RadiiSelectionError):
        choose_radii(form32, h2_zero, target, MinimaxOptions(r_max=1.0))


def test_mountain_pass_rejects_failed_growth_conditions(form32):
    with pytest.raises(ConditionError) as excinfo:
        mountain_pass(form32, make_power(0.5, 2.0))
    assert excinfo.value.report.failures() == ["g3"]


def test_mountain_pass_needs_lambda_below_first_eigenvalue(form32):
    lam1 = first_eigenpair(form32).value
    with pytest.raises(ConditionError):
        mountain_pass(form32, make_builtin("h2", lam1 + 0.5))


@pytest.mark.slow
def test_mountain_pass_p2(form32, h2_zero):
    report = mountain_pass(form32, h2_zero)
    assert report.converged
    assert report.residual < 1e-6
    assert lp_norm(report.solution, 2.0) > 1e-3
    assert report.phi_at_solution >= 0
    assert report.critical_value == report.phi_at_solution
    data = report.to_dict()
    assert data["mode"] == "mountain-pass"
    assert data["geometry"] is None
    assert len(report.cerami_monitor) == report.iterations

    # 奇関数の非線形項では端点を反転すると解も反転する
    mirrored = mountain_pass(form32, h2_zero, endpoint=-report.endpoint)
    scale = float(np.max(np.abs(report.solution.values)))
    np.testing.assert_allclose(
        mirrored.solution.values, -report.solution.values, rtol=0.0, atol=1e-12 * scale
    )


@pytest.mark.slow
def test_mountain_pass_p3():
    form = assemble_form(build_grid(0.0, 1.0, 24), Constants(p=3.0))
    g = make_builtin("h2", 0.0, theta=0.5, p=3.0)
    opts = MinimaxOptions(eigen=EigenOptions(tol=1e-7, restarts=2, max_iter=20000), max_iter=20000)
    report = mountain_pass(form, g, opts)
    assert report.residual < 1e-6
    assert lp_norm(report.solution, 3.0) > 1e-3
    assert report.phi_at_solution >= 0


def test_linking_geometry_rejects_general_p():
    form = assemble_form(build_grid(0.0, 1.0, 8), Constants(p=3.0))
    spectrum = spectrum_p2(assemble_form(form.grid, Constants()))
    g = make_builtin("h2", 1.0, p=3.0)
    with pytest.raises(ValueError):
        build_linking_geometry_p2(form, spectrum, 1, 1.0, g)


def test_linking_geometry_needs_lambda_in_gap(form32):
    spectrum = spectrum_p2(form32)
    below = float(spectrum.values[0]) - 0.1
    g = make_builtin("h2", below)
    with pytest.raises(LinkingGeometryError):
        build_linking_geometry_p2(form32, spectrum, 1, below, g)
    with pytest.raises(ValueError):
        build_linking_geometry_p2(form32, spectrum, form32.grid.n, below, g)


def test_linking_geometry_needs_lambda_tilde_below_lambda(form32):
    spectrum = spectrum_p2(form32)
    lam = float(spectrum.values[:2].mean())
    g = make_builtin("h2", lam)
    with pytest.raises(LinkingGeometryError):
        build_linking_geometry_p2(form32, spectrum, 1, lam + 1e-3, g)


@pytest.mark.slow
def test_linking_between_first_two_eigenvalues(form32):
    spectrum = spectrum_p2(form32)
    lam = float(spectrum.values[:2].mean())
    g = make_builtin("h2", lam)
    opts = MinimaxOptions(max_iter=20000)
    geometry = build_linking_geometry_p2(form32, spectrum, 1, lam, g, opts)
    assert geometry.sup_A <= geometry.inf_B
    assert geometry.rho < geometry.R * geometry.distance
    assert geometry.in_B0(geometry.u0)
    assert not geometry.in_B0(spectrum.functions[0])

    report = solve_linking(form32, g, geometry, opts)
    assert report.residual < 1e-6
    assert report.critical_value >= geometry.inf_B - 1e-6
    assert lp_norm(report.solution, 2.0) > 1e-3
    assert report.to_dict()["geometry"]["k"] == 1


@pytest.fixture(scope="module")
def form64():
    return assemble_form(build_grid(0.0, 1.0, 64), Constants())


@pytest.mark.slow
def test_mountain_pass_p2_default_grid(form64, h2_zero):
    report = mountain_pass(form64, h2_zero)
    assert report.converged
    assert report.residual < 1e-6
    assert lp_norm(report.solution, 2.0) > 1e-3
    assert report.phi_at_solution >= 0


@pytest.mark.slow
def test_mountain_pass_p3_default_grid():
    form = assemble_form(build_grid(0.0, 1.0, 64), Constants(p=3.0))
    g = make_builtin("h2", 0.0, theta=0.5, p=3.0)
    opts = MinimaxOptions(eigen=EigenOptions(tol=1e-7, restarts=2, max_iter=20000), max_iter=20000)
    report = mountain_pass(form, g, opts)
    assert report.residual < 1e-6
    assert lp_norm(report.solution, 3.0) > 1e-3
    assert report.phi_at_solution >= 0


@pytest.mark.slow
def test_linking_between_first_two_eigenvalues_default_grid(form64):
    spectrum = spectrum_p2(form64)
    lam = float(spectrum.values[:2].mean())
    g = make_builtin("h2", lam)
    opts = MinimaxOptions(max_iter=20000)
    geometry = build_linking_geometry_p2(form64, spectrum, 1, lam, g, opts)
    assert geometry.sup_A <= geometry.inf_B
    assert geometry.rho < geometry.R * geometry.distance

    report = solve_linking(form64, g, geometry, opts)
    assert report.residual < 1e-6
    assert report.critical_value >= geometry.inf_B - 1e-6
    assert lp_norm(report.solution, 2.0) > 1e-3
