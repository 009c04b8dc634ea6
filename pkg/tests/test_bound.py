import dataclasses
import math

import numpy as np
import pytest

from parabound.bound import (assemble_total, compute_weights, eta_dpsi, eta_f,
                             eta_init, eta_ell_split, eta_zh)
from parabound.elliptic import make_estimator
from parabound.fem1d import SpatialMesh, sample_function, solve_discrete_elliptic
from parabound.problem import GreensBounds, ProblemSpec, builtin_test_problem
from parabound.reconstruction import compute_psi_family, compute_star_defect
from parabound.stepping import TimeGrid, run


# -- Green's weights -------------------------------------------------------------

def test_sigma_all_ones_for_zero_gamma():
    grid = TimeGrid.uniform(1.0, 5)
    greens = GreensBounds(kappa0=1.0, kappa1=1.0, kappa1_prime=0.0, gamma=0.0)
    w = compute_weights(grid, greens)
    assert np.all(w.sigma == 1.0)


def test_mu_constant_integrand():
    grid = TimeGrid.uniform(2.0, 4)
    greens = GreensBounds(kappa0=1.0, kappa1=0.0, kappa1_prime=3.0, gamma=0.1)
    w = compute_weights(grid, greens)
    assert np.allclose(w.mu, 3.0 * 0.5)


def test_sigma_final_is_one_and_monotone():
    grid = TimeGrid([0.0, 0.3, 0.45, 0.8, 1.0])
    greens = builtin_test_problem().greens
    w = compute_weights(grid, greens)
    assert w.sigma[-1] == 1.0
    assert np.all(np.diff(w.sigma) >= 0.0)


def test_mu_final_step_infinite_with_kappa1():
    grid = TimeGrid.uniform(1.0, 3)
    greens = builtin_test_problem().greens
    w = compute_weights(grid, greens)
    assert math.isinf(w.mu[-1])
    assert np.all(np.isfinite(w.mu[:-1]))


def test_chi_bounded_by_direct_arm():
    grid = TimeGrid([0.0, 0.2, 0.7, 1.0])
    greens = GreensBounds(kappa0=0.7, kappa1=1.3, kappa1_prime=0.4, gamma=0.2)
    w = compute_weights(grid, greens)
    assert np.all(w.chi >= 0.0)
    assert np.all(w.chi <= greens.kappa0 * grid.taus ** 2 / 4.0 + 1e-18)


def test_chi_final_step_finite():
    # the quadratic weight cancels the 1/(T-s) singularity at s = T
    grid = TimeGrid.uniform(1.0, 4)
    greens = builtin_test_problem().greens
    w = compute_weights(grid, greens)
    tau = 0.25
    expected = min(greens.kappa0 * tau ** 2 / 4.0, greens.kappa1 * tau ** 2 / 4.0)
    assert w.chi[-1] == pytest.approx(expected, rel=1e-14)


# -- initial indicator ------------------------------------------------------------

def test_eta_init_zero_for_linear_initial_data():
    base = builtin_test_problem()
    spec = ProblemSpec(x_left=-1.0, x_right=1.0, diffusion=1.0, reaction=base.reaction,
                       source=base.source,
                       initial=lambda x: 0.25 * (1.0 - np.abs(np.asarray(x, dtype=float))),
                       horizon=1.0, greens=base.greens)
    mesh = SpatialMesh.uniform(-1.0, 1.0, 8)  # kink at x = 0 is a mesh node
    traj = run(spec, mesh, TimeGrid.uniform(1.0, 2))
    assert eta_init(spec, mesh, traj) < 1e-15


def test_eta_init_matches_interpolation_theory():
    # for u0 = sin(pi(1+x)/2) the interpolation gap is pi^2 h^2 / 32 + O(h^4)
    spec = builtin_test_problem()
    for m in (16, 32):
        mesh = SpatialMesh.uniform(-1.0, 1.0, 2 * m)
        traj = run(spec, mesh, TimeGrid.uniform(1.0, 2))
        h = 1.0 / m
        assert eta_init(spec, mesh, traj, n_per_element=33) == pytest.approx(
            np.pi ** 2 * h ** 2 / 32.0, rel=0.03)


def test_eta_init_second_order():
    spec = builtin_test_problem()
    values = []
    for m in (8, 16, 32):
        mesh = SpatialMesh.uniform(-1.0, 1.0, 2 * m)
        traj = run(spec, mesh, TimeGrid.uniform(1.0, 2))
        values.append(eta_init(spec, mesh, traj, n_per_element=17))
    for coarse, fine in zip(values, values[1:]):
        assert 3.7 < coarse / fine < 4.3


# -- source indicator ------------------------------------------------------------

def make_time_poly_problem(source):
    base = builtin_test_problem()
    return ProblemSpec(x_left=-1.0, x_right=1.0, diffusion=1.0, reaction=base.reaction,
                       source=source, initial=base.initial, horizon=1.0,
                       greens=base.greens)


def test_eta_f_zero_for_time_linear_source():
    spec = make_time_poly_problem(
        lambda x, t: (2.0 - 3.0 * t) * np.exp(np.asarray(x, dtype=float)))
    mesh = SpatialMesh.uniform(-1.0, 1.0, 6)
    grid = TimeGrid.uniform(1.0, 4)
    for mode in ("simpson-paper", "quadrature"):
        assert eta_f(2, spec, grid, mesh, mode=mode) < 1e-14


def test_eta_f_quadratic_source_closed_forms():
    # f = t^2: the half-step second difference is tau^2/2, so the published
    # shortcut gives tau^3/12 while direct integration of the defect (an exact
    # parabola) gives tau^3/6
    spec = make_time_poly_problem(
        lambda x, t: np.full_like(np.asarray(x, dtype=float), t ** 2))
    grid = TimeGrid.uniform(1.0, 5)
    mesh = SpatialMesh.uniform(-1.0, 1.0, 6)
    tau = 0.2
    assert eta_f(3, spec, grid, mesh, "simpson-paper") == pytest.approx(tau ** 3 / 12.0, rel=1e-12)
    assert eta_f(3, spec, grid, mesh, "quadrature") == pytest.approx(tau ** 3 / 6.0, rel=1e-10)


def test_eta_f_unknown_mode_rejected():
    spec = builtin_test_problem()
    with pytest.raises(ValueError):
        eta_f(1, spec, TimeGrid.uniform(1.0, 2), SpatialMesh.uniform(-1.0, 1.0, 4),
              mode="midpoint")


# -- defect and psi-increment indicators --------------------------------------------

@pytest.fixture(scope="module")
def steady_run():
    base = builtin_test_problem()
    g = lambda x: base.source(x, 0.0)
    mesh = SpatialMesh.uniform(-1.0, 1.0, 14)
    y_h = solve_discrete_elliptic(mesh, base.diffusion, base.reaction, g)
    spec = ProblemSpec(x_left=-1.0, x_right=1.0, diffusion=1.0, reaction=base.reaction,
                       source=lambda x, t: g(x), initial=lambda x: y_h.eval(x),
                       horizon=1.0, greens=base.greens)
    grid = TimeGrid.uniform(1.0, 4)
    traj = run(spec, mesh, grid)
    psi = compute_psi_family(traj, spec)
    return spec, mesh, grid, traj, psi


def test_steady_state_indicators_vanish(steady_run):
    spec, mesh, grid, traj, psi = steady_run
    weights = compute_weights(grid, spec.greens)
    estimator = make_estimator("residual-1d")
    scale = max(1.0, traj.u[0].sup_norm())
    for j in range(1, grid.m_steps + 1):
        assert eta_dpsi(j, psi, grid) < 1e-9 * scale
        star = compute_star_defect(traj, psi, j, spec)
        value = eta_zh(j, star, weights, spec.greens, estimator, spec, mesh,
                       tau=float(grid.taus[j - 1]))
        assert value < 1e-9 * scale


def test_eta_zh_final_step_uses_direct_arm():
    spec = builtin_test_problem()
    mesh = SpatialMesh.uniform(-1.0, 1.0, 12)
    grid = TimeGrid.uniform(1.0, 4)
    traj = run(spec, mesh, grid)
    psi = compute_psi_family(traj, spec)
    weights = compute_weights(grid, spec.greens)
    estimator = make_estimator("residual-1d")
    m = grid.m_steps
    star = compute_star_defect(traj, psi, m, spec)
    tau = float(grid.taus[-1])
    value = eta_zh(m, star, weights, spec.greens, estimator, spec, mesh, tau=tau)
    data = lambda x: star.psi_star.eval(x) - star.f_star(x)
    direct_arm = spec.greens.kappa0 * tau * float(np.max(np.abs(
        sample_function(data, mesh, 9))))
    assert math.isfinite(value)
    assert value == pytest.approx(direct_arm, rel=1e-14)


def test_eta_zh_never_exceeds_direct_arm():
    spec = builtin_test_problem()
    mesh = SpatialMesh.uniform(-1.0, 1.0, 12)
    grid = TimeGrid.uniform(1.0, 5)
    traj = run(spec, mesh, grid)
    psi = compute_psi_family(traj, spec)
    weights = compute_weights(grid, spec.greens)
    estimator = make_estimator("residual-1d")
    for j in range(1, 6):
        star = compute_star_defect(traj, psi, j, spec)
        tau = float(grid.taus[j - 1])
        data = lambda x: star.psi_star.eval(x) - star.f_star(x)
        direct_arm = spec.greens.kappa0 * tau * float(np.max(np.abs(
            sample_function(data, mesh, 9))))
        value = eta_zh(j, star, weights, spec.greens, estimator, spec, mesh, tau=tau)
        assert value <= direct_arm * (1.0 + 1e-14)


# -- elliptic history split ---------------------------------------------------------

def test_split_rejects_out_of_range_k():
    grid = TimeGrid.uniform(1.0, 4)
    greens = builtin_test_problem().greens
    w = compute_weights(grid, greens)
    ell = np.ones(5)
    ell_delta = np.ones(4)
    with pytest.raises(ValueError):
        eta_ell_split(4, ell, ell_delta, w, greens, grid)
    with pytest.raises(ValueError):
        eta_ell_split(-1, ell, ell_delta, w, greens, grid)


def test_split_zero_indicators_give_zero():
    grid = TimeGrid.uniform(1.0, 4)
    greens = builtin_test_problem().greens
    w = compute_weights(grid, greens)
    assert eta_ell_split(3, np.zeros(5), np.zeros(4), w, greens, grid) == 0.0


def test_split_at_zero_reduces_to_tail_sum():
    grid = TimeGrid.uniform(1.0, 4)
    greens = GreensBounds(kappa0=1.5, kappa1=1.0, kappa1_prime=0.2, gamma=0.3)
    w = compute_weights(grid, greens)
    rng = np.random.default_rng(5)
    ell = rng.uniform(0.1, 1.0, 5)
    ell_delta = rng.uniform(0.1, 1.0, 4)
    expected = greens.kappa0 * (ell[4] + w.sigma[0] * ell[0]
                                + sum(w.sigma[j] * grid.taus[j - 1] * ell_delta[j - 1]
                                      for j in range(1, 5)))
    assert eta_ell_split(0, ell, ell_delta, w, greens, grid) == pytest.approx(expected, rel=1e-14)


# -- total assembly ------------------------------------------------------------------

def zero_spec():
    base = builtin_test_problem()
    zero = lambda x: np.zeros_like(np.asarray(x, dtype=float))
    return ProblemSpec(x_left=-1.0, x_right=1.0, diffusion=1.0, reaction=base.reaction,
                       source=lambda x, t: zero(x), initial=zero, horizon=1.0,
                       greens=base.greens, exact_solution=lambda x, t: zero(x))


def assemble_for(spec, n_elements=16, m_steps=4, **kwargs):
    mesh = SpatialMesh.uniform(spec.x_left, spec.x_right, n_elements)
    grid = TimeGrid.uniform(spec.horizon, m_steps)
    traj = run(spec, mesh, grid)
    psi = compute_psi_family(traj, spec)
    estimator = make_estimator("residual-1d")
    return assemble_total(spec, mesh, grid, traj, psi, estimator, **kwargs)


def test_zero_problem_zero_total():
    breakdown = assemble_for(zero_spec())
    assert breakdown.total == 0.0


def test_breakdown_recomputable():
    breakdown = assemble_for(builtin_test_problem(), n_elements=24, m_steps=8)
    assert breakdown.recompute_total() == pytest.approx(breakdown.total, rel=1e-14)
    assert all(v >= 0.0 for v in breakdown.columns().values())
    assert math.isfinite(breakdown.total)


def test_total_monotone_in_kappa0():
    spec = builtin_test_problem()
    bigger = dataclasses.replace(
        spec, greens=GreensBounds(kappa0=2.0 * spec.greens.kappa0,
                                  kappa1=spec.greens.kappa1,
                                  kappa1_prime=spec.greens.kappa1_prime,
                                  gamma=spec.greens.gamma))
    base_total = assemble_for(spec, n_elements=20, m_steps=5).total
    bigger_total = assemble_for(bigger, n_elements=20, m_steps=5).total
    assert bigger_total >= base_total


def test_k_defaults_to_last_and_rejects_m():
    spec = builtin_test_problem()
    breakdown = assemble_for(spec, m_steps=5)
    assert breakdown.K == 4
    with pytest.raises(ValueError):
        assemble_for(spec, m_steps=5, K=5)


def test_total_scale_on_benchmark():
    # h = tau = 1/16 run; calibrated to land within 3x of 4.038e-01
    breakdown = assemble_for(builtin_test_problem(), n_elements=32, m_steps=16)
    assert 4.038e-01 / 3.0 < breakdown.total < 4.038e-01 * 3.0
    assert breakdown.col_ell / breakdown.total > 0.7


def test_eta_f_mode_comparison_surfaced():
    breakdown = assemble_for(builtin_test_problem(), n_elements=16, m_steps=8)
    meta = breakdown.metadata
    assert meta["eta_f_mode"] == "simpson-paper"
    assert meta["eta_f_alternative_mode"] == "quadrature"
    # the direct integration carries roughly twice the shortcut's constant
    assert 1.5 < meta["eta_f_alternative_value"] / breakdown.col_F < 2.5
