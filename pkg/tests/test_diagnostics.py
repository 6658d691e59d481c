"""Residual, energy, norms, and the reduced scale relation."""

import math

import numpy as np
import pytest

from sphere_blowup.ansatz import AnsatzParams, ansatz_field, bubble_u, kernel_phi_sphere
from sphere_blowup.diagnostics import (
    GREEN_SPHERE_MEAN,
    ExpansionReport,
    energy_j,
    kernel_projection,
    lambda_bracket,
    norm_inf,
    norm_star,
    reduced_lambda,
    reduction_constants,
    residual_field,
    residual_s,
    star_weight,
)
from sphere_blowup.errors import InvalidParameter, NoInteriorMax
from sphere_blowup.fields import ScalarField
from sphere_blowup.quadrature import build_rule, integrate


@pytest.fixture(scope="module")
def eval_grid():
    theta = np.linspace(0.1, np.pi - 0.1, 25)
    phi = np.linspace(0.0, 2.0 * np.pi, 20, endpoint=False)
    T, P = np.meshgrid(theta, phi, indexing="ij")
    return np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)],
                    axis=-1).reshape(-1, 3)


@pytest.fixture(scope="module")
def smooth_u(rng_module=None):
    return ScalarField(
        eval_fn=lambda y: 0.7 * y[:, 2] + 0.3 * y[:, 0] * y[:, 1]
        + 0.2 * (3.0 * y[:, 2] ** 2 - 1.0),
        name="smooth",
    )


def test_green_sphere_mean_value():
    assert GREEN_SPHERE_MEAN == pytest.approx((1.0 - 2.0 * math.log(2.0)) / (4.0 * math.pi),
                                              rel=1e-15)


def test_residual_constant_field(plain_rule, eval_grid):
    u_const = ScalarField(eval_fn=lambda y: np.full(y.shape[0], 1.7))
    s = residual_s(100.0, u_const, eval_grid[::10], plain_rule)
    assert np.max(np.abs(s)) <= 1e-12


def test_residual_single_bubble_exact_solution(eval_grid):
    # at rho = 8 pi the bubble solves the equation exactly
    lam = 0.1
    pole = np.array([0.0, 0.0, 1.0])
    rule = build_rule(64, centers=pole[None, :], lam=lam)
    u = ScalarField(eval_fn=lambda y: bubble_u(lam, pole, y), name="bubble")
    s = residual_s(8.0 * np.pi, u, eval_grid, rule)
    assert np.max(np.abs(s)) <= 1e-5


def test_residual_integrates_to_zero(plain_rule, smooth_u):
    val = integrate(plain_rule,
                    lambda y: residual_s(101.0, smooth_u, y, plain_rule))
    assert abs(val) <= 1e-8


def test_residual_shift_invariant(plain_rule, smooth_u, eval_grid):
    pts = eval_grid[::10]
    shifted = ScalarField(eval_fn=lambda y: smooth_u(y) + 2.7)
    s0 = residual_s(101.0, smooth_u, pts, plain_rule)
    s1 = residual_s(101.0, shifted, pts, plain_rule)
    assert np.max(np.abs(s1 - s0)) <= 1e-7


def test_residual_field_freezes_mass(plain_rule, smooth_u, eval_grid):
    pts = eval_grid[::17]
    field = residual_field(101.0, smooth_u, plain_rule)
    np.testing.assert_allclose(field(pts),
                               residual_s(101.0, smooth_u, pts, plain_rule),
                               atol=1e-13)


def test_energy_shift_invariant(params_for, rule_for):
    p = params_for(0.05)
    rule = rule_for(0.05)
    w = ansatz_field(p)
    shifted = ScalarField(eval_fn=lambda y: w(y) + 1.3,
                          laplacian_fn=w.laplacian_fn)
    j0 = energy_j(p.rho, w, rule)
    j1 = energy_j(p.rho, shifted, rule)
    assert abs(j1 - j0) <= 1e-8


def test_energy_dirichlet_routes_agree(params_for, rule_for):
    p = params_for(0.05)
    rule = rule_for(0.05)
    w = ansatz_field(p)
    j_fd = energy_j(p.rho, w, rule)
    j_parts = energy_j(p.rho, w, rule, dirichlet="parts")
    assert abs(j_fd - j_parts) <= 1e-5
    with pytest.raises(InvalidParameter):
        energy_j(p.rho, w, rule, dirichlet="exact")


def test_norms(params_for, eval_grid):
    p = params_for(0.05)
    # the weight itself has weighted sup norm exactly one
    sigma = lambda y: star_weight(p, y)
    assert norm_star(sigma, p, eval_grid) == pytest.approx(1.0, rel=1e-14)
    assert norm_inf(lambda y: -2.0 * np.ones(y.shape[0]), eval_grid) == 2.0


def test_lambda_bracket_endpoints():
    eps = 0.01
    lam1, lam2 = lambda_bracket(eps)
    assert 0.0 < lam1 < lam2 < 1.0
    assert 768.0 * math.pi * lam1**2 * math.log(1.0 / lam1) == pytest.approx(eps, rel=1e-10)
    assert 192.0 * math.pi * lam2**2 * math.log(1.0 / lam2) == pytest.approx(eps, rel=1e-10)
    with pytest.raises(InvalidParameter):
        lambda_bracket(-1.0)
    with pytest.raises(InvalidParameter):
        lambda_bracket(1e6)


def test_reduced_lambda_oracle():
    curve = reduced_lambda(0.01)
    assert curve.lambda_star == pytest.approx(0.0011499923690410025, rel=1e-12)
    lam = curve.lambda_star
    stat = 384.0 * math.pi * lam**2 * math.log(1.0 / lam) - 192.0 * math.pi * lam**2
    assert stat == pytest.approx(0.01, rel=1e-8)
    assert curve.bracket[0] < lam < curve.bracket[1]


def test_eps_ratio_monotone_toward_384pi():
    ratios = [reduced_lambda(e, eps_max=0.1).eps_ratio
              for e in (1e-2, 1e-3, 1e-4)]
    assert ratios[0] == pytest.approx(1117.2483827664817, rel=1e-9)
    assert ratios[1] == pytest.approx(1131.064278315156, rel=1e-9)
    assert ratios[2] == pytest.approx(1141.0678292105185, rel=1e-9)
    assert ratios[0] < ratios[1] < ratios[2] < 384.0 * math.pi


def test_reduced_lambda_errors():
    with pytest.raises(InvalidParameter):
        reduced_lambda(0.5, eps_max=0.1)
    with pytest.raises(InvalidParameter):
        reduced_lambda(-1.0)
    # above the hump of the stationarity curve there is no interior maximum
    with pytest.raises(NoInteriorMax):
        reduced_lambda(110.0, eps_max=200.0)


def test_reduction_constants_oracles(params_for):
    p = params_for(0.05)
    a_const, b_const, c_const = reduction_constants(p)
    assert a_const == pytest.approx(1957.428798025887, rel=1e-10)
    assert b_const == pytest.approx(3681.045574426015, rel=1e-10)
    r0 = p.r0
    assert c_const == pytest.approx(4.0 * math.pi * r0**2 / (1.0 + r0**2), rel=1e-10)
    nondeg = b_const - 2.0 * a_const * (1.0 - c_const / math.pi)
    assert nondeg == pytest.approx(687.330942151129, rel=1e-9)
    assert abs(nondeg) > 1.0
    with pytest.raises(InvalidParameter):
        reduction_constants(p, r1=2.0)


def test_kernel_projection_detects_dilation_mode(params_for, rule_for):
    p = params_for(0.05)
    rule = rule_for(0.05)
    zero = kernel_projection(p, np.zeros(rule.size), rule, j=0)
    assert zero == 0.0
    mode = lambda y: kernel_phi_sphere(p, 0, 0, y)
    self_proj = kernel_projection(p, mode, rule, j=0)
    assert self_proj > 1e-3


def test_expansion_report():
    lams = [0.1, 0.05, 0.025]
    resid = [l**3 for l in lams]
    rep = ExpansionReport(lambda_values=lams,
                          measured=[1.0 + r for r in resid],
                          predicted=[1.0, 1.0, 1.0])
    assert rep.fit_exponent == pytest.approx(3.0, abs=1e-9)
    assert not rep.ratio_bounded()  # remainder/lam^2 shrinks linearly here
    flat = ExpansionReport(lambda_values=lams,
                           measured=[1.0 + l**2 for l in lams],
                           predicted=[1.0, 1.0, 1.0])
    assert flat.ratio_bounded()
    with pytest.raises(InvalidParameter):
        ExpansionReport(lambda_values=[0.1], measured=[1.0, 2.0], predicted=[1.0])
