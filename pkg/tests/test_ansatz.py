"""Bubble ansatz: bubble identities, component expansions, kernels, cut-offs."""

import numpy as np
import pytest

from sphere_blowup.ansatz import (
    AnsatzParams,
    ansatz_dlambda,
    ansatz_field,
    ansatz_w,
    bubble_u,
    chi_r,
    cutoff_eta,
    kernel_phi,
    kernel_phi_sphere,
    mass_m0,
    w_component,
    wbar,
)
from sphere_blowup.configurations import green, reference_config
from sphere_blowup.errors import AntipodalPoint, InvalidParameter
from sphere_blowup.fields import fd_laplacian
from sphere_blowup.geometry import chart_radius, sphere_point, stereo_inverse
from sphere_blowup.quadrature import integrate

from conftest import LAMBDAS

GBAR = 1.0 - 2.0 * np.log(2.0)


def test_bubble_center_value_and_mass(tetra, rule_for):
    xi1 = tetra.points[0]
    for lam in LAMBDAS:
        center = float(bubble_u(lam, xi1, xi1[None, :])[0])
        assert abs(center - np.log(2.0 / lam**2)) <= 1e-12
        mass = integrate(rule_for(lam), lambda y: np.exp(bubble_u(lam, xi1, y)))
        assert abs(mass - 8.0 * np.pi) <= 1e-6


def test_bubble_antipode_contract(tetra):
    xi1 = tetra.points[0]
    with pytest.raises(AntipodalPoint):
        bubble_u(0.05, xi1, -xi1[None, :])
    near = sphere_point(-xi1 + np.array([1e-3, 0.0, 0.0]))
    assert np.isfinite(float(bubble_u(0.05, xi1, near[None, :])[0]))


def test_mass_m0_second_order(params_for):
    ratios = [abs(mass_m0(params_for(lam)) - 2.0) / lam**2 for lam in LAMBDAS]
    assert max(ratios) <= 3.0 * min(ratios)


def test_component_mean_identity(params_for, rule_for):
    # the raw Green kernel carries a nonzero sphere mean, so each component
    # integrates to gbar * 4 pi * m0 rather than zero
    for lam in (0.1, 0.05):
        p = params_for(lam)
        lhs = integrate(rule_for(lam), lambda y: w_component(p, 0, y))
        rhs = GBAR * 4.0 * np.pi * mass_m0(p)
        assert abs(lhs - rhs) <= 1e-6 * abs(rhs)


def test_component_center_expansion(tetra, params_for):
    xi1 = tetra.points[0]
    ratios = []
    for lam in LAMBDAS:
        measured = float(w_component(params_for(lam), 0, xi1[None, :])[0])
        predicted = -4.0 * np.log(lam) - 4.0 * np.log(2.0) - 4.0 * lam**2 * np.log(lam)
        ratios.append(abs(measured - predicted) / lam**2)
    assert max(ratios) <= 3.0 * min(ratios)


def test_component_far_field_expansion(tetra, params_for):
    xi1 = tetra.points[0]
    ratios = []
    for lam in LAMBDAS:
        measured = float(w_component(params_for(lam), 0, -xi1[None, :])[0])
        predicted = 8.0 * np.pi * float(green(-xi1[None, :], xi1)[0]) \
            - 4.0 * lam**2 * np.log(lam)
        ratios.append(abs(measured - predicted) / lam**2)
    assert max(ratios) <= 3.0 * min(ratios)


def test_wbar_value(params_for):
    assert wbar(params_for(0.05)) == pytest.approx(3.3592468737621037, rel=1e-10)


def test_glued_close_to_exact(tetra, params_for, rng):
    p = params_for(0.05)
    w_ex = ansatz_field(p)
    w_gl = ansatz_field(p, mode="glued")
    xi1 = tetra.points[0]
    zs = np.geomspace(1e-3, 2.0, 40)
    pts_chart = stereo_inverse(xi1, np.stack([zs, np.zeros_like(zs)], axis=-1))
    far = rng.standard_normal((50, 3))
    far /= np.linalg.norm(far, axis=1, keepdims=True)
    pts = np.concatenate([pts_chart, far])
    assert np.max(np.abs(w_ex(pts) - w_gl(pts))) <= 0.2


def test_exact_laplacian_matches_fd(tetra, params_for):
    p = params_for(0.05)
    w = ansatz_field(p)
    xi1 = tetra.points[0]
    pts = stereo_inverse(xi1, np.array([[0.05, 0.02], [0.002, 0.001],
                                        [0.11, 0.0], [0.9, 0.3]]))
    lap_cf = w.laplacian(pts)
    lap_fd = fd_laplacian(w, pts, 1e-3)
    scale = np.max(np.abs(lap_cf))
    assert np.max(np.abs(lap_cf - lap_fd)) <= 1e-5 * scale


def test_ansatz_dlambda_matches_fd(tetra, params_for, rng):
    lam, h = 0.05, 1e-5
    p = params_for(lam)
    xi1 = tetra.points[0]
    zs = np.geomspace(1e-3, 1.0, 8)
    pts = np.concatenate([
        stereo_inverse(xi1, np.stack([zs, np.zeros_like(zs)], axis=-1)),
        rng.standard_normal((8, 3)) / 1.0,
    ])
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    d_an = ansatz_dlambda(p, pts)
    d_fd = (ansatz_w(AnsatzParams(eps=0.0, lam=lam + h), pts)
            - ansatz_w(AnsatzParams(eps=0.0, lam=lam - h), pts)) / (2.0 * h)
    assert np.max(np.abs(d_an - d_fd)) <= 1e-4 * np.max(np.abs(d_an))


def test_kernel_phi_planar_pde(rng):
    z = rng.standard_normal((40, 2)) * 2.0
    h = 1e-4
    for i in range(3):
        phi = kernel_phi(i, z)
        lap = (kernel_phi(i, z + [h, 0.0]) + kernel_phi(i, z - [h, 0.0])
               + kernel_phi(i, z + [0.0, h]) + kernel_phi(i, z - [0.0, h])
               - 4.0 * phi) / h**2
        resid = lap + 8.0 / (1.0 + np.sum(z * z, axis=-1)) ** 2 * phi
        assert np.max(np.abs(resid)) <= 1e-5


def test_kernel_phi_sphere_pullback(tetra, params_for):
    p = params_for(0.05)
    xi1 = tetra.points[0]
    zz = np.array([[0.3, -0.2], [0.05, 0.12], [1.5, 0.4]])
    ys = stereo_inverse(xi1, p.lam * zz)
    for i in range(3):
        np.testing.assert_allclose(kernel_phi_sphere(p, i, 0, ys),
                                   kernel_phi(i, zz), atol=1e-12)


def test_kernel_phi_bad_index():
    with pytest.raises(InvalidParameter):
        kernel_phi(3, np.zeros((1, 2)))


def test_cutoffs(tetra):
    xi1 = tetra.points[0]
    assert cutoff_eta(0.25, xi1, xi1[None, :])[0] == 1.0
    assert cutoff_eta(0.25, xi1, -xi1[None, :])[0] == 0.0
    assert chi_r(10.0, np.array([[0.5, 0.5]]))[0] == 1.0
    assert chi_r(10.0, np.array([[30.0, 0.0]]))[0] == 0.0


def test_exp_w_domination(tetra, params_for):
    theta = np.linspace(0.05, np.pi - 0.05, 40)
    phi = np.linspace(0.0, 2.0 * np.pi, 80, endpoint=False)
    T, P = np.meshgrid(theta, phi, indexing="ij")
    grid = np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)],
                    axis=-1).reshape(-1, 3)
    sups = []
    for lam in LAMBDAS:
        w = ansatz_field(params_for(lam))(grid)
        dom = np.zeros(grid.shape[0])
        for k in range(tetra.m):
            r = chart_radius(tetra.points[k], grid)
            r = np.where(np.isfinite(r), r, 1e18)
            dom += lam**2 / (lam**2 + r * r) ** 2
        sups.append(np.max(np.exp(w) / dom))
    assert max(sups) <= 25.0
    assert max(sups) <= 3.0 * min(sups)


def test_params_validation(tetra):
    AnsatzParams(eps=0.0, lam=0.05)  # eps = 0 always admissible
    gate = 0.05**2 * np.log(1.0 / 0.05)
    AnsatzParams(eps=400.0 * np.pi * gate, lam=0.05)  # inside the bracket
    with pytest.raises(InvalidParameter):
        AnsatzParams(eps=100.0 * np.pi * gate, lam=0.05)  # below the bracket
    with pytest.raises(InvalidParameter):
        AnsatzParams(eps=800.0 * np.pi * gate, lam=0.05)  # above the bracket
    with pytest.raises(InvalidParameter):
        AnsatzParams(eps=-1.0, lam=0.05)
    with pytest.raises(InvalidParameter):
        AnsatzParams(eps=0.0, lam=1.5)
    with pytest.raises(InvalidParameter):
        AnsatzParams(eps=0.0, lam=0.05, alpha=1.5)
    with pytest.raises(InvalidParameter):
        AnsatzParams(eps=0.0, lam=0.05, r0=0.9)  # tetrahedron charts overlap


def test_ansatz_w_mode_validation(params_for):
    with pytest.raises(InvalidParameter):
        ansatz_w(params_for(0.05), np.array([[0.0, 0.0, 1.0]]), mode="nope")
