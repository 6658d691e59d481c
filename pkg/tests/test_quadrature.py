"""Composite quadrature rule: mass, exactness, refinement stability."""

import numpy as np
import pytest

from sphere_blowup.ansatz import bubble_u
from sphere_blowup.configurations import green, reference_config
from sphere_blowup.diagnostics import GREEN_SPHERE_MEAN
from sphere_blowup.errors import InvalidParameter, NonFiniteValue
from sphere_blowup.quadrature import QuadratureRule, build_rule, check_disjoint_charts, integrate


def _double_factorial_moment(a, b, c):
    """Closed form of the monomial moment x^a y^b z^c over the unit sphere."""
    if a % 2 or b % 2 or c % 2:
        return 0.0
    def dfact(n):
        out = 1
        while n > 1:
            out *= n
            n -= 2
        return out
    num = dfact(a - 1) * dfact(b - 1) * dfact(c - 1)
    return 4.0 * np.pi * num / dfact(a + b + c + 1)


def test_plain_rule_mass_and_positivity(plain_rule):
    assert np.all(plain_rule.weights > 0.0)
    assert abs(np.sum(plain_rule.weights) - 4.0 * np.pi) <= 1e-10
    assert abs(integrate(plain_rule, lambda y: np.ones(y.shape[0])) - 4.0 * np.pi) <= 1e-10


def test_refined_rule_mass_and_positivity(rule_for):
    rule = rule_for(0.05)
    assert np.all(rule.weights > 0.0)
    assert abs(np.sum(rule.weights) - 4.0 * np.pi) <= 1e-10


def test_polynomial_exactness():
    rule = build_rule(12)
    max_deg = 11
    worst = 0.0
    for d in range(max_deg + 1):
        for a in range(d + 1):
            for b in range(d - a + 1):
                c = d - a - b
                val = integrate(
                    rule,
                    lambda y, a=a, b=b, c=c:
                        y[:, 0] ** a * y[:, 1] ** b * y[:, 2] ** c,
                )
                worst = max(worst, abs(val - _double_factorial_moment(a, b, c)))
    assert worst <= 1e-12


def test_spherical_harmonic_and_z2(plain_rule, rule_for):
    y20 = lambda y: np.sqrt(5.0 / (16.0 * np.pi)) * (3.0 * y[:, 2] ** 2 - 1.0)
    assert abs(integrate(plain_rule, y20)) <= 1e-10
    assert abs(integrate(rule_for(0.05), y20)) <= 1e-10
    z2 = lambda y: y[:, 2] ** 2
    assert abs(integrate(plain_rule, z2) - 4.0 * np.pi / 3.0) <= 1e-8
    assert abs(integrate(rule_for(0.05), z2) - 4.0 * np.pi / 3.0) <= 1e-8


def test_bubble_mass_on_refined_rule(tetra, rule_for):
    xi1 = tetra.points[0]
    for lam in (0.1, 0.05):
        mass = integrate(rule_for(lam), lambda y: np.exp(bubble_u(lam, xi1, y)))
        assert abs(mass - 8.0 * np.pi) <= 1e-6


def test_green_mean_adjusted_integral(tetra, rule_for):
    # the raw kernel integrates to its sphere mean, not zero
    xi1 = tetra.points[0]
    val = integrate(rule_for(0.05), lambda y: green(y, xi1) - GREEN_SPHERE_MEAN)
    assert abs(val) <= 1e-7


def test_doubling_base_order_converges(tetra):
    xi1 = tetra.points[0]
    lam = 0.05
    f = lambda y: np.exp(bubble_u(lam, xi1, y))
    err_64 = abs(integrate(build_rule(64), f) - 8.0 * np.pi)
    err_128 = abs(integrate(build_rule(128), f) - 8.0 * np.pi)
    assert err_64 >= 4.0 * err_128


def test_refinement_levels_agree(rule_for, ansatz_for):
    w = ansatz_for(0.05)
    masses = [integrate(rule_for(0.05, level), lambda y: np.exp(w(y)))
              for level in (0, 1)]
    assert abs(masses[1] - masses[0]) <= 1e-6 * abs(masses[1])


def test_integrate_guards(plain_rule):
    with pytest.raises(InvalidParameter):
        integrate(plain_rule, lambda y: np.ones(3))
    with pytest.raises(NonFiniteValue):
        integrate(plain_rule, lambda y: np.where(y[:, 2] > 0, np.inf, 1.0))


def test_build_rule_validation(tetra):
    with pytest.raises(InvalidParameter):
        build_rule(4)
    with pytest.raises(InvalidParameter):
        build_rule(64, level=-1)
    with pytest.raises(InvalidParameter):
        build_rule(64, centers=tetra)
    with pytest.raises(InvalidParameter):
        build_rule(64, centers=tetra, lam=0.05, r0=1.2)


def test_overlapping_charts_rejected():
    close = np.array([[0.0, 0.0, 1.0],
                      [np.sin(0.5), 0.0, np.cos(0.5)]])
    with pytest.raises(InvalidParameter):
        check_disjoint_charts(close, 0.25)
    with pytest.raises(InvalidParameter):
        build_rule(64, centers=close, lam=0.05)


def test_rule_constructor_guards():
    nodes = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]])
    with pytest.raises(InvalidParameter):
        QuadratureRule(nodes=nodes, weights=np.array([1.0, -1.0]))
    with pytest.raises(InvalidParameter):
        QuadratureRule(nodes=nodes, weights=np.array([1.0]))
