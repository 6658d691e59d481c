import math

import numpy as np
import numpy.testing as npt
import pytest

from sphere_blowup.configurations import reference_config
from sphere_blowup.errors import InvalidParameter
from sphere_blowup.optimize import (classify_configuration, config_hessian,
                                    fit_twisted_cuboid, minimize_config)

TETRA_ENERGY = -6.0 * math.log(8.0 / 3.0)


def _sorted_distances(pts):
    d = np.linalg.norm(pts[:, None] - pts[None, :], axis=-1)
    return np.sort(d[np.triu_indices(len(pts), k=1)])


def test_minimize_m4_reaches_tetrahedron():
    report = minimize_config(4, starts=6, tol=1e-9, seed=7)
    assert report.converged
    npt.assert_allclose(report.energy, TETRA_ENERGY, atol=1e-10)
    npt.assert_allclose(np.linalg.norm(report.config.points, axis=-1), 1.0,
                        atol=1e-12)
    ref = _sorted_distances(reference_config("tetrahedron4").points)
    npt.assert_allclose(_sorted_distances(report.config.points), ref,
                        atol=1e-7)
    assert classify_configuration(report.config) == "tetrahedron4"


def test_minimize_rejects_bad_arguments():
    with pytest.raises(InvalidParameter):
        minimize_config(1)
    with pytest.raises(InvalidParameter):
        minimize_config(4, starts=0)


def test_per_start_energies_recorded():
    report = minimize_config(4, starts=5, tol=1e-8, seed=3)
    assert len(report.energies) == 5
    assert len(report.iterations) == 5
    assert min(report.energies) == report.energy


def test_determinism_same_seed():
    a = minimize_config(5, starts=3, tol=1e-8, seed=11)
    b = minimize_config(5, starts=3, tol=1e-8, seed=11)
    npt.assert_array_equal(a.config.points, b.config.points)
    assert a.energy == b.energy


def test_classify_references():
    assert classify_configuration(reference_config("octahedron6")) == "octahedron6"
    assert classify_configuration(reference_config("icosahedron12")) == "icosahedron12"
    assert classify_configuration(reference_config("cube8")) == "cube8"


def test_classify_unclassified(rng):
    from sphere_blowup.configurations import Configuration
    from sphere_blowup.geometry import sphere_point

    pts = sphere_point(rng.standard_normal((6, 3)))
    assert classify_configuration(Configuration(points=pts)) == "unclassified"


def test_twisted_cuboid_fit_recovers_parameters():
    ref = reference_config("twisted_cuboid8", twist=0.61, height=0.44)
    tw, h, mis = fit_twisted_cuboid(ref)
    assert mis <= 1e-8
    npt.assert_allclose(tw, 0.61, atol=1e-6)
    npt.assert_allclose(h, 0.44, atol=1e-6)


def test_tetrahedron_hessian_psd_modulo_rotations(tetra):
    hess = config_hessian(tetra)
    npt.assert_allclose(hess, hess.T, atol=1e-6)
    vals = np.sort(np.linalg.eigvalsh(hess))
    # three rotational gauge modes, the rest strictly stable
    assert np.all(np.abs(vals[:3]) <= 1e-4)
    assert vals[3] > 1e-3
