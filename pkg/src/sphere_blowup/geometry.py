"""Stereographic charts on the unit sphere.

The chart at a base point p maps y to x in R^2 through an orthonormal frame
(e1, e2) of the tangent plane at p,

    x = (<y, e1>, <y, e2>) / (1 + <y, p>),

so p goes to the origin and the antipode -p to infinity.  The round metric
pulls back to the conformal metric 4/(1+|x|^2)^2 |dx|^2, and the chordal
distance from the base point satisfies |inverse(x) - p| = 2|x|/sqrt(1+|x|^2).
"""

from __future__ import annotations

import numpy as np

from .errors import AntipodalPoint, InvalidParameter

ANTIPODE_TOL = 1e-9


def sphere_point(v) -> np.ndarray:
    """Normalize v (shape (..., 3)) onto the unit sphere."""
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != 3:
        raise InvalidParameter("sphere points need 3 components")
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(n < 1e-14):
        raise InvalidParameter("cannot normalize a zero vector")
    return v / n


def chart_frame(p) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic orthonormal frame (e1, e2) spanning the tangent plane at p.

    The helper axis is the coordinate axis of smallest |p| component, so the
    frame is reproducible and (e1, e2, p) is right handed.  p may be batched
    with shape (..., 3); the frames follow the same shape.
    """
    p = sphere_point(p)
    axis = np.eye(3)[np.argmin(np.abs(p), axis=-1)]
    e1 = axis - np.sum(axis * p, axis=-1, keepdims=True) * p
    e1 = e1 / np.linalg.norm(e1, axis=-1, keepdims=True)
    e2 = np.cross(p, e1)
    return e1, e2


def stereo_project(p, y) -> np.ndarray:
    """Chart coordinates of y (shape (..., 3)) in the chart based at p.

    p may be batched; its shape must broadcast against y.  Raises
    AntipodalPoint when y is within ANTIPODE_TOL of -p.
    """
    p = sphere_point(p)
    y = np.asarray(y, dtype=float)
    denom = 1.0 + np.sum(y * p, axis=-1)
    if np.any(denom < 0.5 * ANTIPODE_TOL**2):
        raise AntipodalPoint("chart evaluated at the antipode of its base point")
    e1, e2 = chart_frame(p)
    x = np.stack([np.sum(y * e1, axis=-1), np.sum(y * e2, axis=-1)], axis=-1)
    return x / denom[..., None]


def stereo_inverse(p, x) -> np.ndarray:
    """Sphere point with chart coordinates x (shape (..., 2)) at base p.

    p may be batched; its shape must broadcast against x's batch shape.
    """
    p = sphere_point(p)
    x = np.asarray(x, dtype=float)
    e1, e2 = chart_frame(p)
    r2 = np.sum(x * x, axis=-1)
    y = (2.0 * x[..., 0, None] * e1 + 2.0 * x[..., 1, None] * e2
         + (1.0 - r2)[..., None] * p)
    return y / (1.0 + r2)[..., None]


def conformal_factor(x) -> np.ndarray:
    """Conformal factor 4/(1+|x|^2)^2 of the pulled-back round metric."""
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1)
    return 4.0 / (1.0 + r2) ** 2


def chordal_distance(y, yp) -> np.ndarray:
    """Euclidean (chordal) distance |y - y'| between unit vectors."""
    y = np.asarray(y, dtype=float)
    yp = np.asarray(yp, dtype=float)
    return np.linalg.norm(y - yp, axis=-1)


def chart_radius(p, y) -> np.ndarray:
    """|Pi_p(y)| computed from the chordal distance, stable at the antipode.

    With d = |y - p| the chart radius is r = d/sqrt(4 - d^2); it grows to
    infinity as y approaches -p, where inf is returned instead of raising.
    """
    d = chordal_distance(np.asarray(y, dtype=float), sphere_point(p))
    d = np.minimum(d, 2.0)
    with np.errstate(divide="ignore"):
        return np.where(d >= 2.0, np.inf, d / np.sqrt(np.maximum(4.0 - d * d, 1e-300)))


def chordal_from_chart_radius(r) -> np.ndarray:
    """Chordal distance 2r/sqrt(1+r^2) of the point at chart radius r."""
    r = np.asarray(r, dtype=float)
    return 2.0 * r / np.sqrt(1.0 + r * r)


def tangent_project(p, v) -> np.ndarray:
    """Project ambient vectors v onto the tangent plane at p (broadcasting)."""
    p = sphere_point(p)
    v = np.asarray(v, dtype=float)
    return v - np.sum(v * p, axis=-1, keepdims=True) * p
