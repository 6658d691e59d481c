"""Point configurations on the sphere and their logarithmic interaction.

The Green function of the Laplace-Beltrami operator on the unit sphere with
respect to the round measure is

    G(y, y') = -(1/2 pi) ln |y - y'|        (chordal distance),

normalized so that its mean over the sphere vanishes.  The interaction energy
of a configuration {p_1, ..., p_m} is

    F = 4 pi sum_{j<k} G(p_j, p_k) = -2 sum_{j<k} ln |p_j - p_k|,

whose critical points are the configurations underlying multi-bubble
concentration.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import CoincidentPoints, InvalidParameter
from .geometry import sphere_point, stereo_project, tangent_project

COINCIDENCE_TOL = 1e-12

REFERENCE_LABELS = (
    "triangle3",
    "tetrahedron4",
    "octahedron6",
    "cube8",
    "twisted_cuboid8",
    "icosahedron12",
    "dodecahedron20",
)


@dataclass
class Configuration:
    """An ordered list of pairwise-distinct unit vectors."""

    points: np.ndarray
    label: str = ""

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise InvalidParameter("configuration points must have shape (m, 3)")
        self.points = sphere_point(pts)
        d = np.linalg.norm(self.points[:, None, :] - self.points[None, :, :], axis=-1)
        np.fill_diagonal(d, np.inf)
        if np.any(d < COINCIDENCE_TOL):
            raise CoincidentPoints("configuration contains coincident points")

    @property
    def m(self) -> int:
        return self.points.shape[0]

    def to_json(self) -> str:
        return json.dumps(
            {"m": self.m, "label": self.label, "points": self.points.tolist()},
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "Configuration":
        data = json.loads(text)
        pts = np.asarray(data["points"], dtype=float)
        if "m" in data and int(data["m"]) != pts.shape[0]:
            raise InvalidParameter("declared m does not match the point count")
        return cls(points=pts, label=data.get("label", ""))


def green(y, yp) -> np.ndarray:
    """Green function -(1/2 pi) ln |y - y'| of the sphere Laplacian."""
    y = np.asarray(y, dtype=float)
    yp = np.asarray(yp, dtype=float)
    d = np.linalg.norm(y - yp, axis=-1)
    if np.any(d < COINCIDENCE_TOL):
        raise CoincidentPoints("Green function evaluated on the diagonal")
    return -np.log(d) / (2.0 * np.pi)


def green_chart(p, y) -> np.ndarray:
    """Chart form -(1/4 pi) ln(4|x|^2/(1+|x|^2)) with x = Pi_p(y)."""
    x = stereo_project(p, y)
    r2 = np.sum(x * x, axis=-1)
    return -np.log(4.0 * r2 / (1.0 + r2)) / (4.0 * np.pi)


def pair_green_sum(config: Configuration) -> float:
    """sum_{j<k} G(p_j, p_k)."""
    pts = config.points
    total = 0.0
    for j, k in itertools.combinations(range(config.m), 2):
        total += float(green(pts[j], pts[k]))
    return total


def config_energy(config: Configuration) -> float:
    """Interaction energy F = -2 sum_{j<k} ln |p_j - p_k|."""
    pts = config.points
    if config.m < 2:
        return 0.0
    d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    iu = np.triu_indices(config.m, k=1)
    return float(-2.0 * np.sum(np.log(d[iu])))


def config_gradient(config: Configuration) -> np.ndarray:
    """Riemannian gradient of config_energy, one tangent vector per point.

    The ambient gradient at p_i is -2 sum_{k != i} (p_i - p_k)/|p_i - p_k|^2,
    projected onto the tangent plane at p_i.
    """
    pts = config.points
    m = config.m
    grad = np.zeros_like(pts)
    diff = pts[:, None, :] - pts[None, :, :]
    d2 = np.sum(diff * diff, axis=-1)
    np.fill_diagonal(d2, np.inf)
    grad = -2.0 * np.sum(diff / d2[:, :, None], axis=1)
    for i in range(m):
        grad[i] = tangent_project(pts[i], grad[i])
    return grad


def td_group() -> np.ndarray:
    """The 24 signed permutation matrices fixing the reference tetrahedron.

    These are P_sigma diag(s) with sigma in S_3 and s in {+-1}^3 of positive
    product; the determinant equals the sign of sigma, so reflections are
    included.
    """
    mats = []
    for perm in itertools.permutations(range(3)):
        P = np.zeros((3, 3))
        for i, j in enumerate(perm):
            P[i, j] = 1.0
        for signs in itertools.product((1.0, -1.0), repeat=3):
            if signs[0] * signs[1] * signs[2] > 0:
                mats.append(P * np.asarray(signs)[None, :])
    return np.asarray(mats)


def _rings(twist: float, height: float) -> np.ndarray:
    if not 0.0 < height < 1.0:
        raise InvalidParameter("ring height must lie in (0, 1)")
    rad = np.sqrt(1.0 - height * height)
    bottom = [
        (rad * np.cos(0.5 * np.pi * k), rad * np.sin(0.5 * np.pi * k), -height)
        for k in range(4)
    ]
    top = [
        (rad * np.cos(0.5 * np.pi * k + twist), rad * np.sin(0.5 * np.pi * k + twist), height)
        for k in range(4)
    ]
    return np.asarray(bottom + top)


def reference_config(label: str, twist: float = np.pi / 4, height: float = 0.5) -> Configuration:
    """Catalogue of reference configurations by label.

    twisted_cuboid8 takes the ring twist (radians, 0 gives the cube combina-
    torics) and the ring height h in (0, 1); the other labels ignore both.
    """
    if label == "triangle3":
        ang = 2.0 * np.pi * np.arange(3) / 3.0
        pts = np.stack([np.cos(ang), np.sin(ang), np.zeros(3)], axis=-1)
    elif label == "tetrahedron4":
        pts = np.asarray(
            [[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float
        ) / np.sqrt(3.0)
    elif label == "octahedron6":
        pts = np.concatenate([np.eye(3), -np.eye(3)])
    elif label == "cube8":
        pts = np.asarray(
            list(itertools.product((1.0, -1.0), repeat=3)), dtype=float
        ) / np.sqrt(3.0)
    elif label == "twisted_cuboid8":
        pts = _rings(twist, height)
    elif label == "icosahedron12":
        phi = (1.0 + np.sqrt(5.0)) / 2.0
        base = []
        for a, b in itertools.product((1.0, -1.0), repeat=2):
            base += [(0.0, a, b * phi), (a, b * phi, 0.0), (b * phi, 0.0, a)]
        pts = np.asarray(base) / np.sqrt(1.0 + phi * phi)
    elif label == "dodecahedron20":
        phi = (1.0 + np.sqrt(5.0)) / 2.0
        base = list(itertools.product((1.0, -1.0), repeat=3))
        base = [np.asarray(v, dtype=float) for v in base]
        for a, b in itertools.product((1.0, -1.0), repeat=2):
            base += [
                np.asarray([0.0, a / phi, b * phi]),
                np.asarray([a / phi, b * phi, 0.0]),
                np.asarray([b * phi, 0.0, a / phi]),
            ]
        pts = np.asarray(base) / np.sqrt(3.0)
    else:
        raise InvalidParameter(f"unknown configuration label: {label!r}")
    return Configuration(points=pts, label=label)
