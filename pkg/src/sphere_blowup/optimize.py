"""Riemannian descent for the logarithmic configuration energy.

minimize_config runs projected gradient descent with Armijo backtracking from
several random starts and keeps the best critical point found.
classify_configuration matches a configuration against the reference
catalogue up to rotation, first by sorted pairwise-distance multisets, then
by an explicit orthogonal alignment.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment, minimize

from .configurations import Configuration, config_energy, config_gradient, reference_config
from .errors import InvalidParameter
from .geometry import chart_frame, sphere_point

ARMIJO_C = 1e-4
BACKTRACK_FACTOR = 0.5
INITIAL_STEP = 0.1
ITERATION_CAP = 10_000
POLISH_GATE = 1e-2


@dataclass
class OptimizeReport:
    """Outcome of a multi-start minimization."""

    config: Configuration
    energy: float
    gradient_norm: float
    converged: bool
    starts: int
    tol: float
    seed: int
    iterations: list = field(default_factory=list)
    energies: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "m": self.config.m,
                "points": self.config.points.tolist(),
                "energy": self.energy,
                "gradient_norm": self.gradient_norm,
                "converged": self.converged,
                "starts": self.starts,
                "tol": self.tol,
                "seed": self.seed,
                "iterations": self.iterations,
                "energies": self.energies,
            },
            indent=2,
        )


def _polish(pts: np.ndarray, F: float, gn: float, tol: float):
    """Newton tail in fixed tangent frames for the final decades the
    fixed-step descent resolves slowly; the three rotational gauge modes
    of the Hessian are dropped by the lstsq cutoff."""
    for _ in range(8):
        if gn <= 0.1 * tol:
            break
        frames = [chart_frame(p) for p in pts]
        g = config_gradient(Configuration(points=pts))
        gt = np.empty(2 * len(pts))
        for i, (e1, e2) in enumerate(frames):
            gt[2 * i] = np.dot(g[i], e1)
            gt[2 * i + 1] = np.dot(g[i], e2)
        hess = config_hessian(Configuration(points=pts))
        step, *_ = np.linalg.lstsq(hess, -gt, rcond=1e-9)
        t = 1.0
        improved = False
        for _halving in range(20):
            new = pts.copy()
            for i, (e1, e2) in enumerate(frames):
                new[i] = pts[i] + t * (step[2 * i] * e1 + step[2 * i + 1] * e2)
            cand = sphere_point(new)
            cand_cfg = Configuration(points=cand)
            gn_new = float(np.linalg.norm(config_gradient(cand_cfg)))
            F_new = config_energy(cand_cfg)
            if gn_new < gn and F_new <= F + 1e-12 * (1.0 + abs(F)):
                improved = True
                break
            t *= 0.5
        if not improved:
            break
        pts, gn, F = cand, gn_new, F_new
    return pts, F, gn


def _descend(pts: np.ndarray, tol: float, max_iter: int) -> tuple[np.ndarray, float, float, int, bool]:
    cfg = Configuration(points=pts)
    pts = cfg.points
    F = config_energy(cfg)
    gate = max(tol, POLISH_GATE)
    it = 0
    for it in range(max_iter):
        g = config_gradient(Configuration(points=pts))
        gn2 = float(np.sum(g * g))
        gn = np.sqrt(gn2)
        if gn <= gate:
            break
        t = INITIAL_STEP
        while True:
            cand = sphere_point(pts - t * g)
            F_new = config_energy(Configuration(points=cand))
            if F_new <= F - ARMIJO_C * t * gn2:
                break
            t *= BACKTRACK_FACTOR
            if t < 1e-20:
                return pts, F, gn, it, False
        assert F_new <= F + 1e-12 * (1.0 + abs(F)), "energy increased on an accepted step"
        pts, F = cand, F_new
    gn = float(np.linalg.norm(config_gradient(Configuration(points=pts))))
    if gn > tol:
        pts, F, gn = _polish(pts, F, gn, tol)
    return pts, F, gn, it, gn <= tol


def minimize_config(m: int, starts: int = 20, tol: float = 1e-9, seed: int = 0,
                    max_iter: int = ITERATION_CAP) -> OptimizeReport:
    """Minimize the logarithmic energy of m points from random starts.

    Parameters
    ----------
    m : number of points (>= 2).
    starts : number of independent random starts.
    tol : stopping tolerance on the full Riemannian gradient norm.
    seed : seed for the start sampler; fixed seed gives fixed output.

    Returns the best critical point found.  When no start meets tol the
    report is returned with converged=False rather than raising.
    """
    if m < 2:
        raise InvalidParameter("need at least two points")
    if starts < 1:
        raise InvalidParameter("need at least one start")
    rng = np.random.default_rng(seed)
    best = None
    iterations, energies = [], []
    for _ in range(starts):
        while True:
            pts = rng.standard_normal((m, 3))
            pts = sphere_point(pts)
            d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
            np.fill_diagonal(d, np.inf)
            if d.min() > 1e-6:
                break
        pts, F, gn, it, ok = _descend(pts, tol, max_iter)
        iterations.append(it)
        energies.append(F)
        if best is None or F < best[1]:
            best = (pts, F, gn, ok)
    pts, F, gn, ok = best
    return OptimizeReport(
        config=Configuration(points=pts),
        energy=F,
        gradient_norm=gn,
        converged=ok,
        starts=starts,
        tol=tol,
        seed=seed,
        iterations=iterations,
        energies=energies,
    )


def _sorted_distances(pts: np.ndarray) -> np.ndarray:
    d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    iu = np.triu_indices(pts.shape[0], k=1)
    return np.sort(d[iu])


def fit_twisted_cuboid(config: Configuration) -> tuple[float, float, float]:
    """Fit ring twist and height of a two-ring configuration of 8 points.

    Matches the rotation-invariant sorted distance multiset against the
    twisted-cuboid family over a coarse (twist, height) grid, then polishes
    with Nelder-Mead.  Returns (twist, height, multiset mismatch).
    """
    if config.m != 8:
        raise InvalidParameter("twisted cuboid fit needs m = 8")
    target = _sorted_distances(config.points)

    def mismatch(v):
        tw = np.clip(v[0], 0.0, np.pi / 4)
        h = np.clip(v[1], 1e-3, 1.0 - 1e-3)
        ref = reference_config("twisted_cuboid8", twist=tw, height=h)
        return float(np.linalg.norm(_sorted_distances(ref.points) - target))

    tws = np.linspace(0.0, np.pi / 4, 33)
    hs = np.linspace(0.05, 0.95, 33)
    vals = [(mismatch((tw, h)), tw, h) for tw in tws for h in hs]
    _, tw0, h0 = min(vals)
    res = minimize(mismatch, x0=[tw0, h0], method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 2000})
    tw = float(np.clip(res.x[0], 0.0, np.pi / 4))
    h = float(np.clip(res.x[1], 1e-3, 1.0 - 1e-3))
    return tw, h, mismatch((tw, h))


def _alignment_rms(A: np.ndarray, B: np.ndarray, tol: float) -> float:
    """Best RMS of |T A_i - B_{pi(i)}| over orthogonal T and permutations pi.

    Anchor pairs seed candidate frames; the assignment is solved exactly and
    the rotation refined by one least-squares (Kabsch) pass.
    """
    m = A.shape[0]
    a0 = A[0]
    d0 = np.linalg.norm(A - a0, axis=-1)
    j1 = int(np.argsort(d0)[1])
    a1 = A[j1]
    da = np.linalg.norm(a0 - a1)

    def frame(u, v):
        e1 = u / np.linalg.norm(u)
        w = v - np.dot(v, e1) * e1
        e2 = w / np.linalg.norm(w)
        return np.stack([e1, e2, np.cross(e1, e2)])

    best = np.inf
    FA = frame(a0, a1)
    for i0 in range(m):
        for i1 in range(m):
            if i1 == i0:
                continue
            if abs(np.linalg.norm(B[i0] - B[i1]) - da) > max(100 * tol, 1e-6):
                continue
            for sign in (1.0, -1.0):
                FB = frame(B[i0], B[i1])
                FB[2] *= sign
                T = FB.T @ FA
                C = A @ T.T
                cost = np.linalg.norm(C[:, None, :] - B[None, :, :], axis=-1)
                rows, cols = linear_sum_assignment(cost)
                # Kabsch refinement on the matched pairs
                H = A[rows].T @ B[cols]
                U, _, Vt = np.linalg.svd(H)
                R = (U @ Vt).T
                if np.linalg.det(R) < 0:
                    U[:, -1] *= -1
                    R = (U @ Vt).T
                resid = A[rows] @ R.T - B[cols]
                rms = float(np.sqrt(np.mean(np.sum(resid * resid, axis=-1))))
                best = min(best, rms)
                if best <= tol:
                    return best
    return best


def classify_configuration(config: Configuration, tol: float = 1e-5) -> str:
    """Label a configuration by reference shape, or 'unclassified'.

    Matching is rotation invariant: sorted pairwise distances first, then an
    explicit orthogonal alignment must reproduce the reference within tol.
    The twisted cuboid family is matched after fitting its two parameters.
    """
    m = config.m
    candidates = {3: ["triangle3"], 4: ["tetrahedron4"], 6: ["octahedron6"],
                  8: ["cube8", "twisted_cuboid8"], 12: ["icosahedron12"],
                  20: ["dodecahedron20"]}.get(m, [])
    target = _sorted_distances(config.points)
    for label in candidates:
        if label == "twisted_cuboid8":
            tw, h, mis = fit_twisted_cuboid(config)
            if mis > tol * np.sqrt(len(target)):
                continue
            ref = reference_config(label, twist=tw, height=h)
        else:
            ref = reference_config(label)
            if np.max(np.abs(_sorted_distances(ref.points) - target)) > tol:
                continue
        if _alignment_rms(config.points, ref.points, tol) <= tol:
            return label
    return "unclassified"


def config_hessian(config: Configuration, step: float = 1e-5) -> np.ndarray:
    """Riemannian Hessian of config_energy in fixed tangent frames, by
    central differences of the projected gradient (2m x 2m, symmetrized)."""
    pts = config.points
    m = config.m
    frames = [chart_frame(p) for p in pts]

    def perturbed(tvec):
        new = pts.copy()
        for i in range(m):
            e1, e2 = frames[i]
            new[i] = pts[i] + tvec[2 * i] * e1 + tvec[2 * i + 1] * e2
        return sphere_point(new)

    def tangent_grad(tvec):
        g = config_gradient(Configuration(points=perturbed(tvec)))
        out = np.empty(2 * m)
        for i in range(m):
            e1, e2 = frames[i]
            out[2 * i] = np.dot(g[i], e1)
            out[2 * i + 1] = np.dot(g[i], e2)
        return out

    n = 2 * m
    H = np.empty((n, n))
    for a in range(n):
        tv = np.zeros(n)
        tv[a] = step
        H[:, a] = (tangent_grad(tv) - tangent_grad(-tv)) / (2.0 * step)
    return 0.5 * (H + H.T)
