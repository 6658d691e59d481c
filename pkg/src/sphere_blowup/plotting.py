"""Figure rendering for the CLI report paths.

Every function takes computed data and a target path, renders one figure
with the Agg backend, and returns the path. Figures accompany the CSV/JSON
outputs; they are never the primary record.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

_SAVE_OPTS = {"dpi": 150, "bbox_inches": "tight", "metadata": {"Software": None}}


def _finish(fig, path: str) -> str:
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)
    return path


def configuration_figure(points: np.ndarray, energy: float, label: str,
                         path: str) -> str:
    """3D scatter of a point configuration with its shortest edges drawn."""
    points = np.asarray(points, dtype=float)
    fig = plt.figure(figsize=(5.0, 5.0))
    ax = fig.add_subplot(projection="3d")
    u, v = np.meshgrid(np.linspace(0, 2 * math.pi, 40), np.linspace(0, math.pi, 20))
    ax.plot_wireframe(np.cos(u) * np.sin(v), np.sin(u) * np.sin(v), np.cos(v),
                      color="0.85", linewidth=0.3)
    ax.scatter(*points.T, s=60, color="crimson", depthshade=False)
    dists = np.linalg.norm(points[:, None] - points[None, :], axis=-1)
    cut = 1.2 * np.min(dists[dists > 1e-9]) if points.shape[0] > 1 else 0.0
    for i in range(points.shape[0]):
        for j in range(i + 1, points.shape[0]):
            if dists[i, j] <= cut:
                ax.plot(*points[[i, j]].T, color="steelblue", linewidth=1.2)
    ax.set_box_aspect((1, 1, 1))
    ax.set_title(f"{label}  (F = {energy:.6f})")
    return _finish(fig, path)


def grid_heatmap(theta: np.ndarray, phi: np.ndarray, values: np.ndarray,
                 title: str, path: str) -> str:
    """Lat-long heatmap of a scalar field sampled on a regular grid."""
    fig, ax = plt.subplots(figsize=(7.0, 3.6))
    mesh = ax.pcolormesh(phi, theta, values, shading="auto", cmap="viridis")
    fig.colorbar(mesh, ax=ax, shrink=0.85)
    ax.set_xlabel("longitude")
    ax.set_ylabel("colatitude")
    ax.invert_yaxis()
    ax.set_title(title)
    return _finish(fig, path)


def energy_remainder_figure(lams, measured, predicted, path: str) -> str:
    """Energy vs its expansion, with the remainder against a lambda^2 guide."""
    lams = np.asarray(lams, dtype=float)
    rem = np.abs(np.asarray(measured) - np.asarray(predicted))
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.5, 3.4))
    ax1.plot(lams, measured, "o-", label="measured J")
    ax1.plot(lams, predicted, "s--", label="expansion")
    ax1.set_xlabel("lambda")
    ax1.legend()
    ax2.loglog(lams, rem, "o-", label="|remainder|")
    if np.all(rem > 0):
        ax2.loglog(lams, rem[0] * (lams / lams[0]) ** 2, ":", label="lambda^2 guide")
    ax2.set_xlabel("lambda")
    ax2.legend()
    fig.tight_layout()
    return _finish(fig, path)


def reduced_curve_figure(curve, path: str) -> str:
    """Variable part of the reduced energy over the scale bracket."""
    fig, ax = plt.subplots(figsize=(5.5, 3.6))
    var = (2.0 * curve.eps * np.log(curve.lambda_grid)
           + 384.0 * math.pi * curve.lambda_grid**2 * np.log(curve.lambda_grid))
    ax.semilogx(curve.lambda_grid, var, "-")
    ax.axvline(curve.lambda_star, color="crimson", linewidth=1.0,
               label=f"lambda_* = {curve.lambda_star:.6g}")
    ax.set_xlabel("lambda")
    ax.set_ylabel("variable part of J")
    ax.set_title(f"eps = {curve.eps:g}")
    ax.legend()
    return _finish(fig, path)


def newton_history_figure(history, path: str) -> str:
    """Residual norm per accepted Newton step."""
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.semilogy(range(len(history)), history, "o-")
    ax.set_xlabel("accepted step")
    ax.set_ylabel("Galerkin residual norm")
    return _finish(fig, path)


def branch_figure(rows, path: str) -> str:
    """Peak and off-peak values along the continuation branch."""
    rho = [r["rho"] for r in rows]
    fig, ax = plt.subplots(figsize=(5.5, 3.6))
    ax.plot(rho, [r["u_peak"] for r in rows], "o-", label="u at a peak")
    ax.plot(rho, [r["u_offpeak"] for r in rows], "s-", label="u off-peak")
    ax.axvline(32.0 * math.pi, color="0.6", linewidth=0.8)
    ax.set_xlabel("rho")
    ax.invert_xaxis()
    ax.legend()
    return _finish(fig, path)


def residual_summary_figure(lams, inner_ratio, outer_ratio, path: str) -> str:
    """Residual bound-shape ratios across scales."""
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.plot(lams, inner_ratio, "o-", label="inner ratio")
    ax.plot(lams, outer_ratio, "s-", label="outer ratio")
    ax.set_xlabel("lambda")
    ax.set_ylabel("measured / bound shape")
    ax.legend()
    return _finish(fig, path)
