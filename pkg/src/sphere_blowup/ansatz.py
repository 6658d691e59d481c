"""Bubble ansatz for blow-up approximate solutions.

The approximate solution with concentration set {xi_1, ..., xi_m} is

    w = sum_k w_k + wbar,

where each component w_k has mean zero and solves

    -Delta_g w_k = e^{U_k} eta_k - m0,

with U_k the bubble of scale lambda at xi_k, eta_k the cut-off at chart
radius R0, and 4*pi*m0 the truncated bubble mass.  Because the source is
radial in the chart at xi_k, the Green integral reduces to one dimension:
on [0, R0] the radial moments have closed forms, on the cut-off band
[R0, 2R0] they are carried by cumulative Gauss-Legendre panels and cubic
splines, and beyond 2R0 the component is exactly a multiple of the Green
function plus a constant.  Evaluations are therefore accurate to rounding,
stable at the antipode, and cheap.

The glued mode replaces each component by the matched inner/outer pair
blended at chart radius lambda**alpha, which is the piecewise form the
asymptotic expansions are stated in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline

from .configurations import Configuration, green, pair_green_sum, reference_config
from .errors import AntipodalPoint, InvalidParameter, QuadratureFailure
from .fields import ScalarField
from .geometry import (chart_radius, chordal_distance, sphere_point,
                       stereo_project)
from .quadrature import check_disjoint_charts

BAND_KNOTS = 49
BAND_GL_ORDER = 20


def eta_profile(s) -> np.ndarray:
    """Quintic cut-off profile: 1 on s <= 1, 0 on s >= 2, |slope| <= 15/8."""
    s = np.asarray(s, dtype=float)
    t = np.clip(np.where(np.isfinite(s), s, 2.0) - 1.0, 0.0, 1.0)
    return 1.0 - t**3 * (10.0 - 15.0 * t + 6.0 * t * t)


def eta_profile_prime(s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    t = np.clip(np.where(np.isfinite(s), s, 2.0) - 1.0, 0.0, 1.0)
    return -30.0 * t * t * (1.0 - t) ** 2


def cutoff_eta(t: float, xi, y) -> np.ndarray:
    """eta(|Pi_xi(y)| / t): 1 inside chart radius t, 0 outside 2t."""
    if t <= 0.0:
        raise InvalidParameter("cut-off scale must be positive")
    return eta_profile(chart_radius(xi, y) / t)


def chi_r(R: float, z) -> np.ndarray:
    """Plateau cut-off in the plane: 1 for |z| <= R, 0 for |z| >= R + 1."""
    if R <= 0.0:
        raise InvalidParameter("cut-off radius must be positive")
    z = np.asarray(z, dtype=float)
    r = np.sqrt(np.sum(z * z, axis=-1)) if z.shape[-1] == 2 else np.abs(z)
    return eta_profile(1.0 + np.clip(r - R, 0.0, None))


def bubble_u(lam: float, p, y) -> np.ndarray:
    """Bubble value U_{lam,p}(y) = ln(8 lam^2) + 2 ln((1+r^2)/(lam^2+r^2)) - ln 4.

    r is the chart radius of y at p.  The value extends continuously to the
    antipode, but following the chart definition that point is rejected.
    """
    if lam <= 0.0:
        raise InvalidParameter("bubble scale must be positive")
    r = chart_radius(p, y)
    if np.any(~np.isfinite(r)):
        raise AntipodalPoint("bubble evaluated at the antipode of its center")
    r2 = r * r
    return (np.log(8.0 * lam * lam) - np.log(4.0)
            + 2.0 * np.log((1.0 + r2) / (lam * lam + r2)))


def bubble_density_chart(lam: float, r) -> np.ndarray:
    """Chart density of the bubble measure: e^U dH^2 = this * r dr dphi."""
    r = np.asarray(r, dtype=float)
    return 8.0 * lam * lam / (lam * lam + r * r) ** 2


def kernel_phi(i: int, z) -> np.ndarray:
    """Kernel functions of the scaled linearized operator.

    phi_0 = 2(|z|^2-1)/(1+|z|^2); phi_1, phi_2 = -4 z_i/(1+|z|^2).
    """
    z = np.asarray(z, dtype=float)
    r2 = np.sum(z * z, axis=-1)
    if i == 0:
        return np.where(np.isinf(r2), 2.0, 2.0 * (r2 - 1.0) / (1.0 + r2))
    if i in (1, 2):
        return np.where(np.isinf(r2), 0.0, -4.0 * z[..., i - 1] / (1.0 + r2))
    raise InvalidParameter("kernel index must be 0, 1 or 2")


@dataclass
class AnsatzParams:
    """Parameters of the ansatz; rho = 8 pi m + eps.

    eps must sit inside the admissibility bracket
    192 pi lam^2 ln(1/lam) < eps < 768 pi lam^2 ln(1/lam), except that
    eps = 0 is allowed (the single-bubble case is exact at eps = 0).
    """

    eps: float
    lam: float
    config: Configuration = None
    r0: float = 0.25
    r1: float = 10.0
    r3: float = None
    alpha: float = 0.5

    def __post_init__(self):
        if self.config is None:
            self.config = reference_config("tetrahedron4")
        if self.r3 is None:
            self.r3 = self.r0
        if not 0.0 < self.lam < 1.0:
            raise InvalidParameter("lam must lie in (0, 1)")
        if not 0.0 < self.alpha < 1.0:
            raise InvalidParameter("alpha must lie in (0, 1)")
        if self.r1 <= 0.0 or self.r3 <= 0.0 or not 0.0 < self.r0 < 1.0:
            raise InvalidParameter("cut-off radii must be positive")
        if self.eps < 0.0:
            raise InvalidParameter("eps must be nonnegative")
        if self.eps > 0.0:
            gate = self.lam**2 * math.log(1.0 / self.lam)
            if not 192.0 * math.pi * gate < self.eps < 768.0 * math.pi * gate:
                raise InvalidParameter(
                    f"eps = {self.eps} outside the admissible bracket "
                    f"({192 * math.pi * gate:.6g}, {768 * math.pi * gate:.6g}) "
                    f"for lam = {self.lam}")
        check_disjoint_charts(self.config.points, self.r0)

    @property
    def m(self) -> int:
        return self.config.m

    @property
    def rho(self) -> float:
        return 8.0 * math.pi * self.m + self.eps


class _RadialTable:
    """Radial moments of the truncated bubble density at scale lam.

    With rho_eta(s) = 8 lam^2/(lam^2+s^2)^2 * eta(s/R0) the table carries

        A(r)  = int_0^r rho_eta s ds            (mass, A_tot = 2 m0)
        D(r)  = int_0^r ln(s) rho_eta s ds
        Jc(r) = int_0^r ln(1+s^2) rho_eta s ds

    in closed form on [0, R0] and as cumulative panel quadrature plus
    splines on the band [R0, 2R0].  The mean-value identity for ln|x - x'|
    on circles turns the component w_k into

        w(r) = -ln(r) A(r) - (D_tot - D(r)) - ln(2) A_tot
               + (A_tot/2) ln(1+r^2) + Jc_tot/2        for r <= 2 R0,
        w    = -A_tot ln(d) + Jc_tot/2                 beyond (d chordal).
    """

    def __init__(self, lam: float, r0: float):
        self.lam = lam
        self.r0 = r0

        knots = np.linspace(r0, 2.0 * r0, BAND_KNOTS)
        xg, wg = np.polynomial.legendre.leggauss(BAND_GL_ORDER)
        mid = 0.5 * (knots[1:] + knots[:-1])
        half = 0.5 * (knots[1:] - knots[:-1])
        s = mid[:, None] + half[:, None] * xg[None, :]
        ws = half[:, None] * wg[None, :]
        rho = bubble_density_chart(lam, s) * eta_profile(s / r0) * s
        inc_a = np.sum(ws * rho, axis=1)
        inc_d = np.sum(ws * rho * np.log(s), axis=1)
        inc_j = np.sum(ws * rho * np.log1p(s * s), axis=1)

        a_knots = self._closed_a(knots[0]) + np.concatenate([[0.0], np.cumsum(inc_a)])
        d_knots = self._closed_d(knots[0]) + np.concatenate([[0.0], np.cumsum(inc_d)])
        j_knots = self._closed_j(knots[0]) + np.concatenate([[0.0], np.cumsum(inc_j)])
        self._band_a = CubicSpline(knots, a_knots)
        self._band_d = CubicSpline(knots, d_knots)
        self._band_j = CubicSpline(knots, j_knots)

        self.a_tot = float(a_knots[-1])
        self.d_tot = float(d_knots[-1])
        self.jc_tot = float(j_knots[-1])
        self.m0 = 0.5 * self.a_tot

    def _closed_a(self, r):
        r2 = np.square(r)
        return 4.0 * r2 / (self.lam**2 + r2)

    def _closed_d(self, r):
        l2 = self.lam**2
        u = np.square(np.asarray(r, dtype=float))
        with np.errstate(divide="ignore", invalid="ignore"):
            f = -np.log(u) / (l2 + u) + np.log(u / (l2 + u)) / l2
            val = 2.0 * l2 * f + 4.0 * np.log(self.lam)
        return np.where(u < 1e-280, 0.0, val)

    def _closed_j(self, r):
        l2 = self.lam**2
        u = np.square(np.asarray(r, dtype=float))
        val = (-np.log1p(u) / (l2 + u)
               + np.log((l2 + u) / (1.0 + u)) / (1.0 - l2)
               - 2.0 * np.log(self.lam) / (1.0 - l2))
        return 4.0 * l2 * val

    def moments(self, r):
        """(A, D, Jc) at chart radii r (valid for r <= 2 R0)."""
        r = np.asarray(r, dtype=float)
        band = r > self.r0
        a = np.where(band, self._band_a(np.minimum(r, 2 * self.r0)), self._closed_a(r))
        d = np.where(band, self._band_d(np.minimum(r, 2 * self.r0)), self._closed_d(r))
        j = np.where(band, self._band_j(np.minimum(r, 2 * self.r0)), self._closed_j(r))
        return a, d, j

    def w_values(self, r, d_chordal):
        """Component values from chart radii r and chordal distances d."""
        r = np.asarray(r, dtype=float)
        d = np.asarray(d_chordal, dtype=float)
        near = np.isfinite(r) & (r <= 2.0 * self.r0)
        rs = np.where(near, r, self.r0)
        a, dd, j = self.moments(rs)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_r = np.where(rs > 1e-280, np.log(np.maximum(rs, 1e-280)), 0.0)
            w_in = (-log_r * a - (self.d_tot - dd) - np.log(2.0) * self.a_tot
                    + 0.5 * self.a_tot * np.log1p(rs * rs) + 0.5 * self.jc_tot)
        w_far = -self.a_tot * np.log(np.maximum(d, 1e-280)) + 0.5 * self.jc_tot
        return np.where(near, w_in, w_far)

    def verify(self, tol: float = 1e-9) -> None:
        """Band quadrature self-check at doubled resolution."""
        knots = np.linspace(self.r0, 2.0 * self.r0, 2 * BAND_KNOTS - 1)
        xg, wg = np.polynomial.legendre.leggauss(BAND_GL_ORDER)
        mid = 0.5 * (knots[1:] + knots[:-1])
        half = 0.5 * (knots[1:] - knots[:-1])
        s = mid[:, None] + half[:, None] * xg[None, :]
        ws = half[:, None] * wg[None, :]
        rho = bubble_density_chart(self.lam, s) * eta_profile(s / self.r0) * s
        a_tot = self._closed_a(self.r0) + float(np.sum(ws * rho))
        if abs(a_tot - self.a_tot) > tol:
            raise QuadratureFailure(
                f"band quadrature unstable: mass moved by {abs(a_tot - self.a_tot):.3e}")


@lru_cache(maxsize=64)
def _radial_table(lam: float, r0: float) -> _RadialTable:
    table = _RadialTable(lam, r0)
    table.verify()
    return table


def mass_m0(params: AnsatzParams) -> float:
    """Truncated bubble mass m0 = (1/4 pi) int e^{U_k} eta_k dH^2."""
    return _radial_table(params.lam, params.r0).m0


def wbar(params: AnsatzParams) -> float:
    """Additive constant matching the peak height ln(2/lam^2).

    For a vertex-transitive configuration the per-vertex Green sum equals
    (2/m) of the pair sum, which fixes

        wbar = 2 ln(lam) + 5 ln(2) - (16 pi / m) sum_{j<k} G(xi_j, xi_k).
    """
    gsum = pair_green_sum(params.config) if params.m > 1 else 0.0
    return (2.0 * math.log(params.lam) + 5.0 * math.log(2.0)
            - 16.0 * math.pi * gsum / params.m)


def _component_exact(params: AnsatzParams, k: int, y: np.ndarray) -> np.ndarray:
    table = _radial_table(params.lam, params.r0)
    xi = params.config.points[k]
    return table.w_values(chart_radius(xi, y), chordal_distance(y, xi))


def _inner_outer(params: AnsatzParams, k: int, y: np.ndarray):
    """Matched inner and outer approximations and the blend weight."""
    lam = params.lam
    xi = params.config.points[k]
    r = chart_radius(xi, y)
    r2 = r * r
    lnl = math.log(lam)
    with np.errstate(invalid="ignore"):
        ratio = (1.0 + r2) / (lam * lam + r2)
    w_in = (-4.0 * math.log(2.0) - 4.0 * lam * lam * lnl
            + 2.0 * np.log(np.where(np.isfinite(r), ratio, 1.0)))
    d = np.maximum(chordal_distance(y, xi), 1e-280)
    w_out = -4.0 * np.log(d) - 4.0 * lam * lam * lnl
    blend = eta_profile(r / lam**params.alpha)
    return w_in, w_out, blend


def _component_glued(params: AnsatzParams, k: int, y: np.ndarray) -> np.ndarray:
    w_in, w_out, blend = _inner_outer(params, k, y)
    return blend * w_in + (1.0 - blend) * w_out


def w_component(params: AnsatzParams, k: int, y, mode: str = "exact_quadrature") -> np.ndarray:
    """One mean-zero component w_k of the ansatz.

    mode 'exact_quadrature' evaluates the Green integral via the radial
    reduction (accurate to rounding); mode 'glued' evaluates the blended
    inner/outer asymptotic form.
    """
    if not 0 <= k < params.m:
        raise InvalidParameter("component index out of range")
    y = sphere_point(np.asarray(y, dtype=float))
    if mode == "exact_quadrature":
        return _component_exact(params, k, y)
    if mode == "glued":
        return _component_glued(params, k, y)
    raise InvalidParameter(f"unknown mode: {mode!r}")


def _w_eval(params: AnsatzParams, mode: str):
    def eval_fn(y):
        y = np.asarray(y, dtype=float)
        total = np.full(y.shape[:-1], wbar(params))
        for k in range(params.m):
            total = total + w_component(params, k, y, mode=mode)
        return total
    return eval_fn


def _w_laplacian(params: AnsatzParams):
    """Exact Delta_g w = m*m0 - sum_k e^{U_k} eta_k for the exact mode."""
    m0 = mass_m0(params)

    def lap_fn(y):
        y = np.asarray(y, dtype=float)
        lam = params.lam
        out = np.full(y.shape[:-1], params.m * m0)
        for xi in params.config.points:
            r = chart_radius(xi, y)
            finite = np.isfinite(r)
            r2 = np.where(finite, r * r, 1.0)
            # e^U on the sphere = 2 lam^2 (1+r^2)^2/(lam^2+r^2)^2
            e_u = 2.0 * lam * lam * ((1.0 + r2) / (lam * lam + r2)) ** 2
            term = e_u * eta_profile(np.where(finite, r, np.inf) / params.r0)
            out = out - np.where(finite, term, 0.0)
        return out
    return lap_fn


def _w_branch(params: AnsatzParams, mode: str):
    def branch_fn(y):
        y = np.asarray(y, dtype=float)
        labels = np.full(y.shape[:-1], "outer", dtype=object)
        seam = params.lam**params.alpha if mode == "glued" else params.r0
        for k, xi in enumerate(params.config.points):
            r = chart_radius(xi, y)
            labels = np.where(r <= seam, f"inner {k}", labels)
            labels = np.where((r > seam) & (r <= 2.0 * seam), f"glued {k}", labels)
        return labels
    return branch_fn


def ansatz_field(params: AnsatzParams, mode: str = "exact_quadrature") -> ScalarField:
    """The full ansatz w = sum_k w_k + wbar as a ScalarField.

    The exact mode carries the closed-form Laplacian
    Delta_g w = m*m0 - sum_k e^{U_k} eta_k, which keeps residual
    evaluations rounding-accurate near the bubble cores.
    """
    if mode not in ("exact_quadrature", "glued"):
        raise InvalidParameter(f"unknown mode: {mode!r}")
    return ScalarField(
        eval_fn=_w_eval(params, mode),
        name=f"ansatz[{mode}]",
        laplacian_fn=_w_laplacian(params) if mode == "exact_quadrature" else None,
        branch_fn=_w_branch(params, mode),
    )


def ansatz_w(params: AnsatzParams, y, mode: str = "exact_quadrature") -> np.ndarray:
    """Ansatz values at y; see ansatz_field."""
    return ansatz_field(params, mode)(sphere_point(y))


def _unchecked(params: AnsatzParams, lam: float) -> AnsatzParams:
    # nearby lam can leave the eps bracket; bypass validation for FD steps
    clone = object.__new__(AnsatzParams)
    clone.eps = params.eps
    clone.lam = lam
    clone.config = params.config
    clone.r0 = params.r0
    clone.r1 = params.r1
    clone.r3 = params.r3
    clone.alpha = params.alpha
    return clone


def ansatz_dlambda(params: AnsatzParams, y, mode: str = "exact_quadrature",
                   method: str = "fd") -> np.ndarray:
    """Scale derivative of the ansatz at fixed centers.

    method 'fd' uses a centered difference with relative step 1e-4 in lam;
    method 'analytic' differentiates the glued form exactly (glued only).
    """
    y = sphere_point(np.asarray(y, dtype=float))
    if method == "fd":
        h = 1e-4 * params.lam
        up = ansatz_field(_unchecked(params, params.lam + h), mode)(y)
        dn = ansatz_field(_unchecked(params, params.lam - h), mode)(y)
        return (up - dn) / (2.0 * h)
    if method != "analytic":
        raise InvalidParameter(f"unknown method: {method!r}")
    if mode != "glued":
        raise InvalidParameter("analytic scale derivative needs the glued mode")
    lam = params.lam
    lnl = math.log(lam)
    total = np.full(y.shape[:-1], 2.0 / lam)
    s = lam**params.alpha
    for k, xi in enumerate(params.config.points):
        r = chart_radius(xi, y)
        r2 = np.where(np.isfinite(r), r * r, np.inf)
        w_in, w_out, blend = _inner_outer(params, k, y)
        d_in = (-8.0 * lam * lnl - 4.0 * lam
                - np.where(np.isinf(r2), 0.0, 4.0 * lam / (lam * lam + r2)))
        d_out = -8.0 * lam * lnl - 4.0 * lam
        t = np.where(np.isfinite(r), r / s, 3.0)
        d_blend = -(params.alpha / lam) * t * eta_profile_prime(t)
        gap = np.where(np.isfinite(r), w_in - w_out, 0.0)
        total = total + blend * d_in + (1.0 - blend) * d_out + d_blend * gap
    return total


def kernel_phi_sphere(params: AnsatzParams, i: int, j: int, y) -> np.ndarray:
    """phi_{i,j}(y) = kernel_phi(i, Pi_{xi_j}(y)/lam); the z = infinity limit
    is used at the antipode of xi_j."""
    if not 0 <= j < params.m:
        raise InvalidParameter("center index out of range")
    y = np.asarray(y, dtype=float)
    xi = params.config.points[j]
    r = chart_radius(xi, y)
    finite = np.isfinite(r)
    if i == 0:
        z2 = np.where(finite, (r / params.lam) ** 2, 1.0)
        return np.where(finite, 2.0 * (z2 - 1.0) / (1.0 + z2), 2.0)
    x = stereo_project(xi, np.where(finite[..., None], y, xi))
    z = x / params.lam
    return np.where(finite, kernel_phi(i, z), 0.0)


def hessian_green_chart(p, y_other, step: float = 1e-4) -> np.ndarray:
    """2x2 Hessian of x -> G(inverse chart_p(x), y_other) at x = 0 by
    central differences."""
    from .geometry import stereo_inverse

    p = sphere_point(p)
    y_other = sphere_point(y_other)

    def g_at(x):
        return float(green(stereo_inverse(p, np.asarray(x, dtype=float)), y_other))

    h = step
    g0 = g_at(np.zeros(2))
    H = np.empty((2, 2))
    H[0, 0] = (g_at([h, 0.0]) - 2.0 * g0 + g_at([-h, 0.0])) / h**2
    H[1, 1] = (g_at([0.0, h]) - 2.0 * g0 + g_at([0.0, -h])) / h**2
    H[0, 1] = H[1, 0] = (g_at([h, h]) - g_at([h, -h]) - g_at([-h, h])
                         + g_at([-h, -h])) / (4.0 * h**2)
    return H
