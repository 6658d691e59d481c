"""Measurable diagnostics: residuals, energy, weighted norms, the reduction
constants, and the reduced scale-eps relation.

The residual of the mean field operator at parameter rho is

    S_rho(u) = Delta_g u + rho (e^u / int e^u - 1/(4 pi)),

whose kernel is the solution set.  The energy whose critical points those
are is

    J_rho(u) = 1/2 int |grad u|^2 - rho ln int e^u + (rho/4 pi) int u.

The reduced relation ties the bubble scale to eps = rho - 32 pi through the
variable part 2 eps ln(lam) + 384 pi lam^2 ln(lam) of the energy expansion;
its interior maximizer lam_* satisfies

    eps = 384 pi lam_*^2 ln(1/lam_*) - 192 pi lam_*^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .ansatz import AnsatzParams, chi_r, kernel_phi
from .configurations import pair_green_sum, reference_config
from .errors import InvalidParameter, NoInteriorMax, NonFiniteValue
from .fields import ScalarField, fd_grad_sq
from .geometry import chart_radius, sphere_point
from .quadrature import QuadratureRule, integrate

# sphere mean of the chordal-log Green function -(1/2 pi) ln |y - y'|;
# subtracting it gives the mean-zero normalization
GREEN_SPHERE_MEAN = (1.0 - 2.0 * math.log(2.0)) / (4.0 * math.pi)


def residual_s(rho: float, u: ScalarField, y, rule: QuadratureRule,
               h: float = 1e-3) -> np.ndarray:
    """S_rho(u) at y; the nonlocal mass uses the given rule.

    The Laplacian comes from the field itself: closed form when the field
    carries one, chart finite differences (two-radius extrapolation)
    otherwise.
    """
    y = sphere_point(np.asarray(y, dtype=float))
    mass = integrate(rule, lambda n: np.exp(u(n)))
    vals = u.laplacian(y, h=h) + rho * (np.exp(u(y)) / mass - 0.25 / math.pi)
    if not np.all(np.isfinite(vals)):
        raise NonFiniteValue("residual evaluation produced a non-finite value")
    return vals


def residual_field(rho: float, u: ScalarField, rule: QuadratureRule,
                   h: float = 1e-3) -> ScalarField:
    """S_rho(u) as a ScalarField with the nonlocal mass frozen once."""
    mass = integrate(rule, lambda n: np.exp(u(n)))

    def eval_fn(y):
        return u.laplacian(y, h=h) + rho * (np.exp(u(y)) / mass - 0.25 / math.pi)

    return ScalarField(eval_fn=eval_fn, name=f"S[{u.name}]")


def energy_j(rho: float, u: ScalarField, rule: QuadratureRule,
             h: float = 1e-3, dirichlet: str = "fd") -> float:
    """J_rho(u) with all integrals over the rule.

    dirichlet 'fd' (default) squares chart FD gradients at the nodes,
    which keeps J exactly constant-shift invariant; 'parts' uses
    -1/2 int u Delta u with the field's closed-form Laplacian and is
    faster but exposes the rule's tiny mean defect on Delta u.
    """
    if dirichlet not in ("fd", "parts"):
        raise InvalidParameter(f"unknown dirichlet method: {dirichlet!r}")
    if dirichlet == "parts":
        if u.laplacian_fn is None:
            raise InvalidParameter("'parts' needs a field with a closed-form Laplacian")
        dir_term = -0.5 * integrate(rule, lambda n: u(n) * u.laplacian(n))
    else:
        dir_term = 0.5 * integrate(rule, lambda n: fd_grad_sq(u, n, h=h))
    mass = integrate(rule, lambda n: np.exp(u(n)))
    mean = integrate(rule, u)
    val = dir_term - rho * math.log(mass) + rho / (4.0 * math.pi) * mean
    if not math.isfinite(val):
        raise NonFiniteValue("energy evaluation produced a non-finite value")
    return float(val)


def star_weight(params: AnsatzParams, y) -> np.ndarray:
    """Bubble-scale weight sigma = sum_j (1+|Pi_{xi_j}|/lam)^{-3} + lam^2."""
    y = np.asarray(y, dtype=float)
    sigma = np.full(y.shape[:-1], params.lam**2)
    for xi in params.config.points:
        r = chart_radius(xi, y)
        sigma = sigma + np.where(np.isfinite(r),
                                 (1.0 + r / params.lam) ** -3, 0.0)
    return sigma


def norm_star(psi, params: AnsatzParams, nodes) -> float:
    """Weighted sup norm max |psi| / sigma over the given nodes."""
    nodes = np.asarray(nodes, dtype=float)
    vals = np.asarray(psi(nodes) if callable(psi) else psi, dtype=float)
    return float(np.max(np.abs(vals) / star_weight(params, nodes)))


def norm_inf(psi, nodes) -> float:
    """Plain sup norm over the given nodes."""
    nodes = np.asarray(nodes, dtype=float)
    vals = np.asarray(psi(nodes) if callable(psi) else psi, dtype=float)
    return float(np.max(np.abs(vals)))


def _radial_plane_integral(f, r_max: float, n_panels: int = 64,
                           order: int = 20) -> float:
    """int_{R^2} f(|z|) dz for radial f supported in |z| <= r_max."""
    xg, wg = np.polynomial.legendre.leggauss(order)
    breaks = np.linspace(0.0, r_max, n_panels + 1)
    mid = 0.5 * (breaks[1:] + breaks[:-1])
    half = 0.5 * (breaks[1:] - breaks[:-1])
    r = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    w = (half[:, None] * wg[None, :]).ravel()
    return float(2.0 * math.pi * np.sum(w * r * f(r)))


def reduction_constants(params: AnsatzParams, r1: float | None = None
                        ) -> tuple[float, float, float]:
    """The non-degeneracy constants of the reduced problem.

    A = int chi_{R1} phi_0 4/(1+lam^2|z|^2)^2 dz,
    B = int chi_{R1} phi_0^2 4/(1+lam^2|z|^2)^2 dz,
    C = int_{B(0,R0)} 4/(1+|x|^2)^2 dx,
    all by radial quadrature.
    """
    r1 = params.r1 if r1 is None else r1
    if r1 < 5.0:
        raise InvalidParameter("the kernel cut-off radius must be at least 5")
    lam = params.lam

    def phi0(r):
        z = np.stack([r, np.zeros_like(r)], axis=-1)
        return kernel_phi(0, z)

    def chi(r):
        return chi_r(r1, r)

    def dens(r):
        return 4.0 / (1.0 + (lam * r) ** 2) ** 2

    a_const = _radial_plane_integral(lambda r: chi(r) * phi0(r) * dens(r), r1 + 1.0)
    b_const = _radial_plane_integral(lambda r: chi(r) * phi0(r) ** 2 * dens(r), r1 + 1.0)
    c_const = _radial_plane_integral(
        lambda r: 4.0 / (1.0 + r * r) ** 2, params.r0, n_panels=32)
    return a_const, b_const, c_const


@dataclass
class ExpansionReport:
    """Measured versus predicted values over a ladder of scales."""

    lambda_values: list
    measured: list
    predicted: list
    remainder_ratio: list = field(default_factory=list)
    fit_exponent: float = float("nan")

    def __post_init__(self):
        lv = np.asarray(self.lambda_values, dtype=float)
        ms = np.asarray(self.measured, dtype=float)
        pr = np.asarray(self.predicted, dtype=float)
        if not (lv.size == ms.size == pr.size) or lv.size == 0:
            raise InvalidParameter("report lists must share a nonzero length")
        resid = np.abs(ms - pr)
        self.remainder_ratio = (resid / lv**2).tolist()
        if not np.all(np.isfinite(self.remainder_ratio)):
            raise InvalidParameter("remainder ratios must be finite")
        if lv.size >= 2 and np.all(resid > 0.0):
            slope = np.polyfit(np.log(lv), np.log(resid), 1)[0]
            self.fit_exponent = float(slope)

    def ratio_bounded(self, factor: float = 3.0) -> bool:
        r = np.asarray(self.remainder_ratio)
        return bool(np.max(r) <= factor * np.min(r))


def lambda_bracket(eps: float) -> tuple[float, float]:
    """Admissible scale bracket: 192 pi lam^2 ln(1/lam) < eps < 768 pi ...

    Returns (lam_1, lam_2), the scales where the upper and lower bounds
    bind; lam^2 ln(1/lam) is increasing on (0, e^{-1/2}) so both solves are
    well posed for eps below 192 pi/(2e) ~ 110.
    """
    if eps <= 0.0:
        raise InvalidParameter("eps must be positive")
    cap = math.exp(-0.5)

    def solve(target):
        g = lambda lam: lam * lam * math.log(1.0 / lam) - target
        if g(cap) < 0.0:
            raise InvalidParameter(f"eps = {eps} too large for the bracket")
        return brentq(g, 1e-12, cap, xtol=1e-16, rtol=1e-15)

    lam1 = solve(eps / (768.0 * math.pi))
    lam2 = solve(eps / (192.0 * math.pi))
    return lam1, lam2


@dataclass
class ReducedEnergyCurve:
    """Reduced energy over the admissible scale bracket."""

    eps: float
    lambda_grid: np.ndarray
    J_values: np.ndarray
    lambda_star: float
    eps_ratio: float
    bracket: tuple

    def to_dict(self) -> dict:
        return {
            "eps": self.eps,
            "lambda_star": self.lambda_star,
            "eps_ratio": self.eps_ratio,
            "lambda_1": self.bracket[0],
            "lambda_2": self.bracket[1],
            "lambda_grid": np.asarray(self.lambda_grid).tolist(),
            "J_values": np.asarray(self.J_values).tolist(),
        }


def reduced_energy_expansion(eps: float, lam, gsum: float | None = None) -> np.ndarray:
    """Closed-form energy expansion of the ansatz at scale lam.

    gsum is the pair Green sum of the configuration (tetrahedron default).
    """
    lam = np.asarray(lam, dtype=float)
    if gsum is None:
        gsum = pair_green_sum(reference_config("tetrahedron4"))
    return (-64.0 * math.pi**2 * gsum - 32.0 * math.pi * math.log(4.0 * math.pi)
            + 2.0 * eps * np.log(lam) + 384.0 * math.pi * lam**2 * np.log(lam)
            - eps * (math.log(math.pi) - 4.0 * math.pi * gsum))


def reduced_lambda(eps: float, eps_max: float | None = 0.1,
                   grid_size: int = 400) -> ReducedEnergyCurve:
    """Interior maximizer of the reduced energy over the scale bracket.

    Golden-section refines the grid maximum; one closed-form polish step on
    the stationarity equation then pins lam_* to rounding, and the two are
    cross-checked against each other.
    """
    if eps <= 0.0:
        raise InvalidParameter("eps must be positive")
    if eps_max is not None and eps > eps_max:
        raise InvalidParameter(f"eps = {eps} exceeds the cap {eps_max}")
    lam1, lam2 = lambda_bracket(eps)
    grid = np.exp(np.linspace(math.log(lam1), math.log(lam2), grid_size))
    j_var = 2.0 * eps * np.log(grid) + 384.0 * math.pi * grid**2 * np.log(grid)
    k = int(np.argmax(j_var))
    if k == 0 or k == grid_size - 1:
        raise NoInteriorMax("reduced energy peaks at the bracket boundary")

    def j_of(lam):
        return 2.0 * eps * math.log(lam) + 384.0 * math.pi * lam**2 * math.log(lam)

    lo, hi = grid[k - 1], grid[k + 1]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = j_of(c), j_of(d)
    for _ in range(200):
        if b - a < 1e-14 * a:
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = j_of(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = j_of(d)
    lam_golden = 0.5 * (a + b)

    # stationarity: eps - 384 pi lam^2 ln(1/lam) + 192 pi lam^2 = 0
    lam = lam_golden
    for _ in range(60):
        g = eps - 384.0 * math.pi * lam * lam * math.log(1.0 / lam) \
            + 192.0 * math.pi * lam * lam
        gp = 768.0 * math.pi * lam * (1.0 - math.log(1.0 / lam))
        step = g / gp
        lam -= step
        if abs(step) < 1e-17 * lam:
            break
    if not lam1 < lam < lam2:
        raise NoInteriorMax("stationary scale left the admissible bracket")
    if abs(lam - lam_golden) > 1e-6 * lam:
        raise NoInteriorMax(
            f"grid maximizer {lam_golden} and stationary scale {lam} disagree")

    return ReducedEnergyCurve(
        eps=eps,
        lambda_grid=grid,
        J_values=reduced_energy_expansion(eps, grid),
        lambda_star=float(lam),
        eps_ratio=float(eps / (lam * lam * math.log(1.0 / lam))),
        bracket=(lam1, lam2),
    )


def kernel_projection(params: AnsatzParams, field_vals, rule: QuadratureRule,
                      j: int = 0) -> float:
    """<field, chi_{R1,j} phi_{0,j}> over the rule, the dilation-kernel
    projection the reduced problem drives to zero."""
    from .ansatz import kernel_phi_sphere

    xi = params.config.points[j]

    def weight_fn(n):
        r = chart_radius(xi, n)
        z = np.where(np.isfinite(r), r / params.lam, params.r1 + 2.0)
        return chi_r(params.r1, z) * kernel_phi_sphere(params, 0, j, n)

    vals = field_vals(rule.nodes) if callable(field_vals) else np.asarray(field_vals)
    return float(np.sum(rule.weights * vals * weight_fn(rule.nodes)))
