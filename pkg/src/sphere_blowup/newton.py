"""Galerkin-Newton refinement of the ansatz on the T_d-invariant subspace.

The discrete correction phi = sum_i c_i b_i lives in a span of symmetry-
invariant, mean-zero spherical-harmonic combinations.  Each basis field is
a single-degree combination, so Delta b = -l(l+1) b holds exactly and the
linearized operator assembles as

    J_ij = -l_i(l_i+1) delta_ij
           + rho [ <e^u b_i b_j>/E - <e^u b_i><e^u b_j>/E^2 ],  E = int e^u.

Damped Newton drives the Galerkin residual r_i = <S_rho(u), b_i> to zero.
The dilation near-kernel is not removed from the basis; instead the
projection of the residual onto the cut-off dilation kernel is reported,
and solve_blowup tunes the ansatz scale until that projection vanishes,
which is the discrete form of the reduced one-dimensional problem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ansatz import AnsatzParams, ansatz_field, _unchecked
from .configurations import td_group
from .diagnostics import kernel_projection, reduced_lambda
from .errors import (InvalidParameter, JacobianSingular, NewtonDiverged,
                     NonConvergence, NonFiniteValue)
from .fields import ScalarField
from .geometry import chart_radius
from .quadrature import QuadratureRule, build_rule

NODE_CHUNK = 20000
NULL_SPACE_TOL = 0.5
CONDITION_CAP = 1e12
DIVERGENCE_STREAK = 5


def _normalized_legendre(l_max: int, m: int, ct, st) -> np.ndarray:
    """Fully normalized associated Legendre values P~_l^m for l = m..l_max.

    Returns an array of shape (l_max - m + 1,) + ct.shape.  Normalization
    makes the real spherical harmonics orthonormal on the unit sphere.
    """
    out = np.empty((l_max - m + 1,) + np.shape(ct))
    # sectoral seed P~_m^m, Condon-Shortley phase omitted
    p = np.full(np.shape(ct), 1.0 / math.sqrt(4.0 * math.pi))
    for k in range(1, m + 1):
        p = math.sqrt((2.0 * k + 1.0) / (2.0 * k)) * st * p
    out[0] = p
    if l_max == m:
        return out
    out[1] = math.sqrt(2.0 * m + 3.0) * ct * out[0]
    for l in range(m + 2, l_max + 1):
        a = math.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
        b = math.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
        out[l - m] = a * (ct * out[l - m - 1] - b * out[l - m - 2])
    return out


def _degree_block(l: int, ct, st, phi) -> np.ndarray:
    """Real orthonormal harmonics of degree l, shape (2l+1,) + ct.shape.

    Order: m = 0, then (cos, sin) pairs for m = 1..l.
    """
    block = np.empty((2 * l + 1,) + np.shape(ct))
    block[0] = _normalized_legendre(l, 0, ct, st)[l]
    root2 = math.sqrt(2.0)
    for m in range(1, l + 1):
        p = _normalized_legendre(l, m, ct, st)[l - m]
        block[2 * m - 1] = root2 * p * np.cos(m * phi)
        block[2 * m] = root2 * p * np.sin(m * phi)
    return block


def _angles(y: np.ndarray):
    ct = np.clip(y[..., 2], -1.0, 1.0)
    st = np.sqrt(np.maximum(0.0, 1.0 - ct * ct))
    phi = np.arctan2(y[..., 1], y[..., 0])
    return ct, st, phi


def _degree_rule(l: int):
    """Product rule exact for spherical polynomials of degree 2l."""
    n_t = l + 2
    n_p = 2 * l + 4
    x, wx = np.polynomial.legendre.leggauss(n_t)
    ph = np.arange(n_p) * (2.0 * math.pi / n_p)
    st = np.sqrt(1.0 - x * x)
    nodes = np.stack([
        np.outer(st, np.cos(ph)).ravel(),
        np.outer(st, np.sin(ph)).ravel(),
        np.outer(x, np.ones(n_p)).ravel(),
    ], axis=-1)
    weights = np.outer(wx, np.full(n_p, 2.0 * math.pi / n_p)).ravel()
    return nodes, weights


@dataclass
class SymmetricBasis:
    """Orthonormal, mean-zero, symmetry-invariant harmonic combinations.

    Each entry of basis_fields is (degree, coefficient block) against the
    real harmonics of that degree; rotation maps evaluation points before
    the harmonics are read off (identity for the T_d frame).
    """

    degree_cap: int
    basis_fields: list
    count: int
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        if self.count != len(self.basis_fields):
            raise InvalidParameter("basis count does not match its fields")

    @property
    def degrees(self) -> np.ndarray:
        return np.array([l for l, _ in self.basis_fields], dtype=int)

    @property
    def laplacian_eigenvalues(self) -> np.ndarray:
        ls = self.degrees.astype(float)
        return -ls * (ls + 1.0)

    def evaluate(self, y: np.ndarray) -> np.ndarray:
        """Basis matrix of shape y.shape[:-1] + (count,)."""
        y = np.asarray(y, dtype=float)
        flat = y.reshape(-1, 3) @ self.rotation.T
        out = np.empty((flat.shape[0], self.count))
        by_degree = {}
        for i, (l, coeff) in enumerate(self.basis_fields):
            by_degree.setdefault(l, []).append((i, coeff))
        for start in range(0, flat.shape[0], NODE_CHUNK):
            sl = slice(start, min(start + NODE_CHUNK, flat.shape[0]))
            ct, st, phi = _angles(flat[sl])
            for l, entries in by_degree.items():
                block = _degree_block(l, ct, st, phi).reshape(2 * l + 1, -1)
                for i, coeff in entries:
                    out[sl, i] = coeff @ block
        return out.reshape(y.shape[:-1] + (self.count,))

    def field(self, coeffs: np.ndarray, name: str = "phi") -> ScalarField:
        """The combination sum_i coeffs_i b_i with its exact Laplacian."""
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (self.count,):
            raise InvalidParameter("coefficient vector has the wrong length")
        lap_c = self.laplacian_eigenvalues * coeffs

        return ScalarField(
            eval_fn=lambda y: self.evaluate(y) @ coeffs,
            name=name,
            laplacian_fn=lambda y: self.evaluate(y) @ lap_c,
        )


def build_symmetric_basis(L: int, group: np.ndarray | None = None) -> SymmetricBasis:
    """Group-averaged, per-degree invariant basis up to degree L.

    For each degree the group-average projector is assembled in harmonic
    coefficients (exact product quadrature) and its unit eigenvectors give
    orthonormal invariant combinations; degrees contributing none are
    skipped.  The constant is excluded, so every field has zero mean.
    """
    if L < 4:
        raise InvalidParameter("the degree cap must be at least 4")
    group = td_group() if group is None else np.asarray(group, dtype=float)
    fields = []
    for l in range(1, L + 1):
        nodes, wq = _degree_rule(l)
        ct, st, phi = _angles(nodes)
        bw = (_degree_block(l, ct, st, phi) * wq).reshape(2 * l + 1, -1)
        proj = np.zeros((2 * l + 1, 2 * l + 1))
        for T in group:
            ctr, str_, phir = _angles(nodes @ T)
            proj += _degree_block(l, ctr, str_, phir).reshape(2 * l + 1, -1) @ bw.T
        proj /= group.shape[0]
        proj = 0.5 * (proj + proj.T)
        vals, vecs = np.linalg.eigh(proj)
        for v, vec in zip(vals, vecs.T):
            if v > NULL_SPACE_TOL:
                fields.append((l, vec.copy()))
    return SymmetricBasis(degree_cap=L, basis_fields=fields, count=len(fields))


def build_zonal_basis(L: int, axis) -> SymmetricBasis:
    """Axially symmetric basis (zonal harmonics about the given axis)."""
    if L < 1:
        raise InvalidParameter("the degree cap must be at least 1")
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    pick = np.eye(3)[np.argmin(np.abs(axis))]
    e1 = pick - axis * (pick @ axis)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)
    rot = np.stack([e1, e2, axis])
    fields = [(l, np.eye(2 * l + 1)[0]) for l in range(1, L + 1)]
    return SymmetricBasis(degree_cap=L, basis_fields=fields,
                          count=len(fields), rotation=rot)


@dataclass
class NewtonState:
    """Converged (or final) Newton iterate on the Galerkin system."""

    rho: float
    coeffs: np.ndarray
    residual_norm: float
    lambda_est: float
    history: list
    converged: bool
    iterations: int
    u_peak: float
    phi_inf: float
    projections: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "coeffs": np.asarray(self.coeffs).tolist(),
            "residual_norm": self.residual_norm,
            "lambda_est": self.lambda_est,
            "history": list(self.history),
            "converged": self.converged,
            "iterations": self.iterations,
            "u_peak": self.u_peak,
            "phi_inf": self.phi_inf,
            "projections": list(self.projections),
            "extra": dict(self.extra),
        }


class _Assembled:
    """Node data shared by every Newton iteration of one solve."""

    def __init__(self, base: ScalarField, basis: SymmetricBasis,
                 rule: QuadratureRule, peaks: np.ndarray):
        self.rule = rule
        self.wq = rule.weights
        self.B = basis.evaluate(rule.nodes)
        self.w_nodes = base(rule.nodes)
        self.lap_w = base.laplacian(rule.nodes)
        self.eigs = basis.laplacian_eigenvalues
        self.gram = self.B.T @ (self.wq[:, None] * self.B)
        self.peaks = np.atleast_2d(np.asarray(peaks, dtype=float))
        self.B_peak = basis.evaluate(self.peaks)
        self.w_peak = base(self.peaks)
        if not (np.all(np.isfinite(self.w_nodes))
                and np.all(np.isfinite(self.lap_w))):
            raise NonFiniteValue("base field not finite on the rule nodes")

    def s_nodes(self, rho: float, c: np.ndarray):
        u = self.w_nodes + self.B @ c
        eu = np.exp(u)
        mass = float(self.wq @ eu)
        s = (self.lap_w + self.B @ (self.eigs * c)
             + rho * (eu / mass - 0.25 / math.pi))
        return s, u, eu, mass

    def residual(self, rho: float, c: np.ndarray):
        s, u, eu, mass = self.s_nodes(rho, c)
        return self.B.T @ (self.wq * s), u, eu, mass

    def jacobian(self, rho: float, eu: np.ndarray, mass: float):
        weu = self.wq * eu
        g = self.B.T @ weu
        return (self.gram * self.eigs[None, :]
                + rho * ((self.B.T @ (weu[:, None] * self.B)) / mass
                         - np.outer(g, g) / mass**2))


def _newton_loop(rho: float, data: _Assembled, tol: float, max_iter: int,
                 warm_coeffs) -> NewtonState:
    n = data.B.shape[1]
    c = np.zeros(n) if warm_coeffs is None else np.array(warm_coeffs, dtype=float)
    if c.shape != (n,):
        raise InvalidParameter("warm-start coefficients have the wrong length")

    r, u, eu, mass = data.residual(rho, c)
    norm = float(np.linalg.norm(r))
    history = [norm]
    streak = 0
    iters = 0
    while norm > tol and iters < max_iter:
        jac = data.jacobian(rho, eu, mass)
        if np.linalg.cond(jac) > CONDITION_CAP:
            raise JacobianSingular(
                f"Galerkin Jacobian condition number exceeds {CONDITION_CAP:.0e}")
        step = np.linalg.solve(jac, -r)
        t = 1.0
        accepted = False
        while t >= 2.0**-13:
            r_try, u_try, eu_try, mass_try = data.residual(rho, c + t * step)
            norm_try = float(np.linalg.norm(r_try))
            if norm_try < norm:
                c = c + t * step
                r, u, eu, mass, norm = r_try, u_try, eu_try, mass_try, norm_try
                history.append(norm)
                accepted = True
                break
            t *= 0.5
        iters += 1
        if accepted:
            streak = 0
        else:
            streak += 1
            if streak >= DIVERGENCE_STREAK:
                raise NewtonDiverged(
                    f"residual stuck at {norm:.3e} after "
                    f"{DIVERGENCE_STREAK} damped attempts")
    if norm > tol:
        raise NonConvergence(
            f"Newton reached {max_iter} iterations at residual {norm:.3e}")

    u_peak = float(np.max(data.w_peak + data.B_peak @ c))
    u_max = max(u_peak, float(np.max(u)))
    return NewtonState(
        rho=rho,
        coeffs=c,
        residual_norm=norm,
        lambda_est=math.sqrt(2.0 * math.exp(-u_max)),
        history=history,
        converged=True,
        iterations=iters,
        u_peak=u_peak,
        phi_inf=float(np.max(np.abs(data.B @ c))),
    )


def newton_core(rho: float, base: ScalarField, basis: SymmetricBasis,
                rule: QuadratureRule, peaks, tol: float = 1e-8,
                max_iter: int = 40, warm_coeffs=None) -> NewtonState:
    """Damped Newton on the Galerkin system for u = base + sum c_i b_i."""
    data = _Assembled(base, basis, rule, peaks)
    return _newton_loop(rho, data, tol, max_iter, warm_coeffs)


def newton_solve(rho: float, params: AnsatzParams, basis: SymmetricBasis,
                 rule: QuadratureRule, tol: float = 1e-8,
                 max_iter: int = 40, warm_coeffs=None) -> NewtonState:
    """Newton refinement of the blow-up ansatz at fixed scale.

    The state's projections list holds the residual projection onto the
    cut-off dilation kernel at each bubble; their common value vanishes at
    the tuned scale (see solve_blowup), it is not imposed here.  extra
    carries off-peak value and cap-mass diagnostics.
    """
    if rho <= 8.0 * math.pi * params.m:
        raise InvalidParameter("rho must exceed 8 pi m for the blow-up branch")
    base = ansatz_field(params)
    data = _Assembled(base, basis, rule, params.config.points)
    state = _newton_loop(rho, data, tol, max_iter, warm_coeffs)

    s, u, eu, mass = data.s_nodes(rho, state.coeffs)
    state.projections = [kernel_projection(params, s, rule, j=j)
                         for j in range(params.m)]
    xi = params.config.points[0]
    probe = -xi
    u_off = float(base(probe) + basis.evaluate(probe[None, :])[0] @ state.coeffs)
    r = chart_radius(xi, rule.nodes)
    cap = np.isfinite(r) & (r <= params.r0)
    state.extra = {
        "u_offpeak": u_off,
        "cap_mass": rho * float(rule.weights[cap] @ eu[cap]) / mass,
    }
    return state


def _params_at(lam: float, eps: float, template: AnsatzParams) -> AnsatzParams:
    clone = _unchecked(template, lam)
    clone.eps = eps
    return clone


def solve_blowup(rho: float, L: int = 40, tol: float = 1e-8,
                 base_order: int = 64, proj_tol: float = 1e-6,
                 max_tune: int = 12, tune_lambda: bool = True,
                 basis: SymmetricBasis | None = None,
                 params: AnsatzParams | None = None,
                 warm_coeffs=None):
    """Full solve at one rho: ansatz at the reduced scale, Newton, then a
    secant scale-tune driving the dilation-kernel projection to zero.

    Returns (state, params, info) with info carrying the tuning history.
    """
    eps = rho - 32.0 * math.pi
    if eps <= 0.0:
        raise InvalidParameter("rho must exceed 32 pi")
    if basis is None:
        basis = build_symmetric_basis(L)
    if params is None:
        lam0 = reduced_lambda(eps, eps_max=None).lambda_star
        params = _params_at(lam0, eps, AnsatzParams(eps=0.0, lam=lam0))

    history = []

    def run(lam: float):
        pl = _params_at(lam, eps, params)
        rule = build_rule(base_order, centers=pl.config, lam=lam, r0=pl.r0)
        state = newton_solve(rho, pl, basis, rule, tol=tol,
                             warm_coeffs=warm_coeffs)
        g = float(np.mean(state.projections))
        history.append({"lam": lam, "projection": g,
                        "residual": state.residual_norm})
        return state, pl, g

    lam = params.lam
    state, pl, g = run(lam)
    if tune_lambda and abs(g) > proj_tol:
        lam_a, g_a = lam, g
        lam_b = lam * 1.02
        state, pl, g = run(lam_b)
        for _ in range(max_tune):
            if abs(g) <= proj_tol:
                break
            if abs(g - g_a) < 1e-300:
                break
            lam_new = lam_b - g * (lam_b - lam_a) / (g - g_a)
            lam_new = min(max(lam_new, 0.25 * lam_b), 4.0 * lam_b)
            lam_a, g_a = lam_b, g
            lam_b = lam_new
            state, pl, g = run(lam_b)
        if abs(g) > proj_tol:
            raise NonConvergence(
                f"scale tuning stalled with projection {g:.3e}")
    info = {"tuning": history, "projection": g, "lam": pl.lam}
    return state, pl, info


@dataclass
class BranchResult:
    """Continuation states with a partial-branch flag."""

    states: list
    params: list
    partial: bool
    stop_reason: str

    def rows(self) -> list:
        out = []
        for st in self.states:
            lam = st.lambda_est
            out.append({
                "rho": st.rho,
                "u_peak": st.u_peak,
                "u_offpeak": st.extra["u_offpeak"],
                "lambda_est": lam,
                "eps_ratio": (st.rho - 32.0 * math.pi)
                / (lam * lam * math.log(1.0 / lam)),
                "residual": st.residual_norm,
                "cap_mass": st.extra["cap_mass"],
            })
        return out


def continue_branch(rho_start: float, rho_end: float, steps: int,
                    L: int = 40, tol: float = 1e-8, base_order: int = 64,
                    proj_tol: float = 1e-6, tune_lambda: bool = True,
                    on_state=None) -> BranchResult:
    """Geometric continuation in eps = rho - 32 pi from rho_start down to
    rho_end, warm-starting each solve from the previous state.

    Stops early (partial result) when the estimated scale falls below the
    basis resolution limit 4 pi / L^2 or a solve fails.  on_state, when
    given, is called with (state, params) right after each solve so callers
    can stream results.
    """
    eps_a = rho_start - 32.0 * math.pi
    eps_b = rho_end - 32.0 * math.pi
    if not (eps_a > eps_b > 0.0):
        raise InvalidParameter("need rho_start > rho_end > 32 pi")
    if steps < 2:
        raise InvalidParameter("need at least two continuation steps")
    eps_sched = np.exp(np.linspace(math.log(eps_a), math.log(eps_b), steps))
    basis = build_symmetric_basis(L)
    lam_floor = 4.0 * math.pi / L**2

    states, plist = [], []
    partial, reason = False, "completed"
    warm = None
    for eps in eps_sched:
        rho = 32.0 * math.pi + eps
        try:
            state, pl, info = solve_blowup(
                rho, L=L, tol=tol, base_order=base_order, proj_tol=proj_tol,
                tune_lambda=tune_lambda, basis=basis, warm_coeffs=warm)
        except (NonConvergence, JacobianSingular) as exc:
            partial, reason = True, f"solve failed at rho={rho:.6f}: {exc}"
            break
        states.append(state)
        plist.append(pl)
        if on_state is not None:
            on_state(state, pl)
        warm = state.coeffs
        if state.lambda_est < lam_floor:
            partial, reason = True, "scale below the 4 pi / L^2 resolution limit"
            break
    return BranchResult(states=states, params=plist, partial=partial,
                        stop_reason=reason)
