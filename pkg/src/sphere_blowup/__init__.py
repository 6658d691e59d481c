"""Numerical toolkit for blow-up solutions of the mean field equation on S2.

Submodules are imported lazily so the command-line front end can configure
thread limits before any numerical library loads.
"""

from importlib import import_module

__version__ = "0.1.0"

_EXPORTS = {
    "Configuration": "configurations",
    "config_energy": "configurations",
    "config_gradient": "configurations",
    "green": "configurations",
    "pair_green_sum": "configurations",
    "reference_config": "configurations",
    "td_group": "configurations",
    "minimize_config": "optimize",
    "classify_configuration": "optimize",
    "fit_twisted_cuboid": "optimize",
    "config_hessian": "optimize",
    "AnsatzParams": "ansatz",
    "ansatz_field": "ansatz",
    "ansatz_w": "ansatz",
    "ansatz_dlambda": "ansatz",
    "bubble_u": "ansatz",
    "w_component": "ansatz",
    "wbar": "ansatz",
    "mass_m0": "ansatz",
    "kernel_phi": "ansatz",
    "kernel_phi_sphere": "ansatz",
    "cutoff_eta": "ansatz",
    "chi_r": "ansatz",
    "QuadratureRule": "quadrature",
    "build_rule": "quadrature",
    "integrate": "quadrature",
    "ScalarField": "fields",
    "GREEN_SPHERE_MEAN": "diagnostics",
    "residual_s": "diagnostics",
    "residual_field": "diagnostics",
    "energy_j": "diagnostics",
    "norm_star": "diagnostics",
    "reduction_constants": "diagnostics",
    "reduced_lambda": "diagnostics",
    "lambda_bracket": "diagnostics",
    "kernel_projection": "diagnostics",
    "ExpansionReport": "diagnostics",
    "ReducedEnergyCurve": "diagnostics",
    "SymmetricBasis": "newton",
    "build_symmetric_basis": "newton",
    "build_zonal_basis": "newton",
    "newton_core": "newton",
    "newton_solve": "newton",
    "solve_blowup": "newton",
    "continue_branch": "newton",
    "NewtonState": "newton",
    "BranchResult": "newton",
    "SphereBlowupError": "errors",
    "InvalidParameter": "errors",
    "AntipodalPoint": "errors",
    "CoincidentPoints": "errors",
    "QuadratureFailure": "errors",
    "NonConvergence": "errors",
    "NewtonDiverged": "errors",
    "JacobianSingular": "errors",
    "NoInteriorMax": "errors",
    "NonFiniteValue": "errors",
    "UsageError": "errors",
}

__all__ = sorted(_EXPORTS) + ["__version__"]


def __getattr__(name: str):
    try:
        module = _EXPORTS[name]
    except KeyError:
        raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
    return getattr(import_module(f".{module}", __name__), name)


def __dir__():
    return __all__
