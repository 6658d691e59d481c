"""Command-line front end.

Subcommands: config-opt, ansatz-eval, energy-check, residual-check, reduce,
solve, branch, classify.  Data goes to CSV or JSON with fixed column order;
a figure is rendered next to each output file unless --no-figure is given,
and every output file gets a <name>.manifest.json sidecar.

Exit codes: 0 success, 2 argument or validation error, 3 numerical failure.

Only the standard library is imported at module level: thread caps from
--threads (or SPHERE_BLOWUP_THREADS) must land in the environment before
numpy and its BLAS start their pools, so all numerical imports happen
inside the subcommand handlers.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone

_THREAD_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
    "VECLIB_MAXIMUM_THREADS",
)


def _apply_thread_cap(threads: int | None) -> None:
    if threads is None:
        env = os.environ.get("SPHERE_BLOWUP_THREADS")
        if not env:
            return
        try:
            threads = int(env)
        except ValueError as exc:
            raise _usage(f"SPHERE_BLOWUP_THREADS must be an integer, got {env!r}") from exc
    if threads < 1:
        raise _usage("--threads must be a positive integer")
    for var in _THREAD_VARS:
        os.environ[var] = str(threads)


def _usage(msg: str):
    from .errors import UsageError

    return UsageError(msg)


def _tool_version() -> str:
    try:
        from importlib.metadata import version

        return version("sphere-blowup")
    except Exception:
        from . import __version__

        return __version__


@dataclass
class RunManifest:
    """Reproducibility sidecar written next to every output file."""

    command: str
    parameters: dict
    tool_version: str = field(default_factory=_tool_version)
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc)
                           .isoformat(timespec="seconds"))
    input_hash: str | None = None

    def write(self, out_path: str) -> str:
        side = out_path + ".manifest.json"
        doc = {
            "command": self.command,
            "parameters": self.parameters,
            "tool_version": self.tool_version,
            "timestamp": self.timestamp,
            "input_hash": self.input_hash,
        }
        with open(side, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return side


def _hash_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _fmt(x) -> str:
    """Shortest round-trip decimal form; identical runs give identical bytes."""
    return repr(float(x))


def _write_csv(path: str, columns, rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_json(path: str, doc: dict) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _figure_path(out_path: str) -> str:
    stem, _ = os.path.splitext(out_path)
    return stem + ".png"


def _resolve_rho(args) -> float:
    if (args.rho is None) == (args.eps is None):
        raise _usage("give exactly one of --rho or --eps (rho = 32*pi + eps)")
    if args.rho is not None:
        return args.rho
    return 32.0 * math.pi + args.eps


def _lambda_list(text: str) -> list:
    try:
        vals = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise _usage(f"--lambda-list must be comma-separated reals, got {text!r}") from exc
    if not vals:
        raise _usage("--lambda-list is empty")
    return vals


def _default_eps(lam: float) -> float:
    """Midpoint scale relation: the eps at which lam is the stationary scale."""
    return 384.0 * math.pi * lam * lam * math.log(1.0 / lam) \
        - 192.0 * math.pi * lam * lam


def _grid_angles(n: int):
    import numpy as np

    theta = (np.arange(n) + 0.5) * (math.pi / n)
    phi = np.arange(2 * n) * (2.0 * math.pi / (2 * n))
    return theta, phi


def _grid_points(theta, phi):
    import numpy as np

    t, p = np.meshgrid(theta, phi, indexing="ij")
    return np.stack([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)],
                    axis=-1), t, p


def cmd_config_opt(args) -> int:
    from .optimize import classify_configuration, minimize_config

    if args.m < 2:
        raise _usage("--m must be at least 2")
    if args.starts < 1:
        raise _usage("--starts must be positive")
    if args.tol <= 0.0:
        raise _usage("--tol must be positive")
    report = minimize_config(args.m, starts=args.starts, tol=args.tol,
                             seed=args.seed)
    label = classify_configuration(report.config)
    doc = {
        "m": args.m,
        "energy": report.energy,
        "gradient_norm": report.gradient_norm,
        "converged": report.converged,
        "label": label,
        "points": report.config.points.tolist(),
        "start_energies": report.energies,
        "start_iterations": report.iterations,
        "seed": args.seed,
        "starts": args.starts,
        "tol": args.tol,
    }
    out = args.out or f"config_opt_m{args.m}.json"
    _write_json(out, doc)
    RunManifest("config-opt", _param_map(args)).write(out)
    print(f"m={args.m}  F={report.energy:.12f}  label={label}  -> {out}")
    if not args.no_figure:
        from .plotting import configuration_figure

        fig = configuration_figure(report.config.points, report.energy, label,
                                   _figure_path(out))
        print(f"figure -> {fig}")
    return 0


def cmd_ansatz_eval(args) -> int:
    import numpy as np

    from .ansatz import AnsatzParams, ansatz_field

    if args.lam is None or args.lam <= 0.0:
        raise _usage("--lambda must be a positive real")
    if args.grid < 8:
        raise _usage("--grid must be at least 8")
    mode = {"glued": "glued", "exact": "exact_quadrature"}.get(args.mode)
    if mode is None:
        raise _usage("--mode must be glued or exact")
    eps = args.eps if args.eps is not None else 0.0
    params = AnsatzParams(eps=eps, lam=args.lam)
    w = ansatz_field(params, mode=mode)
    theta, phi = _grid_angles(args.grid)
    pts, t, p = _grid_points(theta, phi)
    vals = w(pts)
    rows = zip(t.ravel(), p.ravel(), vals.ravel())
    out = args.out or f"ansatz_lam{args.lam:g}.csv"
    _write_csv(out, ("theta", "phi", "w"), rows)
    RunManifest("ansatz-eval", _param_map(args)).write(out)
    print(f"lambda={args.lam:g}  {t.size} grid values  "
          f"w range [{float(np.min(vals)):.4f}, {float(np.max(vals)):.4f}]  -> {out}")
    if not args.no_figure:
        from .plotting import grid_heatmap

        fig = grid_heatmap(theta, phi, vals, f"ansatz, lambda = {args.lam:g}",
                           _figure_path(out))
        print(f"figure -> {fig}")
    return 0


def cmd_energy_check(args) -> int:
    from .ansatz import AnsatzParams, ansatz_field
    from .diagnostics import energy_j, reduced_energy_expansion
    from .quadrature import build_rule

    lams = _lambda_list(args.lambda_list)
    if any(l <= 0 for l in lams):
        raise _usage("every lambda must be positive")
    rows = []
    measured, predicted = [], []
    for lam in lams:
        eps = args.eps if args.eps is not None else _default_eps(lam)
        params = AnsatzParams(eps=eps, lam=lam)
        rule = build_rule(args.base_order, centers=params.config, lam=lam,
                          r0=params.r0)
        j_val = energy_j(params.rho, ansatz_field(params), rule,
                         h=min(1e-3, lam / 20.0))
        j_exp = float(reduced_energy_expansion(eps, lam))
        rows.append((lam, eps, j_val, j_exp, j_val - j_exp,
                     (j_val - j_exp) / lam**2))
        measured.append(j_val)
        predicted.append(j_exp)
    out = args.out or "energy_check.csv"
    _write_csv(out, ("lambda", "eps", "j_measured", "j_expansion",
                     "remainder", "remainder_over_lambda2"), rows)
    RunManifest("energy-check", _param_map(args)).write(out)
    for lam, eps, jm, je, rem, ratio in rows:
        print(f"lambda={lam:g}  J={jm:.6f}  expansion={je:.6f}  "
              f"rem/lam^2={ratio:.3f}")
    print(f"-> {out}")
    if not args.no_figure:
        from .plotting import energy_remainder_figure

        fig = energy_remainder_figure(lams, measured, predicted,
                                      _figure_path(out))
        print(f"figure -> {fig}")
    return 0


def cmd_residual_check(args) -> int:
    import numpy as np

    from .ansatz import AnsatzParams, ansatz_field
    from .diagnostics import norm_star, residual_field
    from .quadrature import build_rule

    if args.lam is None or args.lam <= 0.0:
        raise _usage("--lambda must be a positive real")
    if args.grid < 8:
        raise _usage("--grid must be at least 8")
    eps = args.eps if args.eps is not None else _default_eps(args.lam)
    params = AnsatzParams(eps=eps, lam=args.lam)
    rule = build_rule(args.base_order, centers=params.config, lam=args.lam,
                      r0=params.r0)
    s_field = residual_field(params.rho, ansatz_field(params), rule,
                             h=min(1e-3, args.lam / 20.0))
    theta, phi = _grid_angles(args.grid)
    pts, t, p = _grid_points(theta, phi)
    vals = s_field(pts)
    out = args.out or f"residual_lam{args.lam:g}.csv"
    _write_csv(out, ("theta", "phi", "s"), zip(t.ravel(), p.ravel(), vals.ravel()))
    RunManifest("residual-check", _param_map(args)).write(out)
    star = norm_star(vals.ravel(), params, pts.reshape(-1, 3))
    print(f"lambda={args.lam:g}  max|S|={float(np.max(np.abs(vals))):.6f}  "
          f"weighted norm={star:.6f}  -> {out}")
    if not args.no_figure:
        from .plotting import grid_heatmap

        fig = grid_heatmap(theta, phi, vals,
                           f"residual, lambda = {args.lam:g}",
                           _figure_path(out))
        print(f"figure -> {fig}")
    return 0


def cmd_reduce(args) -> int:
    from .diagnostics import reduced_lambda

    if args.eps is None or args.eps <= 0.0:
        raise _usage("--eps must be a positive real")
    curve = reduced_lambda(args.eps, eps_max=args.eps_max)
    lam1, lam2 = curve.bracket
    print(f"eps        = {_fmt(curve.eps)}")
    print(f"lambda_*   = {_fmt(curve.lambda_star)}")
    print(f"eps_ratio  = {_fmt(curve.eps_ratio)}   (384*pi = {_fmt(384*math.pi)})")
    print(f"bracket    = [{_fmt(lam1)}, {_fmt(lam2)}]")
    if args.out:
        _write_json(args.out, curve.to_dict())
        RunManifest("reduce", _param_map(args)).write(args.out)
        print(f"-> {args.out}")
        if not args.no_figure:
            from .plotting import reduced_curve_figure

            fig = reduced_curve_figure(curve, _figure_path(args.out))
            print(f"figure -> {fig}")
    return 0


def cmd_solve(args) -> int:
    from .newton import solve_blowup

    rho = _resolve_rho(args)
    if rho <= 32.0 * math.pi:
        raise _usage(f"rho must exceed 32*pi = {32*math.pi:.6f}, got {rho:g}")
    if args.L < 4:
        raise _usage("--L must be at least 4")
    if args.tol <= 0.0:
        raise _usage("--tol must be positive")
    state, params, info = solve_blowup(rho, L=args.L, tol=args.tol,
                                       base_order=args.base_order,
                                       proj_tol=args.proj_tol)
    doc = state.to_dict()
    doc["tuning"] = info["tuning"]
    doc["lam"] = info["lam"]
    doc["eps"] = rho - 32.0 * math.pi
    doc["L"] = args.L
    out = args.out or "solve.json"
    _write_json(out, doc)
    RunManifest("solve", _param_map(args)).write(out)
    print(f"rho={rho:.8f}  residual={state.residual_norm:.3e}  "
          f"iters={state.iterations}  lambda_est={state.lambda_est:.6g}")
    print(f"u_peak={state.u_peak:.6f}  projection={info['projection']:.3e}  -> {out}")
    if not args.no_figure:
        from .plotting import newton_history_figure

        fig = newton_history_figure(state.history, _figure_path(out))
        print(f"figure -> {fig}")
    return 0


_BRANCH_COLUMNS = ("rho", "u_peak", "u_offpeak", "lambda_est", "eps_ratio",
                   "residual")


def cmd_branch(args) -> int:
    from .newton import continue_branch

    if args.rho_start <= 32.0 * math.pi or args.rho_end <= 32.0 * math.pi:
        raise _usage(f"rho endpoints must exceed 32*pi = {32*math.pi:.6f}")
    if args.rho_start <= args.rho_end:
        raise _usage("--rho-start must exceed --rho-end")
    if args.steps < 2:
        raise _usage("--steps must be at least 2")
    out = args.out or "branch.csv"
    rows = []
    with open(out, "w") as fh:
        fh.write(",".join(_BRANCH_COLUMNS) + "\n")
        fh.flush()

        def stream(state, params):
            lam = state.lambda_est
            row = (state.rho, state.u_peak, state.extra["u_offpeak"], lam,
                   (state.rho - 32.0 * math.pi) / (lam * lam * math.log(1.0 / lam)),
                   state.residual_norm)
            rows.append(row)
            fh.write(",".join(_fmt(v) for v in row) + "\n")
            fh.flush()
            print(f"rho={state.rho:.8f}  u_peak={state.u_peak:.5f}  "
                  f"lambda_est={lam:.6g}  residual={state.residual_norm:.2e}")

        result = continue_branch(args.rho_start, args.rho_end, args.steps,
                                 L=args.L, tol=args.tol,
                                 base_order=args.base_order,
                                 proj_tol=args.proj_tol, on_state=stream)
    RunManifest("branch", _param_map(args)).write(out)
    print(f"{len(rows)} rows  -> {out}  ({result.stop_reason})")
    if rows and not args.no_figure:
        from .plotting import branch_figure

        fig = branch_figure([dict(zip(_BRANCH_COLUMNS, r)) for r in rows],
                            _figure_path(out))
        print(f"figure -> {fig}")
    if result.partial and result.stop_reason.startswith("solve failed"):
        print(f"partial branch: {result.stop_reason}", file=sys.stderr)
        return 3
    return 0


def cmd_classify(args) -> int:
    import numpy as np

    from .configurations import Configuration
    from .optimize import classify_configuration, fit_twisted_cuboid

    try:
        with open(args.infile) as fh:
            doc = json.load(fh)
        points = np.asarray(doc["points"], dtype=float)
    except (OSError, KeyError, ValueError) as exc:
        raise _usage(f"cannot read points from {args.infile!r}: {exc}") from exc
    config = Configuration(points=points)
    label = classify_configuration(config, tol=args.tol)
    report = {"m": config.m, "label": label}
    if label == "twisted_cuboid8":
        tw, h, mis = fit_twisted_cuboid(config)
        report.update({"twist": tw, "height": h, "fit_mismatch": mis})
        print(f"label={label}  twist={tw:.8f} rad  height={h:.6f}")
    else:
        print(f"label={label}")
    if args.out:
        _write_json(args.out, report)
        manifest = RunManifest("classify", _param_map(args),
                               input_hash=_hash_file(args.infile))
        manifest.write(args.out)
        print(f"-> {args.out}")
    return 0


def _param_map(args) -> dict:
    skip = {"func", "threads", "command"}
    return {k: v for k, v in sorted(vars(args).items())
            if k not in skip and v is not None}


def _add_common(p, out_default=True):
    p.add_argument("--threads", type=int, default=None,
                   help="cap numerical worker threads (env SPHERE_BLOWUP_THREADS)")
    if out_default:
        p.add_argument("--out", default=None, help="output file path")
        p.add_argument("--no-figure", action="store_true",
                       help="skip the figure next to the output file")


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="sphere-blowup",
        description="Blow-up approximate solutions of the mean field "
                    "equation on the unit sphere: point configurations, "
                    "ansatz evaluation, energy and residual checks, the "
                    "reduced scale relation, and Newton branch tracking.")
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("config-opt", help="optimize a point configuration")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--starts", type=int, default=20)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--seed", type=int, default=0)
    _add_common(p)
    p.set_defaults(func=cmd_config_opt)

    p = sub.add_parser("ansatz-eval", help="sample the ansatz on a lat-long grid")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--grid", type=int, default=90)
    p.add_argument("--mode", default="exact", choices=("exact", "glued"))
    _add_common(p)
    p.set_defaults(func=cmd_ansatz_eval)

    p = sub.add_parser("energy-check", help="energy vs its expansion across scales")
    p.add_argument("--lambda-list", default="0.1,0.05,0.025")
    p.add_argument("--eps", type=float, default=None,
                   help="fixed eps; default ties eps to each lambda")
    p.add_argument("--base-order", type=int, default=64)
    _add_common(p)
    p.set_defaults(func=cmd_energy_check)

    p = sub.add_parser("residual-check", help="residual field on a lat-long grid")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--grid", type=int, default=90)
    p.add_argument("--base-order", type=int, default=64)
    _add_common(p)
    p.set_defaults(func=cmd_residual_check)

    p = sub.add_parser("reduce", help="reduced scale relation lambda_*(eps)")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--eps-max", type=float, default=0.1)
    _add_common(p)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("solve", help="Newton solve at one rho")
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--L", type=int, default=40)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--base-order", type=int, default=64)
    p.add_argument("--proj-tol", type=float, default=1e-6)
    _add_common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("branch", help="continuation in rho toward 32*pi")
    p.add_argument("--rho-start", type=float, required=True)
    p.add_argument("--rho-end", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--L", type=int, default=40)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--base-order", type=int, default=64)
    p.add_argument("--proj-tol", type=float, default=1e-6)
    _add_common(p)
    p.set_defaults(func=cmd_branch)

    p = sub.add_parser("classify", help="label a configuration from a JSON file")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--tol", type=float, default=1e-5)
    _add_common(p)
    p.set_defaults(func=cmd_classify)

    return top


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    from .errors import (InvalidParameter, SphereBlowupError, UsageError)

    try:
        _apply_thread_cap(args.threads)
        return args.func(args)
    except (UsageError, InvalidParameter) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SphereBlowupError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
