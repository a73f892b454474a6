"""``riemann-dep`` command line.

Every failure ends with a nonzero exit status and a single JSON object
``{"error": {"type": ..., "message": ...}}`` on stderr. Angles are radians.
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings

import numpy as np

from . import __version__
from .dataio import (
    dump_json,
    load_paired,
    load_points_csv,
    load_vcg_dataset,
    save_points_csv,
)
from .dependence import evaluate_dependence
from .errors import ConfigError, RiemannDepError
from .frechet import SolverSettings, frechet_mean
from .simulation import (
    SCENARIOS,
    ScenarioConfig,
    generate,
    parse_sweep_config,
    run_sweep,
    write_sweep_csv,
)
from .so3 import so3_exp

EXIT_ERROR = 2
EXIT_ROW_ERRORS = 1


class CliError(RiemannDepError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(f"{self.prog}: {message}")


def _vector(text: str, k: int | None = None, name: str = "value") -> tuple:
    try:
        vals = tuple(float(t) for t in text.replace(" ", "").split(","))
    except ValueError:
        raise CliError(f"{name} must be comma-separated numbers, got {text!r}") from None
    if k is not None and len(vals) != k:
        raise CliError(f"{name} needs {k} components, got {len(vals)}")
    return vals


def _add_solver_flags(p):
    p.add_argument("--tol", type=float, default=1e-10, help="stopping threshold on the gradient norm")
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--step", type=float, default=1.0, help="initial step size in (0, 1]")


def _settings(args) -> SolverSettings:
    try:
        return SolverSettings(tol=args.tol, max_iter=args.max_iter, step=args.step)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _open_text_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", newline=""), True


def _write_json(obj, path):
    fh, close = _open_text_out(path)
    try:
        dump_json(obj, fh)
    finally:
        if close:
            fh.close()


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="riemann-dep", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="draw a paired sample from a scenario")
    p.add_argument("--manifold", choices=("sphere", "so3"), default="sphere")
    p.add_argument("--scenario", choices=SCENARIOS, default="same-mean")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--noise", type=float, default=0.0, help="ε")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mu", help="VMF mean direction x,y,z")
    p.add_argument("--kappa", type=float)
    p.add_argument("--axis", help="rotation axis x,y,z")
    p.add_argument("--angle", type=float, help="rotation angle (radians)")
    p.add_argument("--alpha", type=float, help="SO(3) tangent clipping radius")
    p.add_argument("--b-log", help="SO(3) left factor B as exp(phi(v)); v given as x,y,z")
    p.add_argument("--mu2", help="second-margin VMF mean (independent scenario)")
    p.add_argument("--kappa2", type=float)
    p.add_argument("--alpha2", type=float)
    p.add_argument("--x-out", required=True)
    p.add_argument("--y-out", required=True)

    p = sub.add_parser("analyze", help="Rcov, Rcorr and dcorr of two paired files")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--policy", choices=("common-mean", "midpoint", "weighted", "point"), default="midpoint")
    p.add_argument("--weights", help="w1,w2 for the weighted policy (default: total variances)")
    p.add_argument("--point", help="reference point for --policy point (3 or 9 numbers, row-major)")
    p.add_argument("--by-order", action="store_true", help="pair rows by position instead of id")
    p.add_argument("--lenient", action="store_true", help="normalise off-manifold rows with a warning")
    p.add_argument("--no-dcorr", action="store_true")
    p.add_argument("--out")
    _add_solver_flags(p)

    p = sub.add_parser("sweep", help="replicated noise sweep from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, help="override the config base seed")
    p.add_argument("--out")
    _add_solver_flags(p)

    p = sub.add_parser("frechet-mean", help="sample Fréchet mean of one file")
    p.add_argument("--input", required=True)
    p.add_argument("--lenient", action="store_true")
    p.add_argument("--out")
    _add_solver_flags(p)

    p = sub.add_parser("vcg", help="dependence between F-system and MP-system VCG directions")
    p.add_argument("--f-system", required=True)
    p.add_argument("--mp-system", required=True)
    p.add_argument("--lenient", action="store_true")
    p.add_argument("--out")
    _add_solver_flags(p)
    return parser


def cmd_simulate(args) -> int:
    overrides = {}
    for key in ("kappa", "angle", "alpha", "kappa2", "alpha2"):
        if getattr(args, key) is not None:
            overrides[key] = getattr(args, key)
    for key in ("mu", "axis", "mu2"):
        if getattr(args, key) is not None:
            overrides[key] = _vector(getattr(args, key), 3, key)
    if args.b_log is not None:
        overrides["b"] = so3_exp(np.array(_vector(args.b_log, 3, "b-log")))
    cfg = ScenarioConfig.preset(
        args.manifold, args.scenario, n=args.n, noise=args.noise, seed=args.seed, **overrides
    )
    sample = generate(cfg)
    save_points_csv(args.x_out, cfg.manifold, sample.xs)
    save_points_csv(args.y_out, cfg.manifold, sample.ys)
    return 0


def _reference_point(text, manifold):
    vals = np.array(_vector(text, None, "point"))
    if manifold == "sphere":
        if vals.size != 3:
            raise CliError("a sphere point needs 3 components")
        return vals
    if vals.size != 9:
        raise CliError("an so3 point needs 9 row-major components")
    return vals.reshape(3, 3)


def cmd_analyze(args) -> int:
    sample = load_paired(args.x, args.y, lenient=args.lenient, by_id=not args.by_order)
    weights = _vector(args.weights, 2, "weights") if args.weights else None
    point = _reference_point(args.point, sample.manifold.tag) if args.point else None
    if args.policy == "point" and point is None:
        raise CliError("--policy point requires --point")
    report = evaluate_dependence(
        sample, args.policy, weights, point, settings=_settings(args), with_dcorr=not args.no_dcorr
    )
    _write_json(report.to_dict(), args.out)
    return 0


def cmd_sweep(args) -> int:
    try:
        with open(args.config) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"{args.config}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{args.config}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError("sweep config must be a JSON object")
    sweep = parse_sweep_config(data, args.seed)
    rows = run_sweep(sweep, _settings(args))
    fh, close = _open_text_out(args.out)
    try:
        write_sweep_csv(rows, fh)
    finally:
        if close:
            fh.close()
    return EXIT_ROW_ERRORS if any(r["error"] for r in rows) else 0


def cmd_frechet_mean(args) -> int:
    records = load_points_csv(args.input, lenient=args.lenient)
    result = frechet_mean(records.points, _settings(args))
    _write_json(result.to_dict(), args.out)
    return 0 if result.converged else EXIT_ROW_ERRORS


def cmd_vcg(args) -> int:
    sample = load_vcg_dataset(args.f_system, args.mp_system, lenient=args.lenient)
    report = evaluate_dependence(sample, "midpoint", settings=_settings(args))
    _write_json(
        {
            "n": sample.n,
            "dcorr": report.dcorr,
            "rcorr-midpoint": report.rcorr,
            "report": report.to_dict(),
        },
        args.out,
    )
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "analyze": cmd_analyze,
    "sweep": cmd_sweep,
    "frechet-mean": cmd_frechet_mean,
    "vcg": cmd_vcg,
}


def error_payload(exc: BaseException) -> dict:
    err = {"type": type(exc).__name__, "message": str(exc)}
    for key in ("row", "margin", "index"):
        val = getattr(exc, key, None)
        if val is not None:
            err[key] = val
    return {"error": err}


def _show_warning(message, category, filename, lineno, file=None, line=None):
    sys.stderr.write(f"warning: {category.__name__}: {message}\n")


def main(argv=None) -> int:
    previous = warnings.showwarning
    warnings.showwarning = _show_warning
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except (RiemannDepError, OSError) as exc:
        sys.stderr.write(json.dumps(error_payload(exc)) + "\n")
        return EXIT_ERROR
    finally:
        warnings.showwarning = previous


if __name__ == "__main__":
    sys.exit(main())
