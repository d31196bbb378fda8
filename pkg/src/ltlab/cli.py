"""Command-line interface: ``ltlab optimize | kdv | clr | sweep | verify``.

Every command resolves its parameters from built-in defaults, an optional
JSON config file (``--config``) and command-line flags, in increasing order
of precedence, and writes a result envelope (``result.json``) plus CSV side
files into the output directory.  Exit codes: 0 success, 1 usage or input
error, 2 no convergence.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from . import __version__
from .errors import LTLabError
from .io import JsonLinesAppender, dumps, save_field, to_jsonable

log = logging.getLogger("ltlab")

SCHEMA_VERSION = "1.0"
EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED = 0, 1, 2
DEFAULT_OUTPUT = "ltlab-output"

RADIAL_NOTE = (
    "d >= 2 computations use radial potentials only; non-radial optimizers are not explored"
)

# parameter defaults per command; every key is echoed in the result envelope
DEFAULTS: dict[str, dict[str, Any]] = {
    "optimize": {
        "gamma": 1.5, "dim": 1, "nstates": 1, "grid_n": 8192, "box": 60.0, "eta": 0.5,
        "max_iter": 500, "tol": 1e-8, "init": "gaussian", "trace": False,
    },
    "kdv": {
        "betas": [0.8, 0.5], "shifts": None, "normalize": False, "grid_n": 8192, "box": 60.0,
        "gamma": 1.5,
    },
    "clr": {
        "dim": 3, "potential": "sobolev", "grid_n": 16384, "box": 200.0, "lmax": None,
        "nstates": None, "boundary": "exterior",
    },
    "sweep": {
        "gamma": [1.5], "dim": [1], "nstates": [1], "grid_n": 8192, "box": 60.0, "eta": 0.5,
        "max_iter": 500, "tol": 1e-8, "init": "gaussian",
    },
    "verify": {"quick": False},
}

# keys whose flag value is a comma separated list
LIST_KEYS = {"betas", "shifts"}
SWEEP_LIST_KEYS = {"gamma", "dim", "nstates"}


class UsageError(Exception):
    """Bad command line or configuration."""


@dataclass
class RunConfig:
    """Fully resolved configuration of one CLI invocation."""

    command: str
    params: dict
    output_dir: str
    seed: int = 0
    workers: int = 1

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "params": self.params,
            "output_dir": self.output_dir,
            "seed": self.seed,
            "workers": self.workers,
        }


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


def make_envelope(config: RunConfig, payload: Any, provenance: dict, started: str) -> dict:
    """Assemble the result document of one computation."""
    return {
        "schema_version": SCHEMA_VERSION,
        "config": config.to_dict(),
        "timestamps": {"started": started, "finished": _now()},
        "payload": to_jsonable(payload),
        "provenance": to_jsonable({"ltlab_version": __version__, **provenance}),
    }


def payload_bytes(envelope: dict) -> bytes:
    """Canonical bytes of the payload (the part that must be reproducible)."""
    return dumps(envelope["payload"]).encode()


# -- parsing helpers ---------------------------------------------------------


def _float_list(text: str) -> list[float]:
    text = text.strip()
    if not text:
        return []
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _int_list(text: str) -> list[int]:
    vals = _float_list(text)
    if any(v != int(v) for v in vals):
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    return [int(v) for v in vals]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with parameters (flags take precedence)")
    p.add_argument("--output", help=f"output directory (default: $LTLAB_OUTPUT_DIR or ./{DEFAULT_OUTPUT})")
    p.add_argument("--seed", type=int, help="random seed (default 0)")
    p.add_argument("--workers", type=int, help="parallel workers for sweeps (default 1)")


def _add_scf_flags(p: argparse.ArgumentParser, lists: bool = False) -> None:
    if lists:
        p.add_argument("--gamma", type=_float_list, help="comma-separated Riesz exponents")
        p.add_argument("--dim", type=_int_list, help="comma-separated dimensions")
        p.add_argument("--nstates", type=_int_list, help="comma-separated numbers of levels N")
    else:
        p.add_argument("--gamma", type=float, help="Riesz exponent gamma")
        p.add_argument("--dim", type=int, help="space dimension d")
        p.add_argument("--nstates", type=int, help="number of levels N")
    p.add_argument("--grid-n", dest="grid_n", type=int, help="interior grid nodes")
    p.add_argument("--box", type=float, help="half-width of [-box, box] (d=1) or radius (d>=2)")
    p.add_argument("--eta", type=float, help="initial mixing parameter in (0, 1]")
    p.add_argument("--max-iter", dest="max_iter", type=int, help="iteration cap")
    p.add_argument("--tol", type=float, help="fixed-point tolerance")
    p.add_argument("--init", help="gaussian[:w] | bumps:k:sep | soliton:b1,b2@X1,X2 | random[:k] | file:PATH")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ltlab",
        description="Finite-rank Lieb-Thirring and CLR constants by direct computation.",
    )
    parser.add_argument("--version", action="version", version=f"ltlab {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("optimize", help="self-consistent search for an optimal potential")
    _add_scf_flags(p)
    p.add_argument("--trace", action="store_const", const=True, help="write the iteration trace as JSON lines")
    _add_common(p)

    p = sub.add_parser("kdv", help="KdV soliton profile, spectrum check and gamma=3/2 quotient")
    p.add_argument("--betas", type=_float_list, help="decreasing positive rates, e.g. 0.8,0.5")
    p.add_argument("--shifts", type=_float_list, help="positions, same length as --betas")
    p.add_argument("--normalize", action="store_const", const=True, help="scale onto sum(beta^3) = 3/16")
    p.add_argument("--grid-n", dest="grid_n", type=int)
    p.add_argument("--box", type=float)
    p.add_argument("--gamma", type=float, help="exponent of the reported quotient (default 1.5)")
    _add_common(p)

    p = sub.add_parser("clr", help="Birman-Schwinger levels and CLR estimates (d >= 3)")
    p.add_argument("--dim", type=int)
    p.add_argument("--potential", help="sobolev | vl:L | file:PATH")
    p.add_argument("--grid-n", dest="grid_n", type=int)
    p.add_argument("--box", type=float, help="radius r_max")
    p.add_argument("--lmax", type=int, help="highest angular momentum (default: automatic)")
    p.add_argument("--nstates", type=int, help="number of levels (default d + 2)")
    p.add_argument("--boundary", choices=["exterior", "dirichlet"])
    _add_common(p)

    p = sub.add_parser("sweep", help="grid of optimize runs over gamma, dim, N")
    _add_scf_flags(p, lists=True)
    _add_common(p)

    p = sub.add_parser("verify", help="run the acceptance suite")
    p.add_argument("--quick", action="store_const", const=True, help="only the fast criteria")
    _add_common(p)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge defaults, config file and flags (flags win)."""
    command = args.command
    params = json.loads(json.dumps(DEFAULTS[command]))
    file_data: dict = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.is_file():
            raise UsageError(f"config file not found: {path}")
        try:
            file_data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(file_data, dict):
            raise UsageError("config file must hold a JSON object")
        if file_data.get("command", command) != command:
            raise UsageError(f"config file is for {file_data['command']!r}, not {command!r}")
    block = file_data.get("params", {k: v for k, v in file_data.items() if k in params})
    unknown = set(block) - set(params)
    if unknown:
        raise UsageError(f"unknown parameters for {command}: {sorted(unknown)}")
    params.update(block)
    for key in params:
        val = getattr(args, key, None)
        if val is not None:
            params[key] = val
    if command == "sweep":
        for key in SWEEP_LIST_KEYS:
            if not isinstance(params[key], list):
                params[key] = [params[key]]
    output = args.output or file_data.get("output") or os.environ.get("LTLAB_OUTPUT_DIR") or DEFAULT_OUTPUT
    seed = args.seed if args.seed is not None else int(file_data.get("seed", 0))
    workers = args.workers if args.workers is not None else int(file_data.get("workers", 1))
    if workers < 1:
        raise UsageError("--workers must be >= 1")
    return RunConfig(command=command, params=params, output_dir=str(output), seed=int(seed), workers=int(workers))


def _out_dir(config: RunConfig) -> Path:
    out = Path(config.output_dir) / config.command
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {out}: {exc}") from exc
    return out


def _write_envelope(out: Path, env: dict, name: str = "result.json") -> Path:
    path = out / name
    path.write_text(json.dumps(env, sort_keys=True, indent=2, allow_nan=False) + "\n")
    return path


# -- optimize ----------------------------------------------------------------


def _scf_config(params: dict, seed: int, gamma=None, dim=None, nstates=None):
    from .scf import ScfConfig

    return ScfConfig(
        gamma=float(params["gamma"] if gamma is None else gamma),
        dim=int(params["dim"] if dim is None else dim),
        n_states=int(params["nstates"] if nstates is None else nstates),
        eta=float(params["eta"]),
        max_iter=int(params["max_iter"]),
        tol_fixed_point=float(params["tol"]),
        box=float(params["box"]),
        grid_n=int(params["grid_n"]),
        init=str(params["init"]),
        seed=int(seed),
    )


def optimize_payload(cfg, callback=None) -> tuple[dict, Any]:
    """Run one SCF computation and return ``(payload, result)``."""
    from .functional import riesz_ratio
    from .scf import gap_check, predicted_decay_rate, run

    res = run(cfg, callback=callback)
    report = riesz_ratio(res.V_star, cfg.gamma, cfg.n_states, spectrum=res.spectrum)
    payload = res.to_dict()
    payload.update(
        {
            "riesz": report.to_dict(),
            "gap_ok": gap_check(res),
            "predicted_decay_rate": predicted_decay_rate(res),
            "channels": [lv.to_dict() for lv in res.spectrum.levels],
            "negative_count": res.spectrum.negative_count,
        }
    )
    return payload, res


def _scf_provenance(cfg) -> dict:
    prov = {
        "grid": cfg.make_grid().to_dict(),
        "tolerances": {
            "tol_fixed_point": cfg.tol_fixed_point,
            "tol_objective": cfg.tol_objective,
            "degeneracy_tol": cfg.degeneracy_tol,
        },
    }
    if cfg.dim >= 2:
        prov["modeling_assumption"] = RADIAL_NOTE
    return prov


def cmd_optimize(config: RunConfig) -> tuple[int, dict]:
    started = _now()
    p = config.params
    cfg = _scf_config(p, config.seed)
    out = _out_dir(config)
    payload, res = _optimize_with_trace(cfg, out if p.get("trace") else None)
    env = make_envelope(config, payload, _scf_provenance(cfg), started)
    _write_envelope(out, env)
    save_field(res.V_star, out / "V_star.csv")
    status = "converged" if res.converged else "NOT converged"
    print(
        f"optimize gamma={cfg.gamma} d={cfg.dim} N={cfg.n_states}: L_estimate={res.L_estimate:.10f} "
        f"({status}, {res.iterations} iterations, residual {res.residual:.2e})"
    )
    print(f"wrote {out / 'result.json'}")
    return (EXIT_OK if res.converged else EXIT_NOT_CONVERGED), env


def _optimize_with_trace(cfg, out: Optional[Path]):
    if out is None:
        return optimize_payload(cfg)
    path = out / "trace.jsonl"
    if path.exists():
        path.unlink()
    with JsonLinesAppender(path) as app:
        return optimize_payload(cfg, callback=app.append)


# -- kdv ---------------------------------------------------------------------


def cmd_kdv(config: RunConfig) -> tuple[int, dict]:
    from .functional import riesz_ratio
    from .grid import Grid1D
    from .kdv import SolitonSpec, exact_spectrum, normalize_to_manifold, soliton_profile
    from .schrodinger import lowest_eigenpairs

    started = _now()
    p = config.params
    spec = SolitonSpec(tuple(p["betas"]), None if p["shifts"] is None else tuple(p["shifts"]))
    if p["normalize"]:
        spec = normalize_to_manifold(spec)
    grid = Grid1D(-float(p["box"]), float(p["box"]), int(p["grid_n"]))
    V = soliton_profile(spec, grid)
    exact = exact_spectrum(spec)
    computed = lowest_eigenpairs(V, spec.order).eigenvalues
    rows = [
        {"j": j + 1, "exact": float(e), "computed": float(c), "abs_error": float(abs(c - e))}
        for j, (e, c) in enumerate(zip(exact, computed))
    ]
    report = riesz_ratio(V, float(p["gamma"]), spec.order)
    payload = {
        "spec": spec.to_dict(),
        "cube_sum": float(np.sum(np.asarray(spec.betas) ** 3)),
        "spectrum_table": rows,
        "max_abs_error": max(r["abs_error"] for r in rows),
        "riesz": report.to_dict(),
    }
    out = _out_dir(config)
    save_field(V, out / "profile.csv")
    with open(out / "spectrum.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["j", "exact", "computed", "abs_error"], lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.17g}" if isinstance(v, float) else v) for k, v in r.items()})
    env = make_envelope(config, payload, {"grid": grid.to_dict(), "tolerances": {"eigen_tol": 1e-12}}, started)
    _write_envelope(out, env)
    print(f"kdv betas={list(spec.betas)}: max |dlambda| = {payload['max_abs_error']:.3e}, "
          f"ratio(gamma={report.gamma}) = {report.ratio:.10f}")
    for r in rows:
        print(f"  lambda_{r['j']}: exact {r['exact']:+.10f} computed {r['computed']:+.10f}")
    return EXIT_OK, env


# -- clr ---------------------------------------------------------------------


def _clr_potential(text: str, grid):
    from .birman_schwinger import SpherePotentialSpec, sobolev_potential, sphere_potential
    from .errors import InvalidInputError
    from .io import load_field

    kind, _, arg = text.partition(":")
    kind = kind.strip().lower()
    if kind == "sobolev":
        return sobolev_potential(grid), {"closed_form_norm": SpherePotentialSpec(0, grid.dim).closed_form_norm()}
    if kind == "vl":
        try:
            L = int(arg)
        except ValueError as exc:
            raise InvalidInputError(f"vl potential needs an integer L, got {arg!r}") from exc
        V, norm = sphere_potential(SpherePotentialSpec(L, grid.dim), grid)
        return V, {"closed_form_norm": norm}
    if kind == "file":
        V = load_field(arg, dim=grid.dim)
        if V.grid.dim != grid.dim:
            raise InvalidInputError("file potential has a different dimension")
        return V, {}
    raise InvalidInputError(f"unknown potential {text!r} (sobolev | vl:L | file:PATH)")


def cmd_clr(config: RunConfig) -> tuple[int, dict]:
    from .birman_schwinger import decay_tail_check, mu_spectrum, sobolev_potential
    from .errors import InvalidInputError
    from .functional import subadditivity_check
    from .grid import PotentialField, RadialGrid

    started = _now()
    p = config.params
    d = int(p["dim"])
    if d < 3:
        raise InvalidInputError(f"the critical case requires d >= 3, got d = {d}")
    grid = RadialGrid(float(p["box"]), int(p["grid_n"]), d)
    V, extra = _clr_potential(str(p["potential"]), grid)
    if V.grid != grid and str(p["potential"]).startswith("file:"):
        grid = V.grid
    count = int(p["nstates"]) if p["nstates"] is not None else d + 2
    res = mu_spectrum(V, count, l_max=p["lmax"], boundary=p["boundary"])
    sob = mu_spectrum(sobolev_potential(grid), 1, boundary=p["boundary"])
    # box study: the same field truncated to the inner half of the grid, same spacing
    n_half = (V.grid.n + 1) // 2 - 1
    half_grid = RadialGrid(V.grid.h * (n_half + 1), n_half, d)
    half = mu_spectrum(PotentialField(half_grid, V.values[:n_half]), count, l_max=p["lmax"], boundary=p["boundary"])
    box_study = {
        "r_max_half": half_grid.r_max,
        "mus_half": [float(m) for m in half.mus],
        "max_rel_change": float(np.max(np.abs(half.mus - res.mus) / res.mus)),
    }
    payload = res.to_dict()
    payload.update(
        {
            "ell_estimates_sobolev": {"1": sob.ell_estimates[1]},
            "gain_over_sobolev": {str(k): v / sob.ell_estimates[1] for k, v in res.ell_estimates.items()},
            "quotient_monotone_violations": subadditivity_check(res.ell_estimates, mode="quotient_monotone"),
            "tail_constant": decay_tail_check(V),
            "box_convergence": box_study,
            **extra,
        }
    )
    out = _out_dir(config)
    env = make_envelope(
        config, payload,
        {"grid": grid.to_dict(), "tolerances": {"v_floor": 1e-14}, "modeling_assumption": RADIAL_NOTE,
         "label": "exploratory for N beyond the closed-form cases"},
        started,
    )
    _write_envelope(out, env)
    with open(out / "mus.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["j", "mu", "ell_estimate"])
        for j, m in enumerate(res.mus, start=1):
            w.writerow([j, f"{m:.17g}", f"{res.ell_estimates[j]:.17g}"])
    print(f"clr d={d} potential={p['potential']}: mu = {np.array2string(res.mus, precision=6)}")
    print(f"  ell_estimate[{count}] / ell_estimate_sobolev[1] = {payload['gain_over_sobolev'][str(count)]:.6f}")
    print(f"  box study: max relative change of mu at r_max/2 = {box_study['max_rel_change']:.2e}")
    return EXIT_OK, env


# -- sweep -------------------------------------------------------------------


def _sweep_point(args):
    params, seed, gamma, dim, nstates, command_config = args
    started = _now()
    point = dict(params, gamma=gamma, dim=dim, nstates=nstates)
    cfg = _scf_config(point, seed)
    payload, res = optimize_payload(cfg)
    cc = RunConfig(command="optimize", params={k: v for k, v in point.items() if k in DEFAULTS["optimize"]},
                   output_dir=command_config["output_dir"], seed=seed, workers=1)
    cc.params.setdefault("trace", False)
    env = make_envelope(cc, payload, _scf_provenance(cfg), started)
    return env, res.converged


def cmd_sweep(config: RunConfig) -> tuple[int, dict]:
    from .scf import ScfConfig

    started = _now()
    p = config.params
    grid_points = list(itertools.product(p["gamma"], p["dim"], p["nstates"]))
    # validate every point up front so a bad grid fails before any work is done
    for g, d, n in grid_points:
        _scf_config(p, config.seed, gamma=g, dim=d, nstates=n)
    out = _out_dir(config)
    ledger_path = out / "ledger.jsonl"
    csv_path = out / "ledger.csv"
    for path in (ledger_path, csv_path):
        if path.exists():
            path.unlink()
    tasks = [(p, config.seed, g, d, n, config.to_dict()) for g, d, n in grid_points]
    all_converged = True
    with JsonLinesAppender(ledger_path) as app, open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["gamma", "dim", "N", "ratio", "norm_power", "neg_count"])
        if config.workers > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                results = list(pool.map(_sweep_point, tasks))  # map keeps grid order
        else:
            results = [_sweep_point(t) for t in tasks]
        for env, converged in results:
            all_converged &= converged
            app.append(env)
            row = env["payload"]["riesz"]
            writer.writerow([row["gamma"], row["dim"], row["n_states"], f"{row['ratio']:.17g}",
                             f"{row['norm_power']:.17g}", row["negative_count"]])
    summary = make_envelope(
        config, {"points": len(grid_points), "all_converged": all_converged, "ledger": str(ledger_path),
                 "label": "exploratory"},
        {"tolerances": {"tol_fixed_point": p["tol"]}}, started,
    )
    _write_envelope(out, summary)
    print(f"sweep: {len(grid_points)} points written to {ledger_path}")
    return (EXIT_OK if all_converged else EXIT_NOT_CONVERGED), summary


# -- verify ------------------------------------------------------------------


def cmd_verify(config: RunConfig) -> tuple[int, dict]:
    from .acceptance import run_all

    started = _now()
    results = run_all(quick=bool(config.params["quick"]), stream=sys.stdout)
    payload = {"results": [r.to_dict() for r in results], "all_passed": all(r.passed for r in results)}
    out = _out_dir(config)
    env = make_envelope(config, payload, {}, started)
    _write_envelope(out, env)
    return (EXIT_OK if payload["all_passed"] else EXIT_ERROR), env


COMMANDS: dict[str, Callable[[RunConfig], tuple[int, dict]]] = {
    "optimize": cmd_optimize,
    "kdv": cmd_kdv,
    "clr": cmd_clr,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
}


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits with 2 on usage errors; normalize to 1
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    if args.command is None:
        parser.print_help()
        return EXIT_ERROR
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        config = resolve_config(args)
        code, _ = COMMANDS[args.command](config)
        return code
    except (UsageError, LTLabError, ValueError) as exc:
        print(f"ltlab {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
