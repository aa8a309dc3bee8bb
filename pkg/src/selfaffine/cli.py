"""
Command-line interface.

Every subcommand prints a run report on stdout (``--format table`` or
``json``); diagnostics go to stderr. Exit codes:

    0  success
    1  a requested check did not pass (or a verified re-run differed)
    2  malformed configuration or arguments
    3  a mathematical precondition failed (e.g. a map is not contracting)
    4  the enumeration budget would be exceeded (raise it with --budget)
    5  a numerical routine or estimate failed
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .attractor import ImageSpec, box_count, project_points, render, sample_attractor
from .config import IFSConfig, config_for, config_from_dict, load_config, parse_matrix
from .errors import (
    BudgetError,
    ConfigError,
    DomainError,
    EstimationError,
    NumericalError,
    PreconditionError,
    SelfAffineError,
    ShapeError,
)
from .gallery import (
    ADMISSIBLE_A,
    ADMISSIBLE_B,
    build_rotation_shear,
    build_kronecker_example,
    certify_kronecker_example,
    coordinate_projection,
    rank_one_projection,
)
from .linalg import JACOBI_TOL
from .maps import AffineIFS, MatrixTuple
from .pressure import (
    DEFAULT_TOL,
    LevelSpectra,
    affinity_dimension,
    kron_projected_bound,
    projected_exponent,
)
from .structure import (
    DEFAULT_MARGIN,
    INVARIANCE_TOL,
    irreducibility_check,
    proximality_check,
    strong_separation_certificate,
)
from .wordspace import DEFAULT_BUDGET

DEFAULT_SEED = 0x5EED
DEFAULT_LEVEL = 8

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_PRECONDITION, EXIT_BUDGET, EXIT_NUMERICAL = range(6)


# ------------------------------------------------------------ built-in systems


def builtin_configs() -> dict:
    third = np.eye(2) / 3
    half = np.eye(2) / 2
    diag = np.diag([0.5, 0.25])
    rot = build_rotation_shear(1.0)
    c_fac, r_fac = rot.factor_tuples
    p = rank_one_projection(0.0)
    thm = build_kronecker_example(ADMISSIBLE_A, ADMISSIBLE_B)
    return {
        "similitudes": config_for(
            AffineIFS(np.array([third] * 4), [[0, 0], [2 / 3, 0], [0, 2 / 3], [2 / 3, 2 / 3]])
        ),
        "sierpinski": config_for(AffineIFS(np.array([half] * 3), [[0, 0], [0.5, 0], [0.25, 0.5]])),
        "diag3": config_for(AffineIFS(np.array([diag] * 3), [[0, 0], [0.5, 0], [0, 0.75]])),
        "diag2": config_for(AffineIFS(np.array([diag] * 2), [[0, 0], [0.5, 0.75]])),
        "rotation": config_for(rot.ifs, rot.projection_i_p, kron=(c_fac, r_fac, p)),
        "kronecker": config_for(thm.ifs, coordinate_projection(4, (1, 3)), kron=(thm.base_a, thm.base_b, p)),
    }


def resolve_config(spec: str) -> IFSConfig:
    """A config path, or ``@name`` for a built-in system."""
    if spec.startswith("@"):
        table = builtin_configs()
        if spec[1:] not in table:
            raise ConfigError(f"unknown built-in {spec[1:]!r}; choose from {', '.join(sorted(table))}")
        return table[spec[1:]]
    return load_config(spec)


# ---------------------------------------------------------------- reporting


def jsonable(x):
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


def flatten(x, prefix="") -> list:
    if isinstance(x, dict):
        out = []
        for k, v in x.items():
            out.extend(flatten(v, f"{prefix}.{k}" if prefix else str(k)))
        return out
    if isinstance(x, list) and any(isinstance(v, (dict, list)) for v in x):
        out = []
        for i, v in enumerate(x):
            out.extend(flatten(v, f"{prefix}[{i}]"))
        return out
    return [(prefix, x)]


def format_table(report: dict) -> str:
    rows = flatten({k: v for k, v in report.items() if k != "config"})
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows)


def emit(report: dict, fmt: str, out) -> str:
    text = json.dumps(report, indent=2, sort_keys=False)
    if out:
        Path(out).write_text(text + "\n")
    return text if fmt == "json" else format_table(report)


# ---------------------------------------------------------------- commands


def _tuple(cfg: IFSConfig) -> MatrixTuple:
    return cfg.ifs.linear


def cmd_dim(args, cfg):
    t = _tuple(cfg)
    t.require_contracting()
    spectra = LevelSpectra(t, args.level, shards=args.shards, budget=args.budget)
    br = affinity_dimension(t, args.level, args.tol, spectra=spectra)
    at_upper = spectra.pressure(br.upper)
    levels = list(at_upper.level_values)
    results = {
        "affinity_dimension": br.as_dict(),
        "envelope_provenance": {
            "s": br.upper,
            "level_values": levels,
            "minimising_level": int(np.argmin(levels)) + 1,
        },
    }
    return results, {"bisection": args.tol, "jacobi": JACOBI_TOL}, EXIT_OK


def _projection(args, cfg) -> np.ndarray:
    if getattr(args, "coords", None):
        return coordinate_projection(cfg.dim, args.coords[0])
    if cfg.projection is None:
        raise ConfigError("this command needs a 'projection' in the configuration (or --coords)")
    return cfg.projection


def cmd_projdim(args, cfg):
    t = _tuple(cfg)
    q = _projection(args, cfg)
    pb = projected_exponent(t, q, args.level, args.tol, shards=args.shards, budget=args.budget)
    results = pb.as_dict()
    results["gap"] = pb.affinity.upper - pb.empirical.upper
    if cfg.kron_a is not None and cfg.kron_p is not None:
        kb = kron_projected_bound(
            cfg.kron_a, cfg.kron_b, cfg.kron_p, args.level, args.tol, shards=args.shards, budget=args.budget
        )
        results["kron_projected_bound"] = {
            **kb.as_dict(),
            "applies_to_projection": bool(np.array_equal(np.kron(np.eye(2), cfg.kron_p), q)),
        }
    return results, {"bisection": args.tol, "jacobi": JACOBI_TOL}, EXIT_OK


def cmd_check(args, cfg):
    t = _tuple(cfg)
    ks = args.k or list(range(1, t.dim + 1))
    results = {"proximality": [], "irreducibility": []}
    verdicts = []
    for k in ks:
        prox = proximality_check(t, k, max_len=args.max_len, margin=args.margin, budget=args.budget)
        irr = irreducibility_check(t, k, retries=args.retries, seed=args.seed)
        results["proximality"].append({"k": k, **prox.as_dict()})
        results["irreducibility"].append({"k": k, **irr.as_dict()})
        verdicts += [prox.certified, irr.certified]
    if args.radius is not None:
        center = np.zeros(t.dim) if args.center is None else np.array(args.center)
        sep = strong_separation_certificate(cfg.ifs, center, args.radius)
        results["strong_separation"] = sep.as_dict()
        verdicts.append(sep.certified)
    results["all_certified"] = all(verdicts)
    tols = {"margin": args.margin, "invariance": INVARIANCE_TOL, "max_len": args.max_len}
    return results, tols, EXIT_OK if all(verdicts) else EXIT_FAILED


def _matrix_arg(text: str, name: str) -> np.ndarray:
    path = Path(text)
    if path.exists():
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{name}: invalid JSON in {path}") from exc
    else:
        raw = text.split(",")
    return parse_matrix(raw, 2, 2, name)


def cmd_certify_example(args, cfg):
    a = ADMISSIBLE_A if args.A is None else _matrix_arg(args.A, "--A")
    b = ADMISSIBLE_B if args.B is None else _matrix_arg(args.B, "--B")
    inst = build_kronecker_example(a, b)
    rep = certify_kronecker_example(
        inst, n=args.level, tol=args.tol, seed=args.seed, angles=args.angles, shards=args.shards, budget=args.budget
    )
    results = {"A": a.tolist(), "B": b.tolist(), **rep.as_dict()}
    return results, {"bisection": args.tol, "jacobi": JACOBI_TOL, "margin": DEFAULT_MARGIN}, (
        EXIT_OK if rep.passed else EXIT_FAILED
    )


def _sample(args, cfg):
    return sample_attractor(
        cfg.ifs, args.mode, count=args.count, seed=args.seed, depth=args.depth, budget=args.budget
    )


def _panels(args, cfg, cloud):
    """Planar clouds to work on: one per ``--coords``, else the configured projection."""
    if args.coords:
        return [(",".join(map(str, c)), project_points(cloud, coordinate_projection(cfg.dim, c))) for c in args.coords]
    if cfg.projection is not None:
        return [("projection", project_points(cloud, cfg.projection))]
    if cfg.dim == 2:
        return [("identity", cloud)]
    raise ConfigError(f"a {cfg.dim}-dimensional system needs --coords or a 'projection' to give planar data")


def _panel_path(base: Path, label: str, many: bool) -> Path:
    if not many:
        return base
    return base.with_name(f"{base.stem}_{label.replace(',', '-')}{base.suffix}")


def cmd_render(args, cfg):
    cloud = _sample(args, cfg)
    panels = _panels(args, cfg, cloud)
    base = Path(args.image)
    out = []
    for label, pc in panels:
        spec = ImageSpec.fit(pc, args.width, args.height, mapping=args.mapping)
        path = _panel_path(base, label, len(panels) > 1)
        pixels = render(pc, spec, path)
        out.append(
            {
                "panel": label,
                "path": str(path),
                "width": spec.width,
                "height": spec.height,
                "bounds": list(spec.bounds),
                "points": len(pc),
                "pixel_sha256": hashlib.sha256(pixels.tobytes()).hexdigest(),
            }
        )
    return {"sampling": cloud.provenance, "panels": out}, {"mapping": args.mapping}, EXIT_OK


def cmd_boxdim(args, cfg):
    cloud = _sample(args, cfg)
    out = []
    for label, pc in _panels(args, cfg, cloud):
        out.append({"panel": label, **box_count(pc, args.finest_level).as_dict()})
    return {"sampling": cloud.provenance, "panels": out}, {"finest_level": args.finest_level}, EXIT_OK


COMMANDS = {
    "dim": cmd_dim,
    "projdim": cmd_projdim,
    "check": cmd_check,
    "certify-example": cmd_certify_example,
    "render": cmd_render,
    "boxdim": cmd_boxdim,
}


# ------------------------------------------------------------------ parser


def _coords(text: str) -> tuple:
    try:
        c = tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated coordinates, got {text!r}")
    if len(c) != 2 or len(set(c)) != 2 or min(c) < 1:
        raise argparse.ArgumentTypeError("expected two distinct 1-based coordinates, e.g. 1,3")
    return c


def _int_list(text: str) -> list:
    try:
        return [int(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _floats(text: str) -> list:
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int(text: str) -> int:
    return int(text, 0)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--level", type=int, default=DEFAULT_LEVEL, help="word length n (default %(default)s)")
    common.add_argument("--tol", type=float, default=DEFAULT_TOL, help="bisection tolerance (default %(default)s)")
    common.add_argument("--seed", type=_int, default=DEFAULT_SEED, help="random seed (default 0x5EED)")
    common.add_argument("--shards", type=int, default=os.cpu_count() or 1, help="work shards (default: CPU count)")
    common.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="maximum words per level")
    common.add_argument("--format", choices=("table", "json"), default="table")
    common.add_argument("--out", help="also write the JSON report to this file")
    common.add_argument("--omit-timing", action="store_true", help="leave wall time out of the report")

    sampling = argparse.ArgumentParser(add_help=False)
    sampling.add_argument("--mode", choices=("chaos", "deterministic"), default="chaos")
    sampling.add_argument("--count", type=int, default=200_000, help="chaos-game points")
    sampling.add_argument("--depth", type=int, default=8, help="deterministic word length")
    sampling.add_argument(
        "--coords", type=_coords, action="append", help="coordinate pair to project onto, e.g. 1,3 (repeatable)"
    )

    parser = argparse.ArgumentParser(prog="selfaffine", description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_, *parents):
        p = sub.add_parser(name, help=help_, parents=[common, *parents])
        return p

    p = add("dim", "bracket the affinity dimension")
    p.add_argument("config", help="config path or @builtin")
    p = add("projdim", "empirical projected exponent and certified bounds")
    p.add_argument("config")
    p.add_argument("--coords", type=_coords, action="append", help="use a coordinate projection instead")
    p = add("check", "proximality, irreducibility and separation certificates")
    p.add_argument("config")
    p.add_argument("--k", type=_int_list, help="exterior-power orders (default: all)")
    p.add_argument("--max-len", type=int, default=6)
    p.add_argument("--margin", type=float, default=DEFAULT_MARGIN)
    p.add_argument("--retries", type=int, default=8)
    p.add_argument("--center", type=_floats, help="separation ball centre (default origin)")
    p.add_argument("--radius", type=float, help="separation ball radius; enables the ball certificate")
    p = add("certify-example", "full pipeline for the Kronecker construction")
    p.add_argument("--A", help="2 x 2 matrix: 'a,b,c,d' row-major or a JSON file")
    p.add_argument("--B", help="2 x 2 matrix: 'a,b,c,d' row-major or a JSON file")
    p.add_argument("--angles", type=int, default=16, help="rank-one projections in the sweep")
    p = add("render", "sample the attractor and write density bitmaps", sampling)
    p.add_argument("config")
    p.add_argument("--image", default="attractor.pgm", help="output path (.pgm or .png)")
    p.add_argument("--width", type=int, default=512)
    p.add_argument("--height", type=int)
    p.add_argument("--mapping", choices=("log", "linear"), default="log")
    p = add("boxdim", "box-counting slope of sampled (projected) attractors", sampling)
    p.add_argument("config")
    p.add_argument("--finest-level", type=int, default=12)

    p = sub.add_parser("report", help="show a saved report, optionally re-running it")
    p.add_argument("path")
    p.add_argument("--verify", action="store_true", help="re-run and compare results bitwise")
    p.add_argument("--format", choices=("table", "json"), default="table")

    p = sub.add_parser("example", help="write a built-in configuration")
    p.add_argument("name", choices=sorted(builtin_configs()))
    p.add_argument("--out", help="file to write (default stdout)")
    return parser


# ---------------------------------------------------------------- driver


def run(argv, cfg_override=None) -> tuple:
    """Execute a report-producing subcommand; return ``(report, exit_code)``."""
    args = build_parser().parse_args(argv)
    if args.shards < 1:
        raise ConfigError("--shards must be >= 1")
    if args.budget < 1:
        raise ConfigError("--budget must be >= 1")
    cfg = cfg_override
    if cfg is None and hasattr(args, "config"):
        cfg = resolve_config(args.config)
    start = time.perf_counter()
    results, tolerances, code = COMMANDS[args.command](args, cfg)
    elapsed = time.perf_counter() - start
    report = {
        "tool": "selfaffine",
        "version": __version__,
        "command": list(argv),
        "input_digest": None if cfg is None else cfg.digest(),
        "seed": args.seed,
        "shards": args.shards,
        "budget": args.budget,
        "tolerances": tolerances,
        "results": results,
        "config": None if cfg is None else cfg.to_dict(),
    }
    if not args.omit_timing:
        report["wall_time_s"] = elapsed
    return jsonable(report), code


def rerun(report: dict) -> tuple:
    """Re-execute a saved report from its echoed command and embedded config."""
    cfg = None if report.get("config") is None else config_from_dict(report["config"])
    argv = [a for a in report["command"]]
    if "--out" in argv:
        i = argv.index("--out")
        del argv[i : i + 2]
    return run(argv, cfg_override=cfg)


def _report_command(args) -> int:
    try:
        saved = json.loads(Path(args.path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read report {args.path}: {exc}") from exc
    if not args.verify:
        print(emit(saved, args.format, None))
        return EXIT_OK
    fresh, _ = rerun(saved)
    same = json.dumps(fresh["results"], sort_keys=True) == json.dumps(saved["results"], sort_keys=True)
    summary = {"report": args.path, "reproduced": same, "input_digest": saved.get("input_digest")}
    print(emit(summary, args.format, None))
    return EXIT_OK if same else EXIT_FAILED


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        head = build_parser().parse_args(argv)
        if head.command == "example":
            text = json.dumps(builtin_configs()[head.name].to_dict(), indent=2)
            if head.out:
                Path(head.out).write_text(text + "\n")
            else:
                print(text)
            return EXIT_OK
        if head.command == "report":
            return _report_command(head)
        report, code = run(argv)
        print(emit(report, head.format, head.out))
        return code
    except (ConfigError, ShapeError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PreconditionError as exc:
        print(f"precondition failed: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except BudgetError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (NumericalError, EstimationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
