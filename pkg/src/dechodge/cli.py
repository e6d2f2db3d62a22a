"""Command-line front end: generate, decompose, verify, converge.

Exit codes: 0 success; 1 decomposition residuals above tolerance; 2 bad
parameters or usage; 3 file I/O failure; 4 ambiguous numerical rank;
5 a constructive verification check failed; 6 a convergence check failed.
"""

import argparse
import json
import sys
from contextlib import nullcontext
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import analytic, decomposition, harmonic, linalg, mesh, operators
from .errors import (
    AmbiguousRank,
    BadParams,
    DecError,
    DegreeMismatch,
    DegreeOutOfRange,
    ParseError,
)
from .operators import Cochain

EXIT_OK = 0
EXIT_RESIDUAL = 1
EXIT_PARAMS = 2
EXIT_IO = 3
EXIT_RANK = 4
EXIT_CHECK = 5
EXIT_CONVERGENCE = 6

DECOMPOSE_TOL = 1e-10

SHAPE_FLAGS = {
    # flag -> generator keyword
    "a": "a",
    "b": "b",
    "ntheta": "n_theta",
    "nr": "n_r",
    "n": "n",
    "nu": "n_u",
    "nv": "n_v",
    "subdivisions": "subdivisions",
    "radius": "radius",
    "length": "length",
    "width": "width",
    "height": "height",
}


@dataclass
class RunConfig:
    command: str
    mesh_path: str | None = None
    shape: str | None = None
    shape_params: dict = field(default_factory=dict)
    degree: int | None = None
    tol_rank: float = linalg.RANK_TOL
    tol_solve: float = harmonic.SOLVE_TOL
    star: str = "circumcentric"
    seed: int = 0
    report: str | None = None
    deterministic: bool = False

    def __post_init__(self):
        for name in ("tol_rank", "tol_solve"):
            val = getattr(self, name)
            if not 0.0 < val < 1.0:
                raise BadParams(f"--{name.replace('_', '-')} must lie in (0, 1), got {val}")


def _add_common(p, needs_mesh=True):
    if needs_mesh:
        p.add_argument("--mesh", help="mesh file (.off or complex JSON)")
        p.add_argument("--shape", choices=mesh.SHAPES, help="generate the mesh instead")
    p.add_argument("--tol-rank", type=float, default=linalg.RANK_TOL)
    p.add_argument("--tol-solve", type=float, default=harmonic.SOLVE_TOL)
    p.add_argument("--star", choices=operators.STAR_SCHEMES, default="circumcentric")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", help="write the JSON report here as well as stdout")
    p.add_argument("--deterministic", action="store_true",
                   help="single-threaded BLAS for byte-identical reports")


def _add_shape_params(p):
    g = p.add_argument_group("shape parameters")
    g.add_argument("--a", type=float)
    g.add_argument("--b", type=float)
    g.add_argument("--ntheta", type=int)
    g.add_argument("--nr", type=int)
    g.add_argument("--n", type=int)
    g.add_argument("--nu", type=int)
    g.add_argument("--nv", type=int)
    g.add_argument("--subdivisions", type=int)
    g.add_argument("--radius", type=float)
    g.add_argument("--length", type=float)
    g.add_argument("--width", type=float)
    g.add_argument("--height", type=float)


def build_parser():
    parser = argparse.ArgumentParser(prog="dechodge", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a standard test mesh")
    g.add_argument("--shape", choices=mesh.SHAPES, required=True)
    g.add_argument("-o", "--output", help="complex JSON (or .off) output path")
    g.add_argument("--off", help="also write an OFF file")
    _add_shape_params(g)
    _add_common(g, needs_mesh=False)

    d = sub.add_parser("decompose", help="three-way orthogonal split of a cochain")
    _add_common(d)
    _add_shape_params(d)
    d.add_argument("--degree", type=int, required=True)
    d.add_argument("--cochain", help="cochain JSON {degree, values}; random if omitted")
    d.add_argument("--components", action="store_true", help="include component values")

    v = sub.add_parser("verify", help="harmonic cohomology dimension checks")
    _add_common(v)
    _add_shape_params(v)

    c = sub.add_parser("converge", help="refinement study against closed-form forms")
    c.add_argument("--shape", choices=("annulus", "torus"), default="annulus")
    c.add_argument("--resolutions", type=int, nargs="+", default=[16, 32, 64])
    c.add_argument("--a", type=float, default=1.0)
    c.add_argument("--b", type=float, default=2.0)
    c.add_argument("--exact-aspect", action="store_true",
                   help="adjust b so radial layers are exactly equilateral")
    c.add_argument("--no-classes", action="store_true", help="skip cohomology coordinates")
    c.add_argument("--csv", help="write the table as CSV")
    _add_common(c, needs_mesh=False)
    return parser


def _config(args):
    params = {}
    for flag, key in SHAPE_FLAGS.items():
        val = getattr(args, flag, None)
        if val is not None:
            params[key] = val
    return RunConfig(
        command=args.command,
        mesh_path=getattr(args, "mesh", None),
        shape=getattr(args, "shape", None),
        shape_params=params,
        degree=getattr(args, "degree", None),
        tol_rank=args.tol_rank,
        tol_solve=args.tol_solve,
        star=args.star,
        seed=args.seed,
        report=args.report,
        deterministic=args.deterministic,
    )


def _load(cfg):
    if cfg.mesh_path and cfg.shape:
        raise BadParams("give either --mesh or --shape, not both")
    if cfg.mesh_path:
        try:
            return mesh.load_mesh(cfg.mesh_path)
        except OSError as exc:
            raise ParseError(str(exc)) from exc
    if cfg.shape:
        return mesh.generate(cfg.shape, **cfg.shape_params)
    raise BadParams("a mesh is required (--mesh or --shape)")


def _emit(payload, cfg):
    text = json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n"
    sys.stdout.write(text)
    if cfg.report:
        Path(cfg.report).write_text(text)


def _jsonable(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _header(cfg):
    out = asdict(cfg)
    out.pop("report")
    return out


# -- commands ------------------------------------------------------------------

def cmd_generate(cfg, args):
    K = mesh.generate(cfg.shape, **cfg.shape_params)
    if args.output:
        mesh.save_mesh(K, args.output)
    if args.off:
        mesh.write_off(K, args.off)
    report = mesh.validate(K, cfg.star)
    report["config"] = _header(cfg)
    if not args.output:
        report["mesh"] = K.to_dict()
    _emit(report, cfg)
    return EXIT_OK


def _read_cochain(path, p):
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    c = Cochain.from_dict(data)
    if c.degree != p:
        raise DegreeMismatch(f"cochain has degree {c.degree}, --degree is {p}")
    return c


def cmd_decompose(cfg, args):
    K = _load(cfg)
    ops = operators.assemble(K, cfg.star)
    p = cfg.degree
    if not 0 <= p <= K.dim:
        raise DegreeOutOfRange(f"--degree {p} outside 0..{K.dim}")
    if args.cochain:
        omega = _read_cochain(args.cochain, p)
    else:
        rng = np.random.default_rng(cfg.seed)
        omega = Cochain(p, rng.standard_normal(ops.size(p)))
    result = decomposition.hodge_split(ops, omega)
    scale = max(result.norm, np.finfo(float).tiny)
    rel_res = result.residual / scale
    rel_ip = max(abs(v) for v in result.inner_products.values()) / scale**2
    payload = result.to_dict()
    if not args.components:
        for key in ("omega", "components"):
            payload.pop(key, None)
    payload["dimensions"] = decomposition.dimensions(ops, p)
    payload["relative_residual"] = rel_res
    payload["relative_orthogonality"] = rel_ip
    payload["tolerance"] = DECOMPOSE_TOL
    payload["pass"] = rel_res <= DECOMPOSE_TOL and rel_ip <= DECOMPOSE_TOL
    payload["config"] = _header(cfg)
    _emit(payload, cfg)
    return EXIT_OK if payload["pass"] else EXIT_RESIDUAL


def cmd_verify(cfg, args):
    K = _load(cfg)
    ops = operators.assemble(K, cfg.star)
    report = harmonic.verify(ops, seed=cfg.seed)
    report["counts"] = K.counts
    report["config"] = _header(cfg)
    _emit(report, cfg)
    return EXIT_OK if report["pass"] else EXIT_CHECK


def cmd_converge(cfg, args):
    table = analytic.convergence_study(
        args.resolutions, shape=args.shape, a=args.a, b=args.b, star=cfg.star,
        exact_aspect=args.exact_aspect, classes=not args.no_classes,
    )
    if args.csv:
        Path(args.csv).write_text(table.to_csv())
    payload = table.to_dict()
    payload["config"] = _header(cfg)
    payload["config"]["resolutions"] = args.resolutions
    _emit(payload, cfg)
    return EXIT_OK if table.passed else EXIT_CONVERGENCE


COMMANDS = {
    "generate": cmd_generate,
    "decompose": cmd_decompose,
    "verify": cmd_verify,
    "converge": cmd_converge,
}


def _thread_limit(deterministic):
    if not deterministic:
        return nullcontext()
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return nullcontext()
    return threadpool_limits(limits=1)


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARAMS if exc.code else EXIT_OK
    old = (linalg.RANK_TOL, harmonic.SOLVE_TOL)
    try:
        cfg = _config(args)
        linalg.RANK_TOL, harmonic.SOLVE_TOL = cfg.tol_rank, cfg.tol_solve
        with _thread_limit(cfg.deterministic):
            return COMMANDS[cfg.command](cfg, args)
    except AmbiguousRank as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RANK
    except (ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DecError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PARAMS
    finally:
        linalg.RANK_TOL, harmonic.SOLVE_TOL = old


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
