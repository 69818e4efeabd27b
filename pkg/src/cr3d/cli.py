"""Command line driver: ``cr3d {mesh,verify,infsup,nspace,critical}``.

Exit codes: 0 success, 1 a check failed, 2 configuration error.  Errors are
reported on stderr as a single JSON object.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path


from . import __version__
from .assembly import assemble, export_csv
from .errors import Cr3dError, InvalidParameter, UnsupportedDegree
from .mesh import detect_critical_edges, dump_mesh, generate, load_mesh
from .reports import dumps, envelope
from .stability import (
    build_critical_pressure,
    certify_elimination,
    certify_spurious,
    infsup_constant,
    nspace_dim,
)
from .verify import SUITES, run_suite

GENERATORS = {
    "reference": "reference",
    "inner-critical-patch": "inner_critical_patch",
    "outer-critical-patch": "outer_critical_patch",
    "kuhn": "kuhn_cube",
    "octahedron": "octahedron",
}


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def parse_range(text: str) -> list[int]:
    """``"2..8"``, ``"3"`` or ``"1,2,5"``."""
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            return list(range(int(lo), int(hi) + 1))
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse range {text!r}") from None


def _positive(text: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not x > 0:
        raise argparse.ArgumentTypeError(f"tolerance must be positive, got {text}")
    return x


def _degree(text: str) -> int:
    try:
        k = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 1 <= k <= 6:
        raise argparse.ArgumentTypeError(f"k must be in 1..6, got {k}")
    return k


def _add_mesh_source(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--mesh", help="mesh JSON file")
    src.add_argument("--gen", choices=sorted(GENERATORS), help="generated mesh")
    p.add_argument("--n", type=int, default=1, help="subdivisions for --gen kuhn")
    p.add_argument("--iota", type=int, default=1, help="patch size for --gen outer-critical-patch")
    p.add_argument("--perturb", type=float, default=0.0, help="offset of a_1 for patch generators")


def _add_common(p):
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--tol-coplanar", type=_positive, default=1e-9)
    p.add_argument("--tol-rank", type=_positive, default=1e-10)
    p.add_argument("--tol-eig", type=_positive, default=1e-9)
    p.add_argument("--quad-degree-margin", type=int, default=2)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cr3d", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("mesh", help="write a generated mesh as JSON")
    p.add_argument("--gen", choices=sorted(GENERATORS), required=True)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--iota", type=int, default=1)
    p.add_argument("--perturb", type=float, default=0.0)
    p.add_argument("--out")

    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("--suite", choices=sorted(SUITES), required=True)
    p.add_argument("--k", default="1..6", help="degree range, e.g. 2..8")
    p.add_argument("--d", default="2..4", help="dimension range (appendix-a)")
    _add_common(p)

    p = sub.add_parser("infsup", help="discrete inf-sup constant")
    _add_mesh_source(p)
    p.add_argument("--k", type=_degree, required=True)
    p.add_argument("--pair", choices=("cr", "conforming"), default="cr")
    p.add_argument("--export-matrices", metavar="DIR", help="also write A, B, Mp as CSV")
    _add_common(p)

    p = sub.add_parser("nspace", help="macroelement N-space dimensions")
    _add_mesh_source(p)
    p.add_argument("--k", type=_degree, required=True)
    p.add_argument("--space", choices=("cr", "conforming"), default="cr")
    p.add_argument("--macro", help="comma separated tet ids (default: every single tet)")
    _add_common(p)

    p = sub.add_parser("critical", help="critical pressures and elimination certificates")
    _add_mesh_source(p)
    p.add_argument("--k", type=_degree, required=True)
    _add_common(p)
    return parser


def _load(args):
    if getattr(args, "mesh", None):
        try:
            return load_mesh(args.mesh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read mesh {args.mesh}: {exc}") from None
    kind = GENERATORS[args.gen]
    return generate(kind, n=args.n, iota=args.iota, perturb=args.perturb)


def _emit(text: str, out):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


def _csv(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format(v, ".17g") if isinstance(v, float) else str(v) for v in row))
    return "\n".join(lines) + "\n"


def _config(args) -> dict:
    return {
        "tol_coplanar": args.tol_coplanar,
        "tol_rank": args.tol_rank,
        "tol_eig": args.tol_eig,
        "quad_degree_margin": args.quad_degree_margin,
    }


# -- commands ------------------------------------------------------------------------------------
def cmd_mesh(args) -> int:
    mesh = generate(GENERATORS[args.gen], n=args.n, iota=args.iota, perturb=args.perturb)
    _emit(dump_mesh(mesh) + "\n", args.out)
    return 0


def cmd_verify(args) -> int:
    ks, ds = parse_range(args.k), parse_range(args.d)
    if not ks or min(ks) < 0 or max(ks) > 12:
        raise ConfigError(f"k range must lie in 0..12, got {args.k}")
    checks = run_suite(args.suite, ks, ds)
    ok = all(c.passed for c in checks)
    if args.format == "csv":
        _emit(_csv(["name", "value", "tol", "passed"], [(c.name, c.value, c.tol, c.passed) for c in checks]), args.out)
    else:
        payload = {"suite": args.suite, "k": ks, "d": ds, "passed": ok, "checks": checks}
        _emit(dumps(envelope("verify", payload)), args.out)
    return 0 if ok else 1


def cmd_infsup(args) -> int:
    mesh = _load(args)
    vspace = "CRk0" if args.pair == "cr" else "Sk0"
    system = assemble(mesh, args.k, vspace, margin=args.quad_degree_margin)
    if args.export_matrices:
        export_csv(system, args.export_matrices)
    report = infsup_constant(system, args.pair, tol_rank=args.tol_rank, tol_eig=args.tol_eig)
    if args.format == "csv":
        rows = [(i, v) for i, v in enumerate(report.smallest_eigenvalues)]
        _emit(_csv(["index", "eigenvalue"], rows), args.out)
    else:
        _emit(dumps(envelope("infsup", report, config=_config(args))), args.out)
    return 0


def cmd_nspace(args) -> int:
    mesh = _load(args)
    macros = [[int(t) for t in args.macro.split(",")]] if args.macro else [[t] for t in range(mesh.n_tets)]
    reports = [nspace_dim(mesh, m, args.k, args.space, tol_rank=args.tol_rank, margin=args.quad_degree_margin)
               for m in macros]
    if args.format == "csv":
        rows = [(";".join(map(str, r.macro)), r.dim, r.n_pressure, r.rank) for r in reports]
        _emit(_csv(["macro", "dim", "n_pressure", "rank"], rows), args.out)
    else:
        _emit(dumps(envelope("nspace", reports, config=_config(args))), args.out)
    return 0


def cmd_critical(args) -> int:
    mesh = _load(args)
    k = args.k
    records = detect_critical_edges(mesh, args.tol_coplanar)
    conf = assemble(mesh, k, "Sk0", margin=args.quad_degree_margin)
    cr = assemble(mesh, k, "CRk0", margin=args.quad_degree_margin)
    certs = []
    ok = True
    try:
        for rec in records:
            elim = certify_elimination(mesh, rec, k, tol=args.tol_coplanar, system=cr)
            ok &= elim.status != "failed"
            for apex in rec.vertices:
                cp = build_critical_pressure(mesh, rec, apex, k, tol=args.tol_coplanar)
                spur = certify_spurious(cp, mesh, k, system=conf, tol=args.tol_rank)
                ok &= spur.passed
                certs.append({
                    "edge": rec.to_dict(),
                    "apex": int(apex),
                    "pressure": cp.to_dict(),
                    "spurious": spur.to_dict(),
                    "elimination": elim.to_dict(),
                })
    except Cr3dError:
        _emit(dumps(envelope("critical", {"k": k, "partial": True, "certificates": certs})), args.out)
        raise
    if args.format == "csv":
        rows = [(c["edge"]["edge"], c["edge"]["kind"], c["apex"], c["spurious"]["residual"],
                 c["spurious"]["passed"], c["elimination"]["status"], c["elimination"]["sigma_min"])
                for c in certs]
        _emit(_csv(["edge", "kind", "apex", "spurious_residual", "spurious_passed", "elimination",
                    "sigma_min"], rows), args.out)
    else:
        payload = {"k": k, "n_critical_edges": len(records), "passed": bool(ok), "certificates": certs}
        _emit(dumps(envelope("critical", payload, mesh=mesh.summary(), config=_config(args))), args.out)
    return 0 if ok else 1


COMMANDS = {
    "mesh": cmd_mesh,
    "verify": cmd_verify,
    "infsup": cmd_infsup,
    "nspace": cmd_nspace,
    "critical": cmd_critical,
}


def _fail(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "quad_degree_margin", 0) < 0:
            raise ConfigError("--quad-degree-margin must be >= 0")
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        return _fail("ConfigError", str(exc), 2)
    except (InvalidParameter, UnsupportedDegree) as exc:
        return _fail(type(exc).__name__, str(exc), 2)
    except Cr3dError as exc:
        return _fail(type(exc).__name__, str(exc), 1)


if __name__ == "__main__":
    sys.exit(main())
