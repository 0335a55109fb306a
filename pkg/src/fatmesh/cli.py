"""``fatmesh`` command line: fatness | collar | merge | extend | alexander | calibrate.

Exit codes: 0 success, 2 input or validation error, 3 pipeline failure
(perturbation budget, fatness floor).  Every JSON report carries the
calibration-table version hash.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .complex import Complex, ComplexError, validate

REPORT_SCHEMA = "fatmesh-report/1"
EXIT_OK, EXIT_INPUT, EXIT_PIPELINE = 0, 2, 3


class InputError(Exception):
    pass


class PipelineError(Exception):
    def __init__(self, message: str, report: dict | None = None):
        super().__init__(message)
        self.report = report or {}


def thread_cap() -> int:
    """Value of ``FATMESH_THREADS`` (default 1).  The pipeline is serial, so
    the cap is validated and reported but never exceeded."""
    raw = os.environ.get("FATMESH_THREADS", "1")
    try:
        value = int(raw)
    except ValueError:
        raise InputError(f"FATMESH_THREADS must be an integer, got {raw!r}") from None
    if value < 1:
        raise InputError("FATMESH_THREADS must be >= 1")
    return value


def _clean(x):
    if isinstance(x, float):
        return x if math.isfinite(x) else None
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if hasattr(x, "item"):
        return _clean(x.item())
    return x


def report(command: str, **fields) -> dict:
    from .calibration import load_tables

    return {"schema": REPORT_SCHEMA, "command": command, "fatmesh_version": __version__,
            "table_version": load_tables().version_hash, **fields}


def dump_json(data: dict) -> str:
    return json.dumps(_clean(data), indent=2, sort_keys=True) + "\n"


def _emit(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, float) else x for x in row])
    return buf.getvalue()


def _load(path: str) -> Complex:
    from .io import read_mesh

    try:
        return read_mesh(path)
    except ComplexError as e:
        raise InputError(str(e)) from None


def _valid(c: Complex, name: str, tol: float) -> Complex:
    bad = validate(c, tol)
    if bad:
        raise InputError(f"{name} is not a valid complex: {bad[0]}")
    return c


def _write_mesh(c: Complex, path: str) -> None:
    from .io import write_mesh

    write_mesh(c, path)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_fatness(args) -> int:
    from .metrics import complex_fatness

    c = _valid(_load(args.mesh), "mesh", args.tol)
    rep = complex_fatness(c)
    if args.csv:
        _emit(_csv(["simplex", "phi"], rep.rows(c)), args.csv)
    summary = report("fatness", simplices=len(c.simplices), dim=c.dim,
                     min_phi=None if c.is_empty else rep.complex_min,
                     argmin=None if rep.argmin is None else list(rep.argmin),
                     histogram=rep.histogram)
    _emit(dump_json(summary), args.json)
    return EXIT_OK


def cmd_collar(args) -> int:
    from .collar import (CollarInfeasible, CollarSpec, build_prism_complex, choose_n0,
                         collar_regions)

    J = _valid(_load(args.boundary), "boundary", args.tol)
    try:
        if args.n0 is not None:
            spec = CollarSpec(n0=args.n0, depth=args.depth, target_phi=args.target_phi or 0.1,
                              vertical_scale=args.vertical_scale or 1.0)
        elif args.target_phi is not None:
            spec = choose_n0(J, args.target_phi, args.diam_bound, args.vertical_scale,
                             args.embedding)
            spec = CollarSpec(spec.n0, args.depth, spec.target_phi, spec.vertical_scale)
        else:
            raise InputError("give --n0 or --target-phi")
        regions = collar_regions(spec) if args.regions else None
    except CollarInfeasible as e:
        raise PipelineError(str(e), {"best_phi": e.best_phi}) from None
    except ComplexError as e:
        raise InputError(str(e)) from None
    K = build_prism_complex(J, spec, args.embedding)
    _write_mesh(K, args.output)
    side = report("collar", n0=spec.n0, depth=spec.depth, vertical_scale=spec.vertical_scale,
                  embedding=args.embedding, simplices=len(K.simplices),
                  regions=None if regions is None else
                  {"k1": regions.k1, "k2": regions.k2, "k3": regions.k3, "k4": regions.k4})
    _emit(dump_json(side), args.json or args.output + ".json")
    return EXIT_OK


def _merge_config(args, **extra):
    from .merge import MergeConfig

    return MergeConfig(fatness_fraction=args.phi_floor, seed=args.seed, tol=args.tol,
                       check_fatness=not args.no_floor, **extra)


def _merge_summary(res) -> dict:
    return {"fatness_before": [r.complex_min for r in res.fatness_before],
            "fatness_after": res.fatness_after.complex_min,
            "phi0": res.phi0, "moves": len(res.transcript),
            "changed_simplices": len(res.changed_region.top),
            "stage_margins": res.stage_margins,
            "band": None if res.band is None else res.band.to_dict(),
            "schedule": None if res.schedule_used is None else asdict(res.schedule_used)}


def cmd_merge(args) -> int:
    from .merge import MergeError, merge_fat_triangulations

    a = _valid(_load(args.a), "first mesh", args.tol)
    b = _valid(_load(args.b), "second mesh", args.tol)
    try:
        res = merge_fat_triangulations(a, b, _merge_config(args))
    except MergeError as e:
        raise PipelineError(str(e), {"details": e.details,
                                     "moves": len(e.transcript)}) from None
    except ComplexError as e:
        raise InputError(str(e)) from None
    _write_mesh(res.merged, args.output)
    if args.transcript:
        Path(args.transcript).write_text(res.transcript_jsonl())
    _emit(dump_json(report("merge", seed=args.seed, **_merge_summary(res))), args.json)
    return EXIT_OK


def cmd_extend(args) -> int:
    from .merge import ExtendConfig, MergeError, extend_with_report

    boundary = _valid(_load(args.boundary), "boundary", args.tol)
    interior = _valid(_load(args.interior), "interior", args.tol)
    cfg = ExtendConfig(n0=args.n0, vertical_scale=args.vertical_scale, merge=_merge_config(args))
    try:
        res = extend_with_report(boundary, interior, cfg)
    except MergeError as e:
        raise PipelineError(str(e), {"details": e.details}) from None
    except ComplexError as e:
        raise InputError(str(e)) from None
    _write_mesh(res.merged, args.output)
    fields = {"seed": args.seed, "n0": args.n0, "phi_inputs": res.phi_inputs,
              "boundary_preserved": res.boundary_preserved,
              "simplices": len(res.merged.simplices)}
    if res.merge is not None:
        fields.update(_merge_summary(res.merge))
    _emit(dump_json(report("extend", **fields)), args.json)
    return EXIT_OK


def cmd_alexander(args) -> int:
    from .alexander import AlexanderError, build_alexander_map, chessboard_color, \
        continuity_residual, estimate_dilatation

    c = _valid(_load(args.mesh), "mesh", args.tol)
    try:
        coloring = chessboard_color(c)
        m = build_alexander_map(c, coloring)
        rep = estimate_dilatation(m, args.samples, args.seed)
    except AlexanderError as e:
        raise PipelineError(str(e)) from None
    except ComplexError as e:
        raise InputError(str(e)) from None
    if args.csv:
        _emit(_csv(["simplex", "K"], rep.rows(m.source)), args.csv)
    summary = report("alexander", K_outer=rep.K_outer, samples=rep.samples,
                     subdivided=coloring.subdivided, simplices=len(m.source.simplices),
                     branching_skeleton_dim=rep.branching_skeleton_dim,
                     continuity_residual=continuity_residual(m, args.face_samples),
                     normalization=rep.normalization, printed_form=rep.printed_form)
    _emit(dump_json(summary), args.json)
    return EXIT_OK


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(","))


def _ints(text: str) -> tuple[int, ...]:
    out = []
    for part in text.split(","):
        if ".." in part:
            lo, hi = part.split("..")
            out += range(int(lo), int(hi) + 1)
        else:
            out.append(int(part))
    return tuple(out)


def cmd_calibrate(args) -> int:
    from . import calibration as cal

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        phi0 = _floats(args.phi0_grid) if args.phi0_grid else cal.PHI0_GRID
        dims = _ints(args.n) if args.n else cal.DIMS
    except ValueError as e:
        raise InputError(f"bad grid: {e}") from None
    written = []
    if args.table in ("d", "all"):
        text = cal.build_d_table(phi0, dims, args.trials or cal.D_TRIALS, args.seed)
        (out / cal.D_FILE).write_text(text)
        written.append(cal.D_FILE)
    if args.table in ("delta", "all"):
        text = cal.build_delta_table(trials=args.trials or cal.DELTA_TRIALS, seed=args.seed,
                                     dims=dims)
        (out / cal.DELTA_FILE).write_text(text)
        written.append(cal.DELTA_FILE)
    if args.table in ("floor", "all"):
        (out / cal.FLOOR_FILE).write_text(cal.build_floor_table(trials=args.trials,
                                                                seed=args.seed))
        written.append(cal.FLOOR_FILE)
    _emit(dump_json(report("calibrate", seed=args.seed, written=written)), args.json)
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fatmesh", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"fatmesh {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(q, seed=False):
        q.add_argument("--tol", type=float, default=1e-12)
        q.add_argument("--json", help="JSON report path (default: stdout)")
        if seed:
            q.add_argument("--seed", type=int, default=0)

    q = sub.add_parser("fatness", help="per-simplex fatness report")
    q.add_argument("mesh")
    q.add_argument("--csv")
    common(q)
    q.set_defaults(func=cmd_fatness)

    q = sub.add_parser("collar", help="prism collar over a boundary complex")
    q.add_argument("boundary")
    q.add_argument("-o", "--output", required=True)
    q.add_argument("--n0", type=int)
    q.add_argument("--target-phi", type=float)
    q.add_argument("--depth", type=float, default=1.0)
    q.add_argument("--vertical-scale", type=float)
    q.add_argument("--diam-bound", type=float, default=math.inf)
    q.add_argument("--embedding", choices=("product", "radial"), default="product")
    q.add_argument("--regions", action="store_true", help="emit the k1..k4 region constants")
    common(q)
    q.set_defaults(func=cmd_collar)

    def merge_opts(q):
        q.add_argument("-o", "--output", required=True)
        q.add_argument("--phi-floor", type=float, default=0.25,
                       help="required fraction of the input fatness")
        q.add_argument("--no-floor", action="store_true", help="report, do not enforce, the floor")
        common(q, seed=True)

    q = sub.add_parser("merge", help="merge two overlapping fat triangulations")
    q.add_argument("a")
    q.add_argument("b")
    q.add_argument("--transcript")
    merge_opts(q)
    q.set_defaults(func=cmd_merge)

    q = sub.add_parser("extend", help="extend a boundary triangulation inwards")
    q.add_argument("boundary")
    q.add_argument("interior")
    q.add_argument("--n0", type=int, default=8)
    q.add_argument("--vertical-scale", type=float, default=0.8)
    merge_opts(q)
    q.set_defaults(func=cmd_extend)

    q = sub.add_parser("alexander", help="Alexander map and its dilatation")
    q.add_argument("mesh")
    q.add_argument("--csv")
    q.add_argument("--samples", type=int, default=256)
    q.add_argument("--face-samples", type=int, default=1000)
    common(q, seed=False)
    q.add_argument("--seed", type=int, default=None, help="optional random augmentation")
    q.set_defaults(func=cmd_alexander)

    q = sub.add_parser("calibrate", help="regenerate calibration tables")
    q.add_argument("--out-dir", required=True)
    q.add_argument("--table", choices=("d", "delta", "floor", "all"), default="d")
    q.add_argument("--phi0-grid")
    q.add_argument("--n", help="dimensions, e.g. 2..4 or 2,3")
    q.add_argument("--trials", type=int)
    common(q)
    q.add_argument("--seed", type=int, default=20240601)
    q.set_defaults(func=cmd_calibrate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_INPUT
    try:
        thread_cap()
        return args.func(args)
    except InputError as e:
        print(f"fatmesh: error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except PipelineError as e:
        print(f"fatmesh: failed: {e}", file=sys.stderr)
        if e.report:
            sys.stderr.write(dump_json(report(args.command, status="failed", error=str(e),
                                              **e.report)))
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
