"""Command-line entry point ``srnf-lab``.

Subcommands ``gen``, ``srnf``, ``dist``, ``moser``, ``verify`` and
``report`` write their results into an output directory together with a
``run_manifest.json`` recording parameters, seed, timestamps and the
sha256 digest of every output file.

Exit codes: 0 all checks pass, 2 a check failed, 3 bad input,
4 a numerical stage failed.
"""
from __future__ import annotations

import argparse
import csv
import io as _io
import json
import logging
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, batteries
from ._threads import limited, thread_cap
from .examples import (BumpCap, TwistProfile, build_chessboard, build_flip, gen_cylinder_pair,
                       gen_paraboloid, single_hole_layout, two_hole_layout)
from .exceptions import (DegenerateImmersion, GridMismatch, InsufficientSamples, InvalidParam,
                         MoserError, NotClosed, NotConvex, Overlap, ProfileInvalid, SpecInvalid,
                         SrnfLabError)
from .flat_place import FlatPlace
from .geom_core import area_factors, srnf
from .io import (atomic_write_bytes, atomic_write_text, load_surface, save_obj, save_surface,
                 sha256_file, write_json)
from .moser import HoledDiscDomain, flat_place_diffeo
from .shape_metric import (certify_noncongruent, field_norm, srnf_distance,
                           srnf_max_deviation)

log = logging.getLogger("srnf_lab")

EXIT_OK, EXIT_CHECK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


class Run:
    """Collects outputs and writes the manifest at the end of a command."""

    def __init__(self, command, out, params, seed=None, inputs=()):
        self.command = command
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.params = params
        self.seed = seed
        self.inputs = {str(p): sha256_file(p) for p in inputs}
        self.outputs = []
        self.started = datetime.now(timezone.utc).isoformat()

    def add(self, paths):
        self.outputs.extend(Path(p) for p in paths)

    def json(self, name, obj):
        self.add([write_json(self.out / name, obj)])

    def finish(self, status):
        digests = {str(p.relative_to(self.out)): sha256_file(p) for p in sorted(set(self.outputs))}
        write_json(self.out / "run_manifest.json", {
            "command": self.command, "parameters": self.params, "seed": self.seed,
            "inputs": self.inputs, "tool_version": __version__,
            "threads": thread_cap(), "status": status,
            "started": self.started, "finished": datetime.now(timezone.utc).isoformat(),
            "outputs": digests,
        })


def _read_spec(path):
    if path is None:
        return {}
    try:
        spec = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecInvalid(f"cannot read spec {path}: {exc}") from exc
    if not isinstance(spec, dict):
        raise SpecInvalid("spec must be a JSON object")
    return spec


def _pair_report(f1, f2, align=True, threshold=None):
    q1, q2 = srnf(f1), srnf(f2)
    d = srnf_distance(f1, f2)
    n1 = field_norm(q1)
    rep = {"distance": d, "relative_distance": d / n1 if n1 > 0 else None,
           "field_norms": [n1, field_norm(q2)], "max_deviation": srnf_max_deviation(f1, f2),
           "alignment": None}
    if align:
        try:
            rep["alignment"] = certify_noncongruent(f1, f2, threshold).to_dict()
        except InsufficientSamples as exc:
            rep["alignment"] = {"skipped": str(exc)}
    return rep


def _save_pair(run, name, f1, f2):
    for tag, f in (("id", f1), ("f", f2)):
        run.add(save_surface(f, run.out / f"{name}_{tag}.json"))
        run.add([save_obj(f, run.out / f"{name}_{tag}.obj")])


def _cap(d):
    return BumpCap(float(d.get("height", 0.2)), float(d.get("fraction", 0.6)),
                   tuple(d.get("offset", (0.0, 0.0))))


# --- gen ----------------------------------------------------------------------------

def cmd_gen(args):
    spec = _read_spec(args.spec)
    params = {"kind": args.kind, **spec}
    run = Run(f"gen {args.kind}", args.out, params, inputs=[args.spec] if args.spec else ())
    if args.kind == "cylinder":
        r = spec.get("r", args.r)
        n = spec.get("n", args.n)
        params.update(r=r, n=n)
        f1, f2 = gen_cylinder_pair(r, n, n)
        report = _pair_report(f1, f2)
        ok = report["relative_distance"] <= 1e-10
    elif args.kind == "paraboloid":
        a, b = spec.get("a", args.a), spec.get("b", args.b)
        c, d = spec.get("c", args.c), spec.get("d", args.d)
        if c is None or d is None:
            # the partner with equal factors and the same product
            if a * b <= 0:
                raise InvalidParam("give --c and --d when a * b is not positive")
            c = d = float(np.sqrt(a * b))
        n = spec.get("n", args.n)
        params.update(a=a, b=b, c=c, d=d, n=n)
        f1, f2 = gen_paraboloid(a, b, nu=n, nv=n), gen_paraboloid(c, d, nu=n, nv=n)
        report = _pair_report(f1, f2)
        ok = report["max_deviation"] <= 1e-10 if np.isclose(a * b, c * d) else True
    elif args.kind == "chessboard":
        if "layout" in spec:
            layouts = {"single_hole": single_hole_layout, "two_hole": two_hole_layout}
            if spec["layout"] not in layouts:
                raise SpecInvalid(f"unknown layout {spec['layout']!r}")
            flat, caps, moves = layouts[spec["layout"]]()
        else:
            try:
                flat = FlatPlace.from_dict(spec["flat"])
            except KeyError as exc:
                raise SpecInvalid("chessboard spec needs 'flat' or 'layout'") from exc
            caps = [_cap(c) for c in spec.get("caps", [{} for _ in flat.inner])]
            moves = spec.get("translations") or [(0.0, 0.0)] * flat.n
        res = build_chessboard(flat, caps, moves, nb=int(spec.get("nb", 129)),
                               mesh_h=float(spec.get("mesh_h", 0.04)),
                               collar_width=float(spec.get("collar_width", 0.05)),
                               waypoints=spec.get("waypoints"))
        f1, f2 = res.identity, res.mapped
        report = _pair_report(f1, f2)
        if res.certificate is not None:
            report["certificate"] = res.certificate.to_dict()
        ok = (report["relative_distance"] <= 1e-3
              and (res.certificate is None or res.certificate.passed()))
    else:
        twist = TwistProfile(**spec.get("twist", {}))
        cap = _cap(spec["cap"]) if "cap" in spec else None
        res = build_flip(twist, cap, nb=int(spec.get("nb", 129)),
                         n_radial=int(spec.get("n_radial", 257)),
                         invert_cap=bool(spec.get("invert_cap", True)))
        f1, f2 = res.identity, res.mapped
        report = _pair_report(f1, f2)
        ok = report["relative_distance"] <= 1e-6
    _save_pair(run, args.kind, f1, f2)
    report["passed"] = bool(ok)
    run.json("report.json", report)
    run.finish("pass" if ok else "fail")
    return EXIT_OK if ok else EXIT_CHECK


# --- srnf / dist --------------------------------------------------------------------

def cmd_srnf(args):
    f = load_surface(args.surface)
    run = Run("srnf", args.out, {"surface": str(args.surface)}, inputs=[args.surface])
    q = srnf(f)
    for k, v in enumerate(q.values):
        run.add([atomic_write_bytes(run.out / f"srnf.p{k}.f64",
                                    np.ascontiguousarray(v, dtype="<f8").tobytes())])
    a = area_factors(f)
    sq_dev = max(float(np.max(np.abs(np.sum(v * v, axis=-1) - ak) / ak))
                 for v, ak in zip(q.values, a))
    run.json("srnf.json", {"field_norm": field_norm(q), "n_patches": len(q.values),
                           "shapes": [list(v.shape) for v in q.values],
                           "max_rel_sq_norm_vs_area_factor": sq_dev})
    run.finish("pass")
    return EXIT_OK


def cmd_dist(args):
    f1, f2 = load_surface(args.f1), load_surface(args.f2)
    run = Run("dist", args.out, {"threshold": args.threshold, "align": not args.no_align},
              inputs=[args.f1, args.f2])
    report = _pair_report(f1, f2, align=not args.no_align, threshold=args.threshold)
    run.json("report.json", report)
    run.finish("pass")
    print(json.dumps({"distance": report["distance"],
                      "relative_distance": report["relative_distance"]}))
    return EXIT_OK


# --- moser --------------------------------------------------------------------------

def cmd_moser(args):
    spec = _read_spec(args.spec)
    try:
        flat = FlatPlace.from_dict(spec["flat"])
        moves = spec.get("translations") or [(0.0, 0.0)] * flat.n
    except (KeyError, TypeError) as exc:
        raise SpecInvalid(f"moser spec needs 'flat' and 'translations': {exc}") from exc
    run = Run("moser", args.out, spec, inputs=[args.spec])
    domain = HoledDiscDomain(flat, h=float(spec.get("mesh_h", 0.04)),
                             collar_width=float(spec.get("collar_width", 0.05)))
    fmap, cert = flat_place_diffeo(domain, moves, waypoints=spec.get("waypoints"),
                                   n_steps=int(spec.get("n_steps", 64)),
                                   tube_steps=int(spec.get("tube_steps", 64)))
    disp = fmap.node_images - domain.nodes
    for name, arr in (("nodes", domain.nodes), ("displacement", disp),
                      ("detj", fmap.det_jacobian())):
        run.add([atomic_write_bytes(run.out / f"{name}.f64",
                                    np.ascontiguousarray(arr, dtype="<f8").tobytes())])
    run.add([atomic_write_bytes(run.out / "triangles.i64",
                                np.ascontiguousarray(domain.tris, dtype="<i8").tobytes())])
    ok = cert.passed()
    run.json("certificate.json", {**cert.to_dict(), "n_nodes": int(domain.n_nodes),
                                  "passed": bool(ok)})
    run.finish("pass" if ok else "fail")
    return EXIT_OK if ok else EXIT_CHECK


# --- verify -------------------------------------------------------------------------

def cmd_verify(args):
    fixture = load_surface(args.fixture) if args.fixture else None
    run = Run("verify", args.out, {"battery": args.battery, "n": args.n}, seed=args.seed,
              inputs=[args.fixture] if args.fixture else ())
    checks = batteries.run(args.battery, seed=args.seed, n=args.n, fixture=fixture)
    ok = all(c.passed for c in checks)
    run.json("scorecard.json", {"passed": ok, "checks": [c.to_dict() for c in checks]})
    run.finish("pass" if ok else "fail")
    for c in checks:
        if not c.passed:
            log.error("check %s failed: %.3g vs bound %.3g", c.name, c.value, c.bound)
    return EXIT_OK if ok else EXIT_CHECK


# --- report -------------------------------------------------------------------------

def _csv_text(header, rows):
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def cmd_report(args):
    run = Run("report", args.out, {"kind": args.kind, "moser_dir": args.moser_dir})
    if args.kind in ("resolution", "all"):
        rows = []
        for n in (17, 33, 65, 129):
            a, b = gen_cylinder_pair(2.0, n, n)
            rows.append(("cylinder", n, srnf_distance(a, b), srnf_distance(a, b) / field_norm(srnf(a))))
            a, b = gen_paraboloid(1.0, 4.0, nu=n, nv=n), gen_paraboloid(2.0, 2.0, nu=n, nv=n)
            rows.append(("paraboloid", n, srnf_distance(a, b), srnf_distance(a, b) / field_norm(srnf(a))))
        run.add([atomic_write_text(run.out / "distance_vs_resolution.csv",
                                   _csv_text(("family", "n", "distance", "relative"), rows))])
    if args.kind in ("detj", "all"):
        if args.moser_dir is None:
            raise InvalidParam("the det J histogram needs --moser-dir (output of `moser`)")
        det = np.fromfile(Path(args.moser_dir) / "detj.f64", dtype="<f8")
        dev = det - 1.0
        lim = max(float(np.max(np.abs(dev))), 1e-16)
        counts, edges = np.histogram(dev, bins=args.bins, range=(-lim, lim))
        rows = [(f"{lo:.6e}", f"{hi:.6e}", int(c)) for lo, hi, c in zip(edges[:-1], edges[1:], counts)]
        run.add([atomic_write_text(run.out / "detj_histogram.csv",
                                   _csv_text(("lo", "hi", "count"), rows))])
    run.finish("pass")
    return EXIT_OK


# --- wiring -------------------------------------------------------------------------

def build_parser():
    p = _Parser(prog="srnf-lab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a surface pair with equal SRNF")
    g.add_argument("kind", choices=("cylinder", "paraboloid", "chessboard", "flip"))
    g.add_argument("--spec", type=Path, help="JSON parameters (required for chessboard/flip)")
    g.add_argument("--r", type=float, default=2.0)
    g.add_argument("--n", type=int, default=129)
    g.add_argument("--a", type=float, default=1.0)
    g.add_argument("--b", type=float, default=4.0)
    g.add_argument("--c", type=float, default=None)
    g.add_argument("--d", type=float, default=None)
    g.add_argument("--out", type=Path, default=Path("out"))
    g.set_defaults(fn=cmd_gen)

    s = sub.add_parser("srnf", help="SRNF field of a stored surface")
    s.add_argument("surface", type=Path)
    s.add_argument("--out", type=Path, default=Path("out"))
    s.set_defaults(fn=cmd_srnf)

    d = sub.add_parser("dist", help="SRNF distance and rigid alignment of two surfaces")
    d.add_argument("f1", type=Path)
    d.add_argument("f2", type=Path)
    d.add_argument("--threshold", type=float, default=None)
    d.add_argument("--no-align", action="store_true")
    d.add_argument("--out", type=Path, default=Path("out"))
    d.set_defaults(fn=cmd_dist)

    m = sub.add_parser("moser", help="area-preserving flat-place rearrangement")
    m.add_argument("--spec", type=Path, required=True)
    m.add_argument("--out", type=Path, default=Path("out"))
    m.set_defaults(fn=cmd_moser)

    v = sub.add_parser("verify", help="run the verification batteries")
    v.add_argument("--battery", choices=("all",) + batteries.BATTERIES, default="all")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--n", type=int, default=65)
    v.add_argument("--fixture", type=Path, help="closed surface whose orientation is checked")
    v.add_argument("--out", type=Path, default=Path("out"))
    v.set_defaults(fn=cmd_verify)

    r = sub.add_parser("report", help="CSV plot data")
    r.add_argument("--kind", choices=("resolution", "detj", "all"), default="resolution")
    r.add_argument("--moser-dir", type=Path)
    r.add_argument("--bins", type=int, default=50)
    r.add_argument("--out", type=Path, default=Path("out"))
    r.set_defaults(fn=cmd_report)
    return p


_INPUT_ERRORS = (SpecInvalid, InvalidParam, GridMismatch, Overlap, ProfileInvalid, NotClosed,
                 NotConvex, InsufficientSamples, FileNotFoundError)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    t0 = time.perf_counter()
    try:
        with limited():
            code = args.fn(args)
    except MoserError as exc:
        log.error("numerical stage failed: %s", exc)
        return EXIT_NUMERIC
    except DegenerateImmersion as exc:
        log.error("degenerate immersion: %s", exc)
        return EXIT_NUMERIC
    except _INPUT_ERRORS as exc:
        log.error("input error: %s", exc)
        return EXIT_INPUT
    except SrnfLabError as exc:
        log.error("%s", exc)
        return EXIT_NUMERIC
    log.info("%s finished in %.2f s with exit code %d", args.command, time.perf_counter() - t0, code)
    return code


if __name__ == "__main__":
    sys.exit(main())
