"""Command-line front end: ``hypflow {validate,curvature,flow,newton,potential,spectrum}``.

Exit codes: 0 success or converged, 1 input error, 2 horizon or iteration
limit reached, 3 divergence or solver failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from collections import Counter
from pathlib import Path

import numpy as np

from .curvature import AreaElement, curvature, gauss_bonnet_residual, metric_from_r
from .flow import (CONVERGED, HORIZON, FlowConfig, ricci_potential, run_flow, trace_summary,
                   write_trace_csv)
from .hypgeom import DegenerateTriangleError
from .solver import NotAtZeroCurvature, newton_zero_curvature, stability_spectrum
from .surface import SurfaceError, euler_characteristic, read_surface

log = logging.getLogger("hypflow")

EXIT_OK, EXIT_INPUT, EXIT_HORIZON, EXIT_DIVERGED = 0, 1, 2, 3


class InputError(Exception):
    pass


def _seed():
    raw = os.environ.get("HYPFLOW_SEED")
    return int(raw) if raw is not None else None


def random_radii(n, seed=None, low=0.5, high=2.0):
    """Radii drawn uniformly from ``(low, high)``; ``HYPFLOW_SEED`` fixes the draw."""
    rng = np.random.default_rng(_seed() if seed is None else seed)
    return rng.uniform(low, high, n)


def _parse_inline(text, n):
    if text.strip() == "random":
        return random_radii(n)
    try:
        vals = [float(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise InputError(f"cannot parse radii {text!r}") from None
    return np.asarray(vals)


def _read_radii_file(path):
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith(("{", "[")):
        data = json.loads(text)
        if isinstance(data, dict):
            for key in ("final_radii", "radii"):
                if key in data:
                    return np.asarray(data[key], float)
            raise InputError(f"{path}: JSON has no 'final_radii' or 'radii' entry")
        return np.asarray(data, float)
    try:
        return np.asarray([float(x) for x in text.replace(",", " ").split()])
    except ValueError:
        raise InputError(f"{path}: cannot parse radii") from None


def _resolve_radii(n, inline=None, path=None, fallback=None, label="radii"):
    if inline is not None:
        r = _parse_inline(inline, n)
    elif path is not None:
        r = _read_radii_file(path)
    elif fallback is not None:
        r = fallback
    else:
        print(f"notice: no {label} given, using r = 1 at every vertex", file=sys.stderr)
        r = np.ones(n)
    if len(r) != n:
        raise InputError(f"{label}: got {len(r)} values for {n} vertices")
    if np.any(~(r > 0)):
        raise InputError(f"{label}: radii must be positive")
    return r


def _load(args):
    surface, radii = read_surface(args.mesh)
    return surface, radii


def _metric(args, surface, file_radii):
    return metric_from_r(_resolve_radii(surface.num_vertices, args.radii, args.radii_file,
                                        file_radii))


def _emit(payload, fmt="json", rows=None, out=None):
    out = out or sys.stdout
    if fmt == "csv" and rows is not None:
        for row in rows:
            out.write(",".join(str(x) for x in row) + "\n")
    else:
        out.write(json.dumps(payload, indent=2) + "\n")


def cmd_validate(args):
    s, _ = _load(args)
    chi = euler_characteristic(s)
    hist = Counter(int(d) for d in s.degree)
    print(f"N = {s.num_vertices}")
    print(f"E = {s.num_edges}")
    print(f"F = {s.num_faces}")
    print(f"chi = {chi}")
    print("degree histogram: " + ", ".join(f"{d}: {c}" for d, c in sorted(hist.items())))
    if chi >= 0:
        print("warning: Gauss-Bonnet forbids zero curvature (chi >= 0)")
    return EXIT_OK


def cmd_curvature(args):
    s, file_radii = _load(args)
    m = _metric(args, s, file_radii)
    ae = AreaElement.parse(args.area_element) if args.kind == "A" else None
    cv = curvature(s, m, args.kind, ae)
    resid = gauss_bonnet_residual(s, m)
    payload = {
        "kind": args.kind,
        "area_element": ae.label if ae else None,
        "radii": m.r.tolist(),
        "values": cv.values.tolist(),
        "kinf": float(np.abs(curvature(s, m, "K").values).max()),
        "gauss_bonnet_residual": resid,
    }
    rows = ([("vertex", args.kind)] + [(i, repr(float(v))) for i, v in enumerate(cv.values)]
            + [("gauss_bonnet_residual", repr(resid))])
    _emit(payload, args.format, rows)
    return EXIT_OK


def cmd_flow(args):
    s, file_radii = _load(args)
    m = _metric(args, s, file_radii)
    flow = args.flow.replace("-", "_")
    ae = AreaElement.parse(args.area_element) if flow == "a_flow" else None
    config = FlowConfig(flow_kind=flow, area_element=ae, integrator=args.integrator,
                        dt=args.dt, t_max=args.t_max, tol=args.tol,
                        trace_every=args.trace_every)
    trace = run_flow(s, m, config)
    summary = trace_summary(trace)
    if args.trace:
        write_trace_csv(trace, args.trace)
    if args.summary:
        Path(args.summary).write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    _emit(summary)
    if trace.outcome == CONVERGED:
        return EXIT_OK
    if trace.outcome == HORIZON:
        return EXIT_HORIZON
    return EXIT_DIVERGED


def cmd_newton(args):
    s, file_radii = _load(args)
    m = _metric(args, s, file_radii)
    rep = newton_zero_curvature(s, m, tol=args.tol, max_iter=args.max_iter)
    payload = {
        "status": rep.status,
        "iterations": rep.iterations,
        "final_kinf": rep.final_kinf,
        "final_radii": rep.final_metric.r.tolist(),
        "residual_history": [it[1] for it in rep.iterates],
    }
    _emit(payload)
    if rep.converged:
        return EXIT_OK
    return EXIT_HORIZON if rep.status == "max_iter" else EXIT_DIVERGED


def cmd_potential(args):
    s, file_radii = _load(args)
    n = s.num_vertices
    base = metric_from_r(_resolve_radii(n, args.base, args.base_file, file_radii, "base radii"))
    target = metric_from_r(_resolve_radii(n, args.target, args.target_file, None,
                                          "target radii"))
    F = ricci_potential(s, base.u, target.u)
    _emit({"F": F, "base_radii": base.r.tolist(), "target_radii": target.r.tolist()})
    return EXIT_OK


def cmd_spectrum(args):
    s, file_radii = _load(args)
    m = _metric(args, s, file_radii)
    if args.solve:
        rep = newton_zero_curvature(s, m)
        if not rep.converged:
            raise InputError(f"Newton did not converge ({rep.status}); no spectrum")
        m = rep.final_metric
    try:
        spec = stability_spectrum(s, m)
    except NotAtZeroCurvature as exc:
        raise InputError(str(exc)) from None
    _emit({"eigenvalues": spec.eigenvalues.tolist(), "predicted_rate": spec.predicted_rate,
           "all_positive": spec.stable, "radii": m.r.tolist()})
    return EXIT_OK


def _positive(kind):
    def parse(text):
        val = kind(text)
        if val <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return val
    return parse


def build_parser():
    p = argparse.ArgumentParser(prog="hypflow", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def mesh_cmd(name, func, help_, radii=True):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("mesh", help=".cpm mesh file")
        if radii:
            g = sp.add_mutually_exclusive_group()
            g.add_argument("--radii", help="inline radii '1.0,1.0' or 'random'")
            g.add_argument("--radii-file", help="radii as text, a JSON list or a JSON summary")
        sp.set_defaults(func=func)
        return sp

    mesh_cmd("validate", cmd_validate, "check a mesh and report its counts", radii=False)

    c = mesh_cmd("curvature", cmd_curvature, "per-vertex curvature and Gauss-Bonnet residual")
    c.add_argument("--kind", choices=["K", "R", "Rtilde", "A"], default="K")
    c.add_argument("--area-element", default="disk",
                   help="disk, sinh2, unit or an expression in r such as 'cosh(r)'")
    c.add_argument("--format", choices=["json", "csv"], default="json")

    f = mesh_cmd("flow", cmd_flow, "integrate a curvature flow")
    f.add_argument("--flow", choices=["ricci", "chow-luo", "calabi", "a-flow"], default="ricci")
    f.add_argument("--area-element", default="disk")
    f.add_argument("--integrator", choices=["euler", "rk4"], default="rk4")
    f.add_argument("--dt", type=_positive(float))
    f.add_argument("--t-max", type=_positive(float), default=500.0)
    f.add_argument("--tol", type=_positive(float), default=1e-8)
    f.add_argument("--trace-every", type=_positive(int), default=1)
    f.add_argument("--trace", help="write the sampled trace as CSV")
    f.add_argument("--summary", help="write the JSON summary to this path")

    n = mesh_cmd("newton", cmd_newton, "Newton solve for the zero-curvature metric")
    n.add_argument("--tol", type=_positive(float), default=1e-12)
    n.add_argument("--max-iter", type=_positive(int), default=50)

    pt = mesh_cmd("potential", cmd_potential, "Ricci potential between two metrics", radii=False)
    pt.add_argument("--base")
    pt.add_argument("--base-file")
    pt.add_argument("--target")
    pt.add_argument("--target-file")

    sp = mesh_cmd("spectrum", cmd_spectrum, "linearized Ricci flow spectrum at a zero metric")
    sp.add_argument("--solve", action="store_true", help="run Newton from the given radii first")
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (SurfaceError, InputError, DegenerateTriangleError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
