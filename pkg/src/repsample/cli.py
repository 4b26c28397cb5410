"""``repsample`` command line: file-in, file-out pipeline steps.

Exit codes: 0 success, 1 usage error, 2 data error. Every output file gets a
``<output>.manifest.json`` sidecar recording the invocation; ``repsample
rerun <manifest>`` replays it.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import os
import sys
import tempfile
from pathlib import Path
from typing import Sequence

from . import __version__, annealer, diversity, ingest, metrics, strata, synth
from .errors import FieldOutOfRange, SamplingError
from .geomodel import validate_candidates


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# -- helpers ------------------------------------------------------------------


class _Run:
    """Tracks input digests and writes outputs atomically with manifests."""

    def __init__(self, subcommand: str, argv: Sequence[str], config: dict):
        self.subcommand = subcommand
        self.argv = list(argv)
        self.config = config
        self.inputs: dict[str, str] = {}
        self.outputs: dict[str, str] = {}

    def read_text(self, path: str) -> io.StringIO:
        data = Path(path).read_bytes()
        self.inputs[path] = hashlib.sha256(data).hexdigest()
        return io.StringIO(data.decode("utf-8-sig"), newline="")

    def write_text(self, path: str, text: str) -> None:
        data = text.encode("utf-8")
        _atomic_write(path, data)
        self.outputs[path] = hashlib.sha256(data).hexdigest()

    def finish(self) -> None:
        manifest = {
            "tool": "repsample",
            "version": __version__,
            "subcommand": self.subcommand,
            "argv": self.argv,
            "config": self.config,
            "seed": self.config.get("seed"),
            "inputs": self.inputs,
            "outputs": self.outputs,
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        }
        text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
        for path in self.outputs:
            _atomic_write(path + ".manifest.json", text.encode("utf-8"))


def _atomic_write(path: str, data: bytes) -> None:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(write) -> str:
    buf = io.StringIO()
    write(buf)
    return buf.getvalue()


def _kv_csv(pairs: Sequence[tuple[str, object]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["key", "value"])
    for k, v in pairs:
        w.writerow([k, repr(v) if isinstance(v, float) else ("" if v is None else v)])
    return buf.getvalue()


def _floats(text: str, n: int, name: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"{name} expects {n} comma-separated numbers") from None
    if len(vals) != n:
        raise UsageError(f"{name} expects {n} comma-separated numbers")
    return vals


def _origin(text: str | None) -> ingest.GeoOrigin | None:
    if text is None:
        return None
    lon, lat = _floats(text, 2, "--origin")
    return ingest.GeoOrigin(lon, lat)


def _units(run: _Run, path: str):
    return ingest.parse_units_csv(run.read_text(path), source=path)


def _threshold(text: str, units) -> float:
    if text == "auto":
        return strata.quartile_threshold([u.builtup for u in units])
    try:
        value = float(text)
    except ValueError:
        raise UsageError("--threshold expects 'auto' or a number") from None
    try:
        return strata.check_threshold(value)
    except FieldOutOfRange as exc:
        raise UsageError(str(exc)) from None


def _anneal_config(**kwargs) -> annealer.AnnealConfig:
    try:
        return annealer.AnnealConfig(**kwargs)
    except FieldOutOfRange as exc:
        raise UsageError(str(exc)) from None


def _anneal_kwargs(args) -> dict:
    return dict(t0=args.t0, alpha=args.alpha, t_tol=args.ttol, max_iters=args.iters)


def _add_anneal_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--t0", type=float, default=1.0, help="initial temperature")
    p.add_argument("--alpha", type=float, default=0.999, help="geometric cooling factor in (0,1)")
    p.add_argument("--ttol", type=float, default=1e-8, help="minimum temperature")
    p.add_argument("--iters", type=int, default=5000, help="maximum iterations")


# -- subcommands --------------------------------------------------------------


def cmd_grid(args, run: _Run) -> None:
    origin = _origin(args.origin)
    boundary = None
    if args.boundary:
        boundary = ingest.read_boundary_geojson(run.read_text(args.boundary), origin)
    if args.bbox:
        bbox = ingest.BoundingBox(*_floats(args.bbox, 4, "--bbox"))
    elif boundary is not None:
        bbox = ingest.BoundingBox(*boundary.bounds)
    else:
        raise UsageError("grid needs --bbox or --boundary")
    units = ingest.generate_grid(bbox, args.cell_side)
    n_all = len(units)
    if boundary is not None:
        units = ingest.filter_by_boundary(units, boundary)
    run.write_text(args.out, _csv_text(lambda s: ingest.write_units_csv(units, s)))
    print(f"cells: {n_all}, kept: {len(units)}")


def cmd_enrich(args, run: _Run) -> None:
    units = _units(run, args.units)
    origin = _origin(args.origin)
    table = ingest.parse_pois_csv(run.read_text(args.pois), origin, source=args.pois)
    assignment = ingest.assign_pois_to_cells(table.pois, units)
    units = assignment.units
    origin = table.origin or origin
    n_lulc = empty = None
    if args.lulc:
        points, lulc_origin = ingest.parse_labeled_points_csv(run.read_text(args.lulc), origin, source=args.lulc)
        origin = origin or lulc_origin
        units, empty = ingest.assign_builtup(units, points)
        n_lulc = len(points)
    units = diversity.enrich_units(units)
    validate_candidates(units)
    run.write_text(args.out, _csv_text(lambda s: ingest.write_units_csv(units, s)))
    summary = [
        ("units", len(units)),
        ("pois", len(table.pois)),
        ("assigned", assignment.assigned),
        ("out_of_grid_count", assignment.out_of_grid_count),
        ("origin_lon", origin.lon0 if origin else None),
        ("origin_lat", origin.lat0 if origin else None),
        ("origin_derived", int(table.origin_derived)),
        ("lulc_points", n_lulc),
        ("empty_cells", empty),
    ]
    if args.summary:
        run.write_text(args.summary, _kv_csv(summary))
    for k, v in summary:
        print(f"{k}: {'' if v is None else v}")


def cmd_stratify(args, run: _Run) -> None:
    cset = validate_candidates(_units(run, args.units))
    threshold = _threshold(args.threshold, cset)
    st = strata.stratify(cset, threshold)
    label = st.stratum_of()
    run.write_text(args.out_dense, _csv_text(lambda s: ingest.write_units_csv(st.dense.units, s, label)))
    run.write_text(args.out_sparse, _csv_text(lambda s: ingest.write_units_csv(st.sparse.units, s, label)))
    summary = [
        ("threshold", threshold),
        ("threshold_mode", "auto" if args.threshold == "auto" else "fixed"),
        ("dense_units", len(st.dense)),
        ("sparse_units", len(st.sparse)),
        ("dense_area_m2", st.dense.total_area),
        ("sparse_area_m2", st.sparse.total_area),
    ]
    if args.n_total is not None:
        alloc = strata.allocate(args.n_total, args.dense_fraction, st)
        summary += [("n_dense", alloc.n_dense), ("n_sparse", alloc.n_sparse)]
    if args.summary:
        run.write_text(args.summary, _kv_csv(summary))
    for k, v in summary:
        print(f"{k}: {v}")


def cmd_sample(args, run: _Run) -> None:
    cset = validate_candidates(_units(run, args.units))
    stream = synth.STRATUM_STREAM.get(args.stratum, synth.WHOLE_AREA_STREAM)
    cfg = _anneal_config(n=args.n, seed=args.seed, stream=(stream,), **_anneal_kwargs(args))
    result = annealer.run(cset, cfg, objectives=args.method)
    members = set(result.best.member_ids)
    chosen = [u for u in cset if u.id in members]
    label = {u.id: args.stratum for u in chosen}
    run.write_text(args.out, _csv_text(lambda s: ingest.write_units_csv(chosen, s, label)))
    if args.trace:
        run.write_text(args.trace, _csv_text(lambda s: annealer.write_trace_csv(result.trace, s)))
    summary = [
        ("iterations", len(result.trace)),
        ("initial_cost_ann", result.initial.cost_ann),
        ("initial_cost_amul", result.initial.cost_amul),
        ("best_cost_ann", result.best.cost_ann),
        ("best_cost_amul", result.best.cost_amul),
        ("final_cost_ann", result.final.cost_ann),
        ("final_cost_amul", result.final.cost_amul),
        ("final_member_ids", " ".join(str(i) for i in sorted(result.final.member_ids))),
    ]
    if args.summary:
        run.write_text(args.summary, _kv_csv(summary))
    for k, v in summary[:-1]:
        print(f"{k}: {v}")


def cmd_compare(args, run: _Run) -> None:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    bad = sorted(set(methods) - set(synth.METHODS))
    if bad or not methods:
        raise UsageError(f"--methods must be a subset of {','.join(synth.METHODS)}")
    if args.units:
        candidates = _units(run, args.units)
        if any(u.mul is None for u in candidates):
            raise SamplingError(f"{args.units}: units must be enriched (d0,d1,d2,mul columns)")
    else:
        spec = synth.ScenarioSpec(nx=args.nx, ny=args.ny, seed=args.scenario_seed)
        candidates = synth.generate_scenario(spec).candidates
    cset = validate_candidates(candidates)
    threshold = None if args.threshold == "auto" else _threshold(args.threshold, cset)
    prepared = synth.prepare(cset, threshold=threshold, n_total=args.n_total, dense_fraction=args.dense_fraction)
    base = _anneal_config(n=2, **_anneal_kwargs(args))
    report = synth.compare(prepared, methods, args.seeds, base, jobs=args.jobs, timing=args.timing)
    run.write_text(args.out, _csv_text(lambda s: synth.write_report_csv(report, s)))
    print(f"threshold: {prepared.stratification.threshold!r}")
    for (m, s), (ann, amul) in report.summary().items():
        print(f"{m:>10} {s:>6}  mean cost_ann={ann:.6f}  mean cost_amul={amul:.6f}")


def cmd_eval(args, run: _Run) -> None:
    pred = metrics.read_label_grid(run.read_text(args.pred), args.pred)
    truth = metrics.read_label_grid(run.read_text(args.truth), args.truth)
    if args.mode == "binary":
        rows = metrics.binary_metrics(metrics.confusion_binary(pred, truth))
    else:
        k = None
        if args.classes:
            classes = metrics.read_class_map(run.read_text(args.classes), args.classes)
            k = max(c for c, _ in classes) + 1
        m = metrics.ConfusionMatrix.from_labels(truth, pred, k)
        rows = metrics.kappa_metrics(m)
    run.write_text(args.out, _csv_text(lambda s: metrics.write_metrics_csv(rows, s)))
    for name, value in rows:
        print(f"{name}: {value}")


def cmd_resolve(args, run: _Run) -> None:
    pixels = metrics.read_instance_pixels(run.read_text(args.pixels), args.pixels)
    names: dict[int, str] = {}
    order = None
    if args.classes:
        classes = metrics.read_class_map(run.read_text(args.classes), args.classes)
        order = [c for c, _ in classes]
        names = dict(classes)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["instance_id", "class_id", "class_name"])
    for inst in sorted(pixels):
        cls = metrics.resolve_instance_label(pixels[inst], order)
        w.writerow([inst, cls, names.get(cls, "")])
    run.write_text(args.out, buf.getvalue())
    print(f"instances: {len(pixels)}")


def cmd_scenario(args, run: _Run) -> None:
    spec = synth.ScenarioSpec(
        nx=args.nx, ny=args.ny, cell_side=args.cell_side, n_clusters=args.clusters,
        pois_per_cluster=args.pois_per_cluster, n_categories=args.categories,
        cluster_spread=args.spread, builtup_peak=args.builtup_peak, seed=args.seed,
    )
    sc = synth.generate_scenario(spec)
    run.write_text(args.out_units, _csv_text(lambda s: ingest.write_units_csv(sc.candidates.units, s)))
    run.write_text(args.out_pois, _csv_text(lambda s: ingest.write_pois_csv(sc.pois, s)))
    print(f"units: {len(sc.candidates)}, pois: {len(sc.pois)}, out_of_grid: {sc.out_of_grid_count}")


def cmd_rerun(args, argv_runner) -> int:
    manifest = json.loads(Path(args.manifest).read_text())
    return argv_runner(manifest["argv"])


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="repsample", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"repsample {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("grid", help="tile a bounding box or boundary polygon into a unit CSV")
    g.add_argument("--bbox", help="MINX,MINY,MAXX,MAXY in planar meters")
    g.add_argument("--boundary", help="GeoJSON Polygon; cells with centroids outside are dropped")
    g.add_argument("--origin", help="LON,LAT: boundary is geographic and projected around this origin")
    g.add_argument("--cell-side", type=float, default=1000.0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_grid)

    e = sub.add_parser("enrich", help="assign POIs (and LULC points), add d0,d1,d2,mul columns")
    e.add_argument("--units", required=True)
    e.add_argument("--pois", required=True)
    e.add_argument("--lulc", help="labeled points CSV (x,y,builtup or lon,lat,builtup)")
    e.add_argument("--origin", help="LON,LAT projection origin for geographic inputs (default: POI centroid)")
    e.add_argument("--out", required=True)
    e.add_argument("--summary")
    e.set_defaults(func=cmd_enrich)

    s = sub.add_parser("stratify", help="split units into building-dense and building-sparse strata")
    s.add_argument("--units", required=True)
    s.add_argument("--threshold", default="auto", help="'auto' (lower quartile) or a value in [0,1]")
    s.add_argument("--out-dense", required=True)
    s.add_argument("--out-sparse", required=True)
    s.add_argument("--summary")
    s.add_argument("--n-total", type=int)
    s.add_argument("--dense-fraction", type=float, default=0.8)
    s.set_defaults(func=cmd_stratify)

    a = sub.add_parser("sample", help="anneal a sample from one stratum")
    a.add_argument("--units", required=True, help="enriched unit CSV of one stratum")
    a.add_argument("--stratum", default="all", help="stratum label; dense/sparse select distinct RNG streams")
    a.add_argument("--n", type=int, required=True)
    _add_anneal_flags(a)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--method", choices=(annealer.DUAL, annealer.SPATIAL), default=annealer.DUAL)
    a.add_argument("--trace")
    a.add_argument("--summary")
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_sample)

    c = sub.add_parser("compare", help="benchmark samplers over seeds")
    c.add_argument("--units", help="enriched unit CSV; default: generate the synthetic scenario")
    c.add_argument("--scenario-seed", type=int, default=0)
    c.add_argument("--nx", type=int, default=50)
    c.add_argument("--ny", type=int, default=50)
    c.add_argument("--methods", default=",".join(synth.METHODS))
    c.add_argument("--seeds", type=int, default=20)
    c.add_argument("--threshold", default="auto")
    c.add_argument("--n-total", type=int, default=100)
    c.add_argument("--dense-fraction", type=float, default=0.8)
    _add_anneal_flags(c)
    c.add_argument("--jobs", type=int, default=1)
    c.add_argument("--timing", action="store_true", help="fill wall_time_ms (makes the report non-reproducible)")
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_compare)

    v = sub.add_parser("eval", help="pixel metrics or kappa from two label grids")
    v.add_argument("--mode", choices=("binary", "kappa"), required=True)
    v.add_argument("--pred", required=True)
    v.add_argument("--truth", required=True)
    v.add_argument("--classes", help="class map CSV class_id,class_name")
    v.add_argument("--out", required=True)
    v.set_defaults(func=cmd_eval)

    r = sub.add_parser("resolve", help="majority-vote label per building instance")
    r.add_argument("--pixels", required=True, help="CSV instance_id,class_id,count")
    r.add_argument("--classes", help="class map CSV; its order breaks ties")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_resolve)

    sc = sub.add_parser("scenario", help="write a synthetic study area (units + POIs)")
    sc.add_argument("--seed", type=int, default=0)
    sc.add_argument("--nx", type=int, default=50)
    sc.add_argument("--ny", type=int, default=50)
    sc.add_argument("--cell-side", type=float, default=1000.0)
    sc.add_argument("--clusters", type=int, default=synth.ScenarioSpec.n_clusters)
    sc.add_argument("--pois-per-cluster", type=int, default=synth.ScenarioSpec.pois_per_cluster)
    sc.add_argument("--categories", type=int, default=synth.ScenarioSpec.n_categories)
    sc.add_argument("--spread", type=float, default=synth.ScenarioSpec.cluster_spread)
    sc.add_argument("--builtup-peak", type=float, default=synth.ScenarioSpec.builtup_peak)
    sc.add_argument("--out-units", required=True)
    sc.add_argument("--out-pois", required=True)
    sc.set_defaults(func=cmd_scenario)

    rr = sub.add_parser("rerun", help="replay the invocation recorded in a manifest")
    rr.add_argument("manifest")
    rr.set_defaults(func=None)
    return p


_CONFIG_SKIP = {"func", "command"}


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "rerun":
        try:
            return cmd_rerun(args, main)
        except (OSError, ValueError, KeyError) as exc:
            print(f"repsample: cannot replay {args.manifest}: {exc}", file=sys.stderr)
            return 2
    config = {k: v for k, v in sorted(vars(args).items()) if k not in _CONFIG_SKIP}
    run = _Run(args.command, argv, config)
    try:
        args.func(args, run)
        run.finish()
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"repsample {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except (SamplingError, OSError, UnicodeDecodeError) as exc:
        print(f"repsample {args.command}: data error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
