"""Command-line entry point: ``vlmframe {transform,validate,spectrum,synth}``.

Exit codes: 0 ok, 1 I/O or parse failure, 2 empty overlap with the global
grid, 3 rank-deficient fit, 4 empty GNSS collocation, 5 degenerate spectral
extent. Set ``VLMFRAME_LOG`` (DEBUG, INFO, WARNING, ...) to change verbosity.
"""
from __future__ import annotations

import argparse
import hashlib
import io
import json
import logging
import math
import os
import platform
import sys
import tempfile
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .errors import (DegenerateExtentError, EmptyCollocationError, EmptyOverlapError,
                     EmptySpectrumError, RankDeficientError, VLMError)
from .fields import (VelocityField, format_float, read_gnss_table, read_grid, read_point_field,
                     write_gnss_table, write_grid, write_point_field)
from .frame_fit import DEGREES
from .pipeline import tie_frame
from .resample import OK, sample_grid
from .spectral import (DEFAULT_BINS, field_spectrum, log_power_distance, normalize_spectrum,
                       rasterize_points, spectral_slope, write_curve_bundle)
from .synth import ScenarioSpec, make_scenario
from .validation import DEFAULT_RADIUS, compare_models, ecdf

log = logging.getLogger("vlmframe")

EXIT_OK, EXIT_IO, EXIT_OVERLAP, EXIT_RANK, EXIT_COLLOCATION, EXIT_SPECTRAL = range(6)
DIGITS = 15
MAX_SPECTRUM_FIELDS = 5


class CommandError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


# --------------------------------------------------------------------------
# output helpers
# --------------------------------------------------------------------------

def _round(obj):
    if isinstance(obj, float):
        return obj if not math.isfinite(obj) else float(format_float(obj, DIGITS))
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    return obj


class Outputs:
    """Atomic file writer that remembers checksums for the manifest."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.written = {}

    def text(self, name: str, content: str) -> Path:
        path = self.root / name
        data = content.encode("utf-8")
        fd, tmp = tempfile.mkstemp(dir=self.root, prefix=f".{name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        self.written[name] = hashlib.sha256(data).hexdigest()
        return path

    def json(self, name: str, obj) -> Path:
        return self.text(name, json.dumps(_round(obj), indent=2, sort_keys=False) + "\n")

    def with_writer(self, name: str, writer, obj, **kw) -> Path:
        buf = io.StringIO()
        writer(obj, buf, **kw)
        return self.text(name, buf.getvalue())


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _plain(obj):
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _write_manifest(out: Outputs, args, inputs):
    config = {k: v for k, v in vars(args).items() if k not in ("func", "out")}
    manifest = {
        "tool": "vlmframe",
        "subcommand": args.command,
        "versions": {"vlmframe": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "config": _plain(config),
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": dict(sorted(out.written.items())),
    }
    out.json("manifest.json", manifest)


def _degrees(text: str):
    try:
        ks = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad degree list {text!r}")
    if not ks or any(k not in DEGREES for k in ks):
        raise argparse.ArgumentTypeError(f"degrees must be a comma list drawn from {DEGREES}")
    return sorted(set(ks))


def _load_points(path) -> VelocityField:
    return read_point_field(path)


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_transform(args) -> int:
    local = _load_points(args.local)
    grid = read_grid(args.global_grid)
    try:
        ties = tie_frame(local, grid, args.degrees)
    except EmptyOverlapError as exc:
        raise CommandError(str(exc), EXIT_OVERLAP)
    except RankDeficientError as exc:
        raise CommandError(str(exc), EXIT_RANK)

    out = Outputs(args.out)
    first = next(iter(ties.values()))
    ex = first.oversampled
    if len(ex.excluded_ids):
        log.warning("%d of %d pixels not resolvable on the global grid; passed through uncorrected",
                    len(ex.excluded_ids), len(local))
    out.text("exclusions.csv", "id,reason\n" + "".join(
        f"{i},{r}\n" for i, r in ex.exclusions))
    for k, tie in ties.items():
        out.json(f"model_D{k}.json", tie.model.to_dict())
        out.with_writer(f"transformed_D{k}.csv", write_point_field, tie.transformed, digits=DIGITS)
        c = tie.correction
        rows = ["id,lon,lat,correction,applied,extrapolated\n"]
        for i in range(len(local)):
            rows.append(f"{int(c.ids[i])},{format_float(local.lon[i], DIGITS)},"
                        f"{format_float(local.lat[i], DIGITS)},"
                        f"{format_float(c.correction[i], DIGITS)},"
                        f"{int(c.applied[i])},{int(c.extrapolated[i])}\n")
        out.text(f"correction_D{k}.csv", "".join(rows))
        log.info("D%d: cond=%.3g rss=%.6g n_fit=%d", k, tie.model.cond, tie.model.rss,
                 tie.model.n_fit)
    _write_manifest(out, args, [args.local, args.global_grid])
    return EXIT_OK


def _transformed_paths(args):
    root = Path(args.transformed if args.transformed else args.out)
    return {k: root / f"transformed_D{k}.csv" for k in args.degrees}


def cmd_validate(args) -> int:
    local = _load_points(args.local)
    paths = _transformed_paths(args)
    transformed = {k: _load_points(p).replace(frame="global") for k, p in paths.items()}
    gnss = read_gnss_table(args.gnss, min_span=args.min_span)
    if gnss.dropped:
        log.info("dropped %d stations with span < %g yr", gnss.dropped, args.min_span)
    try:
        report = compare_models(local, transformed, gnss, radius=args.radius)
    except EmptyCollocationError as exc:
        raise CommandError(str(exc), EXIT_COLLOCATION)

    out = Outputs(args.out)
    out.json("report.json", report.to_dict())
    table = report.to_table()
    out.text("report.txt", table)
    sys.stdout.write(table)
    fields = {"local": local}
    fields.update({f"D{k}": f for k, f in transformed.items()})
    for label, fld in fields.items():
        out.with_writer(f"ecdf_{label}.csv", lambda e, s, **kw: e.to_csv(s, **kw),
                        ecdf(fld.value), digits=DIGITS)
    keep = [i for i, s in enumerate(gnss.ids) if s in set(report.station_ids)]
    out.with_writer("ecdf_gnss.csv", lambda e, s, **kw: e.to_csv(s, **kw),
                    ecdf(gnss.vu[keep]), digits=DIGITS)
    _write_manifest(out, args, [args.local, args.gnss, *paths.values()])
    return EXIT_OK


def _labelled(spec: str):
    if "=" not in spec:
        raise argparse.ArgumentTypeError(f"expected LABEL=PATH, got {spec!r}")
    label, path = spec.split("=", 1)
    if not label:
        raise argparse.ArgumentTypeError("empty field label")
    return label, Path(path)


def cmd_spectrum(args) -> int:
    fields = {}
    inputs = []
    if args.local:
        fields["local"] = _load_points(args.local)
        inputs.append(args.local)
    if args.global_grid:
        if "local" not in fields:
            raise CommandError("--global-grid needs --local to know where to sample", EXIT_IO)
        grid = read_grid(args.global_grid)
        loc = fields["local"]
        v, status = sample_grid(grid, loc.lon, loc.lat)
        ok = status == OK
        if not ok.any():
            raise CommandError("global grid does not overlap the local field", EXIT_OVERLAP)
        fields["global"] = VelocityField(loc.lon[ok], loc.lat[ok], v[ok], frame="global")
        inputs.append(args.global_grid)
    if args.transformed:
        for k, p in _transformed_paths(args).items():
            fields[f"D{k}"] = _load_points(p)
            inputs.append(p)
    for label, path in args.field or []:
        fields[label] = _load_points(path)
        inputs.append(path)
    if not fields:
        raise CommandError("no input fields given", EXIT_IO)
    if len(fields) > MAX_SPECTRUM_FIELDS:
        raise CommandError(f"at most {MAX_SPECTRUM_FIELDS} fields per run, got {len(fields)}",
                           EXIT_IO)

    try:
        like = rasterize_points(next(iter(fields.values())), args.cellsize)
        raw = {label: field_spectrum(f, args.cellsize, like=like, n_bins=args.bins, label=label)
               for label, f in fields.items()}
    except DegenerateExtentError as exc:
        raise CommandError(str(exc), EXIT_SPECTRAL)

    out = Outputs(args.out)
    curves = []
    for label, curve in raw.items():
        try:
            curve = normalize_spectrum(curve)
        except EmptySpectrumError:
            log.warning("field %r has no spectral power (constant field); emitting zeros", label)
        curves.append(curve)
        out.with_writer(f"spectrum_{label}.csv", lambda c, s, **kw: c.to_csv(s, **kw), curve,
                        digits=DIGITS)
    out.with_writer("spectra.csv", write_curve_bundle, curves, digits=DIGITS)

    long_band, short_band = (args.cutoff_km, math.inf), (0.0, args.cutoff_km)
    summary = {"cutoff_km": args.cutoff_km, "fields": {}}
    for c in curves:
        entry = {}
        for name, band in (("long", long_band), ("short", short_band)):
            try:
                entry[f"slope_{name}"] = spectral_slope(c, band)
            except ValueError:
                entry[f"slope_{name}"] = None
        if "global" in raw and c.label != "global":
            try:
                entry["log_distance_to_global_long"] = log_power_distance(
                    raw[c.label], raw["global"], long_band)
            except ValueError:
                entry["log_distance_to_global_long"] = None
        summary["fields"][c.label] = entry
    out.json("slopes.json", summary)
    _write_manifest(out, args, inputs)
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        if args.spec:
            spec_dict = json.loads(Path(args.spec).read_text(encoding="utf-8"))
        else:
            spec_dict = {}
        if args.seed is not None:
            spec_dict["seed"] = args.seed
        spec = ScenarioSpec.from_dict(spec_dict)
    except (TypeError, ValueError, VLMError) as exc:
        raise CommandError(f"invalid scenario spec: {exc}", EXIT_IO)
    sc = make_scenario(spec)
    out = Outputs(args.out)
    out.with_writer("truth.csv", write_point_field, sc.truth, digits=DIGITS)
    out.with_writer("local.csv", write_point_field, sc.local, digits=DIGITS)
    out.with_writer("global_model.asc", write_grid, sc.coarse_model, digits=DIGITS)
    out.with_writer("gnss.csv", write_gnss_table, sc.gnss, digits=DIGITS)
    out.json("scenario.json", sc.manifest())
    _write_manifest(out, args, [args.spec] if args.spec else [])
    coeffs = ", ".join(format_float(c, DIGITS) for c in spec.distortion_coeffs)
    print(f"injected distortion (degree {spec.distortion_degree}): {coeffs}")
    return EXIT_OK


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vlmframe", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"vlmframe {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", type=Path, default=Path("."), help="output directory")
        sp.add_argument("--degrees", type=_degrees, default=[1, 2, 3],
                        help="comma-separated polynomial degrees (default 1,2,3)")

    t = sub.add_parser("transform", help="fit and apply the frame-tie polynomials")
    t.add_argument("--local", type=Path, required=True, help="local-frame point CSV")
    t.add_argument("--global-grid", type=Path, required=True, help="ESRI ASCII global VLM grid")
    common(t)
    t.set_defaults(func=cmd_transform)

    v = sub.add_parser("validate", help="score local and transformed fields against GNSS")
    v.add_argument("--local", type=Path, required=True)
    v.add_argument("--transformed", type=Path, default=None,
                   help="directory holding transformed_D<k>.csv (default: --out)")
    v.add_argument("--gnss", type=Path, required=True)
    v.add_argument("--radius", type=float, default=DEFAULT_RADIUS, help="collocation radius, m")
    v.add_argument("--min-span", type=float, default=3.0, help="minimum GNSS span, years")
    common(v)
    v.set_defaults(func=cmd_validate)

    s = sub.add_parser("spectrum", help="normalised radially averaged power spectra")
    s.add_argument("--local", type=Path)
    s.add_argument("--global-grid", type=Path)
    s.add_argument("--transformed", type=Path, default=None)
    s.add_argument("--field", type=_labelled, action="append", metavar="LABEL=PATH")
    s.add_argument("--cellsize", type=float, default=0.005, help="raster cell, degrees")
    s.add_argument("--bins", type=int, default=DEFAULT_BINS)
    s.add_argument("--cutoff-km", type=float, default=10.0)
    common(s)
    s.set_defaults(func=cmd_spectrum)

    y = sub.add_parser("synth", help="write a synthetic scenario")
    y.add_argument("--spec", type=Path, default=None, help="scenario spec JSON")
    y.add_argument("--seed", type=int, default=None)
    y.add_argument("--out", type=Path, default=Path("."))
    y.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    level = os.environ.get("VLMFRAME_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="vlmframe: %(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CommandError as exc:
        print(f"vlmframe {args.command}: {exc}", file=sys.stderr)
        return exc.code
    except (OSError, ValueError, VLMError) as exc:
        print(f"vlmframe {args.command}: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
