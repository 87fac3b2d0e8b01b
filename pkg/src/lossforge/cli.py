"""``lossforge`` command line.

Every command writes machine-readable reports plus one ``manifest.json``
into ``--out``.  Reports carry no timestamps, so re-running a command on
the same inputs reproduces them byte for byte; only the manifest records
when the run happened.

Option precedence: built-in defaults < ``--config`` JSON keys < flags.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import LossforgeError, NumericalError, ValidationError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_USAGE = 64
MODES_HEADER = ["mode_id", "frequency_hz", "q_int", "q_int_sigma", "photon_number"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _clean(x):
    """JSON-safe copy: numpy scalars/arrays to Python, non-finite floats to strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if np.isfinite(x) else str(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _dump(obj):
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


class Run:
    """Tracks one invocation's inputs and outputs."""

    def __init__(self, args, argv):
        self.args = args
        self.argv = list(argv)
        self.out = Path(args.out)
        self.inputs = {}
        self.outputs = []

    def use(self, path):
        p = Path(path)
        if not p.exists():
            raise ValidationError(f"input file not found: {p}", "missing-input")
        if p.is_file():
            self.inputs[str(p)] = _sha256(p)
        return p

    def write(self, name, text):
        self.out.mkdir(parents=True, exist_ok=True)
        p = self.out / name
        p.write_text(text)
        self.outputs.append(name)
        return p

    def write_json(self, name, obj):
        return self.write(name, _dump(obj))

    def plot_path(self, name):
        self.out.mkdir(parents=True, exist_ok=True)
        self.outputs.append(name)
        return self.out / name

    def manifest(self):
        cfg = {k: v for k, v in sorted(vars(self.args).items()) if k not in ("func", "out", "jobs")}
        digest = hashlib.sha256(json.dumps(_clean(cfg), sort_keys=True).encode()).hexdigest()
        doc = {"command": self.args.command, "argv": self.argv, "config": cfg, "config_digest": digest,
               "inputs": dict(sorted(self.inputs.items())), "outputs": sorted(set(self.outputs)),
               "version": __version__,
               "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")}
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / "manifest.json").write_text(_dump(doc))


def _resolve_data(run, value):
    """A path, or the name of a file shipped with the package."""
    p = Path(value)
    if p.exists():
        return run.use(p)
    from .participation import data_path
    name = value if value.endswith(".json") else value + ".json"
    try:
        dp = data_path(name)
    except ValidationError:
        raise ValidationError(f"input file not found: {value}", "missing-input") from None
    return run.use(dp)


def _floats(text):
    return [float(x) for x in str(text).replace(";", ",").split(",") if x.strip()]


def _load_library_doc(path):
    """Factors from a library/fixed file or from an ``extract`` report."""
    from .factors import factors_from_mapping
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: expected a JSON object", "invalid-factor-file")
    if "factors" in doc:
        lib = factors_from_mapping({k: {kk: vv for kk, vv in v.items() if kk != "flags"}
                                    if isinstance(v, dict) else v for k, v in doc["factors"].items()})
        lib.update(factors_from_mapping(doc.get("fixed", {})))
        return lib
    return factors_from_mapping(doc)


def read_modes_csv(path):
    from .domain import ModeRecord
    recs = []
    with open(path, newline="") as fh:
        rows = [r for r in fh if r.strip() and not r.lstrip().startswith("#")]
    reader = csv.DictReader(rows)
    need = {"mode_id", "frequency_hz", "q_int", "q_int_sigma"}
    if reader.fieldnames is None or not need.issubset(reader.fieldnames):
        raise ValidationError(f"{path}: header must contain {sorted(need)}", "invalid-modes-file")
    for r in reader:
        try:
            n = r.get("photon_number")
            recs.append(ModeRecord(r["mode_id"], float(r["frequency_hz"]), float(r["q_int"]),
                                   float(r["q_int_sigma"]), float(n) if n not in (None, "") else None))
        except ValueError as exc:
            raise ValidationError(f"{path}: bad row {r}: {exc}", "invalid-modes-file") from None
    return recs


def modes_csv_text(records):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(MODES_HEADER)
    for r in records:
        w.writerow([r.mode_id, repr(float(r.frequency)), repr(float(r.q_int)), repr(float(r.q_int_sigma)),
                    "" if r.photon_number is None else repr(float(r.photon_number))])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _fit_one(args):
    path, budget_doc = args
    from .domain import read_metadata, read_trace, sidecar_path
    from .photon import LineBudget
    from .pipeline import analyze_trace
    trace = read_trace(path)
    budget = LineBudget.from_dict(budget_doc) if budget_doc else None
    vna = None
    side = sidecar_path(path)
    if budget is not None and side.exists():
        vna = read_metadata(side).get("power_dbm_at_vna")
    return trace, analyze_trace(trace, budget, vna)


def _map(run, func, items):
    jobs = run.args.jobs or 1
    if jobs > 1 and len(items) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(func, items))
    return [func(i) for i in items]


def _budget_doc(run):
    if not run.args.line_budget:
        return None
    return json.loads(run.use(run.args.line_budget).read_text())


def cmd_fit(run):
    bdoc = _budget_doc(run)
    paths = [run.use(p) for p in run.args.traces]
    for p in paths:
        from .domain import sidecar_path
        if sidecar_path(p).exists():
            run.use(sidecar_path(p))
    results = _map(run, _fit_one, [(str(p), bdoc) for p in paths])
    for p, (trace, res) in zip(paths, results):
        rep = res.to_dict()
        rep["source"] = p.name
        run.write_json(f"fit_{p.stem}.json", rep)
        if run.args.plot:
            from .plotting import plot_fit
            plot_fit(trace, res.fit, run.plot_path(f"fit_{p.stem}.png"))
    return EXIT_OK


def _trace_groups(root):
    root = Path(root)
    if not root.is_dir():
        raise ValidationError(f"{root} is not a directory", "missing-input")
    direct = sorted(p for p in root.glob("*.csv"))
    groups = {}
    if direct:
        groups[root.name] = direct
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        files = sorted(sub.glob("*.csv"))
        if files:
            groups[sub.name] = files
    if not groups:
        raise ValidationError(f"no trace CSV files under {root}", "missing-input")
    return groups


def cmd_power_sweep(run):
    from .pipeline import bin_by_photon_number
    from .tls import fit_tls, q_int_at
    bdoc = _budget_doc(run)
    groups = _trace_groups(run.args.directory)
    report, tables, fits, records = {}, {}, {}, []
    for label, files in groups.items():
        for p in files:
            run.use(p)
        res = [r for _, r in _map(run, _fit_one, [(str(p), bdoc) for p in files])]
        table = bin_by_photon_number(res, run.args.bins_per_decade)
        tls = fit_tls(table)
        tables[label], fits[label] = table, tls
        freq = float(np.median([r.fit.fr for r in res]))
        q, s = q_int_at(tls, run.args.photon_number)
        from .domain import ModeRecord
        records.append(ModeRecord(label, freq, q, s, run.args.photon_number))
        report[label] = {"frequency_hz": freq, "traces": [dict(r.to_dict(), source=p.name)
                                                           for r, p in zip(res, files)],
                         "table": table.tolist(), "tls": tls.to_dict(),
                         "q_int_at_photon_number": {"photon_number": run.args.photon_number,
                                                    "q_int": q, "q_int_sigma": s}}
        lines = ["photon_number,q_int,q_int_sigma"] + [",".join(repr(float(v)) for v in row) for row in table]
        run.write(f"power_sweep_{label}.csv", "\n".join(lines) + "\n")
    run.write_json("power_sweep.json", report)
    run.write_json("tls_fits.json", {k: v.to_dict() for k, v in fits.items()})
    run.write("modes.csv", modes_csv_text(records))
    if run.args.plot:
        from .plotting import plot_power_sweep
        plot_power_sweep(tables, fits, run.plot_path("power_sweep.png"))
    return EXIT_OK


def cmd_extract(run):
    from .extraction import budget, extract, extract_vs_power
    from .participation import load_participations
    from .tls import TlsFit
    matrix = load_participations(_resolve_data(run, run.args.participations))
    fixed = _load_library_doc(_resolve_data(run, run.args.fixed)) if run.args.fixed else {}
    if run.args.tls:
        fits = {k: TlsFit.from_dict(v) for k, v in json.loads(run.use(run.args.tls).read_text()).items()}
        grid = _floats(run.args.photon_numbers)
        sets = extract_vs_power(matrix, fits, grid, fixed)
        run.write_json("extraction_vs_power.json", {"sets": [s.to_dict() for s in sets]})
        if run.args.plot:
            from .plotting import plot_factors_vs_power
            plot_factors_vs_power(sets, run.plot_path("factors_vs_power.png"))
        return EXIT_OK
    if not run.args.modes:
        raise ValidationError("extract needs --modes (or --tls)", "missing-input")
    recs = read_modes_csv(run.use(run.args.modes))
    fs = extract(matrix, recs, fixed, assumed_fractional_sigma=run.args.assumed_fractional_sigma)
    b = budget(matrix, fs)
    doc = fs.to_dict()
    doc["budget"] = b.as_dict()
    run.write_json("extraction.json", doc)
    if run.args.plot:
        from .plotting import plot_budget
        plot_budget(b, run.plot_path("budget.png"))
    return EXIT_OK


def cmd_budget(run):
    from .extraction import budget
    from .participation import load_participations
    matrix = load_participations(_resolve_data(run, run.args.participations))
    lib = _load_library_doc(_resolve_data(run, run.args.factors))
    b = budget(matrix, lib)
    run.write_json("budget.json", b.as_dict())
    if run.args.plot:
        from .plotting import plot_budget
        plot_budget(b, run.plot_path("budget.png"))
    return EXIT_OK


def cmd_sensitivity(run):
    from .participation import load_participations
    from .sensitivity import sensitivity_map
    matrix = load_participations(_resolve_data(run, run.args.participations))
    fixed = _load_library_doc(_resolve_data(run, run.args.fixed)) if run.args.fixed else {}
    for item in run.args.set or []:
        cid, _, val = str(item).partition("=")
        try:
            fixed[cid.strip()] = float(val)
        except ValueError:
            raise ValidationError(f"--set expects CHANNEL=VALUE, got {item!r}", "invalid-input") from None
    axes = [a.strip() for a in run.args.axes.split(",")]
    if len(axes) != 2:
        raise ValidationError("--axes needs two comma-separated channel ids", "invalid-input")
    grids = None
    if run.args.grid1 or run.args.grid2:
        from .sensitivity import default_grid
        gs = []
        for spec, a in ((run.args.grid1, axes[0]), (run.args.grid2, axes[1])):
            if spec:
                lo, hi = _floats(spec)[:2]
                gs.append(np.geomspace(lo, hi, run.args.points) if lo > 0 and hi > 0 else np.array([lo, hi]))
            else:
                gs.append(default_grid(a, run.args.points))
        grids = tuple(gs)
    smap = sensitivity_map(matrix, fixed, axes, grids, run.args.sigma, run.args.points)
    run.write_json("sensitivity.json", smap.to_dict())
    if run.args.plot:
        from .plotting import plot_sensitivity
        plot_sensitivity(smap, run.plot_path("sensitivity.png"))
    return EXIT_OK


def cmd_predict(run):
    from .domain import ModeRecord
    from .participation import load_participations
    from .prediction import compare_measured, predict
    matrix = load_participations(_resolve_data(run, run.args.participations))
    lib = _load_library_doc(_resolve_data(run, run.args.library))
    pred = predict(matrix, lib)
    doc = pred.to_dict()
    if run.args.measured_t1 is not None:
        if run.args.q_coupling is None:
            raise ValidationError("--measured-t1 needs --q-coupling", "invalid-input")
        mode = run.args.mode or matrix.mode_ids[0]
        pm = pred.mode(mode)
        meas = ModeRecord(mode, pm.frequency, 2 * np.pi * pm.frequency * run.args.measured_t1, 0.0,
                          t1=run.args.measured_t1, t1_sigma=run.args.measured_t1_sigma)
        doc["comparison"] = compare_measured(pred, meas, run.args.q_coupling).to_dict()
    run.write_json("prediction.json", doc)
    if run.args.plot:
        from .plotting import plot_budget
        plot_budget(pred.budget, run.plot_path("prediction_budget.png"))
    return EXIT_OK


def cmd_plan_sweep(run):
    from .sweep import make_plan, phase_gap_metric, plan_to_csv, plan_to_segment_table
    a = run.args
    plan = make_plan(a.scheme, a.center, a.span, a.points, a.weight)
    run.write("plan.csv", plan_to_csv(plan))
    run.write("segments.txt", plan_to_segment_table(plan, a.ifbw, a.power))
    info = {"scheme": plan.scheme, "center_hz": plan.center, "span_hz": plan.span,
            "weight": plan.weight, "points": len(plan)}
    q = a.q_loaded
    if q is None and plan.weight is not None:
        q = plan.weight * plan.center / plan.span
    if q is not None:
        info["q_loaded"] = q
        info["max_phase_gap_rad"] = phase_gap_metric(plan, q)
    run.write_json("plan.json", info)
    return EXIT_OK


def cmd_simulate(run):
    from .domain import write_trace
    from .participation import load_participations
    from .synth import GroundTruth, generate_dataset
    tpath = run.use(run.args.truth)
    doc = json.loads(tpath.read_text())
    truth = GroundTruth.from_dict(doc)
    ppath = run.args.participations or doc.get("participations")
    if not ppath:
        raise ValidationError("simulate needs --participations or a 'participations' key in the truth file",
                              "missing-input")
    if not Path(ppath).exists() and (tpath.parent / ppath).exists():
        ppath = str(tpath.parent / ppath)
    matrix = load_participations(_resolve_data(run, ppath))
    powers = _floats(run.args.powers) if run.args.powers else doc.get("powers_dbm")
    if not powers:
        raise ValidationError("simulate needs --powers or 'powers_dbm' in the truth file", "missing-input")
    ds = generate_dataset(truth, powers, matrix)
    summary = []
    counter = {}
    for st in ds:
        k = counter.get(st.mode_id, 0)
        counter[st.mode_id] = k + 1
        name = f"{st.mode_id}/{st.mode_id}_p{k:02d}.csv"
        (run.out / st.mode_id).mkdir(parents=True, exist_ok=True)
        write_trace(run.out / name, st.trace,
                    {"power_dbm_at_vna": st.power_dbm, "line_attenuation_db": 0.0})
        run.outputs.append(name)
        summary.append({"file": name, "mode_id": st.mode_id, "power_dbm_at_device": st.power_dbm,
                        "photon_number": st.photon_number, "q_int": st.q_int,
                        "q_loaded": st.hanger.q_loaded, "fr": st.hanger.fr})
    run.write_json("truth_summary.json", {"seed": truth.seed, "snr_db": truth.snr_db, "traces": summary})
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _common(p, suppress):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--jobs", type=int, default=d(1), help="worker processes for batch work")
    p.add_argument("--plot", action="store_true", default=d(False), help="also write PNG figures")
    p.add_argument("--out", default=d("lossforge-out"), help="output directory")
    p.add_argument("--config", default=d(None), help="JSON file of option defaults")


def build_parser():
    top = _Parser(prog="lossforge", description="Resonator loss analysis toolkit.")
    top.add_argument("--version", action="version", version=f"lossforge {__version__}")
    _common(top, suppress=False)
    sub = top.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_, description=help_)
        _common(p, suppress=True)
        p.set_defaults(func=func)
        return p

    p = add("fit", cmd_fit, "fit hanger traces")
    p.add_argument("traces", nargs="+")
    p.add_argument("--line-budget", help="line budget JSON; attenuation read at each fitted fr")

    p = add("power-sweep", cmd_power_sweep, "fit all traces in a directory and fit the TLS model")
    p.add_argument("directory")
    p.add_argument("--line-budget")
    p.add_argument("--bins-per-decade", type=float, default=None)
    p.add_argument("--photon-number", type=float, default=1.0,
                   help="photon number at which modes.csv is evaluated")

    p = add("extract", cmd_extract, "extract loss factors from mode Q's")
    p.add_argument("--participations", required=True)
    p.add_argument("--modes", help="modes CSV: mode_id,frequency_hz,q_int,q_int_sigma[,photon_number]")
    p.add_argument("--fixed", help="fixed loss factors JSON")
    p.add_argument("--tls", help="tls_fits.json from power-sweep; extracts on --photon-numbers")
    p.add_argument("--photon-numbers", default="1")
    p.add_argument("--assumed-fractional-sigma", type=float, default=None)

    p = add("sensitivity", cmd_sensitivity, "two-channel resolution map")
    p.add_argument("--participations", required=True)
    p.add_argument("--fixed", help="loss factors for all non-axis channels")
    p.add_argument("--set", action="append", metavar="CHANNEL=VALUE",
                   help="hold one more channel at a fixed loss factor (repeatable)")
    p.add_argument("--axes", default="surf,bulk")
    p.add_argument("--sigma", type=float, default=0.10, help="fractional measurement error of 1/Q")
    p.add_argument("--points", type=int, default=64)
    p.add_argument("--grid1", help="lo,hi for the first axis")
    p.add_argument("--grid2", help="lo,hi for the second axis")

    p = add("predict", cmd_predict, "predict Q_int and T1 from a loss-factor library")
    p.add_argument("--participations", required=True)
    p.add_argument("--library", required=True)
    p.add_argument("--measured-t1", type=float, default=None)
    p.add_argument("--measured-t1-sigma", type=float, default=0.0)
    p.add_argument("--q-coupling", type=float, default=None)
    p.add_argument("--mode", default=None)

    p = add("plan-sweep", cmd_plan_sweep, "frequency plan for a resonator sweep")
    p.add_argument("--center", type=float, required=True)
    p.add_argument("--span", type=float, required=True)
    p.add_argument("--weight", type=float, default=None)
    p.add_argument("--points", type=int, default=101)
    p.add_argument("--scheme", choices=["phase-uniform", "quadratic", "linear"], default="phase-uniform")
    p.add_argument("--q-loaded", type=float, default=None)
    p.add_argument("--ifbw", type=float, default=None)
    p.add_argument("--power", type=float, default=None)

    p = add("simulate", cmd_simulate, "write synthetic traces from a ground-truth file")
    p.add_argument("--truth", required=True)
    p.add_argument("--participations")
    p.add_argument("--powers", help="comma-separated powers at the device in dBm")

    p = add("budget", cmd_budget, "loss budget from participations and factors")
    p.add_argument("--participations", required=True)
    p.add_argument("--factors", required=True, help="library JSON or an extraction.json report")
    return top


def _parse(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError(parser.format_usage() + "lossforge: error: a command is required\n")
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {args.config}: {exc}", "invalid-config") from None
        if not isinstance(cfg, dict):
            raise ValidationError("config must be a JSON object", "invalid-config")
        explicit = _explicit_dests(argv)
        known = vars(args)
        for k, v in cfg.items():
            key = k.replace("-", "_")
            if key not in known or key in ("command", "func", "config"):
                raise ValidationError(f"unknown config key {k!r}", "invalid-config")
            if key not in explicit:
                setattr(args, key, v)
    return args


def _explicit_dests(argv):
    """Destinations that were given on the command line."""
    parser = build_parser()

    def strip(p):
        for a in p._actions:
            if a.dest not in ("help", "version", "command") and not isinstance(a, argparse._SubParsersAction):
                a.default = argparse.SUPPRESS
            if isinstance(a, argparse._SubParsersAction):
                for sp in a.choices.values():
                    strip(sp)
                    sp.set_defaults(func=None)
                    sp._defaults.pop("func", None)
    strip(parser)
    ns = parser.parse_args(argv)
    return set(vars(ns)) - {"command"}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = _parse(argv)
        run = Run(args, argv)
        code = args.func(run)
        run.manifest()
        return code
    except UsageError as exc:
        sys.stderr.write(str(exc))
        return EXIT_USAGE
    except NumericalError as exc:
        sys.stderr.write(f"lossforge: numerical failure: {exc}\n")
        return EXIT_NUMERICAL
    except (ValidationError, LossforgeError) as exc:
        sys.stderr.write(f"lossforge: invalid input: {exc}\n")
        return EXIT_VALIDATION
    except OSError as exc:
        sys.stderr.write(f"lossforge: {exc}\n")
        return EXIT_VALIDATION


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
