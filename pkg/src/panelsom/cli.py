"""Command-line pipeline: synth, train, group, trajectories, markov, pca, report.

Every subcommand writes its artifacts under ``--out-dir`` together with a
``<command>.manifest.json`` recording arguments, seeds, input digests and
artifact digests. ``panelsom --verify-manifest FILE`` re-runs the recorded
command in a scratch directory and compares artifact digests.

Exit codes: 0 success, 1 usage or contract error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from . import svg as figures
from .errors import NumericalError, PanelSomError
from .grouping import (
    DEFAULT_ORIENT_VAR,
    MainClassMap,
    SuperClassMap,
    class_means,
    explore_k,
    map_main_classes,
    qualitative_frequencies,
    reduce_superclasses,
    write_table,
)
from .manifest import RunManifest, sha256_file
from .markov import (
    change_frequencies,
    count_transitions,
    distribution_at_year,
    load_matrix,
    stationary_distribution,
    transition_matrix,
    write_distributions,
)
from .panel import (
    StandardizationParams,
    apply_standardization,
    fit_standardization,
    load_panel,
    pool_years,
    write_panel,
)
from .pca import PcaResult, correlation_pca, variable_projection, write_projection
from .reference import STATIONARY as PUBLISHED_STATIONARY
from .reference import transition_matrix_csv
from .som import CodeBook, Topology, TrainingSchedule, init_codebook, train
from .synth import SynthConfig, generate_panel, separated_config
from .trajectory import (
    build_trajectories,
    default_threshold,
    load_trajectories,
    occupancy_report,
    stability_census,
)

log = logging.getLogger("panelsom")

OUTPUT_ARGS = ("out",)
INPUT_ARGS = ("input", "codebook", "groups", "trajectories", "matrix", "pca", "schedule_file", "main_map", "synth_config")


class UsageError(PanelSomError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------------------
# Run bookkeeping


class Run:
    def __init__(self, command: str, args: argparse.Namespace):
        self.command = command
        self.args = args
        self.out_dir = Path(args.out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.inputs: dict[str, str] = {}
        self.artifacts: dict[str, dict] = {}
        self.seeds: dict = {}
        self.schedule: dict | None = None
        self.catalog: list = []

    def input(self, path) -> Path:
        p = Path(path)
        if not p.is_file():
            raise UsageError(f"input file not found: {p}")
        self.inputs[str(p)] = sha256_file(p)
        return p

    def target(self, name: str, override=None) -> Path:
        if override:
            p = Path(override)
            p.parent.mkdir(parents=True, exist_ok=True)
            return p
        return self.out_dir / name

    def write_text(self, key: str, text: str, override=None) -> Path:
        p = self.target(key, override)
        p.write_text(text, encoding="utf-8")
        self.artifacts[key] = {"path": str(p), "sha256": sha256_file(p)}
        return p

    def write_json(self, key: str, obj, override=None) -> Path:
        return self.write_text(key, json.dumps(obj, indent=1) + "\n", override)

    def write_rows(self, key: str, writer, override=None) -> Path:
        buf = io.StringIO()
        writer(buf)
        return self.write_text(key, buf.getvalue(), override)

    def finish(self) -> Path:
        args = {k: v for k, v in vars(self.args).items() if k not in ("func", "verify_manifest")}
        manifest = RunManifest(
            command=self.command,
            args=args,
            tool_version=__version__,
            seeds=self.seeds,
            schedule=self.schedule,
            catalog=self.catalog,
            inputs=self.inputs,
            artifacts=self.artifacts,
        )
        name = self.command.replace(" ", "-")
        path = self.out_dir / f"{name}.manifest.json"
        manifest.write(path)
        return path


def _int_list(text: str | None) -> list[int] | None:
    if text is None or text == "":
        return None
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            a, b = part.split("-", 1)
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    return out


def _str_list(text: str | None) -> list[str]:
    return [s.strip() for s in text.split(",") if s.strip()] if text else []


def _read_panel(run: Run, path, categorical=()):
    with open(run.input(path), encoding="utf-8", newline="") as f:
        return load_panel(f, categorical)


def _load_codebook(run: Run, path):
    doc = json.loads(run.input(path).read_text(encoding="utf-8"))
    try:
        cb = CodeBook.from_dict(doc)
        params = StandardizationParams.from_dict(doc["standardization"]) if "standardization" in doc else None
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid codebook file {path}: {exc}") from None
    return cb, params, doc


def _load_groups(run: Run, path):
    doc = json.loads(run.input(path).read_text(encoding="utf-8"))
    try:
        return SuperClassMap.from_dict(doc["super"]), MainClassMap.from_dict(doc["main"])
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid groups file {path}: {exc}") from None


# --------------------------------------------------------------------------
# Subcommands


def cmd_synth(run: Run, args) -> None:
    if args.synth_config:
        with open(run.input(args.synth_config), encoding="utf-8") as f:
            cfg = SynthConfig.load(f)
    else:
        years = tuple(range(args.first_year, args.first_year + args.n_years))
        cfg = separated_config(
            args.n_individuals, years, separation=args.separation, missing_rate=args.missing_rate, seed=args.seed
        )
    run.seeds["synth"] = cfg.seed
    run.catalog = list(cfg.codes)
    panel, latent = generate_panel(cfg)
    run.write_json("synth_config.json", cfg.to_dict())
    run.write_rows("panel.csv", lambda f: write_panel(panel, f))
    run.write_rows("truth.csv", latent.to_csv)
    print(f"synthetic panel: {len(panel.individual_ids)} individuals x {len(panel.years)} years -> {run.out_dir}")


def cmd_train(run: Run, args) -> None:
    panel = _read_panel(run, args.input, _str_list(args.categorical))
    years = _int_list(args.years) or list(panel.years)
    codes = _str_list(args.variables) or sorted(panel.codes)
    pooled = pool_years(panel, years, codes)
    params = fit_standardization(pooled)
    z = apply_standardization(params, pooled)
    topo = Topology.chain(args.cols) if args.rows == 1 else Topology.grid(args.rows, args.cols)
    if args.schedule_file:
        doc = json.loads(run.input(args.schedule_file).read_text(encoding="utf-8"))
        doc.setdefault("seed", args.seed)
        schedule = TrainingSchedule.from_dict(doc)
    else:
        schedule = TrainingSchedule.default(topo, seed=args.seed)
    start = init_codebook(topo, z, args.seed, args.init)
    codebook, trace = train(start, z, schedule, args.algorithm)
    run.seeds.update(init=args.seed, training=schedule.seed)
    run.schedule = schedule.to_dict()
    run.catalog = list(codes)
    doc = codebook.to_dict()
    doc.update(
        codes=list(codes),
        standardization=params.to_dict(),
        seed=args.seed,
        init=args.init,
        algorithm=args.algorithm,
        schedule=schedule.to_dict(),
        years=years,
        quantization_error=trace,
    )
    path = run.write_json("codebook.json", doc, args.out)
    run.write_rows("qe_trace.csv", lambda f: write_table([["epoch", "quantization_error"]] + [[i + 1, q] for i, q in enumerate(trace)], f))
    print(f"trained {topo.n_units}-unit map on {pooled.n_rows} rows x {len(codes)} variables; final quantization error {trace[-1]:.6f}")
    print(f"codebook: {path}")


def cmd_group(run: Run, args) -> None:
    codebook, _, doc = _load_codebook(run, args.codebook)
    codes = doc.get("codes")
    orient = args.orient_var if codes and args.orient_var in codes else None
    if orient is None and args.orient_var != DEFAULT_ORIENT_VAR:
        raise UsageError(f"orientation variable {args.orient_var!r} not in codebook")
    if orient is None:
        log.warning("orientation variable %s absent; chain orientation left as trained", args.orient_var)
    chain = Topology.chain(args.k)
    schedule = TrainingSchedule.default(chain, seed=args.seed)
    super_map = reduce_superclasses(codebook, args.k, schedule, codes=codes, orient_var=orient)
    if args.main_map:
        main = MainClassMap.from_dict(json.loads(run.input(args.main_map).read_text(encoding="utf-8")))
    elif args.k == 7:
        main = MainClassMap.default()
    else:
        main = MainClassMap.identity(args.k)
    main.check_total(args.k)
    run.seeds["chain"] = args.seed
    run.schedule = schedule.to_dict()
    run.catalog = list(codes or [])
    out = {"super": super_map.to_dict(), "main": main.to_dict(), "orient_var": orient}
    path = run.write_json("groups.json", out, args.out)
    if args.explore_k:
        errs = explore_k(codebook, _int_list(args.explore_k), seed=args.seed, codes=codes, orient_var=orient)
        run.write_rows("k_errors.csv", lambda f: write_table([["k", "quantization_error"]] + [[k, e] for k, e in errs.items()], f))
        for k, e in errs.items():
            print(f"k={k}: quantization error {e:.6f}")
    for s in range(1, args.k + 1):
        print(f"super-class {s} -> {main.super_to_main[s]}: units {super_map.units_of(s)}")
    if super_map.empty_classes:
        print(f"empty super-classes: {super_map.empty_classes}")
    print(f"groups: {path}")


def cmd_trajectories(run: Run, args) -> None:
    cats = _str_list(args.categorical)
    panel = _read_panel(run, args.input, cats)
    codebook, params, _ = _load_codebook(run, args.codebook)
    if params is None:
        raise UsageError("codebook carries no standardization parameters")
    super_map = main = None
    if args.granularity != "unit":
        if not args.groups:
            raise UsageError(f"--groups is required for granularity {args.granularity!r}")
        super_map, main = _load_groups(run, args.groups)
    years = _int_list(args.years) or list(panel.years)
    traj = build_trajectories(panel, years, params, codebook, args.granularity, super_map, main)
    threshold = args.threshold or default_threshold(traj.length)
    min_years = args.min_years or max(traj.length - 1, 1)
    run.catalog = list(params.codes)
    run.write_rows("trajectories.csv", traj.to_csv, args.out)
    report = occupancy_report(traj, threshold)
    run.write_rows("occupancy.csv", report.to_csv)
    census = stability_census(traj, min_years)
    run.write_json(
        "census.json",
        {
            "min_years": census.min_years,
            "stayers": census.stayers,
            "stayers_by_label": {str(k): v for k, v in census.stayers_by_label.items()},
            "distinct_trajectories": census.distinct_trajectories,
            "individuals": traj.n_individuals,
        },
    )
    pooled = pool_years(panel, years, params.codes)
    labels = traj.labels.ravel()
    run.write_rows("class_means.csv", class_means(pooled, labels, traj.alphabet).to_csv)
    freq_year = args.freq_year or years[-1]
    t = years.index(freq_year) if freq_year in years else None
    if t is None:
        raise UsageError(f"--freq-year {freq_year} not among the trajectory years")
    for attr in cats:
        col = panel.categoricals[attr][:, panel.year_index(freq_year)]
        table = qualitative_frequencies({attr: col}, traj.labels[:, t], attr, traj.alphabet)
        run.write_rows(f"frequencies_{attr}.csv", table.to_csv)
    print(f"{traj.n_individuals} trajectories over {traj.length} years at {args.granularity} granularity")
    print(f"dominant threshold {threshold}: " + ", ".join(f"{'none' if g is None else g}={n}" for g, n in zip(report.groups, report.sizes)))
    print(f"{census.stayers} individuals stay >= {min_years} years in one label; {census.distinct_trajectories} distinct trajectories")


def cmd_markov(run: Run, args) -> None:
    if args.action == "stationary":
        if args.matrix:
            with open(run.input(args.matrix), encoding="utf-8", newline="") as f:
                tm = load_matrix(f)
        elif args.published:
            tm = load_matrix(io.StringIO(transition_matrix_csv()))
        else:
            raise UsageError("stationary needs --matrix FILE or --published")
        res = stationary_distribution(tm)
        run.write_rows(
            "stationary.csv",
            lambda f: write_distributions({"stationary": res.distribution}, tm.labels, f),
        )
        run.write_json(
            "stationary.json",
            {
                "labels": [str(x) for x in tm.labels],
                "pi": res.distribution.p.tolist(),
                "eigenvalue": res.eigenvalue,
                "iterations": res.iterations,
                "method": res.method,
                "residual": res.residual,
                "direct_discrepancy": res.direct_discrepancy,
                "row_sums": tm.P.sum(axis=1).tolist(),
            },
        )
        print("labels      " + "  ".join(f"{str(x):>8}" for x in tm.labels))
        print("stationary  " + "  ".join(f"{v:8.4f}" for v in res.distribution.p))
        if args.compare or (args.published and not args.matrix):
            if len(tm.labels) != PUBLISHED_STATIONARY.size:
                raise UsageError("comparison needs a 4-state matrix")
            print("published   " + "  ".join(f"{v:8.4f}" for v in PUBLISHED_STATIONARY))
            print(f"max |difference| = {np.abs(res.distribution.p - PUBLISHED_STATIONARY).max():.4f}")
        print(f"eigenvalue {res.eigenvalue:.10f} ({res.method}, {res.iterations} iterations)")
        return

    if not args.trajectories:
        raise UsageError("estimate needs --trajectories FILE")
    with open(run.input(args.trajectories), encoding="utf-8", newline="") as f:
        traj = load_trajectories(f)
    counts = count_transitions(traj, include_self=True)
    changes = change_frequencies(count_transitions(traj, include_self=False))
    tm = transition_matrix(counts)
    run.write_rows("counts.csv", lambda f: write_table(counts.rows(), f))
    run.write_rows("changes.csv", lambda f: write_table(changes.rows(), f))
    run.write_rows("matrix.csv", tm.to_csv)
    dists = {str(y): distribution_at_year(traj, y) for y in traj.years}
    res = stationary_distribution(tm)
    dists["stationary"] = res.distribution
    run.write_rows("distributions.csv", lambda f: write_distributions(dists, tm.labels, f))
    total = counts.total
    print(f"{total} transitions, {changes.total} changes ({changes.total / total:.4f} of transitions)")
    for lab, row in zip(tm.labels, tm.P):
        print(f"{str(lab):>6}  " + "  ".join(f"{v:.3f}" for v in row))
    print("stationary " + "  ".join(f"{v:.4f}" for v in res.distribution.p))


def cmd_pca(run: Run, args) -> None:
    panel = _read_panel(run, args.input, _str_list(args.categorical))
    years = _int_list(args.years) or list(panel.years)
    codes = _str_list(args.variables) or sorted(panel.codes)
    pooled = pool_years(panel, years, codes)
    z = apply_standardization(fit_standardization(pooled), pooled)
    res = correlation_pca(z)
    run.catalog = list(codes)
    run.write_json("pca.json", res.to_dict())
    pairs = [tuple(int(a) for a in p.split(",")) for p in args.axes.split(";")] if args.axes else [(1, 2), (1, 3), (2, 3)]
    for a, b in pairs:
        if max(a, b) > res.n_components:
            continue
        run.write_rows(f"projection_{a}_{b}.csv", lambda f: write_projection(res, (a, b), f))
        run.write_text(f"pca_{a}_{b}.svg", figures.pca_projection_svg(res.codes, variable_projection(res, (a, b)), (a, b)))
    for i, (ev, cum) in enumerate(zip(res.eigenvalues, res.explained), 1):
        print(f"component {i:2d}: eigenvalue {ev:.4f}  cumulative {cum:.4f}")


def cmd_report(run: Run, args) -> None:
    codebook, _, doc = _load_codebook(run, args.codebook)
    codes = doc.get("codes") or []
    super_map = main = None
    if args.groups:
        super_map, main = _load_groups(run, args.groups)
    u2s = super_map.unit_to_super if super_map is not None else None
    run.write_text("profiles.svg", figures.profiles_svg(codebook, codes, u2s))
    if super_map is not None:
        run.write_text("partition.svg", figures.partition_svg(codebook.topology, u2s, super_map.k))
        labels = [str(s) for s in range(1, super_map.k + 1)]
        run.write_text("superclass_profiles.svg", figures.class_profiles_svg(super_map.chain_codebook.weights, labels, codes))
    if args.trajectories:
        with open(run.input(args.trajectories), encoding="utf-8", newline="") as f:
            traj = load_trajectories(f)
        flat = traj.labels.ravel().tolist()
        if not all(isinstance(v, int) and 1 <= v <= codebook.n_units for v in flat):
            raise UsageError("report needs unit-level trajectories (labels 1..units)")
        wanted = _str_list(args.individuals) or list(traj.individual_ids[: args.n_individuals])
        pos = {ident: i for i, ident in enumerate(traj.individual_ids)}
        absent = [w for w in wanted if w not in pos]
        if absent:
            raise UsageError(f"individuals not in trajectories: {absent}")
        sel = {w: traj.labels[pos[w]].tolist() for w in wanted}
        k = super_map.k if super_map is not None else 0
        run.write_text("trajectories.svg", figures.trajectory_svg(codebook.topology, sel, traj.years, unit_to_super=u2s, k=k))
        if super_map is not None:
            sup = super_map.label_units(np.asarray(flat))
            sizes = np.bincount(sup, minlength=super_map.k + 1)[1:]
            run.write_text("superclass_sizes.svg", figures.sizes_svg([str(s) for s in range(1, super_map.k + 1)], sizes.tolist()))
            mains = map_main_classes(super_map, main, sup)
            mlabels = main.labels
            msizes = [int(np.sum(mains == m)) for m in mlabels]
            run.write_text("mainclass_sizes.svg", figures.sizes_svg([str(m) for m in mlabels], msizes))
    if args.pca:
        res = PcaResult.from_dict(json.loads(run.input(args.pca).read_text(encoding="utf-8")))
        for a, b in [(1, 2), (1, 3), (2, 3)]:
            if max(a, b) <= res.n_components:
                run.write_text(f"pca_{a}_{b}.svg", figures.pca_projection_svg(res.codes, variable_projection(res, (a, b)), (a, b)))
    for key, meta in run.artifacts.items():
        print(f"{key}: {meta['path']}")


# --------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--out-dir", default=".", help="directory for artifacts and the run manifest")
    common.add_argument("--config", help="JSON file of flag defaults, keyed by option name")

    p = _Parser(prog="panelsom", description="Self-organizing-map segmentation of panel data and Markov trajectory analysis.")
    p.add_argument("--version", action="version", version=f"panelsom {__version__}")
    p.add_argument("--verify-manifest", metavar="FILE", help="re-run the command recorded in a manifest and compare artifact digests")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("synth", parents=[common], help="generate a synthetic panel with known latent classes")
    s.add_argument("--synth-config", help="SynthConfig JSON; overrides the generator flags below")
    s.add_argument("--n-individuals", type=int, default=2500)
    s.add_argument("--first-year", type=int, default=1984)
    s.add_argument("--n-years", type=int, default=9)
    s.add_argument("--separation", type=float, default=8.0)
    s.add_argument("--missing-rate", type=float, default=0.05)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("train", parents=[common], help="train a self-organizing map on pooled, standardized years")
    s.add_argument("--input", required=True, help="panel CSV")
    s.add_argument("--years", help="years to pool, e.g. 1984,1988,1992 (default: all)")
    s.add_argument("--variables", help="comma-separated variable codes (default: all numeric columns)")
    s.add_argument("--categorical", help="comma-separated categorical columns in the input")
    s.add_argument("--rows", type=int, default=8)
    s.add_argument("--cols", type=int, default=8)
    s.add_argument("--schedule-file", help="TrainingSchedule JSON")
    s.add_argument("--algorithm", choices=("online", "batch"), default="online")
    s.add_argument("--init", choices=("sample", "uniform-box"), default="sample")
    s.add_argument("--out", help="codebook path (default: OUT_DIR/codebook.json)")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("group", parents=[common], help="reduce map units to ordered super-classes and main classes")
    s.add_argument("--codebook", required=True)
    s.add_argument("--k", type=int, default=7)
    s.add_argument("--orient-var", default=DEFAULT_ORIENT_VAR)
    s.add_argument("--main-map", help='JSON {"1": "A", ...}; default: the 7-to-4 segment map when k=7, identity otherwise')
    s.add_argument("--explore-k", help="also report chain quantization error for these k, e.g. 2-10")
    s.add_argument("--out", help="groups path (default: OUT_DIR/groups.json)")
    s.set_defaults(func=cmd_group)

    s = sub.add_parser("trajectories", parents=[common], help="project every year and build label sequences")
    s.add_argument("--input", required=True)
    s.add_argument("--codebook", required=True)
    s.add_argument("--groups")
    s.add_argument("--granularity", choices=("unit", "super", "main"), default="unit")
    s.add_argument("--years")
    s.add_argument("--categorical", help="categorical columns to tabulate per class")
    s.add_argument("--freq-year", type=int, help="year for the categorical frequency tables (default: last)")
    s.add_argument("--threshold", type=int, help="dominant-position threshold (default 5 for 9 years, else T//2+1)")
    s.add_argument("--min-years", type=int, help="stayer threshold for the census (default T-1)")
    s.add_argument("--out", help="trajectory CSV path (default: OUT_DIR/trajectories.csv)")
    s.set_defaults(func=cmd_trajectories)

    s = sub.add_parser("markov", parents=[common], help="transition counts, matrix and stationary distribution")
    s.add_argument("action", nargs="?", choices=("estimate", "stationary"), default="estimate")
    s.add_argument("--trajectories")
    s.add_argument("--matrix", help="transition matrix CSV for 'stationary'")
    s.add_argument("--published", action="store_true", help="use the bundled published 4-class matrix")
    s.add_argument("--compare", action="store_true", help="print the published stationary row alongside")
    s.set_defaults(func=cmd_markov)

    s = sub.add_parser("pca", parents=[common], help="correlation PCA of the standardized variables")
    s.add_argument("--input", required=True)
    s.add_argument("--years")
    s.add_argument("--variables")
    s.add_argument("--categorical", help="categorical columns in the input (excluded from the analysis)")
    s.add_argument("--axes", help="axis pairs, e.g. '1,2;1,3' (default 1,2;1,3;2,3)")
    s.set_defaults(func=cmd_pca)

    s = sub.add_parser("report", parents=[common], help="render SVG figures from upstream artifacts")
    s.add_argument("--codebook", required=True)
    s.add_argument("--groups")
    s.add_argument("--trajectories", help="unit-level trajectory CSV")
    s.add_argument("--individuals", help="comma-separated ids to draw (default: first --n-individuals)")
    s.add_argument("--n-individuals", type=int, default=2)
    s.add_argument("--pca", help="pca.json from the pca subcommand")
    s.set_defaults(func=cmd_report)
    return p


def _apply_config(parser: argparse.ArgumentParser, args: argparse.Namespace, argv) -> argparse.Namespace:
    """Fill flags not given on the command line from the --config JSON."""
    if not getattr(args, "config", None):
        return args
    path = Path(args.config)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    cfg = json.loads(path.read_text(encoding="utf-8"))
    given = {a.split("=", 1)[0] for a in argv if a.startswith("--")}
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        if not hasattr(args, dest):
            raise UsageError(f"unknown config key {key!r} for {args.command}")
        if "--" + dest.replace("_", "-") not in given:
            setattr(args, dest, value)
    return args


def _normalize_paths(args: argparse.Namespace) -> None:
    for name in INPUT_ARGS + OUTPUT_ARGS + ("out_dir", "config"):
        v = getattr(args, name, None)
        if v:
            setattr(args, name, str(Path(v).resolve()))


def _command_name(args) -> str:
    return f"markov-{args.action}" if args.command == "markov" else args.command


def execute(args: argparse.Namespace) -> Path:
    run = Run(_command_name(args), args)
    args.func(run, args)
    return run.finish()


def verify_manifest(path) -> list[str]:
    """Re-run a recorded command into a scratch directory; return mismatching artifact keys."""
    manifest = RunManifest.load(path)
    with tempfile.TemporaryDirectory() as tmp:
        ns = argparse.Namespace(**manifest.args)
        ns.out_dir = tmp
        for name in OUTPUT_ARGS:
            if getattr(ns, name, None):
                setattr(ns, name, str(Path(tmp) / Path(getattr(ns, name)).name))
        ns.func = _FUNCS[manifest.args["command"]]
        ns.verify_manifest = None
        new_path = execute(ns)
        fresh = RunManifest.load(new_path)
    bad = []
    for key, meta in manifest.artifacts.items():
        other = fresh.artifacts.get(key)
        if other is None or other["sha256"] != meta["sha256"]:
            bad.append(key)
    bad += [k for k in fresh.artifacts if k not in manifest.artifacts]
    return bad


_FUNCS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "group": cmd_group,
    "trajectories": cmd_trajectories,
    "markov": cmd_markov,
    "pca": cmd_pca,
    "report": cmd_report,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.verify_manifest:
            bad = verify_manifest(args.verify_manifest)
            if bad:
                print(f"manifest verification FAILED for: {', '.join(bad)}", file=sys.stderr)
                return 1
            print("manifest verified: all artifact digests match")
            return 0
        if not args.command:
            parser.print_usage(sys.stderr)
            return 1
        args = _apply_config(parser, args, argv)
        _normalize_paths(args)
        manifest = execute(args)
        log.info("manifest written to %s", manifest)
        return 0
    except NumericalError as exc:
        print(f"panelsom: numerical failure: {exc}", file=sys.stderr)
        return 2
    except (PanelSomError, OSError, json.JSONDecodeError) as exc:
        print(f"panelsom: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
