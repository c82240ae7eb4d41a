"""Command-line front end: ``audit``, ``simulate`` and ``report``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 leakage found while
``--fail-on-leakage`` is set. Errors go to standard error as
``confound-audit: error[<code>]: <kind>: <message>``.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

from . import __version__
from .audit import (
    LEAKAGE_STRONG,
    LEAKAGE_SUSPECTED,
    VARIANTS,
    ConfoundSource,
    RopeConfig,
    run_audit,
)
from .cv import CVScheme, InnerSearch
from .data import KINDS, AuditWarning, balance_classes, load_csv, write_csv
from .errors import ConfoundAuditError, SimulationError
from .models import KINDS as MODEL_KINDS
from .models import ModelSpec
from .simgen import SWAP_MODES, SimSpec, generate

PROG = "confound-audit"
EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_LEAKAGE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Argument parser whose errors exit with the usage code instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        _fail(EXIT_USAGE, "usage", message)


def _fail(code, kind, message):
    print(f"{PROG}: error[{code}]: {kind}: {message}", file=sys.stderr)
    raise SystemExit(code)


# --------------------------------------------------------------------------
# audit configuration

AUDIT_DEFAULTS = {
    "data": None,
    "sim_spec": None,
    "target": None,
    "confounds": [],
    "taco": False,
    "simulated_r": None,
    "exclude": [],
    "strata": None,
    "kind": {},
    "missing_policy": "reject_file",
    "balance": False,
    "models": ["tree"],
    "max_depth": None,
    "min_samples_leaf": 1,
    "n_trees": 100,
    "mtry": None,
    "hidden_units": 100,
    "epochs": 200,
    "learning_rate": 1e-3,
    "batch_size": 32,
    "alpha": 1e-4,
    "ridge_lambda": 1e-8,
    "max_iter": 2000,
    "repeats": 10,
    "folds": 5,
    "seed": None,
    "variants": list(VARIANTS),
    "rope_halfwidth": 0.01,
    "rope_threshold": 0.95,
    "single_shuffle": False,
    "swap": None,
    "inner_search": None,
    "inner_folds": 5,
    "fail_on_leakage": False,
    "out_dir": "audit-report",
    "jobs": None,
}
# settings that change where or how fast the audit runs but not its result
RUNTIME_ONLY = ("out_dir", "jobs")


def _split_list(value):
    if value is None:
        return []
    if isinstance(value, str):
        return [v.strip() for v in value.split(",") if v.strip()]
    return list(value)


def _parse_kinds(value):
    if isinstance(value, dict):
        pairs = value.items()
    else:
        pairs = []
        for item in _split_list(value):
            if "=" not in item:
                raise UsageError(f"--kind expects column=kind, got {item!r}")
            pairs.append(item.split("=", 1))
    out = {}
    for col, kind in pairs:
        if kind not in KINDS:
            raise UsageError(f"unknown column kind {kind!r}; choose from {KINDS}")
        out[col] = kind
    return out


def _parse_grid(value):
    if value is None or isinstance(value, dict):
        return value
    try:
        grid = json.loads(value)
    except ValueError:
        path = Path(value)
        if not path.exists():
            raise UsageError("--inner-search expects a JSON object or a JSON file") from None
        grid = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(grid, dict) or not all(isinstance(v, list) and v for v in grid.values()):
        raise UsageError("--inner-search grid must map hyperparameter names to nonempty lists")
    return grid


def resolve_audit_config(args: argparse.Namespace) -> dict:
    """Merge defaults, the optional JSON config file and explicit flags (in
    increasing priority) and normalize list-valued settings."""
    cfg = dict(AUDIT_DEFAULTS)
    given = vars(args)
    if given.get("config"):
        try:
            file_cfg = json.loads(Path(given["config"]).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config file: {exc}") from None
        if not isinstance(file_cfg, dict):
            raise UsageError("config file must hold a JSON object")
        file_cfg = {k.replace("-", "_"): v for k, v in file_cfg.items()}
        unknown = sorted(set(file_cfg) - set(AUDIT_DEFAULTS))
        if unknown:
            raise UsageError(f"unknown config keys: {unknown}")
        cfg.update(file_cfg)
    cfg.update({k: v for k, v in given.items() if k in AUDIT_DEFAULTS})

    for key in ("confounds", "exclude", "models", "variants"):
        cfg[key] = _split_list(cfg[key])
    cfg["kind"] = _parse_kinds(cfg["kind"])
    cfg["inner_search"] = _parse_grid(cfg["inner_search"])

    if (cfg["data"] is None) == (cfg["sim_spec"] is None):
        raise UsageError("exactly one of --data and --sim-spec is required")
    if cfg["data"] is not None and not cfg["target"]:
        raise UsageError("--target is required with --data")
    if cfg["seed"] is None:
        raise UsageError("--seed is required")
    if cfg["taco"] and cfg["simulated_r"] is not None:
        raise UsageError("--taco and --simulated-r are mutually exclusive")
    bad = [v for v in cfg["variants"] if v not in VARIANTS]
    if bad or not cfg["variants"]:
        raise UsageError(f"--variants must be a nonempty subset of {','.join(VARIANTS)}")
    if not cfg["models"]:
        raise UsageError("--models needs at least one model")
    if cfg["swap"] is not None and cfg["swap"] not in SWAP_MODES:
        raise UsageError(f"--swap must be one of {SWAP_MODES}")
    return cfg


def _model_specs(cfg, task):
    specs = []
    for name in cfg["models"]:
        kind = name
        if name == "lr":
            kind = "logistic" if task == "classification" else "linear"
        if kind not in MODEL_KINDS:
            raise UsageError(f"unknown model {name!r}; choose from lr,{','.join(MODEL_KINDS)}")
        mtry = cfg["mtry"]
        if isinstance(mtry, str) and mtry.isdigit():
            mtry = int(mtry)
        try:
            specs.append(ModelSpec(
                kind=kind, max_depth=cfg["max_depth"], min_samples_leaf=cfg["min_samples_leaf"],
                n_trees=cfg["n_trees"], mtry=mtry, ridge_lambda=cfg["ridge_lambda"],
                max_iter=cfg["max_iter"], hidden_units=cfg["hidden_units"],
                epochs=cfg["epochs"], learning_rate=cfg["learning_rate"],
                batch_size=cfg["batch_size"], alpha=cfg["alpha"],
                label=None if name == kind else name))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    return specs


def _load_audit_data(cfg):
    """Dataset and default swap mode for the configured data source."""
    swap = "none"
    if cfg["sim_spec"] is not None:
        try:
            obj = json.loads(Path(cfg["sim_spec"]).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read sim spec: {exc}") from None
        spec = SimSpec.from_dict(obj)
        d = generate(spec).main
        swap = spec.swap
    else:
        d = load_csv(cfg["data"], cfg["target"], cfg["confounds"], cfg["kind"],
                     cfg["missing_policy"], cfg["exclude"], cfg["strata"])
    if cfg["balance"]:
        d = balance_classes(d, cfg["seed"])
    return d, swap


def cmd_audit(args) -> int:
    cfg = resolve_audit_config(args)
    d, sim_swap = _load_audit_data(cfg)
    swap = cfg["swap"] if cfg["swap"] is not None else sim_swap
    if cfg["taco"]:
        source = ConfoundSource("taco")
    elif cfg["simulated_r"] is not None:
        source = ConfoundSource("simulated", r=float(cfg["simulated_r"]), seed=cfg["seed"])
    else:
        source = ConfoundSource("user")
    models = _model_specs(cfg, d.target_kind)
    inner = None
    if cfg["inner_search"]:
        inner = InnerSearch(cfg["inner_search"], cfg["inner_folds"])
    scheme = CVScheme(repeats=cfg["repeats"], folds=cfg["folds"], seed=cfg["seed"],
                      inner_search=inner)
    rope = RopeConfig(cfg["rope_halfwidth"], cfg["rope_threshold"])
    echo = {k: v for k, v in cfg.items() if k not in RUNTIME_ONLY}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AuditWarning)
        report = run_audit(d, source, models, scheme, cfg["variants"], rope,
                           single_shuffle=cfg["single_shuffle"], swap=swap,
                           jobs=cfg["jobs"], config=echo)

    from .report import render_fold_csv, render_markdown, to_json

    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(to_json(report), encoding="utf-8")
    (out / "report.md").write_text(render_markdown(report), encoding="utf-8")
    (out / "fold_scores.csv").write_text(render_fold_csv(report), encoding="utf-8")
    label = report.verdict or "inconclusive"
    print(f"verdict: {label}")
    for reason in report.reasons:
        print(f"  {reason}")
    if cfg["fail_on_leakage"] and report.verdict in (LEAKAGE_SUSPECTED, LEAKAGE_STRONG):
        return EXIT_LEAKAGE
    return EXIT_OK


# --------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    fields = ("kind", "n", "seed", "p", "dist", "decimals", "extreme_fraction",
              "extreme_center", "extreme_sd", "exclude_extremes_test", "peak_offset",
              "peak_shift", "peak_sd", "target_sd", "swap")
    kw = {f: getattr(args, f) for f in fields if getattr(args, f) is not None}
    spec = SimSpec(**kw)
    result = generate(spec)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(result.main, out, result.extras)
    out.with_suffix(".json").write_text(spec.to_json() + "\n", encoding="utf-8")
    written = [out]
    if "rounded" in result.datasets:
        path = out.with_name(f"{out.stem}_rounded{out.suffix}")
        write_csv(result.datasets["rounded"], path)
        written.append(path)
    if "test_no_extremes" in result.datasets:
        path = out.with_name(f"{out.stem}_test{out.suffix}")
        write_csv(result.datasets["test_no_extremes"], path)
        written.append(path)
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


# --------------------------------------------------------------------------
# report


def _histogram_inputs(args):
    pair = _split_list(args.histograms)
    if len(pair) != 2:
        raise UsageError("--histograms expects FEATURE,CONFOUND")
    if not args.data or not args.target:
        raise UsageError("--histograms needs --data and --target")
    feature, confound = pair
    taco = confound == args.target
    d = load_csv(args.data, args.target, [] if taco else [confound],
                 exclude_cols=_split_list(args.exclude))
    if feature not in d.feature_names:
        raise UsageError(f"{feature!r} is not a feature column")
    x = d.features[:, d.feature_names.index(feature)]
    c = d.target if taco else d.confounds[:, d.confound_names.index(confound)]
    return feature, confound, x, c


def cmd_report(args) -> int:
    from . import report as rep

    out = Path(args.out_dir) if args.out_dir else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    if args.histograms:
        feature, confound, x, c = _histogram_inputs(args)
        hists = rep.conditional_histograms(x, c, bins=args.bins)
        text = rep.render_histogram_csv(hists, feature, confound)
        if out is None:
            sys.stdout.write(text)
        else:
            from .plotting import plot_histograms

            (out / "histograms.csv").write_text(text, encoding="utf-8")
            (out / "overlap.csv").write_text(rep.render_overlap_csv(hists), encoding="utf-8")
            plot_histograms(hists, feature, confound, out / "histograms.png")
        for phase, h in hists.items():
            print(f"overlap {phase}: {h['overlap']:.4f}", file=sys.stderr)
        return EXIT_OK

    if not args.report:
        raise UsageError("a report JSON file is required unless --histograms is given")
    r = rep.load_report(args.report)
    if args.format == "md":
        text, name = rep.render_markdown(r), "report.md"
    else:
        text, name = rep.render_fold_csv(r), "fold_scores.csv"
    if out is None:
        sys.stdout.write(text)
    else:
        from .plotting import plot_scores

        (out / name).write_text(text, encoding="utf-8")
        plot_scores(r, out / "scores.png")
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog=PROG, description="Audit tabular ML pipelines for confound leakage.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    S = argparse.SUPPRESS

    a = sub.add_parser("audit", help="run the leakage audit", argument_default=S)
    g = a.add_argument_group("data")
    g.add_argument("--data", help="input CSV with a header row")
    g.add_argument("--sim-spec", help="JSON simulation spec used instead of --data")
    g.add_argument("--target", help="target column")
    g.add_argument("--confounds", help="comma-separated confound columns")
    g.add_argument("--taco", action="store_true", help="use the target as the confound")
    g.add_argument("--simulated-r", type=float, help="simulate a confound at this correlation")
    g.add_argument("--exclude", help="comma-separated columns to ignore")
    g.add_argument("--strata", help="column defining the fold strata (not used as a feature)")
    g.add_argument("--kind", help="column kind overrides, e.g. age=continuous,site=categorical")
    g.add_argument("--missing-policy", choices=("reject_file", "drop_rows"))
    g.add_argument("--balance", action="store_true", help="undersample the majority class")
    g = a.add_argument_group("models")
    g.add_argument("--models", help="comma-separated: lr,dummy,linear,logistic,tree,forest,mlp")
    g.add_argument("--max-depth", type=int)
    g.add_argument("--min-samples-leaf", type=int)
    g.add_argument("--n-trees", type=int)
    g.add_argument("--mtry", help="features per split: sqrt, third, all or an integer")
    g.add_argument("--hidden-units", type=int)
    g.add_argument("--epochs", type=int)
    g.add_argument("--learning-rate", type=float)
    g.add_argument("--batch-size", type=int)
    g.add_argument("--alpha", type=float, help="MLP L2 penalty")
    g.add_argument("--ridge-lambda", type=float)
    g.add_argument("--max-iter", type=int)
    g = a.add_argument_group("evaluation")
    g.add_argument("--repeats", type=int)
    g.add_argument("--folds", type=int)
    g.add_argument("--seed", type=int, help="master seed (required)")
    g.add_argument("--variants", help=f"comma-separated subset of {','.join(VARIANTS)}")
    g.add_argument("--rope-halfwidth", type=float)
    g.add_argument("--rope-threshold", type=float)
    g.add_argument("--single-shuffle", action="store_true",
                   help="draw one shuffle for all repeats instead of one per repeat")
    g.add_argument("--swap", help="swap two cross-class values per fold: none, train, train_test")
    g.add_argument("--inner-search", help="JSON grid (or file) for nested hyperparameter search")
    g.add_argument("--inner-folds", type=int)
    g = a.add_argument_group("output")
    g.add_argument("--out-dir", help="directory for report.json, report.md, fold_scores.csv")
    g.add_argument("--fail-on-leakage", action="store_true",
                   help="exit 3 when the verdict is leakage_suspected or stronger")
    g.add_argument("--jobs", type=int, help="worker processes, 0 = all cores")
    g.add_argument("--config", help="JSON config file; flags override its values")
    a.set_defaults(func=cmd_audit)

    s = sub.add_parser("simulate", help="generate a simulated dataset")
    s.add_argument("--kind", required=True,
                   help="walkthrough, extremes, skewed, binary, swap or rounded (or full names)")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True, help="output CSV; the simulation settings go next to it as .json")
    s.add_argument("--p", type=int)
    s.add_argument("--dist", choices=("normal", "chi2_df3"))
    s.add_argument("--decimals", type=int)
    s.add_argument("--extreme-fraction", type=float)
    s.add_argument("--extreme-center", type=float)
    s.add_argument("--extreme-sd", type=float)
    s.add_argument("--exclude-extremes-test", action="store_true", default=None)
    s.add_argument("--peak-offset", type=float)
    s.add_argument("--peak-shift", type=float)
    s.add_argument("--peak-sd", type=float)
    s.add_argument("--target-sd", type=float)
    s.add_argument("--swap", choices=SWAP_MODES)
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("report", help="render a report or conditional histograms")
    r.add_argument("report", nargs="?", help="report.json written by audit")
    r.add_argument("--format", choices=("md", "csv"), default="md")
    r.add_argument("--out-dir", help="write files (and PNG figures) here instead of stdout")
    r.add_argument("--histograms", help="FEATURE,CONFOUND: binned conditional distributions")
    r.add_argument("--data", help="dataset CSV for --histograms")
    r.add_argument("--target", help="target column of --data")
    r.add_argument("--exclude", help="comma-separated columns of --data to ignore")
    r.add_argument("--bins", type=int, default=30)
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        _fail(EXIT_USAGE, "usage", "a subcommand is required")
    try:
        return args.func(args)
    except UsageError as exc:
        _fail(EXIT_USAGE, "usage", str(exc))
    except SimulationError as exc:
        code = EXIT_USAGE if args.command == "simulate" else EXIT_DATA
        _fail(code, type(exc).__name__, str(exc))
    except ConfoundAuditError as exc:
        _fail(EXIT_DATA, type(exc).__name__, str(exc))
    except ValueError as exc:
        _fail(EXIT_USAGE, "usage", str(exc))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
