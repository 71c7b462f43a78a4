"""Command-line experiment runner.

    rib <command> [--config FILE] [--out DIR] [--seed N] [--jobs N]
    rib validate --config FILE

Commands: train, sweep-beta, estimate-fcmi, gap-study, verify-theory,
dynamics. Every command writes a bundle directory with per-run metric CSVs
and JSON records, curve point files and a ``manifest.json`` that lists each
file with its sha256 digest. The default bundle location is
``$RIB_OUTPUT_ROOT/<command>-seed<seed>`` (``rib-output/...`` when unset).

Exit status: 0 when every run completed and every hard check passed, 1 when
a run failed or a hard check failed, 2 for an invalid configuration.
"""

import argparse
import csv
import hashlib
import io
import json
import math
import os
import platform
import sys
from datetime import datetime, timezone

import numpy as np
import scipy
import sklearn

from . import __version__
from .config import (
    COMMANDS,
    critic_config,
    output_dir,
    resolve,
    spec_digest,
    train_config,
    validate,
)
from .data import FormatError, gaussian_mixture, load_csv, load_idx, subsample
from .evaluation import (
    LOG_E_OVER_2,
    estimate_recognizability,
    gaussian_roc,
    lemma1_numeric,
    roc_conditions_check,
    theorem1_gaussian_check,
)
from .experiments import (
    RunFailure,
    best_beta,
    estimate_fcmi,
    gap_study,
    run_parallel,
    sweep_beta,
)
from .rng import derive_seed, stream
from .training import METRIC_COLUMNS, METRICS_SCHEMA_VERSION, ConfigError, DivergenceError, fit

MANIFEST_SCHEMA_VERSION = 1
CSV_SCHEMAS = {
    "metrics": {"version": METRICS_SCHEMA_VERSION, "columns": list(METRIC_COLUMNS)},
    "roc": {"version": 1, "columns": ["fpr", "tpr", "threshold"]},
    "region": {"version": 1, "columns": ["x", "y"]},
    "series_beta": {"version": 1, "columns": ["arm", "beta", "split", "seed", "test_err", "train_err"]},
    "series_gap": {
        "version": 1,
        "columns": ["run", "n", "seed", "train_err", "test_err", "gap", "recognizability", "fcmi_bound",
                    "mean_mi"],
    },
    "series_dynamics": {
        "version": 1,
        "columns": ["run", "epoch", "recognizability", "train_err", "test_err", "gap"],
    },
}

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v)) if math.isfinite(v) else ""
    return str(v)


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


class Bundle:
    """Files emitted by one command, plus the manifest bookkeeping."""

    def __init__(self, directory, spec):
        self.dir = directory
        self.spec = spec
        self.files = []
        self.checks = []
        self.started = _now()
        os.makedirs(directory, exist_ok=True)

    def write(self, name, text):
        path = os.path.join(self.dir, name)
        data = text.encode("utf-8")
        with open(path, "wb") as f:
            f.write(data)
        self.files.append(name)
        return path

    def write_json(self, name, obj):
        return self.write(name, json.dumps(_json_safe(obj), indent=2, sort_keys=True) + "\n")

    def write_run(self, record):
        self.write(f"metrics_{record.label}.csv", record.metrics_csv())
        self.write(f"run_{record.label}.json", record.to_json() + "\n")

    def write_curves(self, label, report):
        c = report.curve
        thresholds = np.concatenate([[np.inf], c.thresholds])
        self.write(f"roc_{label}.csv", _csv_text(CSV_SCHEMAS["roc"]["columns"],
                                                 zip(c.fpr, c.tpr, thresholds)))
        self.write(f"region_{label}.csv", _csv_text(CSV_SCHEMAS["region"]["columns"], report.region))

    def check(self, name, passed, hard=True, **detail):
        self.checks.append({"name": name, "passed": bool(passed), "hard": hard, **detail})

    def finish(self, partial, error=None):
        entries = []
        for name in sorted(set(self.files)):
            with open(os.path.join(self.dir, name), "rb") as f:
                data = f.read()
            entries.append({"name": name, "sha256": hashlib.sha256(data).hexdigest(), "bytes": len(data)})
        hard_ok = all(c["passed"] for c in self.checks if c["hard"])
        manifest = {
            "schema_version": MANIFEST_SCHEMA_VERSION,
            "command": self.spec["command"],
            "spec": self.spec,
            "spec_digest": spec_digest(self.spec),
            "started": self.started,
            "finished": _now(),
            "versions": {
                "rib": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "scikit-learn": sklearn.__version__,
            },
            "csv_schemas": CSV_SCHEMAS,
            "partial": bool(partial),
            "error": error,
            "checks": self.checks,
            "hard_checks_passed": hard_ok,
            "files": entries,
        }
        with open(os.path.join(self.dir, "manifest.json"), "w") as f:
            json.dump(_json_safe(manifest), f, indent=2, sort_keys=True)
            f.write("\n")
        return EXIT_OK if not partial and hard_ok else EXIT_FAILED


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _json_safe(obj.tolist())
    return obj


# ---- data ---------------------------------------------------------------------


def load_dataset(d):
    """Build a LabeledDataset from a ``data``/``ghost_data`` section."""
    if d["kind"] == "gaussian_mixture":
        return gaussian_mixture(
            d["dim"], d["num_classes"] or 2, d["n"], d["seed"],
            scale=d["scale"], label_noise_rate=d["label_noise_rate"], separation=d["separation"],
        )
    if d["kind"] == "idx":
        return load_idx(d["images"], d["labels"], d["num_classes"] or 10)
    return load_csv(d["path"], d["num_classes"])


def make_splits(spec, pool, ghost_pool, count):
    """``count`` (train, ghost, test) splits drawn from the experiment seed."""
    sp = spec["split"]
    ntr, ngh = sp["train"], sp["ghost"]
    used = ntr + (0 if ghost_pool is not None else ngh)
    ntest = sp["test"] if sp["test"] is not None else len(pool) - used
    if used + ntest > len(pool) or ntest < 1:
        raise ConfigError(f"split: pool of {len(pool)} rows cannot supply {used} + {ntest} rows")
    splits = []
    for s in range(count):
        perm = stream(spec["seed"], "split", s).permutation(len(pool))
        train = pool.take(perm[:ntr])
        if ghost_pool is None:
            ghost = pool.take(perm[ntr : ntr + ngh])
        else:
            ghost = subsample(ghost_pool, ngh, derive_seed(spec["seed"], "ghost-draw", s))
        test = pool.take(perm[used : used + ntest])
        splits.append((train, ghost, test))
    return splits


# ---- commands -----------------------------------------------------------------


def _recog_rows(model, train, ghost, m):
    return model.represent(train.features[:m]), model.represent(ghost.features[:m])


def _pairs(spec, train, ghost):
    m = min(len(train), len(ghost))
    return min(spec["recog_pairs"], m) if spec["recog_pairs"] else m


def cmd_train(spec, bundle):
    pool = load_dataset(spec["data"])
    ghost_pool = load_dataset(spec["ghost_data"]) if spec["ghost_data"] else None
    train, ghost, test = make_splits(spec, pool, ghost_pool, 1)[0]
    model, _, record = fit(train_config(spec), train, ghost, test)
    record.label = "train"
    m = _pairs(spec, train, ghost)
    report = estimate_recognizability(*_recog_rows(model, train, ghost, m),
                                      seed=derive_seed(spec["seed"], "recognizability"),
                                      config=critic_config(spec))
    record.recognizability = report.recognizability
    bundle.write_run(record)
    bundle.write_curves("train", report)
    print(f"train: train_err={record.train_err:.4f} test_err={record.test_err:.4f} "
          f"recognizability={report.recognizability:.4f}")


def cmd_sweep_beta(spec, bundle):
    pool = load_dataset(spec["data"])
    ghost_pool = load_dataset(spec["ghost_data"]) if spec["ghost_data"] else None
    splits = make_splits(spec, pool, ghost_pool, spec["sweep"]["splits"])
    records, summary = sweep_beta(splits, train_config(spec), spec["sweep"]["betas"], spec["jobs"])
    rows = []
    for rec in records:
        bundle.write_run(rec)
        split = int(rec.label.rsplit("-s", 1)[1])
        arm = "ce" if rec.objective == "ce" else "rib"
        rows.append((arm, None if arm == "ce" else rec.beta, split, rec.seed, rec.test_err, rec.train_err))
    bundle.write("series_beta.csv", _csv_text(CSV_SCHEMAS["series_beta"]["columns"], rows))
    best = best_beta(summary)
    wins = int(sum(r < c for r, c in zip(summary[best], summary["ce"])))
    bundle.write_json("run_sweep.json", {
        "mean_test_err": {str(k): float(np.mean(v)) for k, v in summary.items()},
        "best_beta": best,
        "paired_wins": wins,
        "splits": len(splits),
    })
    for key, values in summary.items():
        print(f"sweep-beta: {key!s:>6} mean test_err={np.mean(values):.4f}")
    print(f"sweep-beta: best beta {best:g} beats CE on {wins}/{len(splits)} splits")


def _gap_rows(runs):
    return [
        (r.label, r.n, r.record.seed, r.record.train_err, r.record.test_err, r.record.gap,
         r.record.recognizability, r.record.fcmi_bound, r.record.mean_mi)
        for r in runs
    ]


def cmd_estimate_fcmi(spec, bundle):
    pool = load_dataset(spec["data"])
    f = spec["fcmi"]
    est, runs = estimate_fcmi(pool, f["n"], train_config(spec), f["k1"], f["k2"], seed=spec["seed"],
                              jobs=spec["jobs"])
    for r in runs:
        r.record.fcmi_bound, r.record.mean_mi = est.bound, est.mean_mi
        bundle.write_run(r.record)
    bundle.write_json("run_fcmi.json", {
        **est.to_dict(),
        "mean_train_err": float(np.mean([r.record.train_err for r in runs])),
        "mean_test_err": float(np.mean([r.record.test_err for r in runs])),
        "mean_gap": float(np.mean([r.record.gap for r in runs])),
    })
    print(f"estimate-fcmi: mean MI {est.mean_mi:.4f} nats, bound {est.bound:.4f}, "
          f"mean gap {np.mean([r.record.gap for r in runs]):.4f}")


def cmd_gap_study(spec, bundle):
    pool = load_dataset(spec["data"])
    g = spec["gap"]
    study = gap_study(pool, g["sizes"], train_config(spec), g["k1"], g["k2"], seed=spec["seed"],
                      jobs=spec["jobs"], critic_config=critic_config(spec), eval_every=g["eval_every"])
    for r in study.runs:
        bundle.write_run(r.record)
        if r.recog is not None:
            bundle.write_curves(r.label, r.recog)
        mi = study.estimates[r.n].mean_mi
        limit = mi + LOG_E_OVER_2
        bundle.check(f"recognizability-bound[{r.label}]", 0 <= r.record.recognizability <= limit,
                     hard=False, value=r.record.recognizability, limit=limit)
    bundle.write("series_gap.csv", _csv_text(CSV_SCHEMAS["series_gap"]["columns"], _gap_rows(study.runs)))
    if study.dynamics:
        _write_dynamics(bundle, [r.record for r in study.runs])
    bundle.write_json("run_gap.json", {
        "sizes": study.sizes,
        "recog_pairs": study.recog_pairs,
        "estimates": {str(n): e.to_dict() for n, e in study.estimates.items()},
        "report": study.report.to_dict(),
    })
    for n in study.sizes:
        rs = [r.record for r in study.runs if r.n == n]
        print(f"gap-study: n={n:>6} gap={np.mean([r.gap for r in rs]):.4f} "
              f"recognizability={np.mean([r.recognizability for r in rs]):.4f} "
              f"bound={study.estimates[n].bound:.4f}")
    print(f"gap-study: spearman(recognizability, gap) = {study.report.spearman}")


def _dynamics_task(label, config, train, ghost, test, m, ccfg, every):
    rseed = derive_seed(config.seed, "recognizability")

    def callback(epoch, model):
        if (epoch + 1) % every == 0 or epoch + 1 == config.epochs:
            rep = estimate_recognizability(*_recog_rows(model, train, ghost, m), seed=rseed, config=ccfg)
            return rep.recognizability
        return None

    try:
        model, _, record = fit(config, train, ghost, test, callback)
    except DivergenceError as exc:
        raise RunFailure(label, exc) from exc
    record.label = label
    record.recognizability = record.dynamics[-1][1]
    return record


def _write_dynamics(bundle, records):
    rows = []
    for rec in records:
        for epoch, value in rec.dynamics:
            e = rec.epochs[epoch]
            rows.append((rec.label, epoch, value, e["train_err"], e["test_err"],
                         e["test_err"] - e["train_err"]))
    bundle.write("series_dynamics.csv", _csv_text(CSV_SCHEMAS["series_dynamics"]["columns"], rows))


def cmd_dynamics(spec, bundle):
    pool = load_dataset(spec["data"])
    ghost_pool = load_dataset(spec["ghost_data"]) if spec["ghost_data"] else None
    train, ghost, test = make_splits(spec, pool, ghost_pool, 1)[0]
    m = _pairs(spec, train, ghost)
    every = spec["dynamics"]["eval_every"]
    tasks = [
        (objective, train_config(spec, objective=objective), train, ghost, test, m, critic_config(spec), every)
        for objective in spec["dynamics"]["objectives"]
    ]
    records = run_parallel(_dynamics_task, tasks, spec["jobs"])
    for rec in records:
        bundle.write_run(rec)
        print(f"dynamics: {rec.label} final recognizability {rec.recognizability:.4f} gap {rec.gap:.4f}")
    _write_dynamics(bundle, records)


def cmd_verify_theory(spec, bundle):
    th = spec["theory"]
    steps = int(round(th["mu_max"] / th["mu_step"]))
    grid = np.round(np.arange(steps + 1) * th["mu_step"], 12)
    rows = theorem1_gaussian_check(grid)
    t1 = all(r.passed for r in rows)
    bundle.check("theorem1-gaussian-grid", t1, points=len(rows),
                 min_slack=min(r.bound - r.recognizability for r in rows))

    lemma = []
    for mu in th["lemma_mus"]:
        integral, analytic, err = lemma1_numeric(float(mu))
        lemma.append({"mu": mu, "integral": integral, "analytic": analytic, "abs_err": err})
        bundle.check(f"lemma1[mu={mu:g}]", err <= th["lemma_tol"], abs_err=err, tol=th["lemma_tol"])

    analytic = roc_conditions_check(gaussian_roc(th["roc_mu"], th["roc_points"]), use_hull=False)
    bundle.check("roc-conditions-gaussian", analytic.passed, c1_err=analytic.c1_err,
                 c2=analytic.c2_ok, c3=analytic.c3_ok)

    # an empirical curve from a freshly trained critic, checked on its convex hull
    rng = stream(spec["seed"], "theory-samples")
    members = rng.standard_normal((400, 2)) + th["roc_mu"]
    nonmembers = rng.standard_normal((400, 2))
    report = estimate_recognizability(members, nonmembers, seed=spec["seed"], config=critic_config(spec))
    empirical = roc_conditions_check(report.curve)
    bundle.check("roc-conditions-empirical-hull", empirical.passed, c1_err=empirical.c1_err,
                 c2=empirical.c2_ok, c3=empirical.c3_ok)
    bundle.write_curves("theory-empirical", report)

    bundle.write_json("theory.json", {
        "theorem1": [vars(r) for r in rows],
        "lemma1": lemma,
        "roc_conditions": {
            "gaussian": {"mu": th["roc_mu"], "points": th["roc_points"], **vars(analytic),
                         "passed": analytic.passed},
            "empirical_hull": {**vars(empirical), "passed": empirical.passed,
                               "recognizability": report.recognizability},
        },
    })
    for c in bundle.checks:
        print(f"verify-theory: {'PASS' if c['passed'] else 'FAIL'} {c['name']}")


HANDLERS = {
    "train": cmd_train,
    "sweep-beta": cmd_sweep_beta,
    "estimate-fcmi": cmd_estimate_fcmi,
    "gap-study": cmd_gap_study,
    "verify-theory": cmd_verify_theory,
    "dynamics": cmd_dynamics,
}


def run(spec):
    """Execute a resolved, valid experiment; returns (exit code, bundle directory)."""
    bundle = Bundle(output_dir(spec), spec)
    partial, error = False, None
    try:
        HANDLERS[spec["command"]](spec, bundle)
    except (RunFailure, DivergenceError, ConfigError, FormatError, OSError, ValueError) as exc:
        partial, error = True, f"{type(exc).__name__}: {exc}"
        print(f"{spec['command']}: run failed: {error}", file=sys.stderr)
    return bundle.finish(partial, error), bundle.dir


def _read_document(path):
    if path is None:
        return {}, []
    try:
        with open(path) as f:
            return json.load(f), []
    except OSError as exc:
        return None, [f"--config: cannot read {path}: {exc.strerror}"]
    except json.JSONDecodeError as exc:
        return None, [f"--config: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"]


def build_parser():
    parser = argparse.ArgumentParser(prog="rib", description="Recognizability-regularized training experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*COMMANDS, "validate"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON experiment document (defaults apply to missing fields)")
        p.add_argument("--out", help="bundle directory")
        p.add_argument("--seed", type=int, help="master seed, overrides the document")
        p.add_argument("--jobs", type=int, help="concurrent independent runs")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    document, problems = _read_document(args.config)
    command = None if args.command == "validate" else args.command
    if document is not None:
        spec, problems = resolve(document, command, args.seed, args.out, args.jobs)
        problems = problems + [p for p in validate(spec) if p not in problems]
    if args.command == "validate":
        for p in problems:
            print(p)
        if not problems:
            print("ok")
        return EXIT_USAGE if problems else EXIT_OK
    if problems:
        for p in problems:
            print(f"rib {args.command}: {p}", file=sys.stderr)
        return EXIT_USAGE
    code, directory = run(spec)
    print(f"{args.command}: bundle written to {directory} (exit {code})")
    return code


if __name__ == "__main__":
    sys.exit(main())
