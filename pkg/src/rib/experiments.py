"""Multi-run protocols built on single training runs.

* the f-CMI protocol: ``k1`` supersamples, each trained ``k2`` times under
  fresh selectors, with per-index plug-in MI on predicted-label pairs;
* the gap study: the same protocol over nested training sizes, with
  recognizability measured on the smallest subset;
* the beta sweep and recognizability dynamics.

Independent runs can be dispatched to worker processes; results are always
merged by run index, so the output does not depend on the worker count.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .data import SelectorMask, draw_selector, make_supersample, select_train
from .evaluation.gap import gap_report
from .evaluation.info import FcmiEstimate, per_index_mi
from .evaluation.recog import CriticFitConfig, estimate_recognizability
from .rng import derive_seed
from .training import DivergenceError, fit

BETA_GRID = (0.1, 1.0, 10.0, 100.0)


class RunFailure(RuntimeError):
    def __init__(self, label, cause):
        super().__init__(f"run {label} failed: {cause}")
        self.label = label


def run_parallel(fn, tasks, jobs=1):
    """Map ``fn`` over ``tasks`` (tuples of arguments), preserving order."""
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(fn, *t) for t in tasks]
        return [f.result() for f in futures]


@dataclass
class SupersampleRun:
    """Outcome of one training run inside a supersample protocol."""

    label: str
    n: int
    bits: np.ndarray
    pred_left: np.ndarray
    pred_right: np.ndarray
    record: object
    recog: object = None


def _pool_complement(pool_size, ss):
    used = np.zeros(pool_size, dtype=bool)
    used[ss.left_index] = True
    used[ss.right_index] = True
    return np.flatnonzero(~used)


def train_on_supersample(label, ss, u, config, test=None, recog_pairs=0, critic_config=None,
                         eval_every=0):
    """Train on ``ss`` selected by ``u`` (held-out halves act as the ghost set).

    Predictions on both supersample slots feed the f-CMI estimate. When
    ``recog_pairs`` > 0, recognizability is measured on the first
    ``recog_pairs`` (member, partner) pairs after training, and also every
    ``eval_every`` epochs when that is positive.
    """
    train, held = select_train(ss, u)
    rseed = derive_seed(config.seed, "recognizability")

    def recog_of(model):
        m = recog_pairs
        return estimate_recognizability(
            model.represent(train.features[:m]),
            model.represent(held.features[:m]),
            seed=rseed,
            config=critic_config,
        )

    def every_k(epoch, model):
        if (epoch + 1) % eval_every == 0:
            return recog_of(model).recognizability
        return None

    callback = every_k if recog_pairs and eval_every > 0 else None

    try:
        model, _, record = fit(config, train, held, test, callback)
    except DivergenceError as exc:
        raise RunFailure(label, exc) from exc
    record.label = label
    report = None
    if recog_pairs:
        report = recog_of(model)
        record.recognizability = report.recognizability
    return SupersampleRun(
        label,
        len(ss),
        np.asarray(u.bits),
        model.predict(ss.left.features),
        model.predict(ss.right.features),
        record,
        report,
    )


def _fcmi_from_runs(runs_by_supersample, n, k1, k2):
    per_ss, per_index = [], []
    for runs in runs_by_supersample:
        mi = per_index_mi(
            np.array([r.bits[:n] for r in runs]),
            np.array([r.pred_left[:n] for r in runs]),
            np.array([r.pred_right[:n] for r in runs]),
        )
        per_index.append(mi)
        per_ss.append(float(np.mean(mi)))
    return FcmiEstimate(per_ss, n, k1, k2, per_index)


def estimate_fcmi(pool, n, config, k1=5, k2=5, seed=0, test=None, jobs=1, runner=None):
    """Run the k1 x k2 supersample protocol and return (FcmiEstimate, runs).

    ``runner(label, ss, u, config, test)`` may replace the default training
    run; it must return a :class:`SupersampleRun`.
    """
    runner = runner or train_on_supersample
    tasks = []
    for j in range(k1):
        ss = make_supersample(pool, n, derive_seed(seed, "fcmi-supersample", j))
        if test is None:
            rest = _pool_complement(len(pool), ss)
            ss_test = pool.take(rest) if len(rest) else None
        else:
            ss_test = test
        for r in range(k2):
            u = draw_selector(n, derive_seed(seed, "fcmi-selector", j, r))
            run_cfg = replace(config, seed=derive_seed(seed, "fcmi-run", j, r))
            tasks.append((f"ss{j}-u{r}", ss, u, run_cfg, ss_test))
    runs = run_parallel(runner, tasks, jobs)
    grouped = [runs[j * k2 : (j + 1) * k2] for j in range(k1)]
    return _fcmi_from_runs(grouped, n, k1, k2), runs


@dataclass
class GapStudy:
    sizes: list
    estimates: dict  # n -> FcmiEstimate
    runs: list
    report: object
    recog_pairs: int
    dynamics: dict = field(default_factory=dict)

    def records(self):
        return [r.record for r in self.runs]


def gap_study(pool, sizes, config, k1=1, k2=5, seed=0, test=None, jobs=1, critic_config=None,
              eval_every=0):
    """Train on nested subsets and relate gap, recognizability and f-CMI bound.

    All sizes share each supersample draw and selector, so the training set
    of a smaller size is a prefix of every larger one. Recognizability is
    measured on the pairs of the smallest size.
    """
    sizes = sorted(int(s) for s in sizes)
    n_max, n_min = sizes[-1], sizes[0]
    critic_config = critic_config or CriticFitConfig()
    tasks = []
    for j in range(k1):
        full = make_supersample(pool, n_max, derive_seed(seed, "gap-supersample", j))
        if test is None:
            rest = _pool_complement(len(pool), full)
            ss_test = pool.take(rest) if len(rest) else None
        else:
            ss_test = test
        for r in range(k2):
            u_full = draw_selector(n_max, derive_seed(seed, "gap-selector", j, r))
            run_cfg = replace(config, seed=derive_seed(seed, "gap-run", j, r))
            for n in sizes:
                u = SelectorMask(u_full.bits[:n], u_full.seed)
                tasks.append(
                    (f"n{n}-ss{j}-u{r}", full.prefix(n), u, run_cfg, ss_test, n_min,
                     critic_config, eval_every)
                )
    runs = run_parallel(train_on_supersample, tasks, jobs)
    estimates = {}
    for n in sizes:
        by_n = [r for r in runs if r.n == n]
        grouped = [by_n[j * k2 : (j + 1) * k2] for j in range(k1)]
        est = _fcmi_from_runs(grouped, n, k1, k2)
        estimates[n] = est
        for r in by_n:
            r.record.fcmi_bound = est.bound
            r.record.mean_mi = est.mean_mi
    report = gap_report(
        [
            {
                "n": r.n,
                "train_err": r.record.train_err,
                "test_err": r.record.test_err,
                "recognizability": r.record.recognizability,
                "fcmi_bound": r.record.fcmi_bound,
                "seed": r.record.seed,
            }
            for r in runs
        ]
    )
    dynamics = {r.label: list(r.record.dynamics) for r in runs if r.record.dynamics}
    return GapStudy(sizes, estimates, runs, report, n_min, dynamics)


def _sweep_task(label, config, train, ghost, test):
    try:
        _, _, record = fit(config, train, ghost, test)
    except DivergenceError as exc:
        raise RunFailure(label, exc) from exc
    record.label = label
    return record


def sweep_beta(splits, config, betas=BETA_GRID, jobs=1):
    """CE baseline plus RIB at each beta, on every (train, ghost, test) split.

    Each split gets its own training seed, derived from ``config.seed``;
    all arms on a split share it, so arms are paired by split.
    Returns ``(records, summary)``; ``summary`` maps each arm (``"ce"`` or the
    beta value) to its per-split test errors, in split order.
    """
    tasks = []
    for s, (train, ghost, test) in enumerate(splits):
        base = replace(config, seed=derive_seed(config.seed, "sweep-run", s))
        tasks.append((f"ce-s{s}", replace(base, objective="ce", beta=0.0), train, ghost, test))
        for beta in betas:
            cfg = replace(base, objective="rib", beta=float(beta))
            tasks.append((f"rib-b{beta:g}-s{s}", cfg, train, ghost, test))
    records = run_parallel(_sweep_task, tasks, jobs)
    summary = {"ce": []}
    summary.update({float(b): [] for b in betas})
    for rec in records:
        key = "ce" if rec.objective == "ce" else float(rec.beta)
        summary[key].append(rec.test_err)
    return records, summary


def best_beta(summary):
    """The beta whose mean test error is lowest (ties go to the smaller beta)."""
    betas = sorted(k for k in summary if k != "ce")
    return min(betas, key=lambda b: (float(np.mean(summary[b])), b))
