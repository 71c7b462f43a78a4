"""Experiment documents: defaults, merging and validation.

An experiment is described by one JSON document. Every field has a default
(see ``DEFAULTS``); fields not listed there are rejected. ``validate``
returns human-readable diagnostics of the form ``"<field.path>: message"``
and never touches the filesystem beyond existence checks.
"""

import copy
import hashlib
import json
import os
from dataclasses import fields
from types import SimpleNamespace

from .evaluation.recog import CriticFitConfig
from .experiments import BETA_GRID
from .training import OBJECTIVES, TrainConfig

COMMANDS = ("train", "sweep-beta", "estimate-fcmi", "gap-study", "verify-theory", "dynamics")
DATA_KINDS = ("gaussian_mixture", "idx", "csv")
OUTPUT_ROOT_ENV = "RIB_OUTPUT_ROOT"
DEFAULT_OUTPUT_ROOT = "rib-output"


def _train_defaults():
    d = TrainConfig().to_dict()
    del d["seed"]  # the experiment seed drives every run
    return d


def _recog_defaults():
    d = {f.name: getattr(CriticFitConfig(), f.name) for f in fields(CriticFitConfig)}
    d["hidden"] = list(d["hidden"])
    return d


DEFAULTS = {
    "command": None,
    "seed": 0,
    "jobs": 1,
    "out": None,
    "train": _train_defaults(),
    "data": {
        "kind": "gaussian_mixture",
        # gaussian_mixture
        "dim": 20,
        "num_classes": None,  # 2 for gaussian_mixture, 10 for idx, inferred for csv
        "n": 10000,
        "seed": 0,
        "label_noise_rate": 0.15,
        "separation": 2.0,
        "scale": 1.0,
        # idx
        "images": None,
        "labels": None,
        # csv
        "path": None,
    },
    "ghost_data": None,
    "split": {"train": 200, "ghost": 200, "test": None},
    "recog": _recog_defaults(),
    "recog_pairs": None,
    "sweep": {"betas": list(BETA_GRID), "splits": 3},
    "fcmi": {"n": 200, "k1": 5, "k2": 5},
    "gap": {"sizes": [200, 800, 3200], "k1": 1, "k2": 5, "eval_every": 0},
    "dynamics": {"eval_every": 5, "objectives": ["ce", "rib"]},
    "theory": {
        "mu_max": 10.0,
        "mu_step": 0.1,
        "lemma_mus": [0.5, 1.0, 2.0],
        "lemma_tol": 1e-3,
        "roc_mu": 1.0,
        "roc_points": 1000,
    },
}

# nested sections whose keys are checked against the defaults
SECTIONS = ("train", "data", "split", "recog", "sweep", "fcmi", "gap", "dynamics", "theory")


class SpecError(ValueError):
    def __init__(self, diagnostics):
        super().__init__("; ".join(diagnostics))
        self.diagnostics = list(diagnostics)


def _merge(default, given, path, problems):
    if not isinstance(given, dict):
        problems.append(f"{path}: expected an object, got {type(given).__name__}")
        return copy.deepcopy(default)
    out = copy.deepcopy(default)
    for key, value in given.items():
        if key not in default:
            problems.append(f"{path}.{key}: unknown field".lstrip("."))
        else:
            out[key] = value
    return out


def resolve(document, command=None, seed=None, out=None, jobs=None):
    """Merge ``document`` over the defaults and apply CLI overrides.

    Returns ``(spec, problems)``; unknown fields land in ``problems``.
    """
    problems = []
    spec = copy.deepcopy(DEFAULTS)
    if document is None:
        document = {}
    if not isinstance(document, dict):
        return spec, ["<root>: expected a JSON object"]
    for key, value in document.items():
        if key not in DEFAULTS:
            problems.append(f"{key}: unknown field")
        elif key in SECTIONS:
            spec[key] = _merge(DEFAULTS[key], value, key, problems)
        elif key == "ghost_data" and value is not None:
            spec[key] = _merge(DEFAULTS["data"], value, key, problems)
        else:
            spec[key] = value
    if command is not None:
        if spec["command"] not in (None, command):
            problems.append(f"command: document says {spec['command']!r} but {command!r} was requested")
        spec["command"] = command
    for key, value in (("seed", seed), ("out", out), ("jobs", jobs)):
        if value is not None:
            spec[key] = value
    return spec, problems


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _same_kind(value, default):
    if default is None:  # optional integer
        return value is None or _is_int(value)
    if isinstance(default, bool):
        return isinstance(value, bool)
    if isinstance(default, int):
        return _is_int(value)
    if isinstance(default, float):
        return _is_num(value)
    if isinstance(default, list):
        return isinstance(value, list) and all(_is_int(v) and v >= 1 for v in value)
    return isinstance(value, type(default))


def _kind_name(default):
    if default is None:
        return "null or an integer"
    if isinstance(default, list):
        return "a list of positive integers"
    return {bool: "a boolean", int: "an integer", float: "a number", str: "a string"}[type(default)]


def _check_data(d, path, out):
    kind = d.get("kind")
    if kind not in DATA_KINDS:
        out.append(f"{path}.kind: must be one of {DATA_KINDS}, got {kind!r}")
        return
    if kind == "gaussian_mixture":
        for key, lo in (("dim", 1), ("num_classes", 2), ("n", 2)):
            if key == "num_classes" and d[key] is None:
                continue
            if not _is_int(d[key]) or d[key] < lo:
                out.append(f"{path}.{key}: must be an integer >= {lo}")
        if not _is_int(d["seed"]) or d["seed"] < 0:
            out.append(f"{path}.seed: must be a non-negative integer")
        if not _is_num(d["label_noise_rate"]) or not 0 <= d["label_noise_rate"] <= 1:
            out.append(f"{path}.label_noise_rate: must lie in [0, 1]")
        for key in ("separation", "scale"):
            if not _is_num(d[key]) or d[key] <= 0:
                out.append(f"{path}.{key}: must be > 0")
    elif kind == "idx":
        for key in ("images", "labels"):
            if not d[key]:
                out.append(f"{path}.{key}: required for kind 'idx'")
            elif not os.path.isfile(d[key]):
                out.append(f"{path}.{key}: file not found: {d[key]}")
    else:
        if not d["path"]:
            out.append(f"{path}.path: required for kind 'csv'")
        elif not os.path.isfile(d["path"]):
            out.append(f"{path}.path: file not found: {d['path']}")
    if kind != "gaussian_mixture" and d["num_classes"] is not None and not (
        _is_int(d["num_classes"]) and d["num_classes"] >= 2
    ):
        out.append(f"{path}.num_classes: must be null or an integer >= 2")


def _check_int_list(values, path, out, lo=1):
    if not isinstance(values, list) or not values or not all(_is_int(v) and v >= lo for v in values):
        out.append(f"{path}: must be a non-empty list of integers >= {lo}")
        return False
    return True


def _writable(path):
    probe = os.path.abspath(path)
    while not os.path.exists(probe):
        parent = os.path.dirname(probe)
        if parent == probe:
            return False
        probe = parent
    return os.path.isdir(probe) and os.access(probe, os.W_OK)


def validate(spec):
    """Schema and cross-field diagnostics for a resolved or raw experiment document."""
    spec, out = resolve(spec)
    if spec["command"] is not None and spec["command"] not in COMMANDS:
        out.append(f"command: must be one of {COMMANDS}, got {spec['command']!r}")
    if not _is_int(spec["seed"]) or not 0 <= spec["seed"] < 2**64:
        out.append("seed: must be an integer in [0, 2**64)")
    if not _is_int(spec["jobs"]) or spec["jobs"] < 1:
        out.append("jobs: must be an integer >= 1")
    if spec["out"] is not None and not _writable(spec["out"]):
        out.append(f"out: directory is not writable: {spec['out']}")

    train = spec["train"]
    typed = True
    for key, default in _train_defaults().items():
        if not _same_kind(train[key], default):
            out.append(f"train.{key}: expected {_kind_name(default)}, got {train[key]!r}")
            typed = False
    if typed:
        out.extend(f"train.{p}" for p in TrainConfig.problems(SimpleNamespace(**train)))

    _check_data(spec["data"], "data", out)
    if spec["ghost_data"] is not None:
        _check_data(spec["ghost_data"], "ghost_data", out)

    split = spec["split"]
    for key in ("train", "ghost"):
        if not _is_int(split[key]) or split[key] < 2:
            out.append(f"split.{key}: must be an integer >= 2")
    if split["test"] is not None and (not _is_int(split["test"]) or split["test"] < 1):
        out.append("split.test: must be null (use the remainder) or an integer >= 1")

    recog = spec["recog"]
    for key in ("epochs", "batch_size", "folds", "negative_draws"):
        if not _is_int(recog[key]) or recog[key] < 1:
            out.append(f"recog.{key}: must be an integer >= 1")
    if _is_int(recog["folds"]) and recog["folds"] < 2:
        out.append("recog.folds: cross-fitting needs at least 2 folds")
    if not _is_num(recog["lr"]) or recog["lr"] <= 0:
        out.append("recog.lr: must be > 0")
    _check_int_list(list(recog["hidden"]), "recog.hidden", out)
    if spec["recog_pairs"] is not None and (not _is_int(spec["recog_pairs"]) or spec["recog_pairs"] < 4):
        out.append("recog_pairs: must be null or an integer >= 4")

    betas = spec["sweep"]["betas"]
    if not isinstance(betas, list) or not betas or not all(_is_num(b) and b > 0 for b in betas):
        out.append("sweep.betas: must be a non-empty list of positive numbers")
    if not _is_int(spec["sweep"]["splits"]) or spec["sweep"]["splits"] < 1:
        out.append("sweep.splits: must be an integer >= 1")

    for key in ("n", "k1", "k2"):
        if not _is_int(spec["fcmi"][key]) or spec["fcmi"][key] < 1:
            out.append(f"fcmi.{key}: must be an integer >= 1")
    gap = spec["gap"]
    sizes_ok = _check_int_list(gap["sizes"], "gap.sizes", out)
    for key in ("k1", "k2"):
        if not _is_int(gap[key]) or gap[key] < 1:
            out.append(f"gap.{key}: must be an integer >= 1")
    if not _is_int(gap["eval_every"]) or gap["eval_every"] < 0:
        out.append("gap.eval_every: must be an integer >= 0")
    dyn = spec["dynamics"]
    if not _is_int(dyn["eval_every"]) or dyn["eval_every"] < 1:
        out.append("dynamics.eval_every: must be an integer >= 1")
    if not isinstance(dyn["objectives"], list) or not dyn["objectives"] or not all(
        o in OBJECTIVES for o in dyn["objectives"]
    ):
        out.append(f"dynamics.objectives: must be a non-empty list drawn from {OBJECTIVES}")

    th = spec["theory"]
    for key in ("mu_max", "mu_step", "lemma_tol", "roc_mu"):
        if not _is_num(th[key]) or th[key] <= 0:
            out.append(f"theory.{key}: must be > 0")
    if not isinstance(th["lemma_mus"], list) or not all(_is_num(m) and m > 0 for m in th["lemma_mus"]):
        out.append("theory.lemma_mus: must be a list of positive numbers")
    if not _is_int(th["roc_points"]) or th["roc_points"] < 3:
        out.append("theory.roc_points: must be an integer >= 3")

    # cross-field checks against a synthetic pool of known size
    data = spec["data"]
    if data.get("kind") == "gaussian_mixture" and _is_int(data.get("n")):
        pool = data["n"]
        cmd = spec["command"]
        need_split = split["train"] + split["ghost"] + (split["test"] or 1)
        if cmd in ("train", "sweep-beta", "dynamics") and _is_int(split["train"]) and _is_int(
            split["ghost"]
        ) and need_split > pool:
            out.append(f"split: train + ghost + test rows ({need_split}) exceed data.n ({pool})")
        if cmd == "estimate-fcmi" and _is_int(spec["fcmi"]["n"]) and 2 * spec["fcmi"]["n"] > pool:
            out.append(f"fcmi.n: a supersample needs 2*n rows, data.n is {pool}")
        if cmd == "gap-study" and sizes_ok and 2 * max(gap["sizes"]) > pool:
            out.append(f"gap.sizes: a supersample needs 2*max(sizes) rows, data.n is {pool}")
    return out


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def spec_digest(spec):
    return hashlib.sha256(canonical_json(spec).encode()).hexdigest()


def train_config(spec, **overrides):
    train = {**spec["train"], **overrides}
    train.setdefault("seed", spec["seed"])
    return TrainConfig(**train)


def critic_config(spec):
    r = dict(spec["recog"])
    r["hidden"] = tuple(r["hidden"])
    return CriticFitConfig(**r)


def output_dir(spec):
    if spec["out"]:
        return spec["out"]
    root = os.environ.get(OUTPUT_ROOT_ENV, DEFAULT_OUTPUT_ROOT)
    return os.path.join(root, f"{spec['command']}-seed{spec['seed']}")
