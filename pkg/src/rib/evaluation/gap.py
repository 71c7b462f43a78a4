"""Aligning measured generalization gaps with recognizability and f-CMI bounds."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import spearmanr


@dataclass
class GapRow:
    n: int
    gap: float
    recognizability: float
    fcmi_bound: float
    seed: int = 0


@dataclass
class GapReport:
    rows: list
    spearman: float | None  # None when undefined
    note: str = ""

    def to_dict(self):
        return {
            "rows": [vars(r) for r in self.rows],
            "spearman_recognizability_gap": self.spearman,
            "note": self.note,
        }


def gap_report(records):
    """Tabulate (n, gap, recognizability, f-CMI bound) and their rank correlation.

    ``records`` are RunRecords (or mappings) carrying ``n``, ``train_err``,
    ``test_err``, ``recognizability`` and optionally ``fcmi_bound``.
    """
    rows = []
    for rec in records:
        get = rec.get if isinstance(rec, dict) else lambda k, d=None, r=rec: getattr(r, k, d)
        bound = get("fcmi_bound")
        rows.append(
            GapRow(
                n=int(get("n")),
                gap=float(get("test_err")) - float(get("train_err")),
                recognizability=float(get("recognizability")),
                fcmi_bound=float("nan") if bound is None else float(bound),
                seed=int(get("seed", 0)),
            )
        )
    if len(rows) < 2:
        return GapReport(rows, None, "fewer than two records")
    gaps = np.array([r.gap for r in rows])
    recs = np.array([r.recognizability for r in rows])
    if np.ptp(gaps) == 0 or np.ptp(recs) == 0:
        return GapReport(rows, None, "constant series (all ties)")
    rho = spearmanr(recs, gaps).statistic
    if rho is None or not math.isfinite(rho):
        return GapReport(rows, None, "correlation undefined")
    return GapReport(rows, float(rho))
