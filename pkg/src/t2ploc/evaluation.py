"""Localization metrics: Recall@K, node-assignment accuracy, error buckets."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import IntegrityError, UndefinedMetricError

DEFAULT_KS = (5.0, 10.0, 15.0)


def recall_at(errors, k: float) -> float:
    """Fraction of errors ``<= k``; infinite errors never count."""
    if not k > 0:
        raise ValueError("K must be positive")
    errs = np.asarray(list(errors), dtype=float)
    if errs.size == 0:
        raise UndefinedMetricError("recall of an empty error list is undefined")
    return float(np.count_nonzero(errs <= k)) / errs.size


class AccuracyResult(NamedTuple):
    correct: int
    flags: list
    arity_ok: bool


def assignment_accuracy(pred, gt) -> AccuracyResult:
    """Per-hint agreement between predicted and ground-truth assignments.

    A prediction list of the wrong length is truncated or padded with wrong
    entries and reported through ``arity_ok``.
    """
    pred, gt = list(pred), list(gt)
    flags = []
    for i, g in enumerate(gt):
        if i >= len(pred):
            flags.append(False)
            continue
        p = pred[i]
        flags.append(p.grounded == g.grounded and (not g.grounded or p.matched_node == g.matched_node))
    return AccuracyResult(sum(flags), flags, len(pred) == len(gt))


def _quantile(sorted_vals, q: float) -> float:
    # linear interpolation between order statistics; infinite misses stay infinite
    pos = (len(sorted_vals) - 1) * q
    lo, frac = int(math.floor(pos)), pos - math.floor(pos)
    a = sorted_vals[lo]
    if frac == 0:
        return a
    b = sorted_vals[lo + 1]
    return math.inf if math.isinf(b) else a + (b - a) * frac


def _quantiles(values):
    if not values:
        return {"n": 0, "median": None, "q1": None, "q3": None}
    s = sorted(float(v) for v in values)
    return {"n": len(s), "median": _quantile(s, 0.5), "q1": _quantile(s, 0.25), "q3": _quantile(s, 0.75)}


def error_buckets(rows, n_hints: int | None = None) -> dict:
    """Median and interquartile range of errors, grouped by correct-node count.

    ``rows`` holds ``(error_m, correct_count)`` pairs.  Groups run from 0 to
    ``n_hints`` (default: the largest count seen); empty groups report
    ``n = 0`` and null quantiles.
    """
    rows = list(rows)
    top = n_hints if n_hints is not None else max((c for _, c in rows), default=0)
    groups = {c: [] for c in range(top + 1)}
    for err, c in rows:
        groups.setdefault(c, []).append(err)
    return {c: _quantiles(v) for c, v in sorted(groups.items())}


@dataclass
class EvalReport:
    n_queries: int
    recall: dict
    errors: dict
    correct_counts: dict
    per_hint_accuracy: float | None
    correct_histogram: dict
    buckets: dict
    arity_violations: list = field(default_factory=list)
    failed: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "n_queries": self.n_queries,
            "recall": {_fmt_k(k): v for k, v in self.recall.items()},
            "per_hint_accuracy": self.per_hint_accuracy,
            "correct_histogram": {str(k): v for k, v in self.correct_histogram.items()},
            "buckets": {str(k): _finite(v) for k, v in self.buckets.items()},
            "errors": {q: (None if math.isinf(e) else e) for q, e in self.errors.items()},
            "correct_counts": dict(self.correct_counts),
            "arity_violations": list(self.arity_violations),
            "failed": list(self.failed),
        }

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        with open(out / "report.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["query_id", "error_m", "correct_nodes"])
            for q in sorted(self.errors):
                w.writerow([q, repr(self.errors[q]), self.correct_counts[q]])
        with open(out / "buckets.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["correct_nodes", "n", "median", "q1", "q3"])
            for c, b in sorted(self.buckets.items()):
                w.writerow([c, b["n"], *("" if b[k] is None else repr(b[k]) for k in ("median", "q1", "q3"))])


def _fmt_k(k) -> str:
    return f"{k:g}"


def _finite(bucket: dict) -> dict:
    return {k: (None if isinstance(v, float) and math.isinf(v) else v) for k, v in bucket.items()}


def evaluate(queries, predictions, ks=DEFAULT_KS) -> EvalReport:
    """Join predictions to queries by id and aggregate every metric.

    Missing and failed predictions count as infinite error with zero correct
    assignments, so denominators always equal the number of queries.
    """
    by_id = {}
    for p in predictions:
        if p.query_id in by_id:
            raise IntegrityError(f"duplicate prediction for query {p.query_id!r}")
        by_id[p.query_id] = p
    queries = sorted(queries, key=lambda q: q.query_id)
    known = {q.query_id for q in queries}
    stray = sorted(set(by_id) - known)
    if stray:
        raise IntegrityError(f"prediction for unknown query {stray[0]!r}")

    errors, counts, arity, failed = {}, {}, [], []
    hint_flags = []
    n_hints = 0
    for q in queries:
        n_hints = max(n_hints, len(q.gt_assignments))
        p = by_id.get(q.query_id)
        if p is None or not p.ok:
            errors[q.query_id] = math.inf
            counts[q.query_id] = 0
            hint_flags.extend([False] * len(q.gt_assignments))
            failed.append(q.query_id)
            continue
        errors[q.query_id] = math.hypot(p.predicted_world[0] - q.xi[0], p.predicted_world[1] - q.xi[1])
        acc = assignment_accuracy(p.assignments, q.gt_assignments)
        counts[q.query_id] = acc.correct
        hint_flags.extend(acc.flags)
        if not acc.arity_ok:
            arity.append(q.query_id)

    errs = list(errors.values())
    recall = {float(k): (recall_at(errs, k) if errs else 0.0) for k in sorted(ks)}
    hist = {c: 0 for c in range(n_hints + 1)}
    for c in counts.values():
        hist[c] = hist.get(c, 0) + 1
    return EvalReport(
        n_queries=len(queries),
        recall=recall,
        errors=errors,
        correct_counts=counts,
        per_hint_accuracy=(sum(hint_flags) / len(hint_flags)) if hint_flags else None,
        correct_histogram=hist,
        buckets=error_buckets(((errors[q], counts[q]) for q in errors), n_hints),
        arity_violations=arity,
        failed=failed,
    )
