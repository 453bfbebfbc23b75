"""Scoring a query suite: link AUC, label AUC, their average, HR@20% and macro F1."""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .inference import infer_deterministic, infer_mc
from .metrics import f1_macro, hit_rate_at_20, roc_auc
from .model import VgaePlusModel
from .queries import QuerySuite

__all__ = ["EvalReport", "evaluate", "write_reports"]

log = logging.getLogger(__name__)

POOLED_FAMILIES = ("single_neighbor", "single_link", "single_node")


@dataclass
class EvalReport:
    family: str
    mode: str
    inference: str
    n_queries: int
    link_auc: float | None = None
    label_auc: float | None = None
    joint_auc: float | None = None
    hr20: float | None = None
    f1_macro: float | None = None
    seconds_per_query: float = 0.0
    skipped_metric_queries: int = 0

    def as_rows(self) -> list[dict]:
        rows = []
        for metric in ("link_auc", "label_auc", "joint_auc", "hr20", "f1_macro"):
            value = getattr(self, metric)
            if value is not None:
                rows.append({"family": self.family, "mode": self.mode, "inference": self.inference, "metric": metric, "value": value})
        return rows


def _safe(metric, *args):
    try:
        return metric(*args)
    except ValidationError:
        return None


def _components(answer, query):
    link_scores = answer.link_p1
    link_truth = np.array([a for _, _, a in query.target_links], dtype=int)
    # one-vs-rest over every (node, class) cell, positive where the class is the asserted one
    dists = answer.label_dists
    cls_truth = np.array([c for _, c in query.target_labels], dtype=int)
    onehot = np.zeros_like(dists)
    if cls_truth.size:
        onehot[np.arange(cls_truth.size), cls_truth] = 1
    return link_scores, link_truth, dists.reshape(-1), onehot.reshape(-1), dists.argmax(axis=1) if dists.size else np.zeros(0, int), cls_truth


def evaluate(
    model: VgaePlusModel,
    suite: QuerySuite,
    inference: str = "deterministic",
    samples: int = 30,
    seed: int = 0,
) -> EvalReport:
    """Score ``suite`` with deterministic or Monte Carlo (``inference="mc"``) answers.

    Single-target families pool components over all queries before scoring.
    Joint families score each query separately and average; queries whose
    components hold only one class are left out of that metric.
    """
    if len(suite) == 0:
        raise ValidationError(f"suite {suite.family}/{suite.mode} is empty")
    if inference not in ("deterministic", "mc"):
        raise ValidationError(f"unknown inference mode {inference!r}")
    k = suite.queries[0].evidence_features[0][1].size if suite.queries[0].evidence_features else model.n_features
    if k != model.n_features:
        raise ValidationError(f"suite has {k} features, model expects {model.n_features}")

    parts = []
    t0 = time.perf_counter()
    for i, q in enumerate(suite.queries):
        if inference == "mc":
            ans = infer_mc(model, q, samples, seed=seed + i)
        else:
            ans = infer_deterministic(model, q)
        parts.append(_components(ans, q))
    elapsed = (time.perf_counter() - t0) / len(suite)
    label = "deterministic" if inference == "deterministic" else f"mc({samples})"
    report = EvalReport(suite.family, suite.mode, label, len(suite), seconds_per_query=elapsed)

    has_links = any(p[0].size for p in parts)
    has_labels = any(p[4].size for p in parts)
    if suite.family in POOLED_FAMILIES:
        if has_links:
            s = np.concatenate([p[0] for p in parts])
            y = np.concatenate([p[1] for p in parts])
            report.link_auc = _safe(roc_auc, s, y)
            report.hr20 = _safe(hit_rate_at_20, s, y)
        if has_labels:
            report.label_auc = _safe(roc_auc, np.concatenate([p[2] for p in parts]), np.concatenate([p[3] for p in parts]))
            report.f1_macro = f1_macro(np.concatenate([p[4] for p in parts]), np.concatenate([p[5] for p in parts]), model.n_classes)
    else:
        skipped = 0
        link_auc, hr, label_auc, f1 = [], [], [], []
        for p in parts:
            if p[0].size:
                v = _safe(roc_auc, p[0], p[1])
                if v is None:
                    skipped += 1
                else:
                    link_auc.append(v)
                hr.append(hit_rate_at_20(p[0], p[1]))
            if p[4].size:
                v = _safe(roc_auc, p[2], p[3])
                if v is None:
                    skipped += 1
                else:
                    label_auc.append(v)
                f1.append(f1_macro(p[4], p[5], model.n_classes))
        report.skipped_metric_queries = skipped
        report.link_auc = float(np.mean(link_auc)) if link_auc else None
        report.hr20 = float(np.mean(hr)) if hr else None
        report.label_auc = float(np.mean(label_auc)) if label_auc else None
        report.f1_macro = float(np.mean(f1)) if f1 else None
    if report.link_auc is not None and report.label_auc is not None:
        report.joint_auc = 0.5 * (report.link_auc + report.label_auc)
    return report


def write_reports(reports: list[EvalReport], json_path, csv_path, timing: bool = True) -> None:
    """JSON with every field, CSV with one row per (family, mode, metric).

    ``timing=False`` drops the wall-clock field so the files are reproducible.
    """
    rows = [asdict(r) for r in reports]
    if not timing:
        for row in rows:
            row.pop("seconds_per_query")
    Path(json_path).write_text(json.dumps(rows, indent=1) + "\n")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["family", "mode", "inference", "metric", "value"], lineterminator="\n")
        writer.writeheader()
        for r in reports:
            writer.writerows(r.as_rows())
