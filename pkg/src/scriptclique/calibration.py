"""Similarity-threshold sweep: clique counts and TPR against labelled cliques."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, replace
from typing import Iterable, Mapping

from .cliques import find_cliques
from .corpus import CorpusManifest
from .graph import AnalysisConfig
from .pipeline import PreparedCorpus, prepare

SAME_SOURCE = "same_source"
MIXED = "mixed"


@dataclass(frozen=True)
class GroundTruthLabel:
    fingerprint: frozenset[str]
    label: str

    def __post_init__(self):
        if not self.fingerprint:
            raise ValueError("label fingerprint must be nonempty")
        if self.label not in (SAME_SOURCE, MIXED):
            raise ValueError(f"unknown label {self.label!r}")


@dataclass(frozen=True)
class CalibrationRow:
    threshold: float
    n_cliques: int
    n_labeled: int
    tpr: float | None
    n_edges: int = 0


def load_labels(path) -> list[GroundTruthLabel]:
    """Labels file: a JSON list of ``{"fingerprint": [sha256...], "label": ...}``."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if isinstance(data, dict):
        data = data.get("labels", [])
    return [GroundTruthLabel(frozenset(item["fingerprint"]), item["label"]) for item in data]


def threshold_grid(t_min: float, t_max: float, step: float) -> list[float]:
    if not t_min < t_max:
        raise ValueError("t_min must be below t_max")
    if not step > 0:
        raise ValueError("step must be positive")
    n = int(math.floor((t_max - t_min) / step + 1e-9))
    return [round(t_min + i * step, 10) for i in range(n + 1)]


def clique_fingerprint(clique, prepared: PreparedCorpus) -> frozenset[str]:
    nodes = prepared.node_map()
    by_id = prepared.manifest.script_by_id
    return frozenset(by_id[s].content_hash for n in clique.node_ids for s in nodes[n].member_scripts)


def sweep_prepared(
    prepared: PreparedCorpus,
    labels: Iterable[GroundTruthLabel] = (),
    t_min: float = 0.40,
    t_max: float = 1.00,
    step: float = 0.05,
) -> list[CalibrationRow]:
    grid = threshold_grid(t_min, t_max, step)
    by_fingerprint: Mapping[frozenset[str], str] = {l.fingerprint: l.label for l in labels}
    # One graph at the lowest threshold; higher thresholds only drop edges.
    base = prepared.graph(replace(prepared.config, similarity_threshold=grid[0]))
    rows = []
    for t in grid:
        graph = base.at_threshold(t)
        cliques = find_cliques(graph, prepared.config)
        found = [by_fingerprint.get(clique_fingerprint(c, prepared)) for c in cliques]
        labeled = [f for f in found if f is not None]
        tpr = sum(f == SAME_SOURCE for f in labeled) / len(labeled) if labeled else None
        rows.append(CalibrationRow(t, len(cliques), len(labeled), tpr, len(graph.edges)))
    for prev, row in zip(rows, rows[1:]):
        if row.n_edges > prev.n_edges:
            raise AssertionError(
                f"edge count rose from {prev.n_edges} to {row.n_edges} at threshold {row.threshold}"
            )
    return rows


def sweep(
    corpus: CorpusManifest,
    labels: Iterable[GroundTruthLabel] = (),
    t_min: float = 0.40,
    t_max: float = 1.00,
    step: float = 0.05,
    config: AnalysisConfig | None = None,
) -> list[CalibrationRow]:
    return sweep_prepared(prepare(corpus, config or AnalysisConfig()), labels, t_min, t_max, step)


def rows_to_csv(rows: Iterable[CalibrationRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["threshold", "n_cliques", "n_labeled", "tpr"])
    for r in rows:
        writer.writerow([f"{r.threshold:.2f}", r.n_cliques, r.n_labeled, "" if r.tpr is None else f"{r.tpr:.6f}"])
    return buf.getvalue()
