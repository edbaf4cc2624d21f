"""Trace-complexity scoring and two-level top-K interface selection.

Complexity is a weighted combination of three min-max-normalized factors:
span count, component diversity (unique services plus unique
(component, framework) pairs), and end-to-end duration of the root span.
Interfaces are ranked by the mean score of their member traces; the top-K
interfaces each contribute their single highest-scoring trace.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .model import Corpus, Trace, dumps_canonical

WEIGHT_TOLERANCE = 1e-9


class SelectionError(Exception):
    pass


@dataclass(frozen=True)
class ComplexityWeights:
    w_len: float = 1.0 / 3.0
    w_div: float = 1.0 / 3.0
    w_dur: float = 1.0 / 3.0

    def __post_init__(self):
        for w in (self.w_len, self.w_div, self.w_dur):
            if w < 0 or w > 1:
                raise SelectionError(f"weight {w} outside [0, 1]")
        total = self.w_len + self.w_div + self.w_dur
        if abs(total - 1.0) > WEIGHT_TOLERANCE:
            raise SelectionError(f"weights must sum to 1, got {total}")


@dataclass(frozen=True)
class CorpusNorms:
    len_min: float
    len_max: float
    div_min: float
    div_max: float
    dur_min: float
    dur_max: float


def span_count(trace: Trace) -> int:
    return len(trace.spans)


def diversity(trace: Trace) -> int:
    services = {s.service for s in trace.spans}
    components = {(s.endpoint.component, s.endpoint.framework) for s in trace.spans}
    return len(services) + len(components)


def root_duration(trace: Trace) -> int:
    return trace.root_span().duration_us


def compute_norms(corpus: Corpus) -> CorpusNorms:
    if not corpus.traces:
        raise SelectionError("cannot compute norms for an empty corpus")
    lens = [span_count(t) for t in corpus.traces]
    divs = [diversity(t) for t in corpus.traces]
    durs = [root_duration(t) for t in corpus.traces]
    return CorpusNorms(min(lens), max(lens), min(divs), max(divs),
                       min(durs), max(durs))


def _norm(value: float, lo: float, hi: float) -> float:
    if hi <= lo:
        return 0.0  # degenerate factor: every trace identical on this axis
    return (value - lo) / (hi - lo)


def trace_complexity(trace: Trace, weights: ComplexityWeights,
                     norms: CorpusNorms) -> float:
    return (weights.w_len * _norm(span_count(trace), norms.len_min, norms.len_max)
            + weights.w_div * _norm(diversity(trace), norms.div_min, norms.div_max)
            + weights.w_dur * _norm(root_duration(trace), norms.dur_min, norms.dur_max))


def score_corpus(corpus: Corpus, weights: ComplexityWeights = None,
                 norms: CorpusNorms = None) -> dict:
    """Score every trace in one pass; returns trace_id -> score in [0, 1]."""
    weights = weights or ComplexityWeights()
    norms = norms or compute_norms(corpus)
    return {t.trace_id: trace_complexity(t, weights, norms) for t in corpus.traces}


def interface_score(cluster, per_trace_scores: dict) -> float:
    """Aggregate interface complexity: arithmetic mean over member traces."""
    members = cluster.member_trace_ids
    if not members:
        raise SelectionError(f"cluster {cluster.interface_id} has no members")
    return sum(per_trace_scores[tid] for tid in members) / len(members)


@dataclass(frozen=True)
class SelectedInterface:
    interface_id: str
    aggregate_score: float
    trace_id: str
    trace_score: float


def select_top_k(clusters: list, per_trace_scores: dict, k: int) -> list:
    """Top-k interfaces by aggregate score, each with its best member trace.

    Ties break by interface_id, the representative's ties by trace_id. A k
    beyond the cluster count truncates to all clusters.
    """
    if k < 1:
        raise SelectionError(f"k must be >= 1, got {k}")
    ranked = sorted(clusters,
                    key=lambda c: (-interface_score(c, per_trace_scores), c.interface_id))
    out = []
    for cluster in ranked[:k]:
        best = min(cluster.member_trace_ids,
                   key=lambda tid: (-per_trace_scores[tid], tid))
        out.append(SelectedInterface(
            interface_id=cluster.interface_id,
            aggregate_score=interface_score(cluster, per_trace_scores),
            trace_id=best,
            trace_score=per_trace_scores[best],
        ))
    return out


def load_selection_report(path) -> list:
    ranked = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            ranked.append(SelectedInterface(
                interface_id=rec["interface_id"],
                aggregate_score=rec["aggregate_score"],
                trace_id=rec["trace_id"],
                trace_score=rec["trace_score"],
            ))
    return ranked


def save_selection_report(selected: list, corpus: Corpus, path,
                          weights: ComplexityWeights = None) -> None:
    weights = weights or ComplexityWeights()
    norms = compute_norms(corpus)
    by_id = {t.trace_id: t for t in corpus.traces}
    with open(path, "w", encoding="utf-8") as fh:
        for rank, sel in enumerate(selected, start=1):
            trace = by_id[sel.trace_id]
            rec = {
                "rank": rank,
                "interface_id": sel.interface_id,
                "aggregate_score": sel.aggregate_score,
                "trace_id": sel.trace_id,
                "trace_score": sel.trace_score,
                "factors": {
                    "span_count": span_count(trace),
                    "diversity": diversity(trace),
                    "root_duration_us": root_duration(trace),
                },
            }
            fh.write(dumps_canonical(rec))
            fh.write("\n")
