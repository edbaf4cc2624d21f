"""End-to-end campaign orchestration: analyze, select, plan, execute.

This is the glue the CLI subcommands and the acceptance suite share. History
awareness lives here: when a history is supplied, ranked interfaces whose
every case already passed in the current epoch are skipped, so successive
small-K campaigns progressively explore new interfaces instead of re-testing
passed ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .aggregation import ClusterParams, cluster_interfaces
from .executor import (CampaignResult, OracleCriteria, PhaseConfig, run_batch)
from .faults import FaultCatalog
from .model import Corpus
from .planner import PlanConfig, plan_targets
from .scheduler import History, filter_history, greedy_batch
from .selection import ComplexityWeights, score_corpus, select_top_k
from .sim.engine import System
from .sim.topology import TopologySpec
from .templating import (ManualVariableRegistry, ReplayContext,
                         SequentialIdSource, build_template, instantiate)


@dataclass
class Analysis:
    corpus: Corpus
    clusters: list
    scores: dict                 # trace_id -> complexity score
    ranked: list                 # SelectedInterface, best-first, all interfaces
    templates: dict              # interface_id -> TraceTemplate

    def traces_by_id(self) -> dict:
        return {t.trace_id: t for t in self.corpus.traces}


def analyze_corpus(corpus: Corpus, weights: Optional[ComplexityWeights] = None,
                   registry: Optional[ManualVariableRegistry] = None,
                   params: Optional[ClusterParams] = None) -> Analysis:
    """Aggregation, scoring, full ranking, and templates for every cluster."""
    registry = registry or ManualVariableRegistry()
    clusters = cluster_interfaces(corpus, params)
    scores = score_corpus(corpus, weights)
    ranked = select_top_k(clusters, scores, k=len(clusters))
    by_id = {t.trace_id: t for t in corpus.traces}
    window = (corpus.meta.window_start_us, corpus.meta.window_end_us)
    templates = {}
    for cluster in clusters:
        members = [by_id[tid] for tid in cluster.member_trace_ids]
        templates[cluster.interface_id] = build_template(
            members, registry, interface_id=cluster.interface_id,
            window=window, scores=scores)
    return Analysis(corpus=corpus, clusters=clusters, scores=scores,
                    ranked=ranked, templates=templates)


def resolve_k(k, available: int) -> int:
    if k in (None, "all"):
        return available
    k = int(k)
    return min(k, available)


def plan_campaign(analysis: Analysis, catalog: FaultCatalog, k,
                  plan_config: PlanConfig,
                  history: Optional[History] = None) -> tuple:
    """Select top-K interfaces and plan their cases.

    Without history this is the plain two-level selection. With history,
    ranked interfaces whose entire case set is skippable (all PASS in the
    current epoch, or nothing to test) are passed over until K contributing
    interfaces are found.
    """
    traces = analysis.traces_by_id()
    k = resolve_k(k, len(analysis.ranked))
    if history is None:
        selected = analysis.ranked[:k]
        cases = plan_targets([(s.interface_id, traces[s.trace_id]) for s in selected],
                             analysis.corpus, catalog, plan_config)
        return selected, cases

    selected = []
    cases = []
    for candidate in analysis.ranked:
        if len(selected) >= k:
            break
        interface_cases = plan_targets(
            [(candidate.interface_id, traces[candidate.trace_id])],
            analysis.corpus, catalog, plan_config)
        pending, _skipped = filter_history(interface_cases, history)
        if not pending:
            continue
        selected.append(candidate)
        cases.extend(pending)
    return selected, cases


def run_campaign(topology: TopologySpec, analysis: Analysis,
                 catalog: FaultCatalog, cases: list, phases: PhaseConfig,
                 criteria: Optional[OracleCriteria] = None, seed: int = 0,
                 entry_only: bool = False, parallel: int = 1,
                 history: Optional[History] = None) -> CampaignResult:
    if not cases:
        return CampaignResult(test_runs=[], startup_count=0, initial_runs=0,
                              reschedules=0)
    criteria = criteria or OracleCriteria()
    plan = greedy_batch(cases)
    return run_batch(plan, topology, list(analysis.templates.values()), catalog,
                     phases, criteria, seed=seed, entry_only=entry_only,
                     parallel=parallel, history=history)


def healthy_success_rates(analysis: Analysis) -> dict:
    """Per-interface entry success over the recorded corpus (oracle history)."""
    traces = analysis.traces_by_id()
    rates = {}
    for cluster in analysis.clusters:
        oks = [1 if traces[tid].root_span().status == "ok" else 0
               for tid in cluster.member_trace_ids]
        rates[cluster.interface_id] = sum(oks) / len(oks)
    return rates


@dataclass
class ReplayCheck:
    interface_ok: dict = field(default_factory=dict)  # interface_id -> bool
    failures: dict = field(default_factory=dict)      # interface_id -> status

    @property
    def success_fraction(self) -> float:
        if not self.interface_ok:
            return 0.0
        return sum(self.interface_ok.values()) / len(self.interface_ok)


def replay_check(topology: TopologySpec, analysis: Analysis, seed: int = 0,
                 attempts: int = 3) -> ReplayCheck:
    """Instantiate each interface's template against a healthy system.

    The system clock is advanced beyond the recording window plus skew first,
    so un-templated time-sensitive values are genuinely stale; repeated
    attempts expose un-templated single-use tokens.
    """
    system = System(topology, seed)
    horizon = (analysis.corpus.meta.window_end_us
               + 2 * topology.validation_skew_us)
    system.run_until(max(horizon, system.boot_complete_us))
    ids = SequentialIdSource(f"rc{seed % 1_000_000:06d}")
    check = ReplayCheck()
    for interface_id in sorted(analysis.templates):
        template = analysis.templates[interface_id]
        ok = True
        for _ in range(attempts):
            request = instantiate(template, ReplayContext(system.now_us, ids))
            response, _trace = system.submit_request(request)
            if not response.ok:
                ok = False
                check.failures[interface_id] = response.status
                break
        check.interface_ok[interface_id] = ok
    return check
