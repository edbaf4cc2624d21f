"""Three-phase test execution and the multi-level verification oracle.

A run boots a fresh simulator, replays its trace's template for a no-fault
startup phase, then executes its batched cases sequentially: arm the case's
fault for the injection phase, disarm for the recovery phase, and verdict
the collected metrics. The oracle checks entry metrics against phase-based
criteria and, at the granular level, the armed endpoint's hit and failure
counters plus the downstream effect (lost writes, undelivered messages).
Fail-fast: the first non-PASS verdict halts the run and the remaining cases
are rescheduled onto fresh systems.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from .faults import FaultCatalog
from .model import Endpoint, dumps_canonical
from .scheduler import History, Run, RunPlan, greedy_batch
from .sim.engine import System, replay_traffic
from .sim.topology import TopologySpec
from .templating import ReplayContext, SequentialIdSource, TraceTemplate, instantiate

VERDICT_PASS = "PASS"
VERDICT_NO_RECOVERY = "FAIL_NO_RECOVERY"
VERDICT_SILENT = "FAIL_SILENT"
VERDICT_NO_IMPACT = "FAIL_NO_IMPACT"
VERDICT_STARTUP = "STARTUP_FAILURE"
VERDICTS = (VERDICT_PASS, VERDICT_NO_RECOVERY, VERDICT_SILENT,
            VERDICT_NO_IMPACT, VERDICT_STARTUP)
FAIL_VERDICTS = (VERDICT_NO_RECOVERY, VERDICT_SILENT, VERDICT_NO_IMPACT)

SECOND_US = 1_000_000


class ExecutorError(Exception):
    pass


@dataclass(frozen=True)
class PhaseConfig:
    startup_us: int = 60 * SECOND_US
    inject_us: int = 60 * SECOND_US
    recover_us: int = 60 * SECOND_US
    rate_per_sec: int = 10

    def __post_init__(self):
        if min(self.startup_us, self.inject_us, self.recover_us) <= 0:
            raise ExecutorError("phase durations must be positive")
        if self.rate_per_sec <= 0:
            raise ExecutorError("replay rate must be positive")


@dataclass(frozen=True)
class EffectiveCriteria:
    startup_min: float
    inject_max: float
    recover_min: float

    def __post_init__(self):
        if not (0.0 <= self.inject_max < self.recover_min
                <= self.startup_min <= 1.0):
            raise ExecutorError(
                f"criteria must satisfy 0 <= inject_max < recover_min <= "
                f"startup_min <= 1, got ({self.startup_min}, {self.inject_max}, "
                f"{self.recover_min})")


@dataclass
class OracleCriteria:
    startup_min_success: float = 1.0
    inject_max_success: float = 0.30
    recover_min_success: float = 0.80
    per_interface: dict = field(default_factory=dict)  # interface_id -> overrides

    def resolve(self, interface_id: str) -> EffectiveCriteria:
        overrides = self.per_interface.get(interface_id, {})
        return EffectiveCriteria(
            startup_min=overrides.get("startup_min_success", self.startup_min_success),
            inject_max=overrides.get("inject_max_success", self.inject_max_success),
            recover_min=overrides.get("recover_min_success", self.recover_min_success),
        )

    def save(self, path) -> None:
        rec = {"startup_min_success": self.startup_min_success,
               "inject_max_success": self.inject_max_success,
               "recover_min_success": self.recover_min_success,
               "interfaces": self.per_interface}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(rec, fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "OracleCriteria":
        with open(path, "r", encoding="utf-8") as fh:
            rec = json.load(fh)
        return cls(
            startup_min_success=rec.get("startup_min_success", 1.0),
            inject_max_success=rec.get("inject_max_success", 0.30),
            recover_min_success=rec.get("recover_min_success", 0.80),
            per_interface=dict(rec.get("interfaces", {})),
        )


def derive_criteria(healthy_success_rates: dict,
                    defaults: Optional[OracleCriteria] = None,
                    margin: float = 0.05) -> OracleCriteria:
    """Per-interface recovery thresholds from healthy history: an interface
    that was never fully healthy must not be held to a stricter bar than it
    ever met (min of the default and observed-minus-margin)."""
    defaults = defaults or OracleCriteria()
    per_interface = dict(defaults.per_interface)
    for interface_id, rate in sorted(healthy_success_rates.items()):
        derived = min(defaults.recover_min_success, rate - margin)
        if derived < defaults.recover_min_success:
            entry = dict(per_interface.get(interface_id, {}))
            entry["recover_min_success"] = derived
            per_interface[interface_id] = entry
    return OracleCriteria(
        startup_min_success=defaults.startup_min_success,
        inject_max_success=defaults.inject_max_success,
        recover_min_success=defaults.recover_min_success,
        per_interface=per_interface,
    )


@dataclass(frozen=True)
class PhaseMetrics:
    samples: int
    success_rate: Optional[float]
    p50_us: Optional[int]
    p95_us: Optional[int]
    throughput_rps: float

    @classmethod
    def from_dict(cls, rec: dict) -> "PhaseMetrics":
        return cls(samples=rec["samples"], success_rate=rec["success_rate"],
                   p50_us=rec["p50_us"], p95_us=rec["p95_us"],
                   throughput_rps=rec["throughput_rps"])

    def to_dict(self) -> dict:
        return {"samples": self.samples, "success_rate": self.success_rate,
                "p50_us": self.p50_us, "p95_us": self.p95_us,
                "throughput_rps": self.throughput_rps}


@dataclass
class TestRun:
    __test__ = False  # not a pytest class, despite the name

    case_id: str
    trace_id: str       # the case's own trace
    host_trace_id: str  # the trace whose template the run replayed
    interface_id: str   # interface of the host trace (criteria context)
    service: str
    endpoint: Endpoint
    fault_id: str
    rationale: str
    verdict: str
    startup: Optional[PhaseMetrics] = None
    inject: Optional[PhaseMetrics] = None
    recover: Optional[PhaseMetrics] = None
    injection_hits: int = 0
    inject_endpoint_failures: int = 0
    recover_endpoint_failures: int = 0
    downstream_effect_ok: bool = True


def _rate(metrics: Optional[PhaseMetrics]) -> float:
    if metrics is None or metrics.success_rate is None:
        return 0.0
    return metrics.success_rate


def evaluate(startup: Optional[PhaseMetrics], inject: Optional[PhaseMetrics],
             recover: Optional[PhaseMetrics], injection_hits: int,
             inject_endpoint_failures: int, recover_endpoint_failures: int,
             downstream_effect_ok: bool, criteria: EffectiveCriteria,
             entry_only: bool = False) -> str:
    """Pure verdict function over phase metrics and granular assertions.

    Zero-sample phases count as 0.0 success (nothing demonstrated). With
    entry_only set, the endpoint-level assertions (impact, silent failure,
    residual endpoint failures) are skipped, which is exactly the naive
    oracle the granular assertion points exist to improve on.
    """
    if inject is None or recover is None:
        raise ExecutorError("evaluation requires all three phases")
    if _rate(startup) < criteria.startup_min:
        return VERDICT_STARTUP
    if not entry_only and injection_hits == 0:
        return VERDICT_NO_IMPACT
    if (not entry_only and _rate(inject) > criteria.inject_max
            and inject_endpoint_failures > 0 and not downstream_effect_ok):
        return VERDICT_SILENT
    if _rate(recover) < criteria.recover_min or (
            not entry_only and recover_endpoint_failures > 0):
        return VERDICT_NO_RECOVERY
    return VERDICT_PASS


def run_seed_for(campaign_seed: int, trace_id: str, wave: int) -> int:
    text = f"{campaign_seed}:{trace_id}:{wave}"
    return int(hashlib.sha256(text.encode()).hexdigest()[:12], 16)


def execute_run(run: Run, topology: TopologySpec, template: TraceTemplate,
                catalog: FaultCatalog, phases: PhaseConfig,
                criteria: OracleCriteria, run_seed: int,
                entry_only: bool = False) -> tuple:
    """One fresh system, one shared startup, batched cases with fail-fast.

    Returns (list of TestRun, deferred cases for rescheduling).
    """
    system = System(topology, run_seed)
    ids = SequentialIdSource(f"rp{run_seed % 1_000_000:06d}")

    def make_request(at_us: int):
        return instantiate(template, ReplayContext(now_us=at_us, id_source=ids))

    effective = criteria.resolve(template.interface_id)
    cursor = system.boot_complete_us
    startup_window = replay_traffic(system, make_request, phases.rate_per_sec,
                                    cursor, phases.startup_us)
    cursor += phases.startup_us
    startup = PhaseMetrics.from_dict(system.entry_metrics(startup_window))
    startup_ok = _rate(startup) >= effective.startup_min

    results = []
    deferred = []
    for position, case in enumerate(run.cases):
        base = TestRun(
            case_id=case.case_id, trace_id=case.target.trace_id,
            host_trace_id=run.trace_id, interface_id=template.interface_id,
            service=case.target.service, endpoint=case.target.endpoint,
            fault_id=case.fault_id, rationale=case.target.rationale,
            verdict=VERDICT_STARTUP, startup=startup)
        if not startup_ok:
            results.append(base)
            deferred.extend(run.cases[position + 1:])
            break

        fault = catalog.get(case.fault_id)
        armed = system.arm_fault(case.target.service, case.target.endpoint, fault)
        inject_window = replay_traffic(system, make_request, phases.rate_per_sec,
                                       cursor, phases.inject_us)
        cursor += phases.inject_us
        system.disarm_fault(case.target.service, case.target.endpoint)
        recover_window = replay_traffic(system, make_request, phases.rate_per_sec,
                                        cursor, phases.recover_us)
        cursor += phases.recover_us

        case_window = (inject_window[0], recover_window[1])
        base.inject = PhaseMetrics.from_dict(system.entry_metrics(inject_window))
        base.recover = PhaseMetrics.from_dict(system.entry_metrics(recover_window))
        base.injection_hits = armed.hits_in(inject_window)
        base.inject_endpoint_failures = system.endpoint_stats(
            case.target.service, case.target.endpoint, inject_window)["failures"]
        base.recover_endpoint_failures = system.endpoint_stats(
            case.target.service, case.target.endpoint, recover_window)["failures"]
        base.downstream_effect_ok = (system.losses_in(case_window) == 0
                                     and system.outbox_pending_from(case_window) == 0)
        base.verdict = evaluate(
            base.startup, base.inject, base.recover, base.injection_hits,
            base.inject_endpoint_failures, base.recover_endpoint_failures,
            base.downstream_effect_ok, effective, entry_only=entry_only)
        results.append(base)
        if base.verdict != VERDICT_PASS:
            deferred.extend(run.cases[position + 1:])
            break
    return results, deferred


def run_test(case, template: TraceTemplate, phases: PhaseConfig,
             criteria: OracleCriteria, topology: TopologySpec,
             catalog: FaultCatalog, seed: int = 0,
             entry_only: bool = False) -> TestRun:
    """Single-case three-phase cycle on a fresh system."""
    run = Run(trace_id=case.target.trace_id, cases=[case])
    results, _deferred = execute_run(run, topology, template, catalog, phases,
                                     criteria, run_seed_for(seed, run.trace_id, 0),
                                     entry_only=entry_only)
    return results[0]


@dataclass
class CampaignResult:
    test_runs: list
    startup_count: int
    initial_runs: int
    reschedules: int

    def verdict_counts(self) -> dict:
        counts = {v: 0 for v in VERDICTS}
        for tr in self.test_runs:
            counts[tr.verdict] += 1
        return counts

    def coverage(self) -> set:
        return {(tr.endpoint, tr.service) for tr in self.test_runs}


def run_batch(plan: RunPlan, topology: TopologySpec, templates: list,
              catalog: FaultCatalog, phases: PhaseConfig,
              criteria: OracleCriteria, seed: int = 0,
              entry_only: bool = False, parallel: int = 1,
              history: Optional[History] = None) -> CampaignResult:
    """Execute every planned case exactly once, rescheduling deferred cases
    from fail-fast halts into fresh greedily-batched runs."""
    by_trace = {t.base_trace.trace_id: t for t in templates}
    results = []
    startup_count = 0
    wave = 0
    queue = list(plan.runs)
    initial_runs = len(queue)
    while queue:
        jobs = []
        for run in queue:
            if run.trace_id not in by_trace:
                raise ExecutorError(f"no template for trace {run.trace_id}")
            jobs.append((run, by_trace[run.trace_id],
                         run_seed_for(seed, run.trace_id, wave)))
        if parallel > 1:
            with ThreadPoolExecutor(max_workers=parallel) as pool:
                outcomes = list(pool.map(
                    lambda job: execute_run(job[0], topology, job[1], catalog,
                                            phases, criteria, job[2],
                                            entry_only=entry_only), jobs))
        else:
            outcomes = [execute_run(run, topology, template, catalog, phases,
                                    criteria, run_seed, entry_only=entry_only)
                        for run, template, run_seed in jobs]
        deferred = []
        for run_results, run_deferred in outcomes:
            results.extend(run_results)
            deferred.extend(run_deferred)
            startup_count += 1
        queue = greedy_batch(deferred).runs if deferred else []
        wave += 1
    if history is not None:
        for tr in results:
            history.record_outcome(tr.case_id, tr.verdict)
    return CampaignResult(test_runs=results, startup_count=startup_count,
                          initial_runs=initial_runs,
                          reschedules=startup_count - initial_runs)


# --- report file -------------------------------------------------------------

def test_run_to_record(tr: TestRun) -> dict:
    return {
        "type": "test_run",
        "case_id": tr.case_id,
        "trace_id": tr.trace_id,
        "host_trace_id": tr.host_trace_id,
        "interface_id": tr.interface_id,
        "service": tr.service,
        "endpoint": tr.endpoint.triple(),
        "fault_id": tr.fault_id,
        "rationale": tr.rationale,
        "verdict": tr.verdict,
        "phases": {
            "startup": tr.startup.to_dict() if tr.startup else None,
            "inject": tr.inject.to_dict() if tr.inject else None,
            "recover": tr.recover.to_dict() if tr.recover else None,
        },
        "assertions": {
            "injection_hits": tr.injection_hits,
            "inject_endpoint_failures": tr.inject_endpoint_failures,
            "recover_endpoint_failures": tr.recover_endpoint_failures,
            "downstream_effect_ok": tr.downstream_effect_ok,
        },
    }


def test_run_from_record(rec: dict) -> TestRun:
    component, framework, method = rec["endpoint"].split(":")
    phases = rec.get("phases", {})

    def phase(name):
        data = phases.get(name)
        return PhaseMetrics.from_dict(data) if data else None

    asserts = rec.get("assertions", {})
    return TestRun(
        case_id=rec["case_id"], trace_id=rec["trace_id"],
        host_trace_id=rec.get("host_trace_id", rec["trace_id"]),
        interface_id=rec["interface_id"], service=rec["service"],
        endpoint=Endpoint(component, framework, method),
        fault_id=rec["fault_id"], rationale=rec.get("rationale", "plain"),
        verdict=rec["verdict"], startup=phase("startup"), inject=phase("inject"),
        recover=phase("recover"),
        injection_hits=asserts.get("injection_hits", 0),
        inject_endpoint_failures=asserts.get("inject_endpoint_failures", 0),
        recover_endpoint_failures=asserts.get("recover_endpoint_failures", 0),
        downstream_effect_ok=asserts.get("downstream_effect_ok", True),
    )


def save_report(result: CampaignResult, path, config: Optional[dict] = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for tr in result.test_runs:
            fh.write(dumps_canonical(test_run_to_record(tr)))
            fh.write("\n")
        summary = {
            "type": "summary",
            "cases": len(result.test_runs),
            "verdicts": result.verdict_counts(),
            "endpoint_coverage": len(result.coverage()),
            "startup_count": result.startup_count,
            "initial_runs": result.initial_runs,
            "reschedules": result.reschedules,
            "config": config or {},
        }
        fh.write(dumps_canonical(summary))
        fh.write("\n")


def load_report(path) -> tuple:
    test_runs = []
    summary = None
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if rec.get("type") == "summary":
                summary = rec
            else:
                test_runs.append(test_run_from_record(rec))
    if summary is None:
        raise ExecutorError(f"report {path} has no summary record")
    return test_runs, summary
