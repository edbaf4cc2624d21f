"""Run batching and execution history.

System startup dominates test cost, so tests are batched: a greedy loop
repeatedly picks the trace whose coverage adds the most not-yet-covered
(endpoint, service) pairs, and every pending case that trace can host joins
its run (a case is hostable wherever its coverage unit occurs, since a run
replays one trace while arming the case's service/endpoint/fault). History
then keeps campaigns from re-executing tests that already passed in the
current epoch; failed tests are retained.
"""

from __future__ import annotations

from dataclasses import dataclass, field

VERDICT_PASS = "PASS"
HISTORY_RESET_MARKER = "-"


def coverage_unit(case) -> tuple:
    return (case.target.endpoint, case.target.service)


@dataclass
class Run:
    trace_id: str
    cases: list


@dataclass
class RunPlan:
    runs: list = field(default_factory=list)

    def case_count(self) -> int:
        return sum(len(r.cases) for r in self.runs)


def greedy_batch(cases: list) -> RunPlan:
    """Greedy endpoint-coverage batching.

    Ties break on more pending hostable cases, then trace_id. Every input
    case lands in exactly one run; run count never exceeds trace count.
    """
    if not cases:
        raise ValueError("no cases to batch")

    trace_coverage = {}
    for case in cases:
        trace_coverage.setdefault(case.target.trace_id, set()).add(coverage_unit(case))

    pending = list(cases)
    covered = set()
    runs = []
    while pending:
        best_trace = None
        best_key = None
        for trace_id in sorted(trace_coverage):
            coverage = trace_coverage[trace_id]
            hostable = [c for c in pending if coverage_unit(c) in coverage]
            if not hostable:
                continue
            gain = len({coverage_unit(c) for c in hostable} - covered)
            key = (-gain, -len(hostable), trace_id)
            if best_key is None or key < best_key:
                best_key = key
                best_trace = trace_id
        assert best_trace is not None  # every case is hostable by its own trace
        coverage = trace_coverage[best_trace]
        run_cases = [c for c in pending if coverage_unit(c) in coverage]
        pending = [c for c in pending if coverage_unit(c) not in coverage]
        covered |= coverage
        runs.append(Run(trace_id=best_trace, cases=run_cases))
    return RunPlan(runs=runs)


@dataclass
class History:
    """Executed-case ledger; record-then-query consistent, last write wins."""

    executed: dict = field(default_factory=dict)  # case_id -> verdict (current epoch)
    epoch: int = 0
    _seq: int = 0
    _records: list = field(default_factory=list)  # (epoch, case_id, verdict, seq)

    def record_outcome(self, case_id: str, verdict: str) -> None:
        self._seq += 1
        self.executed[case_id] = verdict
        self._records.append((self.epoch, case_id, verdict, self._seq))

    def reset(self) -> None:
        self._seq += 1
        self.executed = {}
        self.epoch += 1
        self._records.append((self.epoch, HISTORY_RESET_MARKER, "RESET", self._seq))

    def passed(self, case_id: str) -> bool:
        return self.executed.get(case_id) == VERDICT_PASS

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for epoch, case_id, verdict, seq in self._records:
                fh.write(f"{epoch} {case_id} {verdict} {seq}\n")

    @classmethod
    def load(cls, path) -> "History":
        history = cls()
        with open(path, "r", encoding="utf-8") as fh:
            for line_no, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line:
                    continue
                parts = line.split()
                if len(parts) != 4:
                    raise ValueError(f"history line {line_no}: expected 4 fields")
                epoch, case_id, verdict, seq = int(parts[0]), parts[1], parts[2], int(parts[3])
                if epoch > history.epoch:
                    history.epoch = epoch
                    history.executed = {}
                if case_id != HISTORY_RESET_MARKER:
                    history.executed[case_id] = verdict
                history._records.append((epoch, case_id, verdict, seq))
                history._seq = max(history._seq, seq)
        return history


def filter_history(cases: list, history: History) -> tuple:
    """Split cases into (new, skipped): skipped iff PASS in the current epoch."""
    new = [c for c in cases if not history.passed(c.case_id)]
    skipped = [c for c in cases if history.passed(c.case_id)]
    return new, skipped


def record_outcome(history: History, case_id: str, verdict: str) -> History:
    history.record_outcome(case_id, verdict)
    return history


def reset_history(history: History) -> History:
    history.reset()
    return history


def save_run_plan(plan: RunPlan, path) -> None:
    # Case lines share the flat plan-file field layout, grouped under run headers.
    with open(path, "w", encoding="utf-8") as fh:
        for index, run in enumerate(plan.runs):
            fh.write(f"run {index} trace={run.trace_id} cases={len(run.cases)}\n")
            for case in run.cases:
                t = case.target
                fh.write(f"  {case.case_id} {t.trace_id} {t.span_position} "
                         f"{t.endpoint.triple()} {t.service} {case.fault_id} {t.rationale}\n")


def load_run_plan(path) -> RunPlan:
    from .model import Endpoint
    from .planner import InjectionTarget, TestCase

    runs = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            if raw.startswith("run "):
                fields = dict(part.split("=", 1) for part in raw.split()[2:])
                runs.append(Run(trace_id=fields["trace"], cases=[]))
                continue
            if not runs:
                raise ValueError(f"run-plan line {line_no}: case before any run header")
            parts = raw.split()
            if len(parts) != 7:
                raise ValueError(f"run-plan line {line_no}: expected 7 fields")
            case_id, trace_id, pos, triple, service, fault_id, rationale = parts
            component, framework, method = triple.split(":")
            runs[-1].cases.append(TestCase(
                case_id=case_id,
                target=InjectionTarget(trace_id=trace_id, span_position=int(pos),
                                       endpoint=Endpoint(component, framework, method),
                                       service=service, rationale=rationale),
                fault_id=fault_id,
            ))
    return RunPlan(runs=runs)
