import itertools
import math
import random

import pytest

from resilitest.model import Endpoint
from resilitest.planner import InjectionTarget, TestCase, case_digest
from resilitest.scheduler import (History, filter_history, greedy_batch,
                                  load_run_plan, record_outcome,
                                  reset_history, save_run_plan)


def _case(trace_id, endpoint_name, fault_id="f0", service="svc"):
    endpoint = Endpoint("Database", "fw", endpoint_name)
    return TestCase(
        case_id=case_digest(trace_id, hash(endpoint_name) % 97, fault_id),
        target=InjectionTarget(trace_id=trace_id, span_position=1,
                               endpoint=endpoint, service=service,
                               rationale="last_invocation"),
        fault_id=fault_id)


def test_single_trace_single_run():
    cases = [_case("t1", "a"), _case("t1", "b", "f1")]
    plan = greedy_batch(cases)
    assert len(plan.runs) == 1
    assert plan.runs[0].trace_id == "t1"
    assert plan.case_count() == 2


def test_spec_example_absorption_depends_on_case_ownership():
    # traces with endpoint sets {A,B}, {B,C}, {C}; one case per endpoint
    # C's case on trace 2 -> absorbed into trace 2's run (2 runs)
    cases = [_case("t1", "A"), _case("t2", "B"), _case("t2", "C")]
    plan = greedy_batch(cases)
    assert [r.trace_id for r in plan.runs] == ["t2", "t1"]
    assert len(plan.runs) == 2
    # C's case on trace 3 -> its own third run
    cases = [_case("t1", "A"), _case("t2", "B"), _case("t3", "C")]
    plan = greedy_batch(cases)
    assert len(plan.runs) == 3


def test_every_case_lands_in_exactly_one_run():
    rng = random.Random(4)
    cases = []
    for t in range(6):
        for e in range(rng.randint(1, 4)):
            cases.append(_case(f"t{t}", f"e{rng.randint(0, 5)}",
                               fault_id=f"f{t}_{e}"))
    plan = greedy_batch(cases)
    flat = [c.case_id for r in plan.runs for c in r.cases]
    assert sorted(flat) == sorted(c.case_id for c in cases)
    assert len(plan.runs) <= len({c.target.trace_id for c in cases})


def test_case_hosted_by_covering_trace():
    # t1 covers units of t2's case -> one run hosts both
    cases = [_case("t1", "shared"), _case("t2", "shared", "f9")]
    plan = greedy_batch(cases)
    assert len(plan.runs) == 1
    assert {c.case_id for c in plan.runs[0].cases} == {c.case_id for c in cases}


def _brute_force_min_runs(cases):
    traces = sorted({c.target.trace_id for c in cases})
    coverage = {}
    for c in cases:
        coverage.setdefault(c.target.trace_id, set()).add(
            (c.target.endpoint, c.target.service))
    universe = {(c.target.endpoint, c.target.service) for c in cases}
    for size in range(1, len(traces) + 1):
        for combo in itertools.combinations(traces, size):
            covered = set()
            for t in combo:
                covered |= coverage[t]
            if covered >= universe:
                return size
    return len(traces)


def test_greedy_respects_set_cover_bound_and_partition_optimality():
    rng = random.Random(77)
    for round_no in range(60):
        n_traces = rng.randint(1, 8)
        n_endpoints = rng.randint(1, 10)
        cases = []
        for t in range(n_traces):
            for e in rng.sample(range(n_endpoints),
                                rng.randint(1, min(4, n_endpoints))):
                cases.append(_case(f"t{t}", f"e{e}", fault_id=f"f{t}_{e}"))
        plan = greedy_batch(cases)
        optimum = _brute_force_min_runs(cases)
        assert len(plan.runs) <= optimum * (1 + math.log(n_endpoints + 1))

    # partition instances: greedy is exactly optimal
    for round_no in range(20):
        n_traces = rng.randint(1, 6)
        cases = []
        endpoint_counter = 0
        for t in range(n_traces):
            for _ in range(rng.randint(1, 3)):
                cases.append(_case(f"t{t}", f"unique{endpoint_counter}",
                                   fault_id=f"f{endpoint_counter}"))
                endpoint_counter += 1
        plan = greedy_batch(cases)
        assert len(plan.runs) == _brute_force_min_runs(cases)


def test_greedy_rejects_empty_input():
    with pytest.raises(ValueError):
        greedy_batch([])


def test_filter_history_empty_history_keeps_all():
    cases = [_case("t1", "a"), _case("t1", "b", "f1")]
    new, skipped = filter_history(cases, History())
    assert new == cases and skipped == []


def test_filter_history_skips_passed_and_keeps_failed():
    cases = [_case("t1", "a"), _case("t1", "b", "f1")]
    history = History()
    history.record_outcome(cases[0].case_id, "PASS")
    history.record_outcome(cases[1].case_id, "FAIL_SILENT")
    new, skipped = filter_history(cases, history)
    assert [c.case_id for c in skipped] == [cases[0].case_id]
    assert [c.case_id for c in new] == [cases[1].case_id]


def test_reset_clears_skips_and_increments_epoch():
    cases = [_case("t1", "a")]
    history = History()
    record_outcome(history, cases[0].case_id, "PASS")
    assert filter_history(cases, history)[1] != []
    epoch_before = history.epoch
    reset_history(history)
    assert history.epoch == epoch_before + 1
    new, skipped = filter_history(cases, history)
    assert skipped == [] and new == cases


def test_last_write_wins():
    history = History()
    history.record_outcome("c1", "PASS")
    history.record_outcome("c1", "FAIL_NO_RECOVERY")
    assert not history.passed("c1")
    history.record_outcome("c1", "PASS")
    assert history.passed("c1")


def test_history_file_round_trip(tmp_path):
    history = History()
    history.record_outcome("c1", "PASS")
    history.record_outcome("c2", "FAIL_SILENT")
    history.reset()
    history.record_outcome("c3", "PASS")
    path = tmp_path / "history.txt"
    history.save(path)
    loaded = History.load(path)
    assert loaded.epoch == 1
    assert loaded.passed("c3")
    assert not loaded.passed("c1")  # earlier epoch no longer skips


def test_run_plan_file_round_trip(tmp_path):
    cases = [_case("t1", "a"), _case("t2", "b", "f1"), _case("t2", "c", "f2")]
    plan = greedy_batch(cases)
    path = tmp_path / "runplan.txt"
    save_run_plan(plan, path)
    loaded = load_run_plan(path)
    assert [r.trace_id for r in loaded.runs] == [r.trace_id for r in plan.runs]
    assert [c.case_id for r in loaded.runs for c in r.cases] == \
        [c.case_id for r in plan.runs for c in r.cases]
