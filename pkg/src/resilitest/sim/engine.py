"""Deterministic virtual-time discrete-event execution of a topology.

Every in-flight request is a generator process driven by a single event
loop, so arbitrarily many requests overlap in virtual time while execution
stays bit-reproducible for a given (topology, seed, workload). Services have
fixed worker pools and bounded queues, which is what makes thread-exhaustion
cascades expressible; stores, broker queues, and armed faults are plain
in-memory state that vanishes with the system handle.
"""

from __future__ import annotations

import hashlib
import heapq
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from ..faults import (DEFAULT_DELAY_US, EFFECT_DELAY, EFFECT_STATUS, EFFECT_THROW,
                      FaultSpec)
from ..model import (STATUS_OK, Endpoint, Span, Trace, error_status, is_ok,
                     new_corpus, status_code)
from ..templating import EntryRequest
from .topology import (BUG_NO_RETRY, ON_ERROR_CATCH, ON_ERROR_PROPAGATE,
                       OP_CALL, OP_CACHE, OP_DB, OP_MQ, TopologySpec,
                       VALIDATE_FRESH, VALIDATE_SINGLE_USE)

SECOND_US = 1_000_000

# Base virtual service times per step kind; each execution jitters +-25%.
_BASE_TIME_US = {OP_DB: 2000, OP_CACHE: 400, OP_MQ: 600}
_CALL_OVERHEAD_US = 800
_ENTRY_OVERHEAD_US = 300
_THROW_LATENCY_US = 100
_DELIVERY_DELAY_US = 200_000
_OUTBOX_RETRY_US = 500_000

# "No response from the dependency": with a timeout the client errors at the
# timeout, without one the worker blocks forever.
HANG_EXCEPTIONS = frozenset({"SocketTimeoutException"})

_TIMEOUT = object()  # sentinel resuming a caller whose call timed out


def is_connection_exception(name: str) -> bool:
    return "Connection" in name or name == "DisconnectException"


class SimError(Exception):
    pass


@dataclass
class Response:
    status: str
    payload: dict
    latency_us: int = 0

    @property
    def ok(self) -> bool:
        return is_ok(self.status)


@dataclass
class ArmedFault:
    service: str
    endpoint: Endpoint
    fault: FaultSpec
    active: bool = True
    hits: list = field(default_factory=list)  # interception times (us)

    @property
    def hit_counter(self) -> int:
        return len(self.hits)

    def hits_in(self, window: tuple) -> int:
        lo, hi = window
        return sum(1 for t in self.hits if lo <= t < hi)


class EntryHandle:
    """Completion state of one submitted entry request."""

    __slots__ = ("request", "submitted_us", "completed", "response", "trace",
                 "trace_id", "_recorder", "_loss_candidates")

    def __init__(self, request: EntryRequest, submitted_us: int, trace_id: str):
        self.request = request
        self.submitted_us = submitted_us
        self.completed = False
        self.response: Optional[Response] = None
        self.trace: Optional[Trace] = None
        self.trace_id = trace_id
        self._recorder = None
        self._loss_candidates = []


class _Recorder:
    __slots__ = ("spans", "_next")

    def __init__(self):
        self.spans = []
        self._next = 0

    def open_span(self, parent, service, endpoint, op, req, start_us) -> dict:
        span = {"id": f"s{self._next}", "parent": parent, "service": service,
                "endpoint": endpoint, "op": op, "req": req, "resp": {},
                "status": None, "start": start_us, "dur": None}
        self._next += 1
        self.spans.append(span)
        return span

    def close_span(self, span: dict, status: str, resp: dict, now_us: int) -> None:
        span["status"] = status
        span["resp"] = resp
        span["dur"] = now_us - span["start"]

    def build(self, trace_id: str, root_id: str, now_us: int) -> Trace:
        spans = []
        for rec in self.spans:
            dur = rec["dur"] if rec["dur"] is not None else now_us - rec["start"]
            status = rec["status"] if rec["status"] is not None else error_status("incomplete")
            spans.append(Span(
                span_id=rec["id"], parent_id=rec["parent"], service=rec["service"],
                endpoint=rec["endpoint"], operation_name=rec["op"],
                request_payload=rec["req"], response_payload=rec["resp"],
                status=status, start_us=rec["start"], duration_us=dur))
        return Trace(trace_id=trace_id, spans=tuple(spans), root=root_id)


class _ServiceState:
    __slots__ = ("spec", "busy", "queue")

    def __init__(self, spec):
        self.spec = spec
        self.busy = 0
        self.queue = deque()


class _Ctx:
    """One workflow execution (entry request or internal call)."""

    __slots__ = ("service", "iface", "payload", "line", "entry", "parent_span",
                 "outputs", "journal", "on_complete", "is_entry", "started_us")

    def __init__(self, service, iface, payload, line, entry, parent_span,
                 on_complete, is_entry):
        self.service = service
        self.iface = iface
        self.payload = payload
        self.line = line
        self.entry = entry
        self.parent_span = parent_span
        self.outputs = []
        self.journal = []
        self.on_complete = on_complete
        self.is_entry = is_entry
        self.started_us = 0


def _derive_token(prefix: str, value: str) -> str:
    return prefix + hashlib.sha1(value.encode("utf-8")).hexdigest()[:10]


class System:
    """A fresh, isolated instance of the topology under virtual time."""

    def __init__(self, spec: TopologySpec, seed: int, record_traces: bool = False):
        self.spec = spec
        self.seed = seed
        self.record_traces = record_traces
        self.now_us = 0
        self.boot_complete_us = spec.boot_us
        self._heap = []
        self._evseq = 0
        self._rng = random.Random(f"system:{seed}")
        self._services = {s.name: _ServiceState(s) for s in spec.services}
        self._db = {}
        self._cache = {}
        self._topics = {}  # topic -> {"queued": [...], "delivered": [...]}
        self._outbox = []  # pending durable-retry publishes
        self._armed = []
        self._poisoned = {}  # (service, line, step idx) -> exception name
        self._single_use_seen = set()
        self._entry_log = []  # (complete_us, submitted_us, ok)
        self._endpoint_events = []  # (start_us, service, endpoint, ok)
        self._loss_events = []  # entry-ok responses that hid a failed effect
        self._fresh_counter = 0
        self._trace_counter = 0
        self._route_cache = {}

    # -- event loop -----------------------------------------------------------

    def _schedule(self, delay_us: int, fn) -> None:
        self._schedule_at(self.now_us + delay_us, fn)

    def _schedule_at(self, at_us: int, fn) -> None:
        if at_us < self.now_us:
            raise SimError(f"cannot schedule into the past ({at_us} < {self.now_us})")
        self._evseq += 1
        heapq.heappush(self._heap, (at_us, self._evseq, fn))

    def run_until(self, t_us: int) -> None:
        while self._heap and self._heap[0][0] <= t_us:
            at, _seq, fn = heapq.heappop(self._heap)
            self.now_us = at
            fn()
        if t_us > self.now_us:
            self.now_us = t_us

    def run_until_idle(self) -> None:
        while self._heap:
            at, _seq, fn = heapq.heappop(self._heap)
            self.now_us = at
            fn()

    # -- request intake -------------------------------------------------------

    def post_request(self, request: EntryRequest, at_us: Optional[int] = None) -> EntryHandle:
        at = self.now_us if at_us is None else max(at_us, self.now_us)
        handle = EntryHandle(request, at, f"t{self._trace_counter:06d}")
        self._trace_counter += 1
        if self.record_traces:
            handle._recorder = _Recorder()
        self._schedule_at(at, lambda: self._accept_entry(handle))
        self._schedule_at(at + self.spec.entry_deadline_us,
                          lambda: self._deadline_entry(handle))
        return handle

    def submit_request(self, request: EntryRequest) -> tuple:
        """Blocking submit: runs virtual time forward until this request
        completes; returns (Response, recorded Trace or None)."""
        handle = self.post_request(request)
        while not handle.completed and self._heap:
            at, _seq, fn = heapq.heappop(self._heap)
            self.now_us = at
            fn()
        if not handle.completed:
            raise SimError("request never completed (event queue drained)")
        return handle.response, handle.trace

    def _route(self, line: str):
        if line in self._route_cache:
            return self._route_cache[line]
        parts = line.split(" ")
        if len(parts) != 2:
            return None
        method, path = parts
        tokens = path.split("/")[1:] if path != "/" else []
        for svc in self.spec.services:
            for iface in svc.interfaces:
                if iface.method == method and iface.matches_path(tokens):
                    self._route_cache[line] = (svc.name, iface)
                    return svc.name, iface
        self._route_cache[line] = None
        return None

    def _accept_entry(self, handle: EntryHandle) -> None:
        if handle.completed:
            return
        route = self._route(handle.request.line)
        if route is None:
            self._finish_entry(handle, Response(error_status("not_found"),
                                                {"status": "not_found"}), None)
            return
        service_name, iface = route
        reject = self._validate_entry(iface, handle.request.payload)
        if reject:
            self._finish_entry(handle, Response(error_status(f"validation_{reject}"),
                                                {"status": "rejected", "reason": reject}), None)
            return
        root_span = None
        if handle._recorder is not None:
            root_span = handle._recorder.open_span(
                None, service_name, Endpoint("HTTP", "server", iface.method.lower()),
                handle.request.line, dict(handle.request.payload), self.now_us)
        ctx = _Ctx(service=service_name, iface=iface,
                   payload=dict(handle.request.payload), line=iface.line,
                   entry=handle, parent_span=root_span,
                   on_complete=lambda resp: self._finish_entry(handle, resp, root_span),
                   is_entry=True)
        self._enqueue(service_name, ctx)

    def _validate_entry(self, iface, payload) -> str:
        for fs in iface.fields:
            if fs.validate == VALIDATE_FRESH:
                value = payload.get(fs.path)
                try:
                    ts = int(value)
                except (TypeError, ValueError):
                    return f"bad_timestamp_{fs.path}"
                if abs(ts - self.now_us) > self.spec.validation_skew_us:
                    return f"stale_{fs.path}"
            elif fs.validate == VALIDATE_SINGLE_USE:
                value = payload.get(fs.path)
                if not value:
                    return f"missing_{fs.path}"
                if value in self._single_use_seen:
                    return f"reused_{fs.path}"
                self._single_use_seen.add(value)
        return ""

    def _deadline_entry(self, handle: EntryHandle) -> None:
        if not handle.completed:
            self._finish_entry(handle, Response(error_status("deadline_exceeded"),
                                                {"status": "timeout"}), None)

    def _finish_entry(self, handle: EntryHandle, response: Response,
                      root_span: Optional[dict]) -> None:
        if handle.completed:
            return
        handle.completed = True
        response.latency_us = self.now_us - handle.submitted_us
        handle.response = response
        self._entry_log.append((self.now_us, handle.submitted_us, response.ok))
        if response.ok:
            # an ok answer that hid failed non-best-effort writes is a silent loss
            for _ in handle._loss_candidates:
                self._loss_events.append(self.now_us)
        if handle._recorder is not None and handle._recorder.spans:
            if root_span is not None:
                handle._recorder.close_span(root_span, response.status,
                                            dict(response.payload), self.now_us)
            root_id = handle._recorder.spans[0]["id"]
            handle.trace = handle._recorder.build(handle.trace_id, root_id, self.now_us)

    # -- service admission ----------------------------------------------------

    def _enqueue(self, service_name: str, ctx: _Ctx) -> None:
        state = self._services[service_name]
        if state.busy < state.spec.workers:
            self._start_work(state, ctx)
        elif len(state.queue) < state.spec.queue_limit:
            state.queue.append(ctx)
        else:
            ctx.on_complete(Response(error_status("overload"), {"status": "overload"}))

    def _start_work(self, state: _ServiceState, ctx: _Ctx) -> None:
        if ctx.is_entry and ctx.entry.completed:
            return  # expired in queue
        state.busy += 1
        ctx.started_us = self.now_us
        proc = self._workflow(state, ctx)
        self._drive(proc, None)

    def _release(self, state: _ServiceState) -> None:
        state.busy -= 1
        while state.queue and state.busy < state.spec.workers:
            ctx = state.queue.popleft()
            if ctx.is_entry and ctx.entry.completed:
                continue
            self._start_work(state, ctx)
            break

    def _drive(self, proc, value) -> None:
        try:
            instr = proc.send(value)
        except StopIteration:
            return
        kind = instr[0]
        if kind == "wait":
            self._schedule(instr[1], lambda: self._drive(proc, None))
        elif kind == "hang":
            pass  # worker leaked on purpose; the process is never resumed
        elif kind == "call":
            _kind, target_service, line, payload, timeout_us, parent_span, entry = instr
            pending = {"done": False}

            def on_resp(resp, pending=pending, proc=proc):
                if pending["done"]:
                    return
                pending["done"] = True
                self._drive(proc, resp)

            self._admit_call(target_service, line, payload, parent_span, entry, on_resp)
            if timeout_us is not None:
                def on_timeout(pending=pending, proc=proc):
                    if pending["done"]:
                        return
                    pending["done"] = True
                    self._drive(proc, _TIMEOUT)
                self._schedule(timeout_us, on_timeout)
        else:
            raise SimError(f"unknown instruction {kind!r}")

    def _admit_call(self, target_service, line, payload, parent_span, entry,
                    on_resp) -> None:
        target = self.spec.service(target_service)
        iface = None
        for candidate in target.interfaces:
            if candidate.line == line:
                iface = candidate
                break
        if iface is None:
            on_resp(Response(error_status("not_found"), {}))
            return
        # internal calls share the entry's recorder and loss accounting
        ctx = _Ctx(service=target_service, iface=iface, payload=payload, line=line,
                   entry=entry, parent_span=parent_span, on_complete=on_resp,
                   is_entry=False)
        self._enqueue(target_service, ctx)

    # -- workflow execution ---------------------------------------------------

    def _workflow(self, state: _ServiceState, ctx: _Ctx):
        yield ("wait", self._jitter(_ENTRY_OVERHEAD_US))
        aborted = ""
        for index, step in enumerate(ctx.iface.workflow):
            status, payload = yield from self._exec_step(ctx, index, step)
            ctx.outputs.append(payload)
            if is_ok(status):
                continue
            if step.on_error == ON_ERROR_PROPAGATE:
                if ctx.iface.compensate:
                    self._rollback(ctx)
                aborted = status
                break
            if step.op == OP_MQ and step.on_error == ON_ERROR_CATCH:
                # durable retry: the publish is buffered, not lost
                self._outbox_add(ctx.service, ctx.iface.line, index, step)
            elif step.is_write() and not step.best_effort and ctx.entry is not None:
                ctx.entry._loss_candidates.append(index)
        if aborted:
            response = Response(aborted, {"status": "error",
                                          "reason": status_code(aborted)})
        else:
            response = Response(STATUS_OK, self._render_response(ctx))
        ctx.on_complete(response)
        self._release(state)

    def _render_response(self, ctx: _Ctx) -> dict:
        payload = {"status": "ok"}
        for fs in ctx.iface.fields:
            if fs.echo and fs.path in ctx.payload:
                payload[fs.path] = ctx.payload[fs.path]
        for rf in ctx.iface.resp_fields:
            if rf.source.startswith("lit:"):
                payload[rf.path] = rf.source[4:]
            elif rf.source.startswith("echo:"):
                payload[rf.path] = ctx.payload.get(rf.source[5:], "")
            elif rf.source.startswith("derive:"):
                payload[rf.path] = _derive_token("d", ctx.payload.get(rf.source[7:], ""))
            elif rf.source == "token":
                self._fresh_counter += 1
                payload[rf.path] = f"srv{self._fresh_counter:08d}"
        return payload

    def _jitter(self, base_us: int) -> int:
        spread = base_us // 4
        return base_us + self._rng.randrange(-spread, spread + 1)

    def _render_args(self, ctx: _Ctx, step) -> dict:
        out = {}
        for name, source in step.args:
            if source.startswith("req."):
                out[name] = ctx.payload.get(source[4:], "")
            elif source.startswith("out:"):
                ref, _, path = source[4:].partition(".")
                outputs = ctx.outputs[int(ref)] if int(ref) < len(ctx.outputs) else {}
                out[name] = outputs.get(path, "")
            elif source.startswith("lit:"):
                out[name] = source[4:]
        return out

    def _find_armed(self, service: str, endpoint: Endpoint) -> Optional[ArmedFault]:
        for armed in self._armed:
            if armed.active and armed.service == service and armed.endpoint == endpoint:
                return armed
        return None

    def _endpoint_event(self, start_us: int, service: str, endpoint: Endpoint,
                        ok: bool) -> None:
        self._endpoint_events.append((start_us, service, endpoint, ok))

    def _exec_step(self, ctx: _Ctx, index: int, step):
        args = self._render_args(ctx, step)
        endpoint = step.endpoint()
        recorder = ctx.entry._recorder if ctx.entry is not None else None
        span = None
        if recorder is not None:
            op_name = (f"call {step.target_service} {step.target_line}"
                       if step.op == OP_CALL else
                       f"{step.op}.{step.method} {step.table or step.topic}")
            span = recorder.open_span(
                ctx.parent_span["id"] if ctx.parent_span else None,
                ctx.service, endpoint, op_name, args, self.now_us)

        attempts = step.retries + 1
        status, payload, exception = STATUS_OK, {}, ""
        for _attempt in range(attempts):
            status, payload, exception = yield from self._attempt_step(
                ctx, index, step, endpoint, args, span)
            if is_ok(status):
                break
        if not is_ok(status):
            # a no-retry client never re-establishes a dropped connection:
            # the step keeps failing until the system is restarted
            if (step.bug == BUG_NO_RETRY and step.retries == 0
                    and is_connection_exception(exception)):
                self._poisoned[(ctx.service, ctx.iface.line, index)] = exception

        if span is not None and recorder is not None:
            recorder.close_span(span, status, payload, self.now_us)
        return status, payload

    def _attempt_step(self, ctx: _Ctx, index: int, step, endpoint, args, span):
        start = self.now_us
        poison_key = (ctx.service, ctx.iface.line, index)
        if poison_key in self._poisoned:
            yield ("wait", _THROW_LATENCY_US)
            self._endpoint_event(start, ctx.service, endpoint, ok=False)
            exc = self._poisoned[poison_key]
            return error_status(exc), {}, exc

        extra_delay = 0
        armed = self._find_armed(ctx.service, endpoint)
        if armed is not None:
            armed.hits.append(start)
            effect = armed.fault.effect
            if effect.kind == EFFECT_THROW:
                if effect.exception in HANG_EXCEPTIONS:
                    if step.timeout_us is None:
                        self._endpoint_event(start, ctx.service, endpoint, ok=False)
                        yield ("hang",)
                        raise AssertionError("hung process resumed")
                    yield ("wait", step.timeout_us)
                else:
                    yield ("wait", _THROW_LATENCY_US)
                self._endpoint_event(start, ctx.service, endpoint, ok=False)
                return error_status(effect.exception), {}, effect.exception
            if effect.kind == EFFECT_DELAY:
                duration = effect.delay_us
                if duration is None:
                    duration = (2 * step.timeout_us if step.timeout_us is not None
                                else DEFAULT_DELAY_US)
                if step.timeout_us is not None and step.timeout_us < duration:
                    yield ("wait", step.timeout_us)
                    self._endpoint_event(start, ctx.service, endpoint, ok=False)
                    return error_status("OperationTimedOut"), {}, "OperationTimedOut"
                extra_delay = duration  # dependency stalls, then behaves normally
            if effect.kind == EFFECT_STATUS:
                yield ("wait", self._jitter(_CALL_OVERHEAD_US))
                code = effect.status_code
                if code >= 400:
                    self._endpoint_event(start, ctx.service, endpoint, ok=False)
                    exc = f"http_{code}"
                    return error_status(exc), {"status": str(code), "body": effect.body}, exc
                self._endpoint_event(start, ctx.service, endpoint, ok=True)
                return STATUS_OK, {"status": str(code), "body": effect.body}, ""

        if extra_delay:
            yield ("wait", extra_delay)

        if step.op == OP_CALL:
            yield ("wait", self._jitter(_CALL_OVERHEAD_US))
            resp = yield ("call", step.target_service, step.target_line, dict(args),
                          step.timeout_us, span, ctx.entry)
            if resp is _TIMEOUT:
                self._endpoint_event(start, ctx.service, endpoint, ok=False)
                return (error_status("SocketTimeoutException"), {},
                        "SocketTimeoutException")
            if resp.ok:
                self._endpoint_event(start, ctx.service, endpoint, ok=True)
                return STATUS_OK, dict(resp.payload), ""
            self._endpoint_event(start, ctx.service, endpoint, ok=False)
            exc = status_code(resp.status)
            return error_status(exc), dict(resp.payload), exc

        yield ("wait", self._jitter(_BASE_TIME_US[step.op]))
        payload = self._apply_leaf(ctx, step, args)
        self._endpoint_event(start, ctx.service, endpoint, ok=True)
        return STATUS_OK, payload, ""

    def _apply_leaf(self, ctx: _Ctx, step, args: dict) -> dict:
        key = (step.table or step.topic, args.get("key", ""))
        value = args.get("val") or _derive_token("v", f"{key[0]}:{key[1]}")
        if step.op == OP_DB:
            return self._store_op(self._db, ctx, step, key, value)
        if step.op == OP_CACHE:
            return self._store_op(self._cache, ctx, step, key, value)
        if step.op == OP_MQ:
            self._fresh_counter += 1
            msgid = f"m{self._fresh_counter:08d}"
            self._publish(step.topic, msgid)
            return {"msgid": msgid}
        raise SimError(f"unknown leaf op {step.op!r}")

    def _store_op(self, store: dict, ctx: _Ctx, step, key, value: str) -> dict:
        if step.method in ("insert", "update", "set"):
            ctx.journal.append((store, key, store.get(key), key in store))
            store[key] = value
            return {"rows": "1"}
        if step.method == "delete":
            ctx.journal.append((store, key, store.get(key), key in store))
            store.pop(key, None)
            return {"rows": "1"}
        # select / get
        stored = store.get(key)
        if stored is None:
            return {"value": _derive_token("v", f"{key[0]}:{key[1]}"), "hit": "0"}
        return {"value": stored, "hit": "1"}

    def _rollback(self, ctx: _Ctx) -> None:
        for store, key, old, existed in reversed(ctx.journal):
            if existed:
                store[key] = old
            else:
                store.pop(key, None)
        ctx.journal.clear()

    # -- broker ----------------------------------------------------------------

    def _topic(self, name: str) -> dict:
        return self._topics.setdefault(name, {"queued": [], "delivered": []})

    def _publish(self, topic_name: str, msgid: str) -> None:
        topic = self._topic(topic_name)
        topic["queued"].append(msgid)

        def deliver():
            if msgid in topic["queued"]:
                topic["queued"].remove(msgid)
                topic["delivered"].append(msgid)
        self._schedule(_DELIVERY_DELAY_US, deliver)

    def _outbox_add(self, service: str, line: str, index: int, step) -> None:
        entry = {"service": service, "line": line, "index": index, "step": step,
                 "created_us": self.now_us, "pending": True}
        self._outbox.append(entry)
        self._schedule(_OUTBOX_RETRY_US, lambda: self._outbox_retry(entry))

    def _outbox_retry(self, entry: dict) -> None:
        if not entry["pending"]:
            return
        step = entry["step"]
        endpoint = step.endpoint()
        armed = self._find_armed(entry["service"], endpoint)
        if armed is not None:
            armed.hits.append(self.now_us)
            self._endpoint_event(self.now_us, entry["service"], endpoint, ok=False)
            self._schedule(_OUTBOX_RETRY_US, lambda: self._outbox_retry(entry))
            return
        self._fresh_counter += 1
        self._publish(step.topic, f"m{self._fresh_counter:08d}")
        self._endpoint_event(self.now_us, entry["service"], endpoint, ok=True)
        entry["pending"] = False

    # -- faults -----------------------------------------------------------------

    def arm_fault(self, service: str, endpoint: Endpoint, fault: FaultSpec) -> ArmedFault:
        svc = self.spec.service(service)
        present = any(step.endpoint() == endpoint
                      for iface in svc.interfaces for step in iface.workflow)
        if not present:
            raise SimError(f"endpoint {endpoint.triple()} not used by service {service!r}")
        armed = ArmedFault(service=service, endpoint=endpoint, fault=fault)
        self._armed.append(armed)
        return armed

    def disarm_fault(self, service: str, endpoint: Endpoint,
                     fault_id: Optional[str] = None) -> None:
        for armed in self._armed:
            if (armed.active and armed.service == service and armed.endpoint == endpoint
                    and (fault_id is None or armed.fault.fault_id == fault_id)):
                armed.active = False

    # -- metrics ----------------------------------------------------------------

    def entry_metrics(self, window: tuple) -> dict:
        lo, hi = window
        if hi > self.now_us + 1:
            raise SimError(f"window [{lo}, {hi}) beyond elapsed virtual time {self.now_us}")
        done = [(c, s, ok) for (c, s, ok) in self._entry_log if lo <= c < hi]
        if not done:
            return {"samples": 0, "success_rate": None, "p50_us": None,
                    "p95_us": None, "throughput_rps": 0.0}
        latencies = sorted(c - s for (c, s, _ok) in done)
        n = len(latencies)
        p50 = latencies[max(0, (n * 50 + 99) // 100 - 1)]  # nearest-rank
        p95 = latencies[max(0, (n * 95 + 99) // 100 - 1)]
        ok_count = sum(1 for (_c, _s, ok) in done if ok)
        return {
            "samples": n,
            "success_rate": ok_count / n,
            "p50_us": p50,
            "p95_us": p95,
            "throughput_rps": n / ((hi - lo) / SECOND_US),
        }

    def endpoint_stats(self, service: str, endpoint: Endpoint, window: tuple) -> dict:
        lo, hi = window
        invocations = 0
        failures = 0
        for (start, svc, ep, ok) in self._endpoint_events:
            if svc == service and ep == endpoint and lo <= start < hi:
                invocations += 1
                if not ok:
                    failures += 1
        return {"invocations": invocations, "failures": failures}

    def all_endpoint_stats(self, window: tuple) -> dict:
        lo, hi = window
        stats = {}
        for (start, svc, ep, ok) in self._endpoint_events:
            if lo <= start < hi:
                entry = stats.setdefault((svc, ep), {"invocations": 0, "failures": 0})
                entry["invocations"] += 1
                if not ok:
                    entry["failures"] += 1
        return stats

    def collect_metrics(self, window: tuple) -> dict:
        return {
            "entry": self.entry_metrics(window),
            "per_endpoint": {
                f"{svc}|{ep.triple()}": stats
                for (svc, ep), stats in sorted(self.all_endpoint_stats(window).items())
            },
        }

    def losses_in(self, window: tuple) -> int:
        lo, hi = window
        return sum(1 for t in self._loss_events if lo <= t < hi)

    def outbox_pending_from(self, window: tuple) -> int:
        lo, hi = window
        return sum(1 for e in self._outbox
                   if e["pending"] and lo <= e["created_us"] < hi)

    def topic_counts(self, topic_name: str) -> dict:
        topic = self._topic(topic_name)
        return {"queued": len(topic["queued"]), "delivered": len(topic["delivered"])}


def start_system(spec: TopologySpec, seed: int, record_traces: bool = False) -> System:
    """Fresh isolated instance: virtual clock at zero, empty stores."""
    return System(spec, seed, record_traces=record_traces)


def replay_traffic(system: System, make_request, rate_per_sec: int,
                   start_us: int, duration_us: int) -> tuple:
    """Schedule `rate_per_sec` instantiated requests per virtual second over
    [start, start+duration) and run the loop to the window end. Returns the
    window for metric collection."""
    interval = SECOND_US // rate_per_sec
    count = (duration_us * rate_per_sec) // SECOND_US
    for k in range(count):
        at = start_us + k * interval
        system.post_request(make_request(at), at)
    system.run_until(start_us + duration_us)
    return (start_us, start_us + duration_us)


def record_corpus(spec: TopologySpec, workload: list, seed: int):
    """Run the healthy system over (at_us, EntryRequest) workload entries and
    return the recorded corpus."""
    system = System(spec, seed, record_traces=True)
    handles = []
    for at_us, request in workload:
        handles.append(system.post_request(request, at_us))
    system.run_until_idle()
    traces = []
    for handle in handles:
        if handle.trace is not None:
            traces.append(handle.trace)
    return new_corpus(traces, seed, spec.digest())
