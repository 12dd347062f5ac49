"""Deterministic discrete-event simulator of asynchronous FIFO message networks."""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field

from .graphs import Graph

# simulated time is integer nanoseconds; one time unit = 1 second
NANOS = 10**9
MAX_PAYLOAD_WORDS = 8

_MASK = (1 << 64) - 1
_DELAY_KINDS = ("unit", "uniform", "per_edge_constant", "laggy_edge_adversary")


class SimError(Exception):
    """Base class for simulator failures."""


class ProtocolViolation(SimError):
    """The protocol broke a model rule (addressing, staging, termination)."""


class PayloadTooWide(ProtocolViolation):
    """A send exceeded the word budget for this network size."""


class IntegrityError(SimError):
    """A run report failed its internal accounting checks."""


class BudgetExceeded(SimError):
    """The event budget ran out before the protocol quiesced."""

    def __init__(self, processed: int, now_ns: int, queue_head: list):
        self.processed = processed
        self.now_ns = now_ns
        self.queue_head = queue_head
        head = "; ".join(queue_head[:5])
        super().__init__(
            f"no quiescence after {processed} events at t={_fmt_ns(now_ns)}; "
            f"queue head: {head}"
        )


def _splitmix(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9 & _MASK
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK
    return z ^ (z >> 31)


def mix64(*parts: int) -> int:
    """Stateless 64-bit hash of an integer tuple (never Python's hash())."""
    acc = 0x243F6A8885A308D3
    for p in parts:
        acc = _splitmix(acc ^ (p & _MASK))
    return acc


def _fmt_ns(t: int) -> str:
    return f"{t // NANOS}.{t % NANOS:09d}"


def word_size(n: int) -> int:
    """Machine word of the model: ceil(log2 n) bits, at least one."""
    return max(1, (n - 1).bit_length())


def _words(x, w: int) -> int:
    if x is None or isinstance(x, bool):
        return 1
    if isinstance(x, int):
        return max(1, -(-x.bit_length() // w)) if x >= 0 else max(1, -(-(-x).bit_length() // w))
    if isinstance(x, str):
        if len(x) > 16:
            raise ProtocolViolation(f"tag string too long: {x!r}")
        return 1
    if isinstance(x, (tuple, list)):
        return max(1, sum(_words(item, w) for item in x))
    raise ProtocolViolation(f"unsupported payload element {type(x).__name__}")


def payload_words(payload, n: int) -> int:
    """Width of a payload in words of ceil(log2 n) bits."""
    return _words(payload, word_size(n))


@dataclass(frozen=True)
class DelayModel:
    """Seeded per-message link delay assignment, deterministic and stateless."""

    kind: str
    seed: int = 0
    slow_fraction: float = 0.5
    fast_delay: float = 1e-3

    def __post_init__(self):
        if self.kind not in _DELAY_KINDS:
            raise ValueError(f"unknown delay kind {self.kind!r}")
        if not 0.0 <= self.slow_fraction <= 1.0:
            raise ValueError("slow_fraction must be in [0, 1]")
        if not 0.0 < self.fast_delay <= 1.0:
            raise ValueError("fast_delay must be in (0, 1]")

    @classmethod
    def unit(cls) -> "DelayModel":
        return cls("unit")

    @classmethod
    def uniform(cls, seed: int = 0) -> "DelayModel":
        return cls("uniform", seed=seed)

    @classmethod
    def per_edge_constant(cls, seed: int = 0) -> "DelayModel":
        return cls("per_edge_constant", seed=seed)

    @classmethod
    def laggy(cls, seed: int = 0, slow_fraction: float = 0.5,
              fast_delay: float = 1e-3) -> "DelayModel":
        return cls("laggy_edge_adversary", seed=seed,
                   slow_fraction=slow_fraction, fast_delay=fast_delay)

    def sampler(self, m: int) -> "_DelaySampler":
        return _DelaySampler(self, m)


class _DelaySampler:
    """Per-run delay source; laggy mode fixes its slow-edge set up front."""

    __slots__ = ("kind", "seed", "fast_ns", "slow")

    def __init__(self, model: DelayModel, m: int):
        self.kind = model.kind
        self.seed = model.seed
        self.fast_ns = max(1, round(model.fast_delay * NANOS))
        self.slow = frozenset()
        if model.kind == "laggy_edge_adversary":
            k = round(model.slow_fraction * m)
            ranked = sorted(range(m), key=lambda e: (mix64(self.seed, 3, e), e))
            self.slow = frozenset(ranked[:k])

    def nanos(self, eid: int, direction: int, msg_index: int) -> int:
        kind = self.kind
        if kind == "unit":
            return NANOS
        if kind == "uniform":
            return mix64(self.seed, 2, eid, direction, msg_index) % NANOS + 1
        if kind == "per_edge_constant":
            return mix64(self.seed, 1, eid) % NANOS + 1
        return NANOS if eid in self.slow else self.fast_ns


def sample_delay(model: DelayModel, m: int, eid: int, direction: int = 0,
                 msg_index: int = 0) -> float:
    """One delay in seconds, as the simulator would draw it."""
    return model.sampler(m).nanos(eid, direction, msg_index) / NANOS


@dataclass(frozen=True)
class WakeupSchedule:
    """Spontaneous wake time per node in nanoseconds; None = only on receipt."""

    wake_ns: tuple

    def __post_init__(self):
        if not self.wake_ns:
            raise ValueError("empty wakeup schedule")
        finite = [t for t in self.wake_ns if t is not None]
        if not finite:
            raise ValueError("at least one node must wake spontaneously")
        if any(t < 0 for t in finite):
            raise ValueError("wake times must be non-negative")

    @classmethod
    def all_at_zero(cls, n: int) -> "WakeupSchedule":
        return cls((0,) * n)

    @classmethod
    def single(cls, n: int, node: int = 0) -> "WakeupSchedule":
        return cls(tuple(0 if v == node else None for v in range(n)))

    @classmethod
    def single_random(cls, n: int, seed: int = 0) -> "WakeupSchedule":
        return cls.single(n, mix64(seed, 0x57AE) % n)

    @classmethod
    def staggered_uniform(cls, n: int, seed: int = 0) -> "WakeupSchedule":
        return cls(tuple(mix64(seed, 0x57A6, v) % NANOS for v in range(n)))


class Node:
    """Per-node protocol logic; subclasses add state and the two handlers."""

    __slots__ = ("node_id", "n", "weights", "rng")

    def __init__(self, node_id: int, n: int, weights: tuple, rng: random.Random):
        self.node_id = node_id
        self.n = n
        self.weights = weights
        self.rng = rng

    @property
    def deg(self) -> int:
        return len(self.weights)

    def on_wake(self, ctx: "Context") -> None:
        pass

    def on_message(self, ctx: "Context", port: int, payload, stage_tag: int) -> None:
        raise NotImplementedError

    def result(self):
        return None


class Context:
    """Kernel services exposed to the node whose handler is running."""

    __slots__ = ("_run", "_cur")

    def __init__(self, run: "_Run"):
        self._run = run
        self._cur = -1

    @property
    def time(self) -> float:
        return self._run.now / NANOS

    def send(self, port: int, payload, stage: int = 0) -> None:
        self._run.enqueue(self._cur, port, payload, stage)

    def set_stage(self, stage: int) -> None:
        self._run.set_stage(self._cur, stage)

    def terminate(self) -> None:
        self._run.mark_terminated(self._cur)

    def observe(self, kind: str, **data) -> None:
        obs = self._run.observer
        if obs is not None:
            obs(kind, self._run.now / NANOS, data)


@dataclass(frozen=True)
class RunReport:
    """Exact accounting of one simulated execution."""

    message_count: int
    completion_time: float
    per_stage: dict
    output: dict
    terminated: bool
    events: int
    leftover: int
    nodes: tuple = field(compare=False, repr=False)
    trace: tuple = field(compare=False, repr=False, default=())


class _Run:
    """Mutable state of a single execution."""

    def __init__(self, g: Graph, protocol, delays: DelayModel,
                 wakeup: WakeupSchedule, seed: int, event_budget,
                 trace: bool, observer):
        n = g.n
        self.g = g
        self.observer = observer
        self.sampler = delays.sampler(g.m) if isinstance(delays, DelayModel) else delays
        self.word = word_size(n)
        self.now = 0
        self.seq = 0
        self.heap: list = []
        self.awake = bytearray(n)
        self.term = bytearray(n)
        self.stage = [0] * n
        self.buffer: list[list] = [[] for _ in range(n)]
        self.last_delivery: dict = {}
        self.msg_index: dict = {}
        self.last_seq: dict = {}
        self.message_count = 0
        self.stage_stats: dict = {}
        self.event_budget = event_budget
        self.trace_lines: list = [] if trace else None
        self.ctx = Context(self)
        self.nodes = tuple(
            protocol(v, n, g.weights_at(v), random.Random(mix64(seed, 0xA0DE, v)))
            for v in range(n)
        )
        for v, t in enumerate(wakeup.wake_ns):
            if t is not None:
                self.push(t, v, -1, 0, None)

    def push(self, t: int, dst: int, port: int, tag: int, payload) -> None:
        heapq.heappush(self.heap, (t, dst, port, self.seq, tag, payload))
        self.seq += 1

    def enqueue(self, src: int, port: int, payload, tag: int) -> None:
        if self.term[src]:
            raise ProtocolViolation(f"node {src} sent after terminating")
        if not 0 <= port < len(self.g.adj[src]):
            raise ProtocolViolation(f"node {src} has no port {port}")
        width = _words(payload, self.word)
        if width > MAX_PAYLOAD_WORDS:
            raise PayloadTooWide(
                f"payload {payload!r} is {width} words; limit {MAX_PAYLOAD_WORDS}"
            )
        nbr, _, eid = self.g.adj[src][port]
        direction = 0 if self.g.edges[eid][0] == src else 1
        key = (eid, direction)
        idx = self.msg_index.get(key, 0)
        self.msg_index[key] = idx + 1
        delay = self.sampler.nanos(eid, direction, idx)
        if not 0 < delay <= NANOS:
            raise SimError(f"delay {delay} out of range on edge {eid}")
        delivery = self.now + delay
        prior = self.last_delivery.get(key)
        if prior is not None and prior > delivery:
            delivery = prior
        self.last_delivery[key] = delivery
        self.push(delivery, nbr, self.g.port_of(nbr, eid), tag, payload)

    def set_stage(self, v: int, stage: int) -> None:
        if self.term[v]:
            raise ProtocolViolation(f"node {v} changed stage after terminating")
        if stage < self.stage[v]:
            raise ProtocolViolation(
                f"node {v} stage moved backwards: {self.stage[v]} -> {stage}"
            )
        self.stage[v] = stage

    def mark_terminated(self, v: int) -> None:
        if self.buffer[v]:
            raise ProtocolViolation(f"node {v} terminated with buffered messages")
        self.term[v] = 1

    def drain(self, v: int) -> None:
        # replay buffered envelopes in arrival order as stages unlock
        buf = self.buffer[v]
        while not self.term[v]:
            hit = -1
            for i, (_, _, tag) in enumerate(buf):
                if tag <= self.stage[v]:
                    hit = i
                    break
            if hit < 0:
                return
            port, payload, tag = buf.pop(hit)
            self.nodes[v].on_message(self.ctx, port, payload, tag)

    def execute(self) -> RunReport:
        heap = self.heap
        events = 0
        first_wake = None
        last_event = 0
        last_term = 0
        n_terminated = 0
        n = self.g.n
        while heap:
            if self.event_budget is not None and events >= self.event_budget:
                head = [
                    f"t={_fmt_ns(e[0])} dst={e[1]} port={e[2]} stage={e[4]}"
                    for e in heapq.nsmallest(5, heap)
                ]
                raise BudgetExceeded(events, self.now, head)
            t, dst, port, seq, tag, payload = heapq.heappop(heap)
            events += 1
            self.now = t
            if first_wake is None:
                first_wake = t
            last_event = t
            was_term = self.term[dst]
            if port < 0:
                if self.awake[dst] or was_term:
                    continue
                self.awake[dst] = 1
                self.ctx._cur = dst
                self.nodes[dst].on_wake(self.ctx)
                self.drain(dst)
            else:
                edge_key = (dst, port)
                if seq <= self.last_seq.get(edge_key, -1):
                    raise SimError(
                        f"FIFO violation on port {port} of node {dst}"
                    )
                self.last_seq[edge_key] = seq
                self.message_count += 1
                stat = self.stage_stats.get(tag)
                if stat is None:
                    self.stage_stats[tag] = [1, t, t]
                else:
                    stat[0] += 1
                    stat[2] = t
                if self.trace_lines is not None:
                    src = self.g.adj[dst][port][0]
                    bits = _words(payload, self.word) * self.word
                    self.trace_lines.append(
                        f"t={_fmt_ns(t)} deliver {src}->{dst} stage={tag} bits={bits}"
                    )
                if was_term:
                    raise ProtocolViolation(
                        f"message delivered to terminated node {dst}"
                    )
                self.ctx._cur = dst
                if not self.awake[dst]:
                    self.awake[dst] = 1
                    self.nodes[dst].on_wake(self.ctx)
                    if self.term[dst]:
                        raise ProtocolViolation(
                            f"node {dst} terminated on wake with a message in hand"
                        )
                if tag > self.stage[dst]:
                    self.buffer[dst].append((port, payload, tag))
                else:
                    self.nodes[dst].on_message(self.ctx, port, payload, tag)
                self.drain(dst)
            if self.term[dst] and not was_term:
                n_terminated += 1
                last_term = t
        base = first_wake if first_wake is not None else 0
        terminated = n_terminated == n
        end = last_term if terminated else last_event
        per_stage = {
            tag: (c, (t0 - base) / NANOS, (t1 - base) / NANOS)
            for tag, (c, t0, t1) in sorted(self.stage_stats.items())
        }
        return RunReport(
            message_count=self.message_count,
            completion_time=(end - base) / NANOS,
            per_stage=per_stage,
            output={v: node.result() for v, node in enumerate(self.nodes)},
            terminated=terminated,
            events=events,
            leftover=len(heap),
            nodes=self.nodes,
            trace=tuple(self.trace_lines) if self.trace_lines is not None else (),
        )


def run(g: Graph, protocol, delays: DelayModel | None = None,
        wakeup: WakeupSchedule | None = None, seed: int = 0,
        event_budget: int | None = None, trace: bool = False,
        observer=None) -> RunReport:
    """Execute protocol on g to quiescence and return exact accounting."""
    if delays is None:
        delays = DelayModel.unit()
    if wakeup is None:
        wakeup = WakeupSchedule.all_at_zero(g.n)
    if len(wakeup.wake_ns) != g.n:
        raise ValueError("wakeup schedule does not match graph size")
    return _Run(g, protocol, delays, wakeup, seed, event_budget, trace,
                observer).execute()


def account(report: RunReport) -> str:
    """Cross-check a report's counters; returns "consistent" or raises."""
    total = sum(c for c, _, _ in report.per_stage.values())
    if total != report.message_count:
        raise IntegrityError(
            f"message_count {report.message_count} != per-stage total {total}"
        )
    if report.completion_time < 0:
        raise IntegrityError(f"completion_time {report.completion_time} < 0")
    if report.terminated and report.leftover:
        raise IntegrityError(
            f"terminated run left {report.leftover} queued events"
        )
    return "consistent"
