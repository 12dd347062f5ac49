"""Tests for the discrete-event kernel: delays, FIFO, staging, accounting."""

import re

import pytest

from asyncmst.graphs import Graph, generate_graph
from asyncmst.kernel import (
    BudgetExceeded,
    DelayModel,
    IntegrityError,
    Node,
    PayloadTooWide,
    ProtocolViolation,
    RunReport,
    WakeupSchedule,
    account,
    mix64,
    payload_words,
    run,
    sample_delay,
    word_size,
)


class Flood(Node):
    """Node 0 starts a token; everyone forwards once and stops."""

    __slots__ = ("seen",)

    def __init__(self, node_id, n, weights, rng):
        super().__init__(node_id, n, weights, rng)
        self.seen = False

    def on_wake(self, ctx):
        if self.node_id == 0 and not self.seen:
            self.seen = True
            for p in range(self.deg):
                ctx.send(p, "tok")
            ctx.terminate()

    def on_message(self, ctx, port, payload, stage_tag):
        if not self.seen:
            self.seen = True
            for p in range(self.deg):
                if p != port:
                    ctx.send(p, "tok")
            ctx.terminate()


def test_flooding_path_hand_simulated():
    """Path of 5, unit delays, single wake: 4 messages, completion 4.0."""
    g = generate_graph("path", 5, seed=0)
    report = run(g, Flood, DelayModel.unit(), WakeupSchedule.single(5, 0))
    assert report.message_count == 4
    assert report.completion_time == 4.0
    assert report.terminated
    assert report.per_stage == {0: (4, 1.0, 4.0)}
    assert account(report) == "consistent"


class Gossip(Node):
    """Flooding that absorbs duplicate tokens, usable on cyclic graphs."""

    __slots__ = ("seen",)

    def __init__(self, node_id, n, weights, rng):
        super().__init__(node_id, n, weights, rng)
        self.seen = False

    def on_wake(self, ctx):
        if self.node_id == 0 and not self.seen:
            self.seen = True
            for p in range(self.deg):
                ctx.send(p, "tok")

    def on_message(self, ctx, port, payload, stage_tag):
        if not self.seen:
            self.seen = True
            for p in range(self.deg):
                if p != port:
                    ctx.send(p, "tok")


def test_rerun_byte_identical():
    """Identical arguments give identical reports; seeds matter."""
    g = generate_graph("erdos_renyi", 24, seed=5, p=0.2)
    a = run(g, Gossip, DelayModel.uniform(7), WakeupSchedule.single(24, 0))
    b = run(g, Gossip, DelayModel.uniform(7), WakeupSchedule.single(24, 0))
    assert a == b
    assert a.message_count > 0
    c = run(g, Gossip, DelayModel.uniform(8), WakeupSchedule.single(24, 0))
    assert c.completion_time != a.completion_time


class _Script:
    """Delay table keyed by (edge id, direction, message index)."""

    def __init__(self, table):
        self.table = table

    def nanos(self, eid, direction, msg_index):
        return self.table[(eid, direction, msg_index)]


class TwoSends(Node):
    """Node 0 emits A on wake and B on prompt; node 1 logs arrivals."""

    __slots__ = ("log",)

    def __init__(self, node_id, n, weights, rng):
        super().__init__(node_id, n, weights, rng)
        self.log = []

    def on_wake(self, ctx):
        if self.node_id == 0:
            ctx.send(0, "A")
        elif self.node_id == 2:
            ctx.send(0, "go")

    def on_message(self, ctx, port, payload, stage_tag):
        if self.node_id == 0:
            ctx.send(0, "B")
        else:
            self.log.append((payload, ctx.time))

    def result(self):
        return tuple(self.log)


def test_fifo_forces_order():
    """Enqueues at 0.1 and 0.2 with delays 0.9 and 0.3 arrive in order at 1.0."""
    g = Graph(3, [(0, 1, 1), (0, 2, 2)])
    script = _Script({
        (0, 0, 0): 900_000_000,   # A: 0 -> 1, delay 0.9
        (0, 0, 1): 300_000_000,   # B: 0 -> 1, delay 0.3, must not overtake
        (1, 1, 0): 100_000_000,   # prompt: 2 -> 0, delay 0.1
    })
    wake = WakeupSchedule((100_000_000, None, 100_000_000))
    report = run(g, TwoSends, script, wake)
    assert report.output[1] == (("A", 1.0), ("B", 1.0))
    assert report.message_count == 3


def test_sample_delay_models():
    """Unit is exactly 1.0; the seeded models repeat; range is (0, 1]."""
    assert sample_delay(DelayModel.unit(), 10, 4, 1, 99) == 1.0
    u = DelayModel.uniform(3)
    assert sample_delay(u, 10, 2, 0, 7) == sample_delay(u, 10, 2, 0, 7)
    assert sample_delay(u, 10, 2, 0, 7) != sample_delay(u, 10, 2, 0, 8)
    for idx in range(200):
        d = sample_delay(u, 10, 0, 0, idx)
        assert 0.0 < d <= 1.0
    c = DelayModel.per_edge_constant(9)
    assert sample_delay(c, 10, 5, 0, 0) == sample_delay(c, 10, 5, 1, 42)
    assert sample_delay(c, 10, 5, 0, 0) != sample_delay(c, 10, 6, 0, 0)


def test_laggy_exact_split():
    """slow_fraction 0.5 over 100 edges marks exactly 50 as slow."""
    model = DelayModel.laggy(seed=4, slow_fraction=0.5)
    delays = [sample_delay(model, 100, eid) for eid in range(100)]
    assert delays.count(1.0) == 50
    assert delays.count(0.001) == 50
    again = [sample_delay(model, 100, eid) for eid in range(100)]
    assert delays == again


class WideSend(Node):
    """Sends an int far past the word budget."""

    __slots__ = ()

    def on_wake(self, ctx):
        if self.node_id == 0:
            ctx.send(0, 1 << 200)

    def on_message(self, ctx, port, payload, stage_tag):
        pass


def test_payload_too_wide():
    """Oversized payloads fail at send time."""
    g = generate_graph("path", 4, seed=0)
    with pytest.raises(PayloadTooWide):
        run(g, WideSend, DelayModel.unit(), WakeupSchedule.single(4, 0))


def test_payload_word_arithmetic():
    """Word budget counts ints by width and tags as one word."""
    assert word_size(1) == 1
    assert word_size(2) == 1
    assert word_size(5) == 3
    assert word_size(256) == 8
    assert payload_words(None, 64) == 1
    assert payload_words(True, 64) == 1
    assert payload_words(0, 64) == 1
    assert payload_words(63, 64) == 1
    assert payload_words(64, 64) == 2
    assert payload_words(("moe", 12, 40, 7, 7), 64) == 5
    assert payload_words((), 64) == 1
    with pytest.raises(ProtocolViolation):
        payload_words("a-string-way-too-long-to-be-a-tag", 64)
    with pytest.raises(ProtocolViolation):
        payload_words({"no": "dicts"}, 64)


class PingPong(Node):
    """Two nodes bounce one token forever."""

    __slots__ = ()

    def on_wake(self, ctx):
        if self.node_id == 0:
            ctx.send(0, "ping")

    def on_message(self, ctx, port, payload, stage_tag):
        ctx.send(port, "ping")


def test_event_budget():
    """A livelocked protocol hits the budget with a queue snapshot."""
    g = generate_graph("path", 2, seed=0)
    with pytest.raises(BudgetExceeded) as err:
        run(g, PingPong, DelayModel.unit(), WakeupSchedule.single(2, 0),
            event_budget=50)
    assert err.value.processed == 50
    assert err.value.queue_head


class StagedReceiver(Node):
    """Node 1 unlocks stage 1 only after the stage-0 message lands."""

    __slots__ = ("log",)

    def __init__(self, node_id, n, weights, rng):
        super().__init__(node_id, n, weights, rng)
        self.log = []

    def on_wake(self, ctx):
        if self.node_id == 0:
            ctx.send(0, "early", stage=1)
            ctx.send(0, "late", stage=0)
            ctx.terminate()

    def on_message(self, ctx, port, payload, stage_tag):
        self.log.append((payload, stage_tag, ctx.time))
        if payload == "late":
            ctx.set_stage(1)

    def result(self):
        return tuple(self.log)


def test_stage_buffering_replays_in_arrival_order():
    """Future-stage mail waits, counts once, and replays at the unlock time."""
    g = generate_graph("path", 2, seed=0)
    report = run(g, StagedReceiver, DelayModel.unit(),
                 WakeupSchedule.single(2, 0))
    assert report.output[1] == (("late", 0, 1.0), ("early", 1, 1.0))
    assert report.message_count == 2


class WakeCounter(Node):
    """Counts on_wake calls and remembers when the first one happened."""

    __slots__ = ("wakes", "wake_time")

    def __init__(self, node_id, n, weights, rng):
        super().__init__(node_id, n, weights, rng)
        self.wakes = 0
        self.wake_time = None

    def on_wake(self, ctx):
        self.wakes += 1
        if self.wake_time is None:
            self.wake_time = ctx.time
        if self.node_id == 0:
            ctx.send(0, "hi")

    def on_message(self, ctx, port, payload, stage_tag):
        pass

    def result(self):
        return (self.wakes, self.wake_time)


def test_wake_on_receipt_skips_stale_wake():
    """A message wakes the receiver; its later scheduled wake is a no-op."""
    g = generate_graph("path", 2, seed=0)
    fast = DelayModel.laggy(seed=1, slow_fraction=0.0)
    wake = WakeupSchedule((0, 500_000_000))
    report = run(g, WakeCounter, fast, wake)
    assert report.output[0] == (1, 0.0)
    assert report.output[1] == (1, 0.001)


class EagerStop(Node):
    """Node 1 terminates on the first message; node 0 keeps sending."""

    __slots__ = ()

    def on_wake(self, ctx):
        if self.node_id == 0:
            ctx.send(0, "one")
            ctx.send(0, "two")

    def on_message(self, ctx, port, payload, stage_tag):
        ctx.terminate()


def test_message_to_terminated_node_is_an_error():
    """Mail behind a termination is a protocol bug, not a silent drop."""
    g = generate_graph("path", 2, seed=0)
    with pytest.raises(ProtocolViolation):
        run(g, EagerStop, DelayModel.unit(), WakeupSchedule.single(2, 0))


class SilentStop(Node):
    """Everyone terminates immediately on wake."""

    __slots__ = ()

    def on_wake(self, ctx):
        ctx.terminate()

    def on_message(self, ctx, port, payload, stage_tag):
        pass


def test_empty_protocol_accounts_to_zero():
    """No messages, completion 0.0, consistent accounting."""
    g = generate_graph("complete", 4, seed=0)
    report = run(g, SilentStop, DelayModel.uniform(2),
                 WakeupSchedule.all_at_zero(4))
    assert report.message_count == 0
    assert report.completion_time == 0.0
    assert report.terminated
    assert account(report) == "consistent"


class OneShot(Node):
    """A single message from node 0 to node 1, then both stop."""

    __slots__ = ()

    def on_wake(self, ctx):
        if self.node_id == 0:
            ctx.send(0, "only")
            ctx.terminate()

    def on_message(self, ctx, port, payload, stage_tag):
        ctx.terminate()


def test_single_message_protocol():
    """Exactly one delivery is accounted."""
    g = generate_graph("path", 2, seed=0)
    report = run(g, OneShot, DelayModel.unit(), WakeupSchedule.single(2, 0))
    assert report.message_count == 1
    assert report.terminated
    assert account(report) == "consistent"


def test_account_rejects_tampered_report():
    """Counter mismatches raise and name the counter."""
    good = RunReport(message_count=1, completion_time=1.0,
                     per_stage={0: (1, 1.0, 1.0)}, output={}, terminated=True,
                     events=2, leftover=0, nodes=())
    assert account(good) == "consistent"
    bad = RunReport(message_count=2, completion_time=1.0,
                    per_stage={0: (1, 1.0, 1.0)}, output={}, terminated=True,
                    events=2, leftover=0, nodes=())
    with pytest.raises(IntegrityError, match="message_count"):
        account(bad)
    stuck = RunReport(message_count=1, completion_time=1.0,
                      per_stage={0: (1, 1.0, 1.0)}, output={}, terminated=True,
                      events=2, leftover=3, nodes=())
    with pytest.raises(IntegrityError, match="queued"):
        account(stuck)


def test_trace_lines():
    """Trace emits one fixed-format line per delivery."""
    g = generate_graph("path", 3, seed=0)
    report = run(g, Flood, DelayModel.unit(), WakeupSchedule.single(3, 0),
                 trace=True)
    assert len(report.trace) == report.message_count == 2
    pat = re.compile(r"^t=\d+\.\d{9} deliver \d+->\d+ stage=\d+ bits=\d+$")
    for line in report.trace:
        assert pat.match(line)
    assert report.trace[0] == "t=1.000000000 deliver 0->1 stage=0 bits=2"


class Misbehaver(Node):
    """Drives each forbidden kernel interaction on demand."""

    __slots__ = ("mode",)

    mode_flag = "send_after_term"

    def __init__(self, node_id, n, weights, rng):
        super().__init__(node_id, n, weights, rng)
        self.mode = type(self).mode_flag

    def on_wake(self, ctx):
        if self.node_id != 0:
            return
        if self.mode == "send_after_term":
            ctx.terminate()
            ctx.send(0, "x")
        elif self.mode == "bad_port":
            ctx.send(99, "x")
        elif self.mode == "stage_backwards":
            ctx.set_stage(2)
            ctx.set_stage(1)

    def on_message(self, ctx, port, payload, stage_tag):
        pass


def test_kernel_rejects_bad_calls():
    """Sending after terminate, bad ports, and stage rollback all raise."""
    g = generate_graph("path", 2, seed=0)
    for mode in ("send_after_term", "bad_port", "stage_backwards"):
        Misbehaver.mode_flag = mode
        with pytest.raises(ProtocolViolation):
            run(g, Misbehaver, DelayModel.unit(), WakeupSchedule.single(2, 0))


def test_wakeup_schedules():
    """Constructors validate and stay deterministic."""
    with pytest.raises(ValueError):
        WakeupSchedule(())
    with pytest.raises(ValueError):
        WakeupSchedule((None, None))
    with pytest.raises(ValueError):
        WakeupSchedule((-5, 0))
    assert WakeupSchedule.all_at_zero(3).wake_ns == (0, 0, 0)
    assert WakeupSchedule.single(3, 1).wake_ns == (None, 0, None)
    a = WakeupSchedule.single_random(10, seed=4)
    assert a == WakeupSchedule.single_random(10, seed=4)
    assert sum(1 for t in a.wake_ns if t is not None) == 1
    s = WakeupSchedule.staggered_uniform(6, seed=2)
    assert s == WakeupSchedule.staggered_uniform(6, seed=2)
    assert all(0 <= t < 10**9 for t in s.wake_ns)


def test_delay_model_validation():
    """Kind and parameter ranges are enforced."""
    with pytest.raises(ValueError):
        DelayModel("gaussian")
    with pytest.raises(ValueError):
        DelayModel("unit", slow_fraction=1.5)
    with pytest.raises(ValueError):
        DelayModel("unit", fast_delay=0.0)
    with pytest.raises(ValueError):
        run(generate_graph("path", 3, seed=0), Flood,
            wakeup=WakeupSchedule.all_at_zero(2))


class Spray(Node):
    """Everyone greets every port once and answers each greeting once."""

    __slots__ = ()

    def on_wake(self, ctx):
        for p in range(self.deg):
            ctx.send(p, "hi")

    def on_message(self, ctx, port, payload, stage_tag):
        if payload == "hi":
            ctx.send(port, "yo")


def test_spray_stress_accounting():
    """4m messages exactly, under every delay model, twice each."""
    g = generate_graph("erdos_renyi", 30, seed=6, p=0.2)
    models = [DelayModel.unit(), DelayModel.uniform(3),
              DelayModel.per_edge_constant(5), DelayModel.laggy(7)]
    for model in models:
        a = run(g, Spray, model, WakeupSchedule.staggered_uniform(30, 9))
        b = run(g, Spray, model, WakeupSchedule.staggered_uniform(30, 9))
        assert a.message_count == 4 * g.m
        assert a == b
        assert account(a) == "consistent"
        assert a.completion_time <= 3.0


def test_mix64_spread():
    """The integer mixer is stable and separates nearby inputs."""
    assert mix64(1, 2, 3) == mix64(1, 2, 3)
    seen = {mix64(0, i) for i in range(1000)}
    assert len(seen) == 1000
