"""Reusable distributed primitives: tree ops, synchronizers, leader election."""

from __future__ import annotations

from dataclasses import dataclass

from .graphs import Graph
from .kernel import (
    DelayModel,
    Node,
    ProtocolViolation,
    SimError,
    WakeupSchedule,
    run,
)


@dataclass(frozen=True)
class FragmentView:
    """One node's slice of a rooted fragment tree (ports, not ids)."""

    fragment_id: int
    cluster_id: int
    parent: int | None
    children: tuple
    root_flag: bool


def fragment_views(g: Graph, parent_nodes, cluster_of=None) -> tuple:
    """Per-node views of the forest given by a parent-node array."""
    if cluster_of is None:
        # single fragment spanning everything, named by its root
        roots = [v for v, p in enumerate(parent_nodes) if p == -1]
        if len(roots) != 1:
            raise ValueError("single-fragment view needs exactly one root")
        cluster_of = (roots[0],) * g.n
    port_to = [dict() for _ in range(g.n)]
    for v in range(g.n):
        for p, (u, _, _) in enumerate(g.adj[v]):
            port_to[v][u] = p
    kids: list[list[int]] = [[] for _ in range(g.n)]
    for v, pn in enumerate(parent_nodes):
        if pn != -1:
            kids[pn].append(port_to[pn][v])
    views = []
    for v in range(g.n):
        pn = parent_nodes[v]
        views.append(FragmentView(
            fragment_id=cluster_of[v],
            cluster_id=cluster_of[v],
            parent=None if pn == -1 else port_to[v][pn],
            children=tuple(sorted(kids[v])),
            root_flag=pn == -1,
        ))
    return tuple(views)


class HostNode(Node):
    """Node that routes messages to registered components by kind tag."""

    __slots__ = ("comps", "out")

    def __init__(self, node_id, n, weights, rng):
        super().__init__(node_id, n, weights, rng)
        self.comps = {}
        self.out = {}

    def register(self, comp) -> None:
        for kind in comp.kinds:
            if kind in self.comps:
                raise ProtocolViolation(f"kind {kind!r} already registered")
            self.comps[kind] = comp

    def on_message(self, ctx, port, payload, stage_tag):
        comp = self.comps.get(payload[0])
        if comp is None:
            raise ProtocolViolation(
                f"node {self.node_id} has no handler for {payload[0]!r}"
            )
        comp.handle(ctx, port, payload)

    def result(self):
        return self.out


class FragBcast:
    """Root-to-all broadcast with ack convergecast; 2(size-1) messages."""

    __slots__ = ("host", "view", "payload", "on_done", "on_receive", "kind",
                 "pending", "done")

    def __init__(self, host, view, payload=None, on_done=None,
                 on_receive=None, kind="fb"):
        self.host = host
        self.view = view
        self.payload = payload
        self.on_done = on_done
        self.on_receive = on_receive
        self.kind = kind
        self.pending = 0
        self.done = False

    @property
    def kinds(self):
        return (self.kind, self.kind + "a")

    def start(self, ctx):
        if not self.view.root_flag:
            raise ProtocolViolation("only the fragment root starts a broadcast")
        self._spread(ctx)

    def _spread(self, ctx):
        if self.on_receive is not None:
            self.on_receive(ctx, self.payload)
        self.pending = len(self.view.children)
        if self.pending == 0:
            self._complete(ctx)
            return
        for p in self.view.children:
            ctx.send(p, (self.kind, self.payload))

    def _complete(self, ctx):
        if self.view.root_flag:
            self.done = True
            if self.on_done is not None:
                self.on_done(ctx)
        else:
            ctx.send(self.view.parent, (self.kind + "a",))

    def handle(self, ctx, port, payload):
        if payload[0] == self.kind:
            self.payload = payload[1]
            self._spread(ctx)
        else:
            self.pending -= 1
            if self.pending == 0:
                self._complete(ctx)


class TreeCount:
    """Wave & echo size count; 2(size-1) messages."""

    __slots__ = ("host", "view", "on_done", "kind", "pending", "total", "size")

    def __init__(self, host, view, on_done=None, kind="tc"):
        self.host = host
        self.view = view
        self.on_done = on_done
        self.kind = kind
        self.pending = 0
        self.total = 1
        self.size = None

    @property
    def kinds(self):
        return (self.kind, self.kind + "r")

    def start(self, ctx):
        self._spread(ctx)

    def _spread(self, ctx):
        self.pending = len(self.view.children)
        if self.pending == 0:
            self._echo(ctx)
            return
        for p in self.view.children:
            ctx.send(p, (self.kind,))

    def _echo(self, ctx):
        if self.view.root_flag:
            self.size = self.total
            if self.on_done is not None:
                self.on_done(ctx, self.total)
        else:
            ctx.send(self.view.parent, (self.kind + "r", self.total))

    def handle(self, ctx, port, payload):
        if payload[0] == self.kind:
            self._spread(ctx)
        else:
            self.total += payload[1]
            self.pending -= 1
            if self.pending == 0:
                self._echo(ctx)


class DiamCalc:
    """Wave & echo of (height, best-path-through-me); 2(size-1) messages."""

    __slots__ = ("host", "view", "on_done", "kind", "pending", "heights",
                 "best", "diameter")

    def __init__(self, host, view, on_done=None, kind="dm"):
        self.host = host
        self.view = view
        self.on_done = on_done
        self.kind = kind
        self.pending = 0
        self.heights = []
        self.best = 0
        self.diameter = None

    @property
    def kinds(self):
        return (self.kind, self.kind + "r")

    def start(self, ctx):
        self._spread(ctx)

    def _spread(self, ctx):
        self.pending = len(self.view.children)
        if self.pending == 0:
            self._echo(ctx)
            return
        for p in self.view.children:
            ctx.send(p, (self.kind,))

    def _echo(self, ctx):
        hs = sorted(self.heights, reverse=True)
        through = sum(hs[:2])
        height = hs[0] if hs else 0
        best = max([through, *(\
            b for b in (self.best,))])
        if self.view.root_flag:
            self.diameter = best
            if self.on_done is not None:
                self.on_done(ctx, best)
        else:
            ctx.send(self.view.parent, (self.kind + "r", height, best))

    def handle(self, ctx, port, payload):
        if payload[0] == self.kind:
            self._spread(ctx)
        else:
            self.heights.append(payload[1] + 1)
            self.best = max(self.best, payload[2])
            self.pending -= 1
            if self.pending == 0:
                self._echo(ctx)


class Upcast:
    """Burst-forward k items to the root, then a termination broadcast."""

    __slots__ = ("host", "view", "k", "items", "on_done", "kind", "collected",
                 "bcast", "done")

    def __init__(self, host, view, k, items=(), on_done=None, kind="uc"):
        self.host = host
        self.view = view
        self.k = k
        self.items = list(items)
        self.on_done = on_done
        self.kind = kind
        self.collected = []
        self.bcast = FragBcast(host, view, on_done=self._finish,
                               kind=kind + "f")
        self.done = False
        host.register(self.bcast)

    @property
    def kinds(self):
        return (self.kind,)

    def start(self, ctx):
        for item in self.items:
            if self.view.root_flag:
                self._collect(ctx, item)
            else:
                ctx.send(self.view.parent, (self.kind, item))
        if self.view.root_flag and self.k == 0:
            self.bcast.start(ctx)

    def _collect(self, ctx, item):
        self.collected.append(item)
        if len(self.collected) > self.k:
            raise ProtocolViolation("upcast received more items than expected")
        if len(self.collected) == self.k:
            self.bcast.start(ctx)

    def _finish(self, ctx):
        self.done = True
        if self.on_done is not None:
            self.on_done(ctx, tuple(self.collected))

    def handle(self, ctx, port, payload):
        if self.view.root_flag:
            self._collect(ctx, payload[1])
        else:
            ctx.send(self.view.parent, (self.kind, payload[1]))


class Downcast:
    """Route targeted messages down the tree; counted-ack termination."""

    __slots__ = ("host", "view", "routing", "on_done", "on_deliver", "kind",
                 "consumed", "used", "acks_pending", "subtotal", "flushed",
                 "done", "expected")

    def __init__(self, host, view, routing, on_done=None, on_deliver=None,
                 kind="dc"):
        self.host = host
        self.view = view
        self.routing = routing
        self.on_done = on_done
        self.on_deliver = on_deliver
        self.kind = kind
        self.consumed = 0
        self.used = []
        self.acks_pending = 0
        self.subtotal = 0
        self.flushed = False
        self.done = False
        self.expected = 0

    @property
    def kinds(self):
        return (self.kind, self.kind + "f", self.kind + "a")

    def start(self, ctx, targeted):
        if not self.view.root_flag:
            raise ProtocolViolation("only the root dispatches a downcast")
        self.expected = len(targeted)
        for dest, msg in targeted:
            if dest == self.host.node_id:
                self._consume(ctx, msg)
            else:
                self._forward(ctx, dest, msg)
        self._flush(ctx)

    def _consume(self, ctx, msg):
        self.consumed += 1
        if self.on_deliver is not None:
            self.on_deliver(ctx, msg)

    def _forward(self, ctx, dest, msg):
        port = self.routing.get(dest)
        if port is None:
            raise ProtocolViolation(
                f"node {self.host.node_id} cannot route to {dest}"
            )
        if port not in self.used:
            self.used.append(port)
        ctx.send(port, (self.kind, dest, msg))

    def _flush(self, ctx):
        self.flushed = True
        self.acks_pending = len(self.used)
        for p in self.used:
            ctx.send(p, (self.kind + "f",))
        if self.acks_pending == 0:
            self._ack_up(ctx)

    def _ack_up(self, ctx):
        total = self.consumed + self.subtotal
        if self.view.root_flag:
            if total != self.expected:
                raise ProtocolViolation(
                    f"downcast acked {total} of {self.expected} messages"
                )
            self.done = True
            if self.on_done is not None:
                self.on_done(ctx, total)
        else:
            ctx.send(self.view.parent, (self.kind + "a", total))

    def handle(self, ctx, port, payload):
        tag = payload[0]
        if tag == self.kind:
            _, dest, msg = payload
            if dest == self.host.node_id:
                self._consume(ctx, msg)
            else:
                self._forward(ctx, dest, msg)
        elif tag == self.kind + "f":
            self._flush(ctx)
        else:
            self.subtotal += payload[1]
            self.acks_pending -= 1
            if self.acks_pending == 0:
                self._ack_up(ctx)


@dataclass(frozen=True)
class MoeTuple:
    """Minimum outgoing edge of a fragment, seen from inside."""

    u: int
    v: int
    weight: int
    cluster_from: int
    cluster_to: int


class FindMoe:
    """Query non-tree ports for cluster ids; converge the minimum crossing."""

    __slots__ = ("host", "view", "on_done", "kind", "pending_q", "pending_c",
                 "best", "moe", "started")

    def __init__(self, host, view, on_done=None, kind="fm"):
        self.host = host
        self.view = view
        self.on_done = on_done
        self.kind = kind
        self.pending_q = 0
        self.pending_c = 0
        self.best = None
        self.moe = None
        self.started = False

    @property
    def kinds(self):
        return (self.kind + "s", self.kind + "q", self.kind + "r",
                self.kind + "e")

    def start(self, ctx):
        self._activate(ctx)

    def _tree_ports(self):
        ports = set(self.view.children)
        if self.view.parent is not None:
            ports.add(self.view.parent)
        return ports

    def _activate(self, ctx):
        self.started = True
        self.pending_c = len(self.view.children)
        for p in self.view.children:
            ctx.send(p, (self.kind + "s",))
        tree = self._tree_ports()
        outside = [p for p in range(self.host.deg) if p not in tree]
        self.pending_q = len(outside)
        for p in outside:
            ctx.send(p, (self.kind + "q",))
        self._maybe_echo(ctx)

    def _offer(self, cand):
        if cand is not None and (self.best is None or cand < self.best):
            self.best = cand

    def _maybe_echo(self, ctx):
        if not self.started or self.pending_q or self.pending_c:
            return
        if self.view.root_flag:
            if self.best is not None:
                w, u, v, c_to = self.best
                self.moe = MoeTuple(u=u, v=v, weight=w,
                                    cluster_from=self.view.cluster_id,
                                    cluster_to=c_to)
            if self.on_done is not None:
                self.on_done(ctx, self.moe)
        elif self.best is None:
            ctx.send(self.view.parent, (self.kind + "e", None, 0, 0, 0))
        else:
            ctx.send(self.view.parent, (self.kind + "e", *self.best))

    def handle(self, ctx, port, payload):
        tag = payload[0]
        if tag == self.kind + "s":
            self._activate(ctx)
        elif tag == self.kind + "q":
            ctx.send(port, (self.kind + "r", self.view.cluster_id,
                            self.host.node_id))
        elif tag == self.kind + "r":
            _, cluster, nid = payload
            if cluster != self.view.cluster_id:
                self._offer((self.host.weights[port], self.host.node_id,
                             nid, cluster))
            self.pending_q -= 1
            self._maybe_echo(ctx)
        else:
            if payload[1] is not None:
                self._offer(tuple(payload[1:]))
            self.pending_c -= 1
            self._maybe_echo(ctx)


class PhaseBarrier:
    """Tree-synchronized phases: go-wave down, done-wave up, per phase."""

    __slots__ = ("host", "view", "phases", "duty", "on_all_done", "kind",
                 "phase", "duty_done", "kids_up", "done")

    def __init__(self, host, view, phases, duty=None, on_all_done=None,
                 kind="pb"):
        self.host = host
        self.view = view
        self.phases = phases
        self.duty = duty
        self.on_all_done = on_all_done
        self.kind = kind
        self.phase = -1
        self.duty_done = False
        self.kids_up = 0
        self.done = False

    @property
    def kinds(self):
        return (self.kind + "g", self.kind + "u")

    def start(self, ctx):
        if not self.view.root_flag:
            raise ProtocolViolation("only the root drives the barrier")
        if self.phases == 0:
            self._all_done(ctx)
        else:
            self._enter(ctx, 0)

    def _all_done(self, ctx):
        self.done = True
        if self.on_all_done is not None:
            self.on_all_done(ctx)

    def _enter(self, ctx, phase):
        self.phase = phase
        self.duty_done = False
        self.kids_up = 0
        for p in self.view.children:
            ctx.send(p, (self.kind + "g", phase))
        if self.duty is None:
            self.duty_complete(ctx)
        else:
            self.duty(ctx, phase, self.duty_complete)

    def duty_complete(self, ctx):
        self.duty_done = True
        self._check(ctx)

    def _check(self, ctx):
        if not self.duty_done or self.kids_up != len(self.view.children):
            return
        if self.view.root_flag:
            if self.phase + 1 == self.phases:
                self._all_done(ctx)
            else:
                self._enter(ctx, self.phase + 1)
        else:
            ctx.send(self.view.parent, (self.kind + "u", self.phase))

    def handle(self, ctx, port, payload):
        tag, phase = payload
        if tag == self.kind + "g":
            if phase != self.phase + 1:
                raise ProtocolViolation("barrier phase out of order")
            self._enter(ctx, phase)
        else:
            if phase != self.phase:
                raise ProtocolViolation("barrier echo for a foreign phase")
            self.kids_up += 1
            self._check(ctx)


class Elect:
    """Flooding leader election: the maximum id wins; its flood tree remains."""

    __slots__ = ("host", "on_done", "kind", "started", "best", "parent_port",
                 "resp_pending", "children", "leader", "lead_pending", "done")

    def __init__(self, host, on_done=None):
        self.host = host
        self.on_done = on_done
        self.started = False
        self.best = None
        self.parent_port = None
        self.resp_pending = set()
        self.children = set()
        self.leader = None
        self.lead_pending = 0
        self.done = False

    @property
    def kinds(self):
        return ("cand", "resp", "lead", "ldak")

    def start(self, ctx):
        if self.started:
            return
        self.started = True
        self.best = self.host.node_id
        self.resp_pending = set(range(self.host.deg))
        for p in range(self.host.deg):
            ctx.send(p, ("cand", self.best))
        self._maybe_won(ctx)

    def _maybe_won(self, ctx):
        if self.resp_pending:
            return
        if self.best == self.host.node_id:
            self._lead(ctx)
        else:
            ctx.send(self.parent_port, ("resp", self.best, True))

    def _lead(self, ctx):
        self.leader = self.best
        self.lead_pending = len(self.children)
        if self.lead_pending == 0:
            self._finish(ctx)
            return
        for p in self.children:
            ctx.send(p, ("lead", self.leader))

    def _finish(self, ctx):
        self.done = True
        if self.parent_port is not None:
            ctx.send(self.parent_port, ("ldak",))
        if self.on_done is not None:
            self.on_done(ctx)

    def handle(self, ctx, port, payload):
        tag = payload[0]
        if tag == "cand":
            c = payload[1]
            if c > self.best:
                if self.parent_port is not None:
                    # the old candidate lost; settle that wave immediately
                    ctx.send(self.parent_port, ("resp", self.best, False))
                self.best = c
                self.parent_port = port
                self.children = set()
                self.resp_pending = {p for p in range(self.host.deg)
                                     if p != port}
                for p in self.resp_pending:
                    ctx.send(p, ("cand", c))
                self._maybe_won(ctx)
            else:
                ctx.send(port, ("resp", c, False))
        elif tag == "resp":
            _, c, child_flag = payload
            if c == self.best and port in self.resp_pending:
                self.resp_pending.discard(port)
                if child_flag:
                    self.children.add(port)
                self._maybe_won(ctx)
        elif tag == "lead":
            self.leader = payload[1]
            self.lead_pending = len(self.children)
            if self.lead_pending == 0:
                self._finish(ctx)
            else:
                for p in self.children:
                    ctx.send(p, ("lead", self.leader))
        else:
            self.lead_pending -= 1
            if self.lead_pending == 0:
                self._finish(ctx)


class Pif:
    """Propagation of information with feedback; builds a scaffold tree."""

    __slots__ = ("host", "root_flag", "on_done", "kind", "seen", "parent_port",
                 "children", "pending", "done")

    def __init__(self, host, root_flag, on_done=None, kind="pf"):
        self.host = host
        self.root_flag = root_flag
        self.on_done = on_done
        self.kind = kind
        self.seen = False
        self.parent_port = None
        self.children = set()
        self.pending = 0
        self.done = False

    @property
    def kinds(self):
        return (self.kind, self.kind + "e", self.kind + "n")

    def start(self, ctx):
        self.seen = True
        self.pending = self.host.deg
        if self.pending == 0:
            self._complete(ctx)
            return
        for p in range(self.host.deg):
            ctx.send(p, (self.kind,))

    def _complete(self, ctx):
        self.done = True
        if not self.root_flag:
            ctx.send(self.parent_port, (self.kind + "e",))
        if self.on_done is not None:
            self.on_done(ctx)

    def handle(self, ctx, port, payload):
        tag = payload[0]
        if tag == self.kind:
            if self.seen:
                ctx.send(port, (self.kind + "n",))
                return
            self.seen = True
            self.parent_port = port
            self.pending = self.host.deg - 1
            if self.pending == 0:
                self._complete(ctx)
                return
            for p in range(self.host.deg):
                if p != port:
                    ctx.send(p, (self.kind,))
        else:
            if tag == self.kind + "e":
                self.children.add(port)
            self.pending -= 1
            if self.pending == 0:
                self._complete(ctx)


# ---------------------------------------------------------------------------
# drivers: wire one component over a prepared fragment and run the kernel


def _op_protocol(views, build, autostart=True):
    class OpNode(HostNode):
        __slots__ = ()

        def on_wake(self, ctx):
            if self.comps:
                return
            comp = build(self, views[self.node_id])
            if autostart and views[self.node_id].root_flag:
                comp.start(ctx)

    return OpNode


def _run_op(g, protocol, delays, wakeup, seed, budget=2_000_000):
    if delays is None:
        delays = DelayModel.unit()
    if wakeup is None:
        wakeup = WakeupSchedule.all_at_zero(g.n)
    return run(g, protocol, delays, wakeup, seed=seed, event_budget=budget)


def frag_bcast(g, parent_nodes, payload, delays=None, wakeup=None, seed=0):
    """Broadcast payload over the tree; returns (per-node payloads, report)."""
    views = fragment_views(g, parent_nodes)

    def build(host, view):
        comp = FragBcast(
            host, view,
            payload=payload if view.root_flag else None,
            on_done=lambda ctx: host.out.__setitem__("done_at", ctx.time),
            on_receive=lambda ctx, data: host.out.__setitem__("got", data),
        )
        host.register(comp)
        return comp

    report = _run_op(g, _op_protocol(views, build), delays, wakeup, seed)
    return {v: out.get("got") for v, out in report.output.items()}, report


def tree_count(g, parent_nodes, delays=None, wakeup=None, seed=0):
    """Count the tree's nodes at the root; returns (size, report)."""
    views = fragment_views(g, parent_nodes)

    def build(host, view):
        comp = TreeCount(
            host, view,
            on_done=lambda ctx, size: host.out.__setitem__("size", size),
        )
        host.register(comp)
        return comp

    report = _run_op(g, _op_protocol(views, build), delays, wakeup, seed)
    root = parent_nodes.index(-1)
    return report.output[root].get("size"), report


def diam_calc(g, parent_nodes, delays=None, wakeup=None, seed=0):
    """Tree diameter at the root; returns (diameter, report)."""
    views = fragment_views(g, parent_nodes)

    def build(host, view):
        comp = DiamCalc(
            host, view,
            on_done=lambda ctx, d: host.out.__setitem__("diam", d),
        )
        host.register(comp)
        return comp

    report = _run_op(g, _op_protocol(views, build), delays, wakeup, seed)
    root = parent_nodes.index(-1)
    return report.output[root].get("diam"), report


def upcast(g, parent_nodes, items_by_node, delays=None, wakeup=None, seed=0):
    """Move all items to the root; returns (items at root, report)."""
    views = fragment_views(g, parent_nodes)
    k = sum(len(v) for v in items_by_node.values())

    class UpNode(HostNode):
        __slots__ = ()

        def on_wake(self, ctx):
            if self.comps:
                return
            view = views[self.node_id]
            comp = Upcast(
                self, view, k, items=items_by_node.get(self.node_id, ()),
                on_done=lambda ctx2, items: self.out.update(
                    items=items, done_at=ctx2.time),
            )
            self.register(comp)
            comp.start(ctx)

    report = _run_op(g, UpNode, delays, wakeup, seed)
    root = parent_nodes.index(-1)
    got = report.output[root].get("items")
    if got is None:
        raise SimError(
            f"upcast starved: root holds "
            f"{len(report.nodes[root].comps['uc'].collected)} of {k} items"
        )
    return got, report


def downcast(g, parent_nodes, targeted, delays=None, wakeup=None, seed=0):
    """Deliver (dest, msg) pairs from the root; returns (per-node, report)."""
    views = fragment_views(g, parent_nodes)
    root = parent_nodes.index(-1)
    kids = [[] for _ in range(g.n)]
    for v, p in enumerate(parent_nodes):
        if p != -1:
            kids[p].append(v)
    routing = [dict() for _ in range(g.n)]

    def fill(v):
        mine = {v}
        for c in kids[v]:
            sub = fill(c)
            port = next(p for p, (u, _, _) in enumerate(g.adj[v]) if u == c)
            for d in sub:
                routing[v][d] = port
            mine |= sub
        return mine

    fill(root)

    class DownNode(HostNode):
        __slots__ = ()

        def on_wake(self, ctx):
            if self.comps:
                return
            view = views[self.node_id]
            comp = Downcast(
                self, view, routing[self.node_id],
                on_done=lambda ctx2, total: self.out.update(
                    acked=total, done_at=ctx2.time),
                on_deliver=lambda ctx2, msg: self.out.setdefault(
                    "got", []).append(msg),
            )
            self.register(comp)
            if view.root_flag:
                comp.start(ctx, targeted)

    report = _run_op(g, DownNode, delays, wakeup, seed)
    delivered = {v: tuple(out.get("got", ())) for v, out in
                 report.output.items()}
    return delivered, report


def find_moe(g, partition, delays=None, wakeup=None, seed=0):
    """Minimum outgoing edge of every fragment; returns (dict, report)."""
    views = fragment_views(g, partition.parent, partition.cluster_of)

    def build(host, view):
        comp = FindMoe(
            host, view,
            on_done=lambda ctx, moe: host.out.__setitem__("moe", moe),
        )
        host.register(comp)
        return comp

    report = _run_op(g, _op_protocol(views, build), delays, wakeup, seed)
    moes = {}
    for cid, root in partition.roots().items():
        moes[cid] = report.output[root].get("moe")
    return moes, report


def beta_counter(g, parent_nodes, phases, duty=None, delays=None,
                 wakeup=None, seed=0):
    """Run `phases` barrier rounds over the tree; returns the kernel report."""
    views = fragment_views(g, parent_nodes)

    def build(host, view):
        comp = PhaseBarrier(
            host, view, phases,
            duty=None if duty is None else duty(host),
            on_all_done=lambda ctx: host.out.__setitem__("done_at", ctx.time),
        )
        host.register(comp)
        return comp

    return _run_op(g, _op_protocol(views, build), delays, wakeup, seed)


@dataclass(frozen=True)
class LeaderResult:
    """Outcome of a leader election run."""

    leader: int
    parent_ports: tuple
    children_ports: tuple
    report: object


def leader_elect(g, impl="reference_flooding", delays=None, wakeup=None,
                 seed=0):
    """Elect a leader known to every node; the winner's tree is kept."""
    if impl == "reference_flooding":
        factory = _elect_protocol()
    elif callable(impl):
        factory = impl
    else:
        raise ValueError(f"unknown leader election implementation {impl!r}")
    report = _run_op(g, factory, delays, wakeup, seed)
    leaders = {out.get("leader") for out in report.output.values()}
    done = all(out.get("done") for out in report.output.values())
    if len(leaders) != 1 or not done:
        raise SimError(f"election did not converge: leaders={leaders}")
    return LeaderResult(
        leader=leaders.pop(),
        parent_ports=tuple(out.get("parent") for out in
                           report.output.values()),
        children_ports=tuple(out.get("children") for out in
                             report.output.values()),
        report=report,
    )


def _elect_protocol():
    class ElectNode(HostNode):
        __slots__ = ()

        def on_wake(self, ctx):
            if self.comps:
                return
            comp = Elect(self, on_done=lambda ctx2: self._record())
            self.register(comp)
            comp.start(ctx)

        def _record(self):
            comp = self.comps["cand"]
            self.out.update(
                leader=comp.leader, done=comp.done,
                parent=comp.parent_port,
                children=tuple(sorted(comp.children)),
            )

    return ElectNode


def pif_tree(g, root, delays=None, wakeup=None, seed=0):
    """Build a spanning scaffold by probe/echo from root; returns
    (parent_ports, children_ports, report)."""

    class PifNode(HostNode):
        __slots__ = ()

        def on_wake(self, ctx):
            if self.comps:
                return
            comp = Pif(self, root_flag=self.node_id == root,
                       on_done=lambda ctx2: None)
            self.register(comp)
            if self.node_id == root:
                comp.start(ctx)

    if wakeup is None:
        wakeup = WakeupSchedule.single(g.n, root)
    report = _run_op(g, PifNode, delays, wakeup, seed)
    parents = []
    children = []
    for v in range(g.n):
        comp = report.nodes[v].comps["pf"]
        if not comp.done:
            raise SimError(f"probe wave never finished at node {v}")
        parents.append(comp.parent_port)
        children.append(tuple(sorted(comp.children)))
    return tuple(parents), tuple(children), report


# ---------------------------------------------------------------------------
# round-structured protocols: lock-step executor and alpha synchronizer


def sync_execute(g: Graph, algo_factory, rounds: int, seed: int = 0) -> dict:
    """Lock-step reference run of a round-structured protocol."""
    import random as _random

    from .kernel import mix64

    algos = [algo_factory(v, g.n, g.weights_at(v),
                          _random.Random(mix64(seed, 0xA0DE, v)))
             for v in range(g.n)]
    for r in range(rounds):
        inboxes: list[list] = [[] for _ in range(g.n)]
        for v in range(g.n):
            sent = set()
            for port, payload in algos[v].outbox(r):
                if port in sent:
                    raise ProtocolViolation(
                        f"round protocol sent twice on port {port}"
                    )
                sent.add(port)
                u, _, eid = g.adj[v][port]
                inboxes[u].append((g.port_of(u, eid), payload))
        for v in range(g.n):
            algos[v].inbox(r, sorted(inboxes[v]))
    return {v: algos[v].output() for v in range(g.n)}


def alpha_simulate(g: Graph, algo_factory, rounds: int, delays=None,
                   wakeup=None, seed: int = 0, budget=4_000_000):
    """Run a round-structured protocol under the pulse/ack synchronizer."""

    class AlphaNode(Node):
        __slots__ = ("algo", "round", "by_round", "acks_left", "finished")

        def __init__(self, node_id, n, weights, rng):
            super().__init__(node_id, n, weights, rng)
            self.algo = algo_factory(node_id, n, weights, rng)
            self.round = -1
            self.by_round = {}
            self.acks_left = 0
            self.finished = rounds == 0

        def _slot(self, r):
            if r not in self.by_round:
                self.by_round[r] = {"data": [], "pulses": 0}
            return self.by_round[r]

        def on_wake(self, ctx):
            if self.round < 0:
                if rounds == 0:
                    ctx.terminate()
                    return
                self._enter(ctx, 0)

        def _enter(self, ctx, r):
            self.round = r
            sent = set()
            outs = self.algo.outbox(r)
            for port, payload in outs:
                if port in sent:
                    raise ProtocolViolation(
                        f"round protocol sent twice on port {port}"
                    )
                sent.add(port)
                ctx.send(port, ("ad", r, payload))
            self.acks_left = len(outs)
            if self.acks_left == 0:
                self._pulse(ctx)
            self._try_advance(ctx)

        def _pulse(self, ctx):
            for p in range(self.deg):
                ctx.send(p, ("ap", self.round))

        def _try_advance(self, ctx):
            while (not self.finished and self.acks_left == 0
                   and self._slot(self.round)["pulses"] == self.deg):
                slot = self.by_round.pop(self.round)
                self.algo.inbox(self.round, sorted(slot["data"]))
                nxt = self.round + 1
                if nxt == rounds:
                    self.finished = True
                    ctx.terminate()
                    return
                self._enter(ctx, nxt)

        def on_message(self, ctx, port, payload, stage_tag):
            tag = payload[0]
            if tag == "ad":
                _, r, data = payload
                self._slot(r)["data"].append((port, data))
                ctx.send(port, ("aa", r))
            elif tag == "aa":
                self.acks_left -= 1
                if self.acks_left == 0:
                    self._pulse(ctx)
                    self._try_advance(ctx)
            else:
                self._slot(payload[1])["pulses"] += 1
                self._try_advance(ctx)

        def result(self):
            return self.algo.output()

    if delays is None:
        delays = DelayModel.unit()
    if wakeup is None:
        wakeup = WakeupSchedule.all_at_zero(g.n)
    report = run(g, AlphaNode, delays, wakeup, seed=seed, event_budget=budget)
    if not report.terminated:
        raise SimError("synchronizer did not complete its round budget")
    return report
