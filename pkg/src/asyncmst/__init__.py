"""Asynchronous CONGEST network simulator and a message/time-efficient distributed MST.

The package has three layers:

* ``graphs`` / ``kernel``  -- weighted-graph utilities and a deterministic
  discrete-event simulator of asynchronous message-passing networks.
* ``toolbox`` / ``lds``    -- reusable distributed primitives (broadcast,
  convergecast, leader election, synchronizers) and a low-diameter
  spanning-tree construction built on clustering.
* ``mst``                  -- the full minimum-spanning-tree protocol that
  composes the above, plus instrumentation used by the benchmark CLI.
"""

from .graphs import Graph, GraphConfig, generate_graph, kruskal_mst, hop_diameter
from .kernel import (
    BudgetExceeded,
    DelayModel,
    Node,
    PayloadTooWide,
    ProtocolViolation,
    RunReport,
    WakeupSchedule,
    account,
    run,
)

__all__ = [
    "Graph",
    "GraphConfig",
    "generate_graph",
    "kruskal_mst",
    "hop_diameter",
    "BudgetExceeded",
    "DelayModel",
    "Node",
    "PayloadTooWide",
    "ProtocolViolation",
    "RunReport",
    "WakeupSchedule",
    "account",
    "run",
]
