"""
Two-class query service
=======================

The data center answers log queries one at a time. Private requesters
(the defenders) always go ahead of public ones still in the queue; a query
already being served is never interrupted.
"""

import numpy as np

from itmsim.engine import MS, Engine, EventKind
from itmsim.itm import DataCenter, Monitor, QueryRequest, Requester
from itmsim.net import parse_cidr

eng = Engine(7)
dc = DataCenter(eng, [Monitor("A", parse_cidr("10.0.1.0/24"))], query_cost=5 * MS)
rng = np.random.default_rng(7)
for qid in range(1, 201):
    who = Requester.PRIVATE if rng.random() < 0.2 else Requester.PUBLIC
    q = QueryRequest(qid, who, "ALL", 0, 0)
    eng.at(qid * 4 * MS, EventKind.QUERY, lambda ev, q=q: dc.queries.submit(q))
eng.run_until(10**7)

waits = {Requester.PRIVATE: [], Requester.PUBLIC: []}
for r in eng.trace.of_kind("report"):
    waits[Requester(r["cls"])].append(r["wait"] / MS)
for who, w in waits.items():
    print(f"{who.value:8s} n={len(w):3d}  mean wait {np.mean(w):7.2f} ms  p95 {np.percentile(w, 95):7.2f} ms")
