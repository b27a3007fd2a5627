"""
SYN backlog exhaustion
======================

Half-open connections sit in the backlog until they time out. A SYN
flood at rate r with timeout T holds min(capacity, r*T) slots, and any
legitimate client arriving when the backlog is full is refused.
"""

import numpy as np

from itmsim.engine import SECOND
from itmsim.net import Offer, SynBacklog, backlog_offer


def flood(rate, seconds=10, capacity=128, timeout=3 * SECOND):
    b = SynBacklog(capacity, timeout)
    occ = []
    client = None
    for k in range(seconds * rate):
        now = k * SECOND // rate
        backlog_offer(b, src=k, now=now)
        occ.append(len(b))
        if k == seconds * rate // 2:
            # one legitimate client halfway through the flood
            client = backlog_offer(b, src=-1, now=now + 1, legit=True)
    return np.array(occ), b, client


for rate in (30, 60):
    occ, b, client = flood(rate)
    print(f"{rate} SYN/s: steady occupancy {occ[-rate:].max()} (expected {min(128, rate * 3)}), "
          f"refused {b.refused}, client {client.value}")

# %%
# At 60 SYN/s the backlog saturates and the client is turned away; at 30 it
# stays under capacity and everyone gets in.
assert flood(60)[2] is Offer.REFUSED
