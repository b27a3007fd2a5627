"""
Centralized versus distributed
==============================

Three botnets hit three monitored ranges at once. The centralized scheme
has one data-center honeypot, so handovers queue and each one waits for a
rebuild. Distributed monitors each own a honeypot and work in parallel.
"""

import numpy as np

import itmsim
from itmsim.engine import SECOND
from itmsim.itm import Scheme

results = {}
for scheme in (Scheme.CENTRALIZED, Scheme.DISTRIBUTED):
    cfg = itmsim.canonical_scenario("multi_victim_k3")
    cfg.defense.detection = cfg.defense.honeypot = scheme
    ttd = []
    for seed in range(1, 6):
        m = itmsim.run_scenario(cfg, seed).metrics
        ttd.append(m["summary"]["time_to_takedown"] / SECOND)
    results[scheme.value] = np.array(ttd)
    print(f"{scheme.value:12s} mean time to takedown {np.mean(ttd):6.1f}s  "
          f"(min {np.min(ttd):.1f}, max {np.max(ttd):.1f})")

# %%
# The same comparison is available from the command line:
#
#   python -m itmsim compare --scenario multi.yaml --seeds 5
print("speedup:", results["centralized"].mean() / results["distributed"].mean())
