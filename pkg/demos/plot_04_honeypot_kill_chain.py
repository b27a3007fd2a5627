"""
From alarm to takedown
======================

The bundled single-victim scenario walks the whole defense: the monitor
alarms, the range is blocked, a honeypot takes its place, gets compromised,
leaks the C&C login, and an agent uses it to enumerate and then take down
the server.
"""

import itmsim
from itmsim.audit import kill_chain
from itmsim.engine import SECOND

res = itmsim.run_scenario(itmsim.canonical_scenario("single_victim_distributed"))
for r in kill_chain(list(res.trace), "A"):
    print(f"{r['t'] / SECOND:8.3f}s  {r['kind']}")

# %%
# What the honeypot learned, and what the Honeywall kept from leaving it.
intel = res.trace.of_kind("intel")[0]
print({k: intel[k] for k in ("cnc_addr", "cnc_port", "server_password", "nickname",
                              "channel_name", "channel_password", "complete")})
print("suppressed outbound lines:", len(res.trace.of_kind("hw_suppress")))
inf = next(r for r in res.trace.of_kind("infiltrate") if r["status"] == "ok")
print("bots enumerated:", inf["enumerated"])

# %%
# After the takedown the bots lose their orders within the command timeout.
s = res.metrics["servers"]["victim"]
print("denial before / during / after:", s["denial_pre_attack"], s["denial_during_attack"],
      s["denial_post_recovery"])
