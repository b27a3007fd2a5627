"""
Smurf amplification
===================

Bots send spoofed ICMP echo requests to a broadcast address. Every host
behind it answers the victim, so the victim sees ``hosts`` times the
traffic the bots sent.
"""

import numpy as np

import itmsim

TEMPLATE = """
name: smurf-{hosts}
seed: 5
duration: 20s
topology:
  space: 10.0.0.0/20
  servers:
    - {{id: victim, addr: 10.0.1.10}}
  amplifiers:
    - {{id: amp, broadcast: 10.0.6.255, hosts: {hosts}}}
botnets:
  - id: bn
    master: 10.0.5.1
    cnc: [{{id: c, addr: 10.0.4.1, password: pw, channel: "#x", channel_password: k}}]
    hosts_range: 10.0.8.0/24
    vulnerable_hosts: 3
    initial_bots: 3
    amplifier: amp
attacks:
  - {{at: 2s, botnet: bn, command: "!ddos smurf 10.0.1.10 7 10"}}
"""

for hosts in (1, 4, 16):
    res = itmsim.run_scenario(itmsim.parse_scenario(TEMPLATE.format(hosts=hosts)))
    pkts = [r for r in res.trace.of_kind("pkt") if r["cls"] == "attack"]
    sent = sum(1 for r in pkts if r["proto"] == "icmp_req")
    replies = sum(1 for r in pkts if r["proto"] == "icmp_rep" and r["dst"] == "10.0.1.10")
    print(f"{hosts:2d} hosts: {sent} requests -> {replies} replies at the victim "
          f"(x{replies / sent:.0f})")

# %%
# The requests carry the victim's address as their source, so nothing in
# them points back at the bots.
spoofed = np.array([r["src"] == "10.0.1.10" for r in pkts if r["proto"] == "icmp_req"])
print("spoofed share:", spoofed.mean())
