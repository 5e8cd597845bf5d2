"""Two-ring MV distribution grid with dual-coupler RMUs.

Layout per ring (sink ``s``, RMUs ``s+1 .. s+7``)::

    S_s --(s+1)a [RMU s+1] (s+1)b -- (s+2)a [RMU s+2] ... (s+7)b --x-- S_s

Conventions:

* coupler ``a`` of an RMU faces its lower-numbered neighbor, ``b`` the
  higher-numbered one; the last RMU's ``b`` coupler closes the ring back
  at the substation through a switch edge.
* an RMU's switchgear separates its two couplers, so each cable segment is
  its own PLC segment and the RMU router bridges them.
* the ring's normally-open point sits in the third RMU, between its two
  couplers, facing the fourth RMU (an open switch edge of 1 m).
* the switch closing ring 1 between devices 8 and 1 is the one that fails.
"""

from __future__ import annotations

import random

from .config import SimulationConfig, parse_config

RING_SIZE = 7
SEGMENT_RANGE_M = (200.0, 2000.0)
SINKS = (1, 9)
FAILURE_EDGE = "sw8-1"
FAILURE_TIME_S = 300.0
DURATION_S = 600.0


def _ring(sink: int, rng: random.Random) -> tuple[dict, list[dict]]:
    rmus = list(range(sink + 1, sink + 1 + RING_SIZE))
    hub = f"S{sink}"
    nodes = [hub] + [f"{k}{side}" for k in rmus for side in "ab"]

    def seg() -> float:
        return round(rng.uniform(*SEGMENT_RANGE_M), 1)

    edges = [{"id": f"c{sink}-{rmus[0]}", "a": hub, "b": f"{rmus[0]}a", "length_m": seg()}]
    for k in rmus[:-1]:
        edges.append({"id": f"c{k}-{k + 1}", "a": f"{k}b", "b": f"{k + 1}a", "length_m": seg()})
    edges.append({"id": f"sw{rmus[-1]}-{sink}", "a": f"{rmus[-1]}b", "b": hub, "length_m": seg(), "is_switch": True})
    third = rmus[2]
    edges.append({
        "id": f"open{third}-{third + 1}", "a": f"{third}a", "b": f"{third}b",
        "length_m": 1.0, "is_switch": True, "switch_open": True,
    })
    ring_no = SINKS.index(sink) + 1
    graph = {"id": f"ring{ring_no}", "nodes": nodes, "edges": edges}

    medium = f"plc{ring_no}"
    devices = [{"id": sink, "role": "sink", "interfaces": [{"id": f"{sink}.a", "medium": medium, "coupler": hub}]}]
    for k in rmus:
        devices.append({
            "id": k,
            "role": "node",
            "interfaces": [
                {"id": f"{k}.a", "medium": medium, "coupler": f"{k}a"},
                {"id": f"{k}.b", "medium": medium, "coupler": f"{k}b"},
            ],
        })
    return graph, devices


def scenario_dict(seed: int) -> dict:
    rng = random.Random(seed)
    graphs, devices, media = [], [], []
    for ring_no, sink in enumerate(SINKS, start=1):
        g, devs = _ring(sink, rng)
        graphs.append(g)
        devices.extend(devs)
        media.append({"id": f"plc{ring_no}", "mode": "mvplc", "graph": g["id"]})
    return {
        "channel": {},
        "media": media,
        "graphs": graphs,
        "devices": devices,
        "traffic": {"sources": [d["id"] for d in devices if d["role"] == "node"]},
        "failures": [{"time_s": FAILURE_TIME_S, "edge": FAILURE_EDGE}],
        "run": {"seed": seed, "duration_s": DURATION_S},
    }


def generate_scenario(seed: int) -> SimulationConfig:
    return parse_config(scenario_dict(seed))
