"""Turn a ``SimulationConfig`` into a running simulation and its output files."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import IO

from . import channel
from .config import SimulationConfig
from .engine import Simulation, Stats, seconds_to_us
from .medium import Medium, write_link_tables_csv
from .protocol import ConvergecastConfig, ConvergecastNetwork, install_convergecast
from .topology import Edge, PowerlineGraph

CURVES_D_MAX = 5000.0
CURVES_STEP = 10.0


@dataclass
class RunResult:
    sim: Simulation
    net: ConvergecastNetwork
    config: SimulationConfig

    @property
    def stats(self) -> Stats:
        return self.sim.collect_stats()


def build_graph(gc) -> PowerlineGraph:
    edges = tuple(Edge(e.id, e.a, e.b, e.length_m, e.is_switch, e.switch_open) for e in gc.edges)
    return PowerlineGraph(tuple(gc.nodes), edges, gc.id)


def build_simulation(cfg: SimulationConfig, seed: int | None = None) -> tuple[Simulation, ConvergecastNetwork]:
    sim = Simulation(cfg.run.seed if seed is None else seed)
    params = cfg.channel.params()
    graphs = {g.id: build_graph(g) for g in cfg.graphs}
    for m in cfg.media:
        medium = Medium(
            m.id, m.mode,
            graph=graphs.get(m.graph) if m.graph else None,
            params=params if m.mode == "mvplc" else None,
            threshold=m.threshold, data_rate=m.data_rate,
        )
        sim.add_medium(medium)
    for d in cfg.devices:
        sim.add_device(d.id, [(i.id, i.medium, i.coupler) for i in d.interfaces])
    for m in cfg.media:
        for link in m.links:
            sim.media[m.id].set_link(link.src, link.dst, link.success)
    for f in cfg.failures:
        sim.inject_failure(seconds_to_us(f.time_s), f.edge)

    t = cfg.traffic
    proto = ConvergecastConfig(
        sinks=frozenset(cfg.sinks()),
        sources=frozenset(t.sources),
        beacon_period_s=t.beacon_period_s,
        retries=t.retries,
        traffic_period_s=t.period_s,
        traffic_start_s=t.start_s,
        traffic_stop_s=max(0.0, cfg.run.duration_s - t.drain_s),
        data_bytes=t.payload_bytes,
    )
    net = install_convergecast(sim, proto)
    return sim, net


def simulate(cfg: SimulationConfig, seed: int | None = None) -> RunResult:
    sim, net = build_simulation(cfg, seed)
    sim.run_until(seconds_to_us(cfg.run.duration_s))
    return RunResult(sim, net, cfg)


def write_device_stats(result: RunResult, fh: IO[str]) -> None:
    roles = {d.id: d.role for d in result.config.devices}
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["device", "role", "generated", "delivered", "pdr", "frames_sent", "frames_received", "duplicates", "routing_drops"])
    for dev, s in result.stats.devices.items():
        pdr = "" if s.pdr is None else channel.fmt(s.pdr)
        w.writerow([dev, roles.get(dev, ""), s.generated, s.delivered, pdr, s.frames_sent, s.frames_received, s.duplicates, s.routing_drops])


def write_link_stats(result: RunResult, fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["src", "dst", "sent", "delivered", "channel_loss", "collision", "half_duplex", "no_link"])
    for (src, dst), c in result.stats.links.items():
        if c.sent == c.no_link:
            continue
        w.writerow([src, dst, c.sent, c.delivered, c.channel_loss, c.collision, c.half_duplex, c.no_link])


class _TableView:
    """A medium stand-in exposing a frozen link table for CSV export."""

    def __init__(self, medium: Medium, table):
        self.medium_id = medium.medium_id
        self.link_table = table
        self.entry_success = medium.entry_success


def initial_tables(sim: Simulation) -> list[_TableView]:
    first: dict[str, object] = {}
    for _, mid, table in sim.snapshots:
        first.setdefault(mid, table)
    return [_TableView(sim.media[mid], t) for mid, t in first.items()]


def write_outputs(result: RunResult, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sim = result.sim
    paths = {
        "link_table_pre": out / "link_table_pre.csv",
        "link_table_post": out / "link_table_post.csv",
        "trace": out / "trace.txt",
        "stats_devices": out / "stats_devices.csv",
        "stats_links": out / "stats_links.csv",
        "curves": out / "curves.csv",
    }
    with paths["link_table_pre"].open("w", newline="") as fh:
        write_link_tables_csv(initial_tables(sim), fh)
    with paths["link_table_post"].open("w", newline="") as fh:
        write_link_tables_csv(sim.media.values(), fh)
    paths["trace"].write_text(sim.trace_text())
    with paths["stats_devices"].open("w", newline="") as fh:
        write_device_stats(result, fh)
    with paths["stats_links"].open("w", newline="") as fh:
        write_link_stats(result, fh)
    rows = channel.tabulate_curves(result.config.channel.params(), CURVES_D_MAX, CURVES_STEP, result.config.traffic.payload_bytes)
    with paths["curves"].open("w", newline="") as fh:
        channel.write_curves_csv(rows, fh)
    return paths


def run(cfg: SimulationConfig, out_dir: str | Path | None = None, seed: int | None = None) -> tuple[RunResult, dict[str, Path]]:
    result = simulate(cfg, seed)
    return result, write_outputs(result, cfg.run.output_dir if out_dir is None else out_dir)
