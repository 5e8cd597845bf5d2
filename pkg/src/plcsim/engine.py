"""Deterministic discrete-event core.

Time is an integer number of microseconds. Events run in ``(time, seq)``
order where ``seq`` is assigned at scheduling time, so ties resolve in the
order they were scheduled. Every medium draws from its own RNG substream,
derived purely from ``(master seed, medium id)``.
"""

from __future__ import annotations

import hashlib
import heapq
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Protocol

from .medium import (
    CHANNEL_LOSS,
    COLLISION,
    DELIVERED,
    HALF_DUPLEX,
    MVPLC,
    NO_LINK,
    Frame,
    LinkTable,
    Medium,
    Reception,
    Transmission,
)
from .topology import PowerlineGraph, open_switch

US = 1_000_000
MASK64 = (1 << 64) - 1


def seconds_to_us(t: float) -> int:
    return round(t * US)


def splitmix64(x: int) -> int:
    """SplitMix64 finalizer."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive_seed(master: int, label: str) -> int:
    h = int.from_bytes(hashlib.blake2b(label.encode(), digest_size=8).digest(), "little")
    return splitmix64((master & MASK64) ^ h)


def substream(master: int, label: str) -> random.Random:
    return random.Random(derive_seed(master, label))


class InterfaceBusy(RuntimeError):
    pass


class Handler(Protocol):
    def start(self, sim: Simulation, device: Device) -> None: ...

    def on_receive(self, sim: Simulation, device: Device, iface: Interface, frame: Frame, tx: Transmission) -> None: ...

    def on_tx_done(self, sim: Simulation, device: Device, iface: Interface, tx: Transmission) -> None: ...


@dataclass
class Interface:
    iface_id: str
    device_id: Any
    medium_id: str
    coupler: Any = None
    busy_until: int = 0


@dataclass
class DeviceStats:
    frames_sent: int = 0
    frames_received: int = 0
    generated: int = 0
    delivered: int = 0
    duplicates: int = 0
    routing_drops: int = 0

    @property
    def pdr(self) -> float | None:
        return self.delivered / self.generated if self.generated else None


@dataclass
class Device:
    device_id: Any
    interfaces: list[Interface]
    handler: Handler | None = None
    stats: DeviceStats = field(default_factory=DeviceStats)

    def __post_init__(self) -> None:
        if not self.interfaces:
            raise ValueError(f"device {self.device_id!r} needs at least one interface")


@dataclass
class LinkCounters:
    delivered: int = 0
    channel_loss: int = 0
    collision: int = 0
    half_duplex: int = 0
    no_link: int = 0

    @property
    def sent(self) -> int:
        return self.delivered + self.channel_loss + self.collision + self.half_duplex + self.no_link


@dataclass
class Stats:
    devices: dict[Any, DeviceStats]
    links: dict[tuple[str, str], LinkCounters]

    @property
    def pdr(self) -> float | None:
        gen = sum(s.generated for s in self.devices.values())
        return sum(s.delivered for s in self.devices.values()) / gen if gen else None


@dataclass(order=True)
class Event:
    time_us: int
    seq: int
    kind: str = field(compare=False)
    action: Callable[[], Any] | None = field(compare=False, default=None)
    device_id: Any = field(compare=False, default=None)
    label: str = field(compare=False, default="")
    cancelled: bool = field(compare=False, default=False)
    traced: bool = field(compare=False, default=True)

    def cancel(self) -> None:
        self.cancelled = True


def _tok(x: Any) -> str:
    return "-" if x is None else str(x)


class Simulation:
    def __init__(self, seed: int = 0):
        self.seed = seed
        self.now = 0
        self.media: dict[str, Medium] = {}
        self.graphs: dict[str, PowerlineGraph] = {}
        self.devices: dict[Any, Device] = {}
        self.interfaces: dict[str, Interface] = {}
        self.trace: list[str] = []
        self.link_counters: dict[tuple[str, str], LinkCounters] = {}
        self.snapshots: list[tuple[int, str, LinkTable]] = []
        self._queue: list[Event] = []
        self._seq = 0
        self._rngs: dict[str, random.Random] = {}
        self._started = False

    # -- setup ----------------------------------------------------------

    def add_medium(self, medium: Medium) -> Medium:
        """Register ``medium``; mvplc media sharing a ``graph_id`` share failures."""
        if medium.medium_id in self.media:
            raise ValueError(f"duplicate medium {medium.medium_id!r}")
        if medium.mode == MVPLC:
            gid = medium.graph.graph_id
            if gid in self.graphs and self.graphs[gid] != medium.graph:
                raise ValueError(f"graph id {gid!r} is bound to two different graphs")
            self.graphs[gid] = medium.graph
        self.media[medium.medium_id] = medium
        return medium

    def add_device(self, device_id: Any, interfaces: Iterable[tuple], handler: Handler | None = None) -> Device:
        """``interfaces`` holds ``(iface_id, medium_id)`` or ``(iface_id, medium_id, coupler)``."""
        if device_id in self.devices:
            raise ValueError(f"duplicate device {device_id!r}")
        ifaces = []
        for entry in interfaces:
            iface_id, medium_id, *rest = entry
            coupler = rest[0] if rest else None
            if iface_id in self.interfaces:
                raise ValueError(f"interface id {iface_id!r} is not unique")
            if medium_id not in self.media:
                raise KeyError(f"unknown medium {medium_id!r}")
            self.media[medium_id].attach(iface_id, coupler)
            iface = Interface(iface_id, device_id, medium_id, coupler)
            self.interfaces[iface_id] = iface
            ifaces.append(iface)
        dev = Device(device_id, ifaces, handler)
        self.devices[device_id] = dev
        return dev

    def rng_for_medium(self, medium_id: str) -> random.Random:
        return self._stream(f"medium:{medium_id}")

    def rng_for(self, label: str) -> random.Random:
        return self._stream(f"aux:{label}")

    def _stream(self, label: str) -> random.Random:
        if label not in self._rngs:
            self._rngs[label] = substream(self.seed, label)
        return self._rngs[label]

    # -- scheduling -----------------------------------------------------

    def schedule_at(
        self,
        time_us: int,
        action: Callable[[], Any] | None,
        kind: str = "timer",
        device_id: Any = None,
        label: str = "",
        traced: bool = True,
    ) -> Event:
        if time_us < self.now:
            raise ValueError(f"cannot schedule at {time_us} us, clock is at {self.now} us")
        ev = Event(int(time_us), self._seq, kind, action, device_id, label, traced=traced)
        self._seq += 1
        heapq.heappush(self._queue, ev)
        return ev

    def schedule_in(self, delay_us: int, action: Callable[[], Any], **kw: Any) -> Event:
        return self.schedule_at(self.now + int(delay_us), action, **kw)

    def inject_failure(self, at_us: int, edge_id: str) -> Event:
        """Open switch ``edge_id`` at ``at_us`` in whichever graph owns it."""
        owners = [gid for gid, g in self.graphs.items() if g.has_edge(edge_id)]
        if not owners:
            raise KeyError(f"no graph has an edge {edge_id!r}")
        gid = owners[0]
        if not self.graphs[gid].edge(edge_id).is_switch:
            raise ValueError(f"edge {edge_id!r} is not a switch")
        return self.schedule_at(at_us, lambda: self._open_switch(gid, edge_id), kind="failure", label=edge_id)

    def _open_switch(self, graph_id: str, edge_id: str) -> None:
        g = open_switch(self.graphs[graph_id], edge_id)
        self.graphs[graph_id] = g
        for mid in sorted(self.media):
            m = self.media[mid]
            if m.mode == MVPLC and m.graph.graph_id == graph_id:
                m.set_graph(g)
                self.snapshots.append((self.now, mid, m.link_table))

    # -- transmission ---------------------------------------------------

    def airtime_us(self, iface_id: str, n_bytes: int) -> int:
        return self.media[self.interfaces[iface_id].medium_id].airtime_us(n_bytes)

    def is_idle(self, iface_id: str) -> bool:
        return self.interfaces[iface_id].busy_until <= self.now

    def send(self, iface_id: str, frame: Frame) -> Transmission:
        iface = self.interfaces[iface_id]
        if iface.busy_until > self.now:
            raise InterfaceBusy(f"interface {iface_id!r} busy until {iface.busy_until} us")
        medium = self.media[iface.medium_id]
        tx = medium.begin(iface_id, frame, self.now)
        iface.busy_until = tx.end_us
        self.devices[iface.device_id].stats.frames_sent += 1
        dst_dev = "*" if frame.dst_device is None else frame.dst_device
        dst_if = "*" if frame.dst_device is None else _tok(frame.dst_iface)
        self.trace.append(
            f"{self.now} tx_start {iface.device_id} {iface_id} {dst_dev} {dst_if} {_tok(frame.seq)} {frame.kind}"
        )
        self.schedule_at(tx.end_us, lambda: self._finish(medium, tx), kind="tx_end", traced=False)
        return tx

    def _finish(self, medium: Medium, tx: Transmission) -> None:
        receptions = medium.deliver(tx, self.rng_for_medium(medium.medium_id))
        src = self.interfaces[tx.src_iface]
        delivered: list[Reception] = []
        for r in receptions:
            counters = self.link_counters.setdefault((r.src_iface, r.dst_iface), LinkCounters())
            setattr(counters, r.outcome, getattr(counters, r.outcome) + 1)
            if r.outcome == NO_LINK:
                continue
            dst = self.interfaces[r.dst_iface]
            self.trace.append(
                f"{self.now} rx {src.device_id} {r.src_iface} {dst.device_id} {r.dst_iface} {_tok(tx.frame.seq)} {r.outcome}"
            )
            if r.outcome == DELIVERED:
                delivered.append(r)
        sender = self.devices[src.device_id]
        if sender.handler is not None:
            sender.handler.on_tx_done(self, sender, src, tx)
        for r in delivered:
            dst = self.interfaces[r.dst_iface]
            dev = self.devices[dst.device_id]
            dev.stats.frames_received += 1
            if dev.handler is not None:
                dev.handler.on_receive(self, dev, dst, tx.frame, tx)

    # -- running --------------------------------------------------------

    def start(self) -> None:
        if self._started:
            return
        self._started = True
        for mid in sorted(self.media):
            self.snapshots.append((self.now, mid, self.media[mid].link_table))
        for dev_id in sorted(self.devices, key=str):
            dev = self.devices[dev_id]
            if dev.handler is not None:
                dev.handler.start(self, dev)

    def run_until(self, t_end_us: int) -> list[str]:
        """Process every event with timestamp < ``t_end_us``; return the trace."""
        self.start()
        while self._queue and self._queue[0].time_us < t_end_us:
            ev = heapq.heappop(self._queue)
            if ev.cancelled:
                continue
            self.now = ev.time_us
            if ev.traced:
                self.trace.append(f"{ev.time_us} {ev.kind} {_tok(ev.device_id)} - - - - {ev.label or '-'}")
            if ev.action is not None:
                ev.action()
        self.now = max(self.now, t_end_us)
        return self.trace

    def collect_stats(self) -> Stats:
        return Stats(
            devices={d: self.devices[d].stats for d in self.devices},
            links=dict(sorted(self.link_counters.items())),
        )

    def trace_text(self) -> str:
        return "".join(line + "\n" for line in self.trace)


__all__ = [
    "CHANNEL_LOSS",
    "COLLISION",
    "DELIVERED",
    "HALF_DUPLEX",
    "NO_LINK",
    "Device",
    "DeviceStats",
    "Event",
    "Interface",
    "InterfaceBusy",
    "LinkCounters",
    "Simulation",
    "Stats",
    "derive_seed",
    "seconds_to_us",
    "splitmix64",
    "substream",
]
