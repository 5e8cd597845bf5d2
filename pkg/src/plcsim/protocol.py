"""Minimal convergecast over any mix of interfaces.

Sinks start a beacon round every ``beacon_period``. Each round carries a
round number, so a node only trusts costs heard in the freshest round of a
sink (stale, looping costs from before a failure are ignored). Within a
round a node rebroadcasts once, in a time slot proportional to its own cost,
so the cheapest advertisements arrive before anybody has to speak.

Data is forwarded hop by hop with stop-and-wait: an explicit ACK frame per
hop, ``retries`` retransmissions, then the next hop is demoted and the best
remaining neighbor (possibly through another interface) is tried. A
receiver silently refuses a message whose sender cost is not above its own,
which both forbids loops and makes the sender fail over.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Any, Iterable

from .engine import Device, Event, Interface, Simulation, seconds_to_us
from .medium import Frame, Transmission
from .topology import node_key

DATA_BYTES = 50
BEACON_BYTES = 20
ACK_BYTES = 20


@dataclass
class ConvergecastConfig:
    sinks: frozenset
    sources: frozenset
    beacon_period_s: float = 5.0
    retries: int = 3
    traffic_period_s: float = 30.0
    traffic_start_s: float = 10.0
    traffic_stop_s: float | None = None
    data_bytes: int = DATA_BYTES
    beacon_bytes: int = BEACON_BYTES
    ack_bytes: int = ACK_BYTES
    slot_s: float = 0.4
    jitter_s: float = 0.3
    ack_margin_s: float = 0.010

    def __post_init__(self) -> None:
        self.sinks = frozenset(self.sinks)
        self.sources = frozenset(self.sources)
        if self.beacon_period_s <= 0 or self.traffic_period_s <= 0:
            raise ValueError("periods must be positive")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")
        if self.jitter_s + 0.05 > self.slot_s:
            raise ValueError("beacon jitter must leave room inside one slot")


@dataclass(frozen=True)
class BeaconMsg:
    sink: Any
    round: int
    cost: int


@dataclass(frozen=True)
class DataMsg:
    origin: Any
    seq: int
    cost: int = 0

    @property
    def key(self) -> tuple:
        return (self.origin, self.seq)


@dataclass
class Advert:
    nbr_iface: str
    round: int
    cost: int


@dataclass
class _Pending:
    msg: DataMsg
    hop: tuple | None = None
    attempts: int = 0
    frame: Frame | None = None
    timer: Event | None = None


@dataclass
class HopRecord:
    time_us: int
    key: tuple
    sender: Any
    receiver: Any
    sender_cost: int
    receiver_cost: int


@dataclass
class ConvergecastNetwork:
    """Shared bookkeeping across all agents of one simulation."""

    config: ConvergecastConfig
    agents: dict = field(default_factory=dict)
    generated: dict = field(default_factory=dict)
    deliveries: dict = field(default_factory=dict)
    hops: list[HopRecord] = field(default_factory=list)

    def costs(self) -> dict:
        return {dev: a.own_cost() for dev, a in self.agents.items()}


class ConvergecastAgent:
    def __init__(self, net: ConvergecastNetwork, device_id: Any):
        self.net = net
        self.cfg = net.config
        self.device_id = device_id
        self.is_sink = device_id in self.cfg.sinks
        # sink -> (local iface, neighbor device) -> Advert
        self.table: dict[Any, dict[tuple, Advert]] = {}
        self.fresh: dict[Any, int] = {}
        self.demoted: dict[tuple, int] = {}
        self.seen: dict[tuple, tuple | None] = {}
        self.queues: dict[str, deque] = {}
        self.backlog: deque[DataMsg] = deque()
        self.current: _Pending | None = None
        self.next_seq = 0
        self._scheduled_rounds: set[tuple] = set()
        self.sim: Simulation | None = None
        self.device: Device | None = None

    # -- routing state --------------------------------------------------

    def cost_to(self, sink: Any) -> int | None:
        if self.is_sink and sink == self.device_id:
            return 0
        best = self._best_for(sink)
        return None if best is None else best[0]

    def _best_for(self, sink: Any) -> tuple | None:
        fresh = self.fresh.get(sink)
        best = None
        for (liface, nbr), ad in self.table.get(sink, {}).items():
            if ad.round != fresh or (liface, nbr) in self.demoted:
                continue
            cand = (ad.cost + 1, liface, node_key(nbr), nbr, ad.nbr_iface)
            if best is None or cand[:3] < best[:3]:
                best = cand
        return best

    def best_route(self) -> tuple | None:
        """``(cost, local_iface, neighbor, neighbor_iface)`` of the cheapest next hop."""
        best = None
        for sink in sorted(self.table, key=node_key):
            cand = self._best_for(sink)
            if cand is not None and (best is None or cand[:3] < best[:3]):
                best = cand
        if best is None:
            return None
        cost, liface, _, nbr, niface = best
        return cost, liface, nbr, niface

    def own_cost(self) -> int | None:
        if self.is_sink:
            return 0
        r = self.best_route()
        return None if r is None else r[0]

    # -- engine hooks ---------------------------------------------------

    def start(self, sim: Simulation, device: Device) -> None:
        self.sim = sim
        self.device = device
        self.rng = sim.rng_for(f"protocol:{self.device_id}")
        for iface in device.interfaces:
            self.queues[iface.iface_id] = deque()
        if self.is_sink:
            self._schedule_sink_round(0)
        if self.device_id in self.cfg.sources and not self.is_sink:
            period = seconds_to_us(self.cfg.traffic_period_s)
            first = seconds_to_us(self.cfg.traffic_start_s) + self.rng.randrange(period)
            self._schedule_traffic(first)

    def on_tx_done(self, sim: Simulation, device: Device, iface: Interface, tx: Transmission) -> None:
        cur = self.current
        if cur is not None and tx.frame is cur.frame:
            timeout = 2 * tx.end_us - 2 * tx.start_us + seconds_to_us(self.cfg.ack_margin_s)
            cur.timer = sim.schedule_in(timeout, self._ack_timeout, device_id=self.device_id, label="ack_timeout")
        self._drain(iface.iface_id)

    def on_receive(self, sim: Simulation, device: Device, iface: Interface, frame: Frame, tx: Transmission) -> None:
        if frame.kind == "beacon":
            self._on_beacon(iface, frame, tx)
        elif frame.dst_device != self.device_id:
            return
        elif frame.kind == "data":
            self._on_data(iface, frame, tx)
        elif frame.kind == "ack":
            self._on_ack(frame)

    # -- beacons --------------------------------------------------------

    def _round_start(self, r: int) -> int:
        return r * seconds_to_us(self.cfg.beacon_period_s)

    def _schedule_sink_round(self, r: int) -> None:
        at = self._round_start(r) + self.rng.randrange(seconds_to_us(self.cfg.jitter_s))
        self.sim.schedule_at(at, lambda: self._sink_beacon(r), device_id=self.device_id, label="beacon")

    def _sink_beacon(self, r: int) -> None:
        self._broadcast(BeaconMsg(self.device_id, r, 0))
        self._schedule_sink_round(r + 1)

    def _broadcast(self, b: BeaconMsg) -> None:
        for iface in self.device.interfaces:
            frame = Frame("beacon", self.device_id, self.cfg.beacon_bytes, seq=f"{b.sink}:{b.round}", payload=b)
            self._enqueue(iface.iface_id, frame)

    def _on_beacon(self, iface: Interface, frame: Frame, tx: Transmission) -> None:
        b: BeaconMsg = frame.payload
        if self.is_sink or b.sink == self.device_id:
            return
        key = (iface.iface_id, frame.src_device)
        if key in self.demoted and b.round > self.demoted[key]:
            del self.demoted[key]
        self.table.setdefault(b.sink, {})[key] = Advert(tx.src_iface, b.round, b.cost)
        if b.round > self.fresh.get(b.sink, -1):
            self.fresh[b.sink] = b.round
        if b.round == self.fresh[b.sink] and (b.sink, b.round) not in self._scheduled_rounds:
            self._scheduled_rounds.add((b.sink, b.round))
            slot = seconds_to_us(self.cfg.slot_s)
            max_slot = max(1, seconds_to_us(self.cfg.beacon_period_s) // slot - 1)
            c = self.cost_to(b.sink) or b.cost + 1
            at = self._round_start(b.round) + min(c, max_slot) * slot + self.rng.randrange(seconds_to_us(self.cfg.jitter_s))
            at = max(at, self.sim.now)
            self.sim.schedule_at(at, lambda: self._rebroadcast(b.sink, b.round), device_id=self.device_id, label="rebroadcast")

    def _rebroadcast(self, sink: Any, r: int) -> None:
        if self.fresh.get(sink) != r:
            return
        c = self.cost_to(sink)
        if c is not None:
            self._broadcast(BeaconMsg(sink, r, c))

    # -- data -----------------------------------------------------------

    def _schedule_traffic(self, at: int) -> None:
        stop = self.cfg.traffic_stop_s
        if stop is not None and at >= seconds_to_us(stop):
            return
        self.sim.schedule_at(at, lambda: self._generate(at), device_id=self.device_id, label="traffic")

    def _generate(self, at: int) -> None:
        self.next_seq += 1
        msg = DataMsg(self.device_id, self.next_seq)
        self.device.stats.generated += 1
        self.net.generated[msg.key] = self.sim.now
        self.seen[msg.key] = None
        self.backlog.append(msg)
        self._pump()
        self._schedule_traffic(at + seconds_to_us(self.cfg.traffic_period_s))

    def _pump(self) -> None:
        if self.current is None and self.backlog:
            self.current = _Pending(self.backlog.popleft())
            self._attempt()

    def _attempt(self) -> None:
        cur = self.current
        if cur.hop is None:
            route = self.best_route()
            if route is None:
                self.device.stats.routing_drops += 1
                self.current = None
                self._pump()
                return
            cur.hop = route[1:]
        liface, nbr, niface = cur.hop
        cost = self.own_cost()
        msg = DataMsg(cur.msg.origin, cur.msg.seq, cost)
        cur.frame = Frame(
            "data", self.device_id, self.cfg.data_bytes, seq=f"{msg.origin}:{msg.seq}",
            dst_device=nbr, dst_iface=niface, payload=msg,
        )
        self._enqueue(liface, cur.frame)

    def _ack_timeout(self) -> None:
        cur = self.current
        cur.timer = None
        cur.attempts += 1
        if cur.attempts <= self.cfg.retries:
            airtime = self.sim.airtime_us(cur.hop[0], self.cfg.data_bytes)
            self.sim.schedule_in(self.rng.randrange(4 * airtime), self._attempt, device_id=self.device_id, label="retry")
            return
        liface, nbr, _ = cur.hop
        for sink, ads in self.table.items():
            ad = ads.get((liface, nbr))
            if ad is not None:
                self.demoted[(liface, nbr)] = max(self.demoted.get((liface, nbr), -1), ad.round)
        cur.hop = None
        cur.attempts = 0
        self._attempt()

    def _on_ack(self, frame: Frame) -> None:
        cur = self.current
        if cur is None or cur.hop is None or cur.timer is None:
            return
        if frame.payload != cur.msg.key or frame.src_device != cur.hop[1]:
            return
        cur.timer.cancel()
        self.current = None
        self._pump()

    def _on_data(self, iface: Interface, frame: Frame, tx: Transmission) -> None:
        msg: DataMsg = frame.payload
        upstream = (frame.src_device, tx.src_iface)
        mine = self.own_cost()
        if self.seen.get(msg.key, False) == upstream:
            self._ack(iface, frame, tx)
            self.device.stats.duplicates += 1
            return
        if mine is None or mine >= msg.cost:
            return  # no ack: the sender must look elsewhere
        self._ack(iface, frame, tx)
        if msg.key in self.seen:
            self.device.stats.duplicates += 1
            return
        self.seen[msg.key] = upstream
        self.net.hops.append(HopRecord(self.sim.now, msg.key, frame.src_device, self.device_id, msg.cost, mine))
        if self.is_sink:
            if msg.key not in self.net.deliveries:
                self.net.deliveries[msg.key] = self.sim.now
                self.sim.devices[msg.origin].stats.delivered += 1
            else:
                self.device.stats.duplicates += 1
            return
        self.backlog.append(msg)
        self._pump()

    def _ack(self, iface: Interface, frame: Frame, tx: Transmission) -> None:
        msg: DataMsg = frame.payload
        ack = Frame(
            "ack", self.device_id, self.cfg.ack_bytes, seq=f"{msg.origin}:{msg.seq}",
            dst_device=frame.src_device, dst_iface=tx.src_iface, payload=msg.key,
        )
        self._enqueue(iface.iface_id, ack, urgent=True)

    # -- interface queues -----------------------------------------------

    def _enqueue(self, iface_id: str, frame: Frame, urgent: bool = False) -> None:
        q = self.queues[iface_id]
        if urgent:
            q.appendleft(frame)
        else:
            q.append(frame)
        self._drain(iface_id)

    def _drain(self, iface_id: str) -> None:
        q = self.queues[iface_id]
        if q and self.sim.is_idle(iface_id):
            self.sim.send(iface_id, q.popleft())


def install_convergecast(sim: Simulation, config: ConvergecastConfig, devices: Iterable[Any] | None = None) -> ConvergecastNetwork:
    """Attach a convergecast agent to every device (or the listed ones)."""
    net = ConvergecastNetwork(config)
    for dev_id in devices if devices is not None else list(sim.devices):
        agent = ConvergecastAgent(net, dev_id)
        sim.devices[dev_id].handler = agent
        net.agents[dev_id] = agent
    return net
