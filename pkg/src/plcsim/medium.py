"""Communication media.

Two flavours share one delivery path:

* ``dgrm``  - a directed graph of links, each with a fixed success rate.
* ``mvplc`` - a DGRM whose links are derived from a powerline graph: every
  connected component becomes a clique and each link's success rate follows
  the channel model at the shortest cable distance.

A reception at ``dst`` is lost when ``dst`` itself transmits at the same time
(half-duplex), or when another overlapping transmitter reaches ``dst`` with a
reference-size success rate at or above the interference threshold. Otherwise
one Bernoulli draw decides delivery.
"""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass, field
from typing import IO, Any, Iterable, Iterator, Mapping

from . import channel
from .channel import ChannelParams, fmt
from .topology import Node, PowerlineGraph, connected_components, distances_from

DGRM = "dgrm"
MVPLC = "mvplc"

DEFAULT_THRESHOLD = 0.05
DEFAULT_DATA_RATE = 9600.0

DELIVERED = "delivered"
CHANNEL_LOSS = "channel_loss"
COLLISION = "collision"
HALF_DUPLEX = "half_duplex"
NO_LINK = "no_link"
OUTCOMES = (DELIVERED, CHANNEL_LOSS, COLLISION, HALF_DUPLEX, NO_LINK)


@dataclass(frozen=True)
class LinkEntry:
    src: str
    dst: str
    distance_m: float | None = None
    fixed_success: float | None = None


class LinkTable(Mapping):
    """Immutable snapshot of directed links keyed by ``(src, dst)``."""

    def __init__(self, entries: Iterable[LinkEntry] = ()):
        table = {}
        for e in entries:
            if e.src == e.dst:
                raise ValueError(f"link {e.src!r} -> itself")
            table[(e.src, e.dst)] = e
        self._entries = dict(sorted(table.items()))
        self._out: dict[str, list[str]] = {}
        for src, dst in self._entries:
            self._out.setdefault(src, []).append(dst)

    def __getitem__(self, key: tuple[str, str]) -> LinkEntry:
        return self._entries[key]

    def __iter__(self) -> Iterator[tuple[str, str]]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, LinkTable):
            return self._entries == other._entries
        return NotImplemented

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"LinkTable({len(self)} entries)"

    def receivers(self, src: str) -> list[str]:
        return self._out.get(src, [])

    def entries(self) -> list[LinkEntry]:
        return list(self._entries.values())


def build_link_table(g: PowerlineGraph, coupler_of: Mapping[str, Node]) -> LinkTable:
    """One clique per connected component, weighted by shortest cable distance."""
    for iface, node in coupler_of.items():
        if node not in g.adjacency:
            raise KeyError(f"interface {iface!r} is bound to unknown coupler {node!r}")
    part = connected_components(g)
    by_comp: dict[int, list[str]] = {}
    for iface in sorted(coupler_of):
        by_comp.setdefault(part.index[coupler_of[iface]], []).append(iface)
    entries = []
    dist_cache: dict[Node, dict[Node, float]] = {}
    for ifaces in by_comp.values():
        for src in ifaces:
            a = coupler_of[src]
            if a not in dist_cache:
                dist_cache[a] = distances_from(g, a)
            for dst in ifaces:
                if dst != src:
                    entries.append(LinkEntry(src, dst, dist_cache[a][coupler_of[dst]]))
    return LinkTable(entries)


@dataclass(frozen=True)
class Frame:
    """What travels on a medium. ``dst_device`` is ``None`` for broadcast."""

    kind: str
    src_device: Any
    n_bytes: int
    seq: Any = 0
    dst_device: Any = None
    dst_iface: str | None = None
    payload: Any = None


@dataclass(eq=False)
class Transmission:
    src_iface: str
    frame: Frame
    start_us: int
    end_us: int
    table: LinkTable = field(repr=False, default_factory=LinkTable)
    resolved: bool = False

    def __post_init__(self) -> None:
        if not self.end_us > self.start_us:
            raise ValueError("transmission must have positive duration")

    def overlaps(self, other: Transmission) -> bool:
        return self.start_us < other.end_us and other.start_us < self.end_us


@dataclass(frozen=True)
class Reception:
    src_iface: str
    dst_iface: str
    outcome: str


class Medium:
    """An isolated channel: its own link table, interfaces and transmissions."""

    def __init__(
        self,
        medium_id: str,
        mode: str = DGRM,
        *,
        graph: PowerlineGraph | None = None,
        params: ChannelParams | None = None,
        threshold: float = DEFAULT_THRESHOLD,
        data_rate: float = DEFAULT_DATA_RATE,
        reference_bytes: int = channel.REFERENCE_BYTES,
    ):
        if mode not in (DGRM, MVPLC):
            raise ValueError(f"unknown medium mode {mode!r}")
        if mode == MVPLC and (graph is None or params is None):
            raise ValueError("an mvplc medium needs a powerline graph and channel parameters")
        if not 0.0 < threshold <= 1.0:
            raise ValueError(f"interference threshold must lie in (0, 1], got {threshold}")
        if not data_rate > 0:
            raise ValueError("data rate must be positive")
        self.medium_id = medium_id
        self.mode = mode
        self.graph = graph
        self.params = params
        self.threshold = threshold
        self.data_rate = data_rate
        self.reference_bytes = reference_bytes
        self.couplers: dict[str, Node | None] = {}
        self._fixed: dict[tuple[str, str], float] = {}
        self._table: LinkTable | None = None
        self._ref_success: dict[tuple[str, str], float] = {}
        self._active: list[Transmission] = []

    def __repr__(self) -> str:
        return f"Medium({self.medium_id!r}, {self.mode}, {len(self.couplers)} ifaces)"

    # -- membership -----------------------------------------------------

    @property
    def interfaces(self) -> list[str]:
        return sorted(self.couplers)

    def attach(self, iface: str, coupler: Node | None = None) -> None:
        if iface in self.couplers:
            raise ValueError(f"interface {iface!r} is already attached to {self.medium_id!r}")
        if self.mode == MVPLC:
            if coupler is None or coupler not in self.graph.adjacency:
                raise ValueError(f"interface {iface!r} needs a coupler of graph {self.graph.graph_id!r}")
        elif coupler is not None:
            raise ValueError(f"dgrm medium {self.medium_id!r} takes no coupler binding")
        self.couplers[iface] = coupler
        self._invalidate()

    def detach(self, iface: str) -> None:
        if iface not in self.couplers:
            raise KeyError(f"interface {iface!r} is not attached to {self.medium_id!r}")
        if any(t.src_iface == iface and not t.resolved for t in self._active):
            raise RuntimeError(f"interface {iface!r} is transmitting")
        del self.couplers[iface]
        self._invalidate()

    def set_link(self, src: str, dst: str, success: float, reverse: float | None = None) -> None:
        """Define a fixed-rate link (dgrm mode); the reverse link always exists too."""
        if self.mode != DGRM:
            raise ValueError("fixed links belong to dgrm media")
        if src == dst:
            raise ValueError("a link needs two distinct interfaces")
        for p in (success, reverse):
            if p is not None and not 0.0 <= p <= 1.0:
                raise ValueError(f"link success must lie in [0, 1], got {p}")
        self._fixed[(src, dst)] = success
        if reverse is not None or (dst, src) not in self._fixed:
            self._fixed[(dst, src)] = success if reverse is None else reverse
        self._invalidate()

    def set_graph(self, graph: PowerlineGraph) -> None:
        """Swap in a new graph version; in-flight transmissions keep the old table."""
        if self.mode != MVPLC:
            raise ValueError("only mvplc media follow a powerline graph")
        self.graph = graph
        self._invalidate()

    def _invalidate(self) -> None:
        self._table = None

    @property
    def link_table(self) -> LinkTable:
        if self._table is None:
            if self.mode == MVPLC:
                self._table = build_link_table(self.graph, self.couplers)
            else:
                self._table = LinkTable(
                    LinkEntry(s, d, None, p)
                    for (s, d), p in self._fixed.items()
                    if s in self.couplers and d in self.couplers
                )
        return self._table

    # -- link quality ---------------------------------------------------

    def entry_success(self, entry: LinkEntry, n_bytes: int) -> float:
        if self.mode == MVPLC:
            return channel.packet_success_rate(self.params, entry.distance_m, n_bytes)
        return entry.fixed_success

    def link_success(self, src: str, dst: str, n_bytes: int, table: LinkTable | None = None) -> float | None:
        """Success probability of ``src -> dst``; ``None`` means there is no link."""
        table = self.link_table if table is None else table
        entry = table.get((src, dst))
        if entry is None:
            return None
        return self.entry_success(entry, n_bytes)

    def interferes(self, src: str, dst: str, table: LinkTable) -> bool:
        entry = table.get((src, dst))
        if entry is None:
            return False
        return self.entry_success(entry, self.reference_bytes) >= self.threshold

    def airtime_us(self, n_bytes: int) -> int:
        return max(1, round(8 * n_bytes / self.data_rate * 1e6))

    # -- transmissions --------------------------------------------------

    def begin(self, src_iface: str, frame: Frame, start_us: int) -> Transmission:
        if src_iface not in self.couplers:
            raise ValueError(f"interface {src_iface!r} is not attached to {self.medium_id!r}")
        tx = Transmission(src_iface, frame, start_us, start_us + self.airtime_us(frame.n_bytes), self.link_table)
        self._active.append(tx)
        return tx

    def deliver(self, tx: Transmission, rng: random.Random) -> list[Reception]:
        """Resolve every potential receiver of ``tx`` (sorted by interface id)."""
        if tx.resolved or tx not in self._active:
            raise ValueError("transmission is not pending on this medium")
        table = tx.table
        others = [o for o in self._active if o is not tx and o.overlaps(tx)]
        busy_ifaces = {o.src_iface for o in others}
        out = []
        for dst in self.interfaces:
            if dst == tx.src_iface:
                continue
            entry = table.get((tx.src_iface, dst))
            if entry is None:
                outcome = NO_LINK
            elif dst in busy_ifaces:
                outcome = HALF_DUPLEX
            elif any(self.interferes(o.src_iface, dst, table) for o in others):
                outcome = COLLISION
            else:
                p = self.entry_success(entry, tx.frame.n_bytes)
                outcome = DELIVERED if rng.random() < p else CHANNEL_LOSS
            out.append(Reception(tx.src_iface, dst, outcome))
        tx.resolved = True
        self._prune(tx.end_us)
        return out

    def _prune(self, now_us: int) -> None:
        pending = [t.start_us for t in self._active if not t.resolved]
        horizon = min([now_us, *pending])
        self._active = [t for t in self._active if not (t.resolved and t.end_us <= horizon)]

    @property
    def in_flight(self) -> list[Transmission]:
        return [t for t in self._active if not t.resolved]


def write_link_tables_csv(media: Iterable[Medium], fh: IO[str], reference_bytes: int = channel.REFERENCE_BYTES) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["medium_id", "src", "dst", "distance_m", f"p_suc_{reference_bytes}B"])
    for m in sorted(media, key=lambda m: m.medium_id):
        for e in m.link_table.entries():
            d = "" if e.distance_m is None else fmt(e.distance_m)
            w.writerow([m.medium_id, e.src, e.dst, d, fmt(m.entry_success(e, reference_bytes))])
