"""JSON simulation configuration.

Structural problems are reported by pydantic; cross references (media,
graphs, couplers, edges, devices) are checked afterwards. Every problem
carries a dotted path to the offending field.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from . import channel

NodeId = Union[int, str]
DeviceId = Union[int, str]


class ConfigError(Exception):
    """Invalid configuration; ``issues`` holds ``(path, message)`` pairs."""

    def __init__(self, issues: list[tuple[str, str]], kind: str = "invalid"):
        self.issues = issues
        self.kind = kind
        super().__init__("; ".join(f"{p}: {m}" if p else m for p, m in issues))


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class AnchorConfig(_Model):
    distance_m: float = Field(2000.0, gt=0)
    packet_bytes: int = Field(channel.REFERENCE_BYTES, ge=1)
    success: float = Field(0.80, gt=0, lt=1)


class ChannelConfig(_Model):
    snr0_db: float = channel.DEFAULT_SNR0_DB
    max_success: float = Field(channel.DEFAULT_MAX_SUCCESS, gt=0, le=1)
    calibration: AnchorConfig = Field(default_factory=AnchorConfig)
    gamma_db_per_m: Optional[float] = Field(None, gt=0)

    def params(self) -> channel.ChannelParams:
        anchor = channel.CalibrationAnchor(**self.calibration.model_dump())
        if self.gamma_db_per_m is None:
            return channel.ChannelParams.calibrated(self.snr0_db, anchor, self.max_success)
        return channel.ChannelParams(self.snr0_db, self.gamma_db_per_m, self.max_success, anchor)


class DgrmLink(_Model):
    src: str
    dst: str
    success: float = Field(ge=0, le=1)


class MediumConfig(_Model):
    id: str
    mode: Literal["dgrm", "mvplc"]
    graph: Optional[str] = None
    threshold: float = Field(0.05, gt=0, le=1)
    data_rate: float = Field(9600.0, gt=0)
    links: list[DgrmLink] = Field(default_factory=list)


class EdgeConfig(_Model):
    id: str
    a: NodeId
    b: NodeId
    length_m: float = Field(gt=0)
    is_switch: bool = False
    switch_open: bool = False


class GraphConfig(_Model):
    id: str
    nodes: list[NodeId]
    edges: list[EdgeConfig] = Field(default_factory=list)


class InterfaceConfig(_Model):
    id: str
    medium: str
    coupler: Optional[NodeId] = None


class DeviceConfig(_Model):
    id: DeviceId
    role: Literal["sink", "node"] = "node"
    interfaces: list[InterfaceConfig] = Field(min_length=1)


class TrafficConfig(_Model):
    sources: list[DeviceId] = Field(default_factory=list)
    period_s: float = Field(30.0, gt=0)
    payload_bytes: int = Field(channel.REFERENCE_BYTES, ge=1)
    start_s: float = Field(10.0, ge=0)
    drain_s: float = Field(10.0, ge=0)
    beacon_period_s: float = Field(5.0, gt=0)
    retries: int = Field(3, ge=0)


class FailureConfig(_Model):
    time_s: float = Field(ge=0)
    edge: str


class RunConfig(_Model):
    seed: int = 0
    duration_s: float = Field(600.0, ge=0)
    output_dir: str = "out"


class SimulationConfig(_Model):
    channel: ChannelConfig = Field(default_factory=ChannelConfig)
    media: list[MediumConfig]
    graphs: list[GraphConfig] = Field(default_factory=list)
    devices: list[DeviceConfig]
    traffic: TrafficConfig = Field(default_factory=TrafficConfig)
    failures: list[FailureConfig] = Field(default_factory=list)
    run: RunConfig = Field(default_factory=RunConfig)

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2) + "\n"

    def sinks(self) -> list:
        return [d.id for d in self.devices if d.role == "sink"]


def _dup_issues(items: list, what: str, path: str) -> list[tuple[str, str]]:
    seen: set = set()
    out = []
    for i, it in enumerate(items):
        if it.id in seen:
            out.append((f"{path}[{i}].id", f"duplicate {what} id {it.id!r}"))
        seen.add(it.id)
    return out


def cross_check(cfg: SimulationConfig) -> list[tuple[str, str]]:
    issues: list[tuple[str, str]] = []
    issues += _dup_issues(cfg.media, "medium", "media")
    issues += _dup_issues(cfg.graphs, "graph", "graphs")
    issues += _dup_issues(cfg.devices, "device", "devices")

    graphs = {g.id: g for g in cfg.graphs}
    media = {m.id: m for m in cfg.media}
    edge_owner: dict[str, str] = {}
    for gi, g in enumerate(cfg.graphs):
        nodes = set(g.nodes)
        if len(nodes) != len(g.nodes):
            issues.append((f"graphs[{gi}].nodes", "duplicate node ids"))
        for ei, e in enumerate(g.edges):
            p = f"graphs[{gi}].edges[{ei}]"
            if e.id in edge_owner:
                issues.append((f"{p}.id", f"edge id {e.id!r} already used in graph {edge_owner[e.id]!r}"))
            edge_owner.setdefault(e.id, g.id)
            for end in ("a", "b"):
                if getattr(e, end) not in nodes:
                    issues.append((f"{p}.{end}", f"unknown node {getattr(e, end)!r}"))
            if e.a == e.b:
                issues.append((p, "self-loop"))
            if e.switch_open and not e.is_switch:
                issues.append((f"{p}.switch_open", "only switches can be open"))

    for mi, m in enumerate(cfg.media):
        p = f"media[{mi}]"
        if m.mode == "mvplc":
            if m.graph is None:
                issues.append((f"{p}.graph", "mvplc media need a graph"))
            elif m.graph not in graphs:
                issues.append((f"{p}.graph", f"unknown graph {m.graph!r}"))
            if m.links:
                issues.append((f"{p}.links", "mvplc media derive their links from the graph"))
        elif m.graph is not None:
            issues.append((f"{p}.graph", "dgrm media take no graph"))

    iface_medium: dict[str, str] = {}
    for di, d in enumerate(cfg.devices):
        for ii, itf in enumerate(d.interfaces):
            p = f"devices[{di}].interfaces[{ii}]"
            if itf.id in iface_medium:
                issues.append((f"{p}.id", f"interface id {itf.id!r} is not unique"))
            iface_medium.setdefault(itf.id, itf.medium)
            m = media.get(itf.medium)
            if m is None:
                issues.append((f"{p}.medium", f"unknown medium {itf.medium!r}"))
                continue
            if m.mode == "mvplc":
                g = graphs.get(m.graph)
                if itf.coupler is None:
                    issues.append((f"{p}.coupler", f"interfaces on mvplc medium {m.id!r} need a coupler"))
                elif g is not None and itf.coupler not in set(g.nodes):
                    issues.append((f"{p}.coupler", f"unknown coupler {itf.coupler!r} in graph {g.id!r}"))
            elif itf.coupler is not None:
                issues.append((f"{p}.coupler", f"dgrm medium {m.id!r} takes no coupler"))

    for mi, m in enumerate(cfg.media):
        for li, link in enumerate(m.links):
            for end in ("src", "dst"):
                name = getattr(link, end)
                if iface_medium.get(name) != m.id:
                    issues.append((f"media[{mi}].links[{li}].{end}", f"interface {name!r} is not on medium {m.id!r}"))
            if link.src == link.dst:
                issues.append((f"media[{mi}].links[{li}]", "self-link"))

    dev_ids = {d.id for d in cfg.devices}
    for si, s in enumerate(cfg.traffic.sources):
        if s not in dev_ids:
            issues.append((f"traffic.sources[{si}]", f"unknown device {s!r}"))
    for fi, f in enumerate(cfg.failures):
        owner = edge_owner.get(f.edge)
        if owner is None:
            issues.append((f"failures[{fi}].edge", f"unknown edge {f.edge!r}"))
            continue
        edge = next(e for e in graphs[owner].edges if e.id == f.edge)
        if not edge.is_switch:
            issues.append((f"failures[{fi}].edge", f"edge {f.edge!r} is not a switch"))
    return issues


def parse_config(data: Any) -> SimulationConfig:
    try:
        cfg = SimulationConfig.model_validate(data)
    except ValidationError as exc:
        issues = [(".".join(_loc(x) for x in err["loc"]).replace(".[", "["), err["msg"]) for err in exc.errors()]
        raise ConfigError(issues) from None
    issues = cross_check(cfg)
    if issues:
        raise ConfigError(issues, kind="reference")
    return cfg


def _loc(x: Any) -> str:
    return f"[{x}]" if isinstance(x, int) else str(x)


def loads_config(text: str) -> SimulationConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([("", f"JSON parse error at line {exc.lineno} column {exc.colno}: {exc.msg}")], kind="parse") from None
    return parse_config(data)


def load_config(path: str | Path) -> SimulationConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError([("", f"cannot read {path}: {exc.strerror}")], kind="io") from None
    return loads_config(text)
