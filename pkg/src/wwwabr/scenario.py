"""Scenario configuration and construction of the K-N client/server network.

Clients attach to SW1, servers to SW2, and LINK1 joins the two switches::

    client --1000 km, 155.52-- SW1 ==LINK1 1000 km, 45.0== SW2 --1000 km, 155.52-- server

Server-to-client data leaves SW2 through the LINK1 port, the bottleneck.
"""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass, field

from .abr import AbrVc, SesParams
from .engine import RngStreams, Simulator, seconds
from .erica import EricaParams, EricaPortState
from .fabric import CELL_BITS, BrmStamp, Link, RouteTable, SwitchPort
from .tcp import MessageStream, TcpEndpoint, TcpParams
from .workload import THINK_TIME, HttpClient, HttpServer

PER_CLIENT_LOAD_MBPS = 0.48


class ConfigError(ValueError):
    """Bad configuration text or value."""


@dataclass(frozen=True)
class ScenarioConfig:
    n_servers: int = 1
    k_clients_per_server: int = 15
    bottleneck_rate: float = 45.0e6  # bits/s
    access_rate: float = 155.52e6  # bits/s
    link_length_km: float = 1000.0
    sim_duration: float = 100.0  # seconds
    warmup: float = 0.0  # seconds
    seed: int = 1
    think_time: float = THINK_TIME
    start_jitter: float = THINK_TIME  # client start times drawn from [0, start_jitter)
    erica: EricaParams = field(default_factory=EricaParams)
    ses: SesParams | None = None  # None: derived from access_rate
    tcp: TcpParams = field(default_factory=TcpParams)

    def __post_init__(self) -> None:
        if self.n_servers < 1:
            raise ConfigError("n_servers must be at least 1")
        if self.k_clients_per_server < 1:
            raise ConfigError("k_clients_per_server must be at least 1")
        if not self.bottleneck_rate > 0 or not self.access_rate > 0:
            raise ConfigError("link rates must be positive")
        if self.link_length_km < 0:
            raise ConfigError("link_length_km must be non-negative")
        if not self.sim_duration > self.warmup >= 0:
            raise ConfigError("need sim_duration > warmup >= 0")
        if self.think_time < 0 or self.start_jitter < 0:
            raise ConfigError("think_time and start_jitter must be non-negative")
        if self.ses is None:
            object.__setattr__(self, "ses", SesParams(pcr=self.access_rate / CELL_BITS))

    def replace(self, **changes) -> "ScenarioConfig":
        if "access_rate" in changes and "ses" not in changes:
            changes["ses"] = None
        return dataclasses.replace(self, **changes)


# -- config text --------------------------------------------------------------

_NUM = r"([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)"
_DURATION_UNITS = {"s": 1.0, "ms": 1e-3, "us": 1e-6}
_RATE_UNITS = {"bps": 1.0, "kbps": 1e3, "mbps": 1e6, "gbps": 1e9}


def _split(value: str) -> tuple[float, str]:
    m = re.fullmatch(_NUM + r"\s*([A-Za-z]*)", value.strip())
    if not m:
        raise ValueError(f"not a number: {value!r}")
    return float(m.group(1)), m.group(2)


def _duration(value: str) -> float:
    num, unit = _split(value)
    if unit == "":
        return num
    if unit not in _DURATION_UNITS:
        raise ValueError(f"unknown duration unit {unit!r}")
    return num * _DURATION_UNITS[unit]


def _bit_rate(default_unit: float):
    def parse(value: str) -> float:
        num, unit = _split(value)
        if unit == "":
            return num * default_unit
        if unit == "cps":
            return num * CELL_BITS
        if unit.lower() not in _RATE_UNITS:
            raise ValueError(f"unknown rate unit {unit!r}")
        return num * _RATE_UNITS[unit.lower()]
    return parse


def _cell_rate(value: str) -> float:
    num, unit = _split(value)
    if unit in ("", "cps"):
        return num
    if unit.lower() not in _RATE_UNITS:
        raise ValueError(f"unknown rate unit {unit!r}")
    return num * _RATE_UNITS[unit.lower()] / CELL_BITS


def _int(value: str) -> int:
    num, unit = _split(value)
    if unit or num != int(num):
        raise ValueError(f"not an integer: {value!r}")
    return int(num)


def _float(value: str) -> float:
    num, unit = _split(value)
    if unit:
        raise ValueError(f"unexpected unit {unit!r}")
    return num


def _bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


_KEYS = {
    "n_servers": _int,
    "k_clients_per_server": _int,
    "bottleneck_rate": _bit_rate(1e6),
    "access_rate": _bit_rate(1e6),
    "link_length_km": _float,
    "sim_duration": _duration,
    "warmup": _duration,
    "seed": _int,
    "think_time": _duration,
    "start_jitter": _duration,
    "erica.interval_cells": _int,
    "erica.interval_time": _duration,
    "erica.t0": _duration,
    "erica.a": _float,
    "erica.b": _float,
    "erica.qdlf": _float,
    "ses.pcr": _cell_rate,
    "ses.mcr": _cell_rate,
    "ses.icr": _cell_rate,
    "ses.nrm": _int,
    "ses.adtf": _duration,
    "tcp.mss": _int,
    "tcp.max_window": _int,
    "tcp.timer_granularity": _duration,
    "tcp.idle_restart_enabled": _bool,
    "tcp.initial_ssthresh": _int,
    "tcp.initial_rto": _duration,
    "tcp.strict_rto": _bool,
}


def parse_config(text: str, **overrides) -> ScenarioConfig:
    """Parse ``key = value`` lines into a :class:`ScenarioConfig`.

    Keyword ``overrides`` (top-level field names) are applied after the text.
    """
    values: dict[str, object] = {}
    lines: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, _, value = (part.strip() for part in line.partition("="))
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _KEYS[key](value)
            lines[key] = lineno
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: key {key!r}: {exc}") from None
    for key, value in overrides.items():
        if value is not None:
            values[key] = value

    groups: dict[str, dict] = {"erica": {}, "ses": {}, "tcp": {}}
    top: dict[str, object] = {}
    for key, value in values.items():
        if "." in key:
            group, name = key.split(".", 1)
            groups[group][name] = value
        else:
            top[key] = value
    try:
        erica = EricaParams(**groups["erica"])
        tcp = TcpParams(**groups["tcp"])
        access = top.get("access_rate", ScenarioConfig.access_rate)
        ses_kw = dict(groups["ses"])
        ses_kw.setdefault("pcr", access / CELL_BITS)
        ses = SesParams(**ses_kw)
        return ScenarioConfig(erica=erica, tcp=tcp, ses=ses, **top)
    except (ValueError, TypeError) as exc:
        msg = str(exc)
        bad = [k for k in values if k in msg] or [k for k in values if k.split(".")[-1] in msg]
        if bad:
            key = bad[0]
            where = f"line {lines[key]}: key {key!r}" if key in lines else f"key {key!r}"
            raise ConfigError(f"{where}: {msg}") from None
        raise ConfigError(f"invalid configuration: {msg}") from None


def expected_offered_load(config: ScenarioConfig) -> float:
    """Unconstrained demand in Mbps."""
    return config.n_servers * config.k_clients_per_server * PER_CLIENT_LOAD_MBPS


# -- topology -----------------------------------------------------------------

def _erica_port(sim, link: Link, name: str, params: EricaParams) -> SwitchPort:
    port = SwitchPort(sim, link, name)
    port.erica = EricaPortState(params, link.cell_rate, port.queue_len)
    return port


@dataclass
class Connection:
    server: int
    client: int  # index within the server's clients
    down: AbrVc  # server -> client
    up: AbrVc  # client -> server
    server_ep: TcpEndpoint
    client_ep: TcpEndpoint
    http_client: HttpClient | None = None
    http_server: HttpServer | None = None


@dataclass
class Topology:
    sim: Simulator
    config: ScenarioConfig
    bottleneck: SwitchPort  # SW2 -> LINK1
    reverse_trunk: SwitchPort  # SW1 -> LINK1 (towards servers)
    server_ports: list[SwitchPort]  # SW2 -> server
    client_ports: list[SwitchPort]  # SW1 -> client
    server_nics: list[Link]
    client_nics: list[Link]
    connections: list[Connection]
    routes: RouteTable

    @property
    def ports(self) -> list[SwitchPort]:
        return [self.bottleneck, self.reverse_trunk, *self.server_ports, *self.client_ports]

    def route(self, vc_id: int) -> list[str]:
        return self.routes.route(vc_id)

    def one_way_propagation(self) -> int:
        return 3 * self.bottleneck.link.prop_delay


def _wire_vc(vc: AbrVc, fwd_ports: list[SwitchPort], rev_ports: list[SwitchPort], sim) -> None:
    """Forward hops through ``fwd_ports``; BRMs return through ``rev_ports``,
    stamped at each switch by the VC's own forward port there."""
    vc.fwd_hops = [p.accept for p in fwd_ports] + [vc.dest_receive]
    stamps = list(reversed(fwd_ports))
    vc.bwd_hops = [BrmStamp(sim, out, fwd) for out, fwd in zip(rev_ports, stamps)] + [vc.source_receive]


def build_kn(config: ScenarioConfig, sim: Simulator | None = None, workload: bool = True) -> Topology:
    """Construct the network and, with ``workload``, one HTTP client/server pair per connection."""
    sim = sim or Simulator()
    km = config.link_length_km
    acc = config.access_rate
    streams = RngStreams(config.seed)

    bottleneck = _erica_port(sim, Link(config.bottleneck_rate, km, "LINK1"), "SW2->LINK1", config.erica)
    reverse_trunk = _erica_port(sim, Link(config.bottleneck_rate, km, "LINK1-rev"), "SW1->LINK1", config.erica)
    server_ports, server_nics, client_ports, client_nics = [], [], [], []
    for s in range(config.n_servers):
        server_nics.append(Link(acc, km, f"server{s}-nic"))
        server_ports.append(_erica_port(sim, Link(acc, km, f"SW2-server{s}"), f"SW2->server{s}", config.erica))

    routes = RouteTable()
    connections: list[Connection] = []
    for s in range(config.n_servers):
        for k in range(config.k_clients_per_server):
            idx = len(connections)
            cname = f"client{s}.{k}"
            cnic = Link(acc, km, f"{cname}-nic")
            cport = _erica_port(sim, Link(acc, km, f"SW1-{cname}"), f"SW1->{cname}", config.erica)
            client_nics.append(cnic)
            client_ports.append(cport)

            down = AbrVc(sim, 2 * idx, config.ses, nic=server_nics[s], dest_nic=cnic)
            up = AbrVc(sim, 2 * idx + 1, config.ses, nic=cnic, dest_nic=server_nics[s])
            _wire_vc(down, [bottleneck, cport], [reverse_trunk, server_ports[s]], sim)
            _wire_vc(up, [reverse_trunk, server_ports[s]], [bottleneck, cport], sim)
            path = [f"server{s}", "SW2", "SW1", cname]
            routes.register(down.vc_id, path)
            routes.register(up.vc_id, path[::-1])

            down_stream, up_stream = MessageStream(), MessageStream()
            server_ep = TcpEndpoint(sim, config.tcp, down, down_stream, up_stream, f"server{s}->{cname}")
            client_ep = TcpEndpoint(sim, config.tcp, up, up_stream, down_stream, f"{cname}->server{s}")
            down.sink = client_ep.receive
            up.sink = server_ep.receive
            conn = Connection(s, k, down, up, server_ep, client_ep)
            if workload:
                jitter = streams.stream(f"start/{s}/{k}").random() * config.start_jitter
                conn.http_server = HttpServer(streams.stream(f"sampler/{s}/{k}"))
                conn.http_server.attach(server_ep)
                conn.http_client = HttpClient(sim, client_ep, seconds(jitter), config.think_time)
            connections.append(conn)

    return Topology(sim, config, bottleneck, reverse_trunk, server_ports, client_ports,
                    server_nics, client_nics, connections, routes)
