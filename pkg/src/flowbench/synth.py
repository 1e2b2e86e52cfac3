"""Seeded synthetic traffic with controllable normal and novel profiles.

Three named scenarios mimic the kinds of novelty the benchmark targets:

``ddos-syn``
    novel flows are bursts of tiny, SYN-flagged packets at a high rate.
``new-device``
    the novel host has a different TTL (another OS) and a slightly shifted
    packet-size distribution.
``new-activity``
    same host, but novel flows are regular and fast with a PSH-heavy,
    ACK-light flag mix.
"""

from __future__ import annotations

import math
import struct
from dataclasses import asdict, dataclass, field
from ipaddress import IPv4Address
from pathlib import Path
from typing import BinaryIO, Iterable, Mapping, Sequence

import numpy as np

from .capture import FLAG_NAMES, PROTO_TCP, PROTO_UDP, Label, Packet, flags_to_byte
from .exceptions import InvalidProfile

MAX_SIZE = 1500
MIN_SIZE = 40
# destination pool: 198.18.0.0/15 is reserved for benchmarking
_DST_BASE = int(IPv4Address("198.18.0.1"))
_PORTS_PER_DST = 16384
_SRC_PORT_BASE = 49152

_ETH_HEADER = bytes.fromhex("020000000002" "020000000001" "0800")


def _header_len(protocol: int) -> int:
    return 14 + 20 + {PROTO_TCP: 20, PROTO_UDP: 8}.get(protocol, 0)


@dataclass
class TrafficProfile:
    """Distributional recipe for one population of flows.

    ``iat_dist`` is ``("exponential", rate)`` or ``("uniform", a, b)`` in
    seconds; ``size_dist`` is ``(mean, std)`` of a normal clipped to
    ``[max(40, header bytes), 1500]``. ``ttl`` is either an integer or a
    mapping ``{ttl: probability}`` drawn once per flow. ``flag_profile``
    maps TCP flag names to per-packet set probabilities.
    """

    n_flows: int
    pkts_per_flow: tuple[int, int] = (5, 20)
    iat_dist: tuple = ("exponential", 2.0)
    size_dist: tuple[float, float] = (500.0, 200.0)
    ttl: int | Mapping[int, float] = 64
    flag_profile: Mapping[str, float] = field(default_factory=dict)
    label: str = "normal"
    src_ip: str = "10.0.0.1"
    protocol: int = PROTO_TCP
    dst_port: int = 443

    def validate(self) -> None:
        lo, hi = self.pkts_per_flow
        if self.n_flows < 0:
            raise InvalidProfile("n_flows must be non-negative")
        if lo < 2 or hi < lo:
            raise InvalidProfile(f"pkts_per_flow must satisfy 2 <= min <= max, got {self.pkts_per_flow}")
        kind, *params = self.iat_dist
        if kind == "exponential":
            if len(params) != 1 or not params[0] > 0:
                raise InvalidProfile("exponential iat_dist needs one positive rate")
        elif kind == "uniform":
            if len(params) != 2 or not 0 <= params[0] <= params[1]:
                raise InvalidProfile("uniform iat_dist needs 0 <= a <= b")
        else:
            raise InvalidProfile(f"unknown iat_dist {kind!r}")
        mean, std = self.size_dist
        if not (math.isfinite(mean) and math.isfinite(std) and std >= 0):
            raise InvalidProfile("size_dist must be finite with std >= 0")
        for name, prob in self.flag_profile.items():
            if name not in FLAG_NAMES:
                raise InvalidProfile(f"unknown TCP flag {name!r}")
            if not 0 <= prob <= 1:
                raise InvalidProfile(f"flag probability for {name} outside [0, 1]")
        ttls = self._ttl_table()
        if any(not 0 <= t <= 255 for t in ttls[0]) or not np.isclose(ttls[1].sum(), 1.0):
            raise InvalidProfile("ttl values must be in [0, 255] with probabilities summing to 1")
        try:
            Label(self.label)
        except ValueError:
            raise InvalidProfile(f"bad label {self.label!r}") from None
        IPv4Address(self.src_ip)

    def _ttl_table(self) -> tuple[np.ndarray, np.ndarray]:
        if isinstance(self.ttl, Mapping):
            items = sorted((int(k), float(v)) for k, v in self.ttl.items())
            return np.array([k for k, _ in items]), np.array([v for _, v in items])
        return np.array([int(self.ttl)]), np.array([1.0])

    @classmethod
    def from_dict(cls, d: Mapping) -> TrafficProfile:
        d = dict(d)
        for k in ("pkts_per_flow", "iat_dist", "size_dist"):
            if k in d:
                d[k] = tuple(d[k])
        if isinstance(d.get("ttl"), Mapping):
            d["ttl"] = {int(k): float(v) for k, v in d["ttl"].items()}
        try:
            prof = cls(**d)
        except TypeError as exc:
            raise InvalidProfile(str(exc)) from None
        prof.validate()
        return prof

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pkts_per_flow"] = list(self.pkts_per_flow)
        d["iat_dist"] = list(self.iat_dist)
        d["size_dist"] = list(self.size_dist)
        d["flag_profile"] = dict(self.flag_profile)
        if isinstance(self.ttl, Mapping):
            d["ttl"] = {str(k): v for k, v in self.ttl.items()}
        return d


@dataclass
class SyntheticTraffic:
    packets: list[Packet]
    labels: list[Label]
    # packets per generated flow, keyed by five-tuple
    flow_lengths: dict


def _draw_iats(rng: np.random.Generator, dist: tuple, n: int) -> np.ndarray:
    kind, *params = dist
    if kind == "exponential":
        return rng.exponential(1.0 / params[0], size=n)
    return rng.uniform(params[0], params[1], size=n)


def generate(
    profiles: Sequence[TrafficProfile],
    seed: int,
    start_time: float = 1_600_000_000.0,
    span: float = 3600.0,
    flow_offset: int = 0,
) -> SyntheticTraffic:
    """Draw flows for every profile and merge them into one packet stream.

    Every flow gets its own five-tuple: the source port and destination
    address come from a counter starting at ``flow_offset``. Timestamps are
    quantized to microseconds so a pcap round trip is lossless. The merged
    stream is ordered by timestamp, ties by generation order.
    """
    if not profiles:
        raise InvalidProfile("no profiles given")
    for prof in profiles:
        prof.validate()
    rng = np.random.default_rng(seed)
    t_base = round(start_time * 1_000_000)
    rows = []
    flow_lengths = {}
    flow_idx = flow_offset
    for prof in profiles:
        lo, hi = prof.pkts_per_flow
        ttl_vals, ttl_p = prof._ttl_table()
        flag_p = np.array([prof.flag_profile.get(n, 0.0) for n in FLAG_NAMES])
        header = _header_len(prof.protocol)
        size_lo = max(MIN_SIZE, header)
        src = IPv4Address(prof.src_ip)
        label = Label(prof.label)
        for _ in range(prof.n_flows):
            n = int(rng.integers(lo, hi + 1))
            start = rng.uniform(0.0, span)
            offsets = np.concatenate([[0.0], np.cumsum(_draw_iats(rng, prof.iat_dist, n - 1))])
            ticks = t_base + np.round((start + offsets) * 1_000_000).astype(np.int64)
            sizes = np.clip(np.round(rng.normal(prof.size_dist[0], prof.size_dist[1], size=n)), size_lo, MAX_SIZE)
            ttl = int(rng.choice(ttl_vals, p=ttl_p))
            flag_bits = rng.random((n, 8)) < flag_p
            dst = IPv4Address(_DST_BASE + flow_idx // _PORTS_PER_DST)
            sport = _SRC_PORT_BASE + flow_idx % _PORTS_PER_DST
            is_tcp = prof.protocol == PROTO_TCP
            sport_, dport_ = (sport, prof.dst_port) if prof.protocol in (PROTO_TCP, PROTO_UDP) else (0, 0)
            for j in range(n):
                flags = tuple(bool(b) for b in flag_bits[j]) if is_tcp else (False,) * 8
                pkt = Packet(int(ticks[j]) / 1_000_000, src, dst, sport_, dport_, prof.protocol,
                             int(sizes[j]), ttl, flags)
                rows.append((int(ticks[j]), len(rows), pkt, label))
            flow_lengths[pkt.key] = n
            flow_idx += 1
    rows.sort(key=lambda r: (r[0], r[1]))
    return SyntheticTraffic([r[2] for r in rows], [r[3] for r in rows], flow_lengths)


def _ip_checksum(header: bytes) -> int:
    total = sum(struct.unpack("!10H", header))
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return ~total & 0xFFFF


def _frame(pkt: Packet, ident: int) -> bytes:
    if pkt.protocol == PROTO_TCP:
        l4 = struct.pack("!HHIIBBHHH", pkt.src_port, pkt.dst_port, 0, 0, 5 << 4,
                         flags_to_byte(pkt.tcp_flags), 65535, 0, 0)
    elif pkt.protocol == PROTO_UDP:
        l4 = struct.pack("!HHHH", pkt.src_port, pkt.dst_port, max(pkt.payload_size - 34, 8), 0)
    else:
        l4 = b""
    total_len = min(max(pkt.payload_size - 14, 20 + len(l4)), 0xFFFF)
    ip = struct.pack("!BBHHHBBH4s4s", 0x45, 0, total_len, ident & 0xFFFF, 0x4000,
                     pkt.ttl, pkt.protocol, 0, pkt.src_ip.packed, pkt.dst_ip.packed)
    ip = ip[:10] + struct.pack("!H", _ip_checksum(ip)) + ip[12:]
    return _ETH_HEADER + ip + l4


def write_pcap(packets: Iterable[Packet], fh: BinaryIO) -> None:
    """Write packets as a classic little-endian microsecond pcap.

    Records carry the headers only (snapped); the original-length field
    holds ``payload_size``.
    """
    fh.write(struct.pack("<IHHiIII", 0xA1B2C3D4, 2, 4, 0, 0, 65535, 1))
    for i, pkt in enumerate(packets):
        frame = _frame(pkt, i)
        wire = max(pkt.payload_size, len(frame))
        sec, usec = divmod(round(pkt.timestamp * 1_000_000), 1_000_000)
        fh.write(struct.pack("<IIII", sec, usec, len(frame), wire))
        fh.write(frame)


def emit_pcap(packets: Iterable[Packet], path: str | Path) -> Path:
    path = Path(path)
    with open(path, "wb") as fh:
        write_pcap(packets, fh)
    return path


# ---------------------------------------------------------------- scenarios

NORMAL_TCP_FLAGS = {"ACK": 0.92, "PSH": 0.45, "SYN": 0.04, "FIN": 0.04, "RST": 0.01}

SCENARIOS = ("ddos-syn", "new-device", "new-activity")


def scenario_profiles(name: str, n_train: int = 800, n_test: int = 200) -> dict[str, list[TrafficProfile]]:
    """Profiles for a named scenario, split into the three capture parts.

    Returns a mapping with keys ``train``, ``test-normal`` and
    ``test-novel``; the first two share the normal profile.
    """
    normal = dict(pkts_per_flow=(8, 16), iat_dist=("uniform", 0.2, 0.8),
                  size_dist=(520.0, 150.0), flag_profile=NORMAL_TCP_FLAGS,
                  ttl={64: 0.6, 63: 0.25, 62: 0.15})
    if name == "ddos-syn":
        novel = dict(normal, pkts_per_flow=(20, 40), iat_dist=("exponential", 200.0), size_dist=(60.0, 6.0),
                     flag_profile={"SYN": 0.95, "ACK": 0.05, "RST": 0.02})
    elif name == "new-device":
        novel = dict(normal, size_dist=(560.0, 150.0), src_ip="10.0.0.2",
                     ttl={128: 0.6, 127: 0.25, 126: 0.15})
    elif name == "new-activity":
        novel = dict(normal, iat_dist=("uniform", 0.15, 0.55),
                     flag_profile={"ACK": 0.3, "PSH": 0.85, "SYN": 0.04, "FIN": 0.04})
    else:
        raise InvalidProfile(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    return {
        "train": [TrafficProfile(n_train, label="normal", **normal)],
        "test-normal": [TrafficProfile(n_test, label="normal", **normal)],
        "test-novel": [TrafficProfile(n_test, label="novel", **novel)],
    }


def scenario_hosts(name: str) -> list[str]:
    parts = scenario_profiles(name, 1, 1)
    return sorted({p.src_ip for profs in parts.values() for p in profs})


def generate_part(profiles: Sequence[TrafficProfile], seed: int, part_index: int) -> SyntheticTraffic:
    """Generate one capture part with a seed and address range unique to the part."""
    child = np.random.SeedSequence([seed, part_index]).generate_state(1)[0]
    return generate(profiles, int(child), flow_offset=part_index * 100_000)
