"""Classic pcap parsing and forward-flow assembly."""

from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from ipaddress import IPv4Address
from typing import BinaryIO, Iterable, Sequence

import numpy as np

from .exceptions import EmptyInput, MalformedHeader, TruncatedRecordWarning

FLAG_NAMES = ("FIN", "SYN", "RST", "PSH", "ACK", "URG", "ECE", "CWR")

PROTO_TCP = 6
PROTO_UDP = 17

LINKTYPE_ETHERNET = 1
ETHERTYPE_IPV4 = 0x0800

# magic -> (struct byte order, ticks per second)
_MAGICS = {
    b"\xd4\xc3\xb2\xa1": ("<", 1_000_000),
    b"\xa1\xb2\xc3\xd4": (">", 1_000_000),
    b"\x4d\x3c\xb2\xa1": ("<", 1_000_000_000),
    b"\xa1\xb2\x3c\x4d": (">", 1_000_000_000),
}

_NO_FLAGS = (False,) * 8


def flags_from_byte(value: int) -> tuple[bool, ...]:
    """Unpack the TCP flags byte (FIN is bit 0, CWR bit 7)."""
    return tuple(bool(value >> i & 1) for i in range(8))


def flags_to_byte(flags: Sequence[bool]) -> int:
    return sum(1 << i for i, f in enumerate(flags) if f)


class Label(str, Enum):
    NORMAL = "normal"
    NOVEL = "novel"
    UNLABELED = "unlabeled"


@dataclass(frozen=True)
class Packet:
    timestamp: float
    src_ip: IPv4Address
    dst_ip: IPv4Address
    src_port: int
    dst_port: int
    protocol: int
    payload_size: int
    ttl: int
    tcp_flags: tuple[bool, ...] = _NO_FLAGS

    @property
    def key(self) -> FlowKey:
        return FlowKey(self.src_ip, self.src_port, self.dst_ip, self.dst_port, self.protocol)

    @property
    def flags_byte(self) -> int:
        return flags_to_byte(self.tcp_flags)


@dataclass(frozen=True, order=True)
class FlowKey:
    src_ip: IPv4Address
    src_port: int
    dst_ip: IPv4Address
    dst_port: int
    protocol: int

    def __str__(self):
        return f"{self.src_ip}:{self.src_port}>{self.dst_ip}:{self.dst_port}/{self.protocol}"


@dataclass(frozen=True)
class Flow:
    """Time-ordered packets of one five-tuple, sent by a monitored host."""

    key: FlowKey
    packets: tuple[Packet, ...]
    label: Label = Label.UNLABELED

    def __len__(self):
        return len(self.packets)

    @cached_property
    def timestamps(self) -> np.ndarray:
        return np.array([p.timestamp for p in self.packets], dtype=float)

    @cached_property
    def sizes(self) -> np.ndarray:
        return np.array([p.payload_size for p in self.packets], dtype=float)

    @property
    def duration(self) -> float:
        return self.packets[-1].timestamp - self.packets[0].timestamp

    def with_label(self, label: Label | str) -> Flow:
        return Flow(self.key, self.packets, Label(label))


@dataclass
class PcapContents:
    """Result of :func:`parse_pcap`.

    ``skipped`` counts frames that are not IPv4 TCP/UDP/other-protocol
    datagrams we can decode (ARP, IPv6, VLAN-tagged, non-first fragments,
    snapped headers). ``truncated`` is set when the file ends inside a
    record; the packets read up to that point are kept.
    """

    packets: list[Packet] = field(default_factory=list)
    skipped: int = 0
    truncated: bool = False

    def __iter__(self):
        return iter(self.packets)

    def __len__(self):
        return len(self.packets)


def _decode_frame(frame: bytes, timestamp: float, wire_len: int) -> Packet | None:
    if len(frame) < 14:
        return None
    ethertype = int.from_bytes(frame[12:14], "big")
    if ethertype != ETHERTYPE_IPV4:
        return None
    ip = frame[14:]
    if len(ip) < 20 or ip[0] >> 4 != 4:
        return None
    ihl = (ip[0] & 0x0F) * 4
    if ihl < 20 or len(ip) < ihl:
        return None
    frag_offset = int.from_bytes(ip[6:8], "big") & 0x1FFF
    ttl = ip[8]
    proto = ip[9]
    src = IPv4Address(ip[12:16])
    dst = IPv4Address(ip[16:20])
    l4 = ip[ihl:]
    if proto in (PROTO_TCP, PROTO_UDP):
        # no L4 header on non-first fragments; reassembly is not supported
        if frag_offset != 0:
            return None
        if proto == PROTO_TCP:
            if len(l4) < 14:
                return None
            flags = flags_from_byte(l4[13])
        else:
            if len(l4) < 4:
                return None
            flags = _NO_FLAGS
        sport, dport = struct.unpack("!HH", l4[:4])
        return Packet(timestamp, src, dst, sport, dport, proto, wire_len, ttl, flags)
    return Packet(timestamp, src, dst, 0, 0, proto, wire_len, ttl, _NO_FLAGS)


def parse_pcap(file: BinaryIO | bytes) -> PcapContents:
    """Read a classic (libpcap) capture with Ethernet link type.

    Parameters
    ----------
    file : binary file object or bytes
        The whole capture, starting at the global header.

    Returns
    -------
    PcapContents
        Decoded IPv4 packets in file order plus skip/truncation bookkeeping.
        ``payload_size`` is the original on-wire frame length.
    """
    data = file if isinstance(file, (bytes, bytearray, memoryview)) else file.read()
    data = bytes(data)
    if len(data) < 24:
        raise MalformedHeader("capture shorter than the 24-byte global header")
    try:
        order, ticks = _MAGICS[data[:4]]
    except KeyError:
        raise MalformedHeader(f"unknown pcap magic {data[:4].hex()}") from None
    linktype = struct.unpack(order + "I", data[20:24])[0]
    if linktype != LINKTYPE_ETHERNET:
        raise MalformedHeader(f"unsupported link type {linktype}; only Ethernet (1)")

    out = PcapContents()
    rec = struct.Struct(order + "IIII")
    pos = 24
    end = len(data)
    while pos < end:
        if end - pos < rec.size:
            out.truncated = True
            break
        sec, frac, caplen, wire_len = rec.unpack_from(data, pos)
        pos += rec.size
        if end - pos < caplen:
            out.truncated = True
            break
        frame = data[pos:pos + caplen]
        pos += caplen
        # integer tick count first so emit/parse round trips are exact
        ts = (sec * ticks + frac) / ticks
        pkt = _decode_frame(frame, ts, wire_len)
        if pkt is None:
            out.skipped += 1
        else:
            out.packets.append(pkt)
    if out.truncated:
        warnings.warn(
            TruncatedRecordWarning(
                f"capture ends inside a record; kept {len(out.packets)} packets"
            ),
            stacklevel=2,
        )
    return out


def assemble_flows(
    packets: Iterable[Packet],
    monitored_src: Iterable[IPv4Address | str],
    label: Label | str = Label.UNLABELED,
    idle_timeout: float | None = None,
) -> list[Flow]:
    """Group packets sent by monitored hosts into forward flows.

    Flows with fewer than two packets are discarded. With ``idle_timeout``
    set, a gap longer than it starts a new flow on the same five-tuple.
    The result is ordered by ``(key, first timestamp)``.
    """
    monitored = {IPv4Address(a) for a in monitored_src}
    if not monitored:
        raise ValueError("monitored_src must not be empty")
    label = Label(label)

    groups: dict[FlowKey, list[Packet]] = {}
    for p in packets:
        if p.src_ip in monitored:
            groups.setdefault(p.key, []).append(p)

    flows = []
    for key in sorted(groups):
        # stable: equal timestamps keep capture order
        pkts = sorted(groups[key], key=lambda p: p.timestamp)
        for chunk in _split_idle(pkts, idle_timeout):
            if len(chunk) >= 2:
                flows.append(Flow(key, tuple(chunk), label))
    return flows


def _split_idle(pkts: list[Packet], idle_timeout: float | None) -> list[list[Packet]]:
    if idle_timeout is None:
        return [pkts]
    chunks = [[pkts[0]]]
    for prev, cur in zip(pkts, pkts[1:]):
        if cur.timestamp - prev.timestamp > idle_timeout:
            chunks.append([])
        chunks[-1].append(cur)
    return chunks


def percentile(values: Sequence[float], q: float) -> float:
    """Nearest-rank percentile: the ``ceil(q*n)``-th smallest value."""
    if len(values) == 0:
        raise EmptyInput("percentile of an empty sequence")
    if not 0 < q <= 1:
        raise ValueError(f"q must lie in (0, 1], got {q}")
    ordered = sorted(values)
    idx = max(math.ceil(q * len(ordered)) - 1, 0)
    return ordered[idx]


def truncate_flows(flows: Iterable[Flow], max_duration: float) -> list[Flow]:
    if max_duration <= 0:
        raise ValueError("max_duration must be positive")
    out = []
    for f in flows:
        t0 = f.packets[0].timestamp
        kept = tuple(p for p in f.packets if p.timestamp - t0 <= max_duration)
        if len(kept) == len(f.packets):
            out.append(f)
        elif len(kept) >= 2:
            out.append(Flow(f.key, kept, f.label))
    return out


def flow_length_percentile(flows: Sequence[Flow], q: float = 0.90) -> int:
    if len(flows) == 0:
        raise EmptyInput("no flows")
    return int(percentile([len(f) for f in flows], q))


def flow_duration_percentile(flows: Sequence[Flow], q: float = 0.90) -> float:
    if len(flows) == 0:
        raise EmptyInput("no flows")
    return float(percentile([f.duration for f in flows], q))
