import struct
from ipaddress import IPv4Address

import numpy as np
import pytest

from flowbench.capture import FLAG_NAMES, Flow, Label, Packet

A = IPv4Address("10.0.0.1")
B = IPv4Address("10.0.0.9")


def pkt(ts, size=100, src=A, dst=B, sport=1000, dport=80, proto=6, ttl=64, flags=()):
    bits = tuple(name in flags for name in FLAG_NAMES)
    return Packet(float(ts), IPv4Address(src), IPv4Address(dst), sport, dport, proto, size, ttl, bits)


def flow(times, sizes=None, label=Label.NORMAL, ttl=64, flags=(), sport=1000):
    sizes = sizes if sizes is not None else [100] * len(times)
    packets = tuple(pkt(t, s, ttl=ttl, flags=flags, sport=sport) for t, s in zip(times, sizes))
    return Flow(packets[0].key, packets, label)


def pcap_global_header(magic=0xA1B2C3D4, linktype=1, endian="<"):
    return struct.pack(endian + "IHHiIII", magic, 2, 4, 0, 0, 65535, linktype)


def pcap_record(frame, sec=0, frac=0, wire_len=None, endian="<"):
    wire_len = len(frame) if wire_len is None else wire_len
    return struct.pack(endian + "IIII", sec, frac, len(frame), wire_len) + frame


def ipv4_tcp_frame(src="10.0.0.1", dst="10.0.0.9", sport=1234, dport=80, flags=0x02, ttl=64, pad=0):
    """Ethernet + IPv4 + TCP (no options) assembled field by field."""
    eth = bytes.fromhex("aabbccddeeff" "112233445566" "0800")
    tcp = struct.pack("!HHIIBBHHH", sport, dport, 1, 0, 5 << 4, flags, 65535, 0, 0) + b"\x00" * pad
    total = 20 + len(tcp)
    ip = struct.pack("!BBHHHBBH4s4s", 0x45, 0, total, 7, 0x4000, ttl, 6, 0,
                     IPv4Address(src).packed, IPv4Address(dst).packed)
    return eth + ip + tcp


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def blobs(rng):
    """Two well separated Gaussian blobs in 3-d."""
    return np.vstack([rng.normal(size=(60, 3)), rng.normal(size=(60, 3)) + 20.0])
