"""Classic-pcap decoding and per-connection feature extraction.

Only Ethernet / IPv4 / {TCP, UDP} frames are retained. TCP payload is taken
in capture order (no retransmission removal or reordering).
"""
from __future__ import annotations

import ipaddress
import re
import struct
from dataclasses import dataclass, field

import numpy as np

from .data import DATA2_SCHEMA, Dataset, family
from .errors import BadMagic, PcapNgUnsupported, TruncatedHeader, UnsupportedLinkType

LINKTYPE_ETHERNET = 1
ETH_IPV4 = 0x0800
ETH_VLAN = 0x8100
PROTO_TCP = 6
PROTO_UDP = 17

FIN, SYN, RST, PSH, ACK = 0x01, 0x02, 0x04, 0x08, 0x10

_MAGICS = {
    b"\xd4\xc3\xb2\xa1": ("<", 1_000_000),
    b"\xa1\xb2\xc3\xd4": (">", 1_000_000),
    b"\x4d\x3c\xb2\xa1": ("<", 1_000_000_000),
    b"\xa1\xb2\x3c\x4d": (">", 1_000_000_000),
}
_PCAPNG_MAGIC = b"\x0a\x0d\x0d\x0a"


@dataclass(frozen=True)
class Packet:
    ts_sec: int
    ts_usec: int
    src_ip: str
    dst_ip: str
    proto: int
    src_port: int
    dst_port: int
    tcp_flags: int
    payload: bytes

    @property
    def ts(self) -> float:
        return self.ts_sec + self.ts_usec / 1e6

    @property
    def src(self) -> tuple[str, int]:
        return (self.src_ip, self.src_port)

    @property
    def dst(self) -> tuple[str, int]:
        return (self.dst_ip, self.dst_port)


@dataclass
class ParseStats:
    frames: int = 0
    retained: int = 0
    skipped_malformed: int = 0
    skipped_unsupported: int = 0


def endpoint_str(ep: tuple[str, int]) -> str:
    return f"{ep[0]}:{ep[1]}"


# ---------------------------------------------------------------- decoding


def parse_pcap(data: bytes, stats: ParseStats | None = None) -> list[Packet]:
    """Decode a classic libpcap capture held in memory.

    Malformed frames are skipped and counted in ``stats``; non-IPv4 or
    non-TCP/UDP frames are counted as unsupported.
    """
    stats = stats if stats is not None else ParseStats()
    if len(data) < 4:
        raise TruncatedHeader("capture shorter than the magic number")
    magic = bytes(data[:4])
    if magic == _PCAPNG_MAGIC:
        raise PcapNgUnsupported("pcapng captures are not supported; convert to classic pcap")
    if magic not in _MAGICS:
        raise BadMagic(f"unrecognised capture magic 0x{magic.hex()}")
    if len(data) < 24:
        raise TruncatedHeader("global header shorter than 24 bytes")
    endian, ts_div = _MAGICS[magic]
    linktype = struct.unpack(endian + "I", data[20:24])[0]
    if linktype != LINKTYPE_ETHERNET:
        raise UnsupportedLinkType(f"link type {linktype} (only Ethernet is handled)")

    rec = struct.Struct(endian + "IIII")
    packets = []
    off = 24
    n = len(data)
    while off < n:
        if off + 16 > n:
            stats.skipped_malformed += 1
            break
        ts_sec, ts_frac, incl_len, _orig = rec.unpack_from(data, off)
        off += 16
        if off + incl_len > n:
            stats.frames += 1
            stats.skipped_malformed += 1
            break
        frame = data[off:off + incl_len]
        off += incl_len
        stats.frames += 1
        usec = ts_frac if ts_div == 1_000_000 else ts_frac // 1000
        pkt = _decode_frame(frame, ts_sec, usec, stats)
        if pkt is not None:
            stats.retained += 1
            packets.append(pkt)
    return packets


def _decode_frame(frame: bytes, ts_sec: int, ts_usec: int, stats: ParseStats) -> Packet | None:
    if len(frame) < 14:
        stats.skipped_malformed += 1
        return None
    ethertype = struct.unpack_from("!H", frame, 12)[0]
    off = 14
    if ethertype == ETH_VLAN:
        if len(frame) < 18:
            stats.skipped_malformed += 1
            return None
        ethertype = struct.unpack_from("!H", frame, 16)[0]
        off = 18
    if ethertype != ETH_IPV4:
        stats.skipped_unsupported += 1
        return None
    if len(frame) < off + 20:
        stats.skipped_malformed += 1
        return None
    ver_ihl = frame[off]
    if ver_ihl >> 4 != 4:
        stats.skipped_malformed += 1
        return None
    ihl = (ver_ihl & 0x0F) * 4
    total_len = struct.unpack_from("!H", frame, off + 2)[0]
    frag = struct.unpack_from("!H", frame, off + 6)[0]
    proto = frame[off + 9]
    if ihl < 20 or total_len < ihl or off + total_len > len(frame):
        stats.skipped_malformed += 1
        return None
    if frag & 0x1FFF:
        # non-first fragment: no transport header
        stats.skipped_unsupported += 1
        return None
    src_ip = str(ipaddress.IPv4Address(frame[off + 12:off + 16]))
    dst_ip = str(ipaddress.IPv4Address(frame[off + 16:off + 20]))
    ip_end = off + total_len  # excludes Ethernet trailer padding
    t = off + ihl

    if proto == PROTO_TCP:
        if ip_end - t < 20:
            stats.skipped_malformed += 1
            return None
        sport, dport = struct.unpack_from("!HH", frame, t)
        data_off = (frame[t + 12] >> 4) * 4
        flags = frame[t + 13]
        if data_off < 20 or t + data_off > ip_end:
            stats.skipped_malformed += 1
            return None
        return Packet(ts_sec, ts_usec, src_ip, dst_ip, PROTO_TCP, sport, dport, flags,
                      bytes(frame[t + data_off:ip_end]))
    if proto == PROTO_UDP:
        if ip_end - t < 8:
            stats.skipped_malformed += 1
            return None
        sport, dport, ulen = struct.unpack_from("!HHH", frame, t)
        if ulen < 8 or t + ulen > ip_end:
            stats.skipped_malformed += 1
            return None
        return Packet(ts_sec, ts_usec, src_ip, dst_ip, PROTO_UDP, sport, dport, 0,
                      bytes(frame[t + 8:t + ulen]))
    stats.skipped_unsupported += 1
    return None


# ---------------------------------------------------------------- TCP flows


@dataclass
class TcpFlow:
    client: tuple[str, int]
    server: tuple[str, int]
    first_ts: float
    last_ts: float
    bytes_c2s: int = 0
    bytes_s2c: int = 0
    rst_c2s: int = 0
    rst_s2c: int = 0
    fin_c2s: int = 0
    fin_s2c: int = 0
    segments: list = field(default_factory=list, repr=False)  # (is_c2s, payload) in capture order

    @property
    def key(self) -> frozenset:
        return frozenset((self.client, self.server))


def assemble_flows(packets: list[Packet]) -> list[TcpFlow]:
    """Group TCP packets into direction-collapsed conversations.

    The client is the sender of the first SYN without ACK, else the sender of
    the conversation's first packet. Flows are ordered by first packet time,
    then by first appearance.
    """
    groups: dict[frozenset, list[Packet]] = {}
    for p in packets:
        if p.proto != PROTO_TCP:
            continue
        groups.setdefault(frozenset((p.src, p.dst)), []).append(p)

    flows = []
    for pkts in groups.values():
        syn = next((p for p in pkts if p.tcp_flags & SYN and not p.tcp_flags & ACK), None)
        first = syn or pkts[0]
        client, server = first.src, first.dst
        if client == server:
            continue
        flow = TcpFlow(client, server, min(p.ts for p in pkts), max(p.ts for p in pkts))
        for p in pkts:
            c2s = p.src == client
            if c2s:
                flow.bytes_c2s += len(p.payload)
                flow.rst_c2s += bool(p.tcp_flags & RST)
                flow.fin_c2s += bool(p.tcp_flags & FIN)
            else:
                flow.bytes_s2c += len(p.payload)
                flow.rst_s2c += bool(p.tcp_flags & RST)
                flow.fin_s2c += bool(p.tcp_flags & FIN)
            if p.payload:
                flow.segments.append((c2s, p.payload))
        flows.append(flow)
    # stable sort keeps first-appearance order among equal timestamps
    flows.sort(key=lambda f: f.first_ts)
    return flows


# ---------------------------------------------------------------- HTTP

HTTP_METHODS = (b"GET", b"POST", b"HEAD", b"PUT", b"DELETE", b"OPTIONS", b"PATCH", b"CONNECT", b"TRACE")
_REQUEST_LINE = re.compile(rb"(" + b"|".join(HTTP_METHODS) + rb") (\S+) HTTP/1\.[01]\r?\n")
_STATUS_LINE = re.compile(rb"HTTP/1\.[01] (\d{3})(?: [^\r\n]*)?\r?\n")
_CONTENT_LENGTH = re.compile(rb"(?im)^content-length:\s*(\d+)\s*$")


@dataclass(frozen=True)
class HttpTransaction:
    flow_index: int
    method: str  # "GET", "POST" or "other"
    url: str
    response_code: int | None


def _http_messages(payload: bytes, line_re):
    """Yield start-line matches for each message that begins a segment or
    directly follows a previous complete message inside it."""
    pos = 0
    while pos < len(payload):
        m = line_re.match(payload, pos)
        if m is None:
            return
        yield m
        head_end = payload.find(b"\r\n\r\n", m.end() - 2)
        if head_end < 0:
            return
        body = 0
        cl = _CONTENT_LENGTH.search(payload, m.end(), head_end + 2)
        if cl:
            body = int(cl.group(1))
        pos = head_end + 4 + body


def extract_http(packets, flows: list[TcpFlow]) -> list[HttpTransaction]:
    """Pair the k-th request in each flow's client stream with its k-th response."""
    out = []
    for fi, flow in enumerate(flows):
        requests, codes = [], []
        for c2s, payload in flow.segments:
            if c2s:
                for m in _http_messages(payload, _REQUEST_LINE):
                    method = m.group(1).decode()
                    requests.append((method if method in ("GET", "POST") else "other",
                                     m.group(2).decode("latin-1")))
            else:
                for m in _http_messages(payload, _STATUS_LINE):
                    codes.append(int(m.group(1)))
        for k, (method, url) in enumerate(requests):
            out.append(HttpTransaction(fi, method, url, codes[k] if k < len(codes) else None))
    return out


# ---------------------------------------------------------------- DNS


@dataclass(frozen=True)
class DnsTransaction:
    timestamp: float
    client: tuple[str, int]
    server: tuple[str, int]
    qname: str
    response: str | None
    rcode: int | None


class _DnsError(Exception):
    pass


def _read_name(msg: bytes, off: int) -> tuple[str, int]:
    labels = []
    end = None
    hops = 0
    while True:
        if off >= len(msg):
            raise _DnsError("name runs past message")
        n = msg[off]
        if n & 0xC0 == 0xC0:
            if off + 1 >= len(msg):
                raise _DnsError("truncated pointer")
            if end is None:
                end = off + 2
            off = ((n & 0x3F) << 8) | msg[off + 1]
            hops += 1
            if hops > 64:
                raise _DnsError("pointer loop")
            continue
        if n & 0xC0:
            raise _DnsError("unsupported label type")
        off += 1
        if n == 0:
            break
        if off + n > len(msg):
            raise _DnsError("label runs past message")
        labels.append(msg[off:off + n].decode("latin-1"))
        off += n
    return ".".join(labels).lower(), (end if end is not None else off)


def decode_dns(msg: bytes) -> dict:
    """Decode header, first question and the answer records of a DNS message."""
    if len(msg) < 12:
        raise _DnsError("short header")
    tid, flags, qd, an, _ns, _ar = struct.unpack_from("!HHHHHH", msg, 0)
    off = 12
    qname = None
    for _ in range(qd):
        name, off = _read_name(msg, off)
        if off + 4 > len(msg):
            raise _DnsError("truncated question")
        off += 4
        if qname is None:
            qname = name
    answers = []
    for _ in range(an):
        _name, off = _read_name(msg, off)
        if off + 10 > len(msg):
            raise _DnsError("truncated answer")
        rtype, _rclass, _ttl, rdlen = struct.unpack_from("!HHIH", msg, off)
        off += 10
        if off + rdlen > len(msg):
            raise _DnsError("truncated rdata")
        rdata_off = off
        if rtype == 1 and rdlen == 4:
            answers.append(("A", str(ipaddress.IPv4Address(msg[off:off + 4]))))
        elif rtype == 28 and rdlen == 16:
            answers.append(("AAAA", str(ipaddress.IPv6Address(msg[off:off + 16]))))
        elif rtype == 5:
            answers.append(("CNAME", _read_name(msg, rdata_off)[0]))
        off += rdlen
    return {
        "id": tid,
        "qr": bool(flags & 0x8000),
        "rcode": flags & 0x000F,
        "qname": qname,
        "answers": answers,
    }


def _render_answer(answers) -> str | None:
    for kind, value in answers:
        if kind in ("A", "AAAA"):
            return value
    for kind, value in answers:
        if kind == "CNAME":
            return value
    return None


def extract_dns(packets: list[Packet], stats: dict | None = None) -> list[DnsTransaction]:
    """Pair UDP/53 queries with responses on (transaction id, client, server)."""
    stats = stats if stats is not None else {}
    stats.setdefault("dns_undecodable", 0)
    stats.setdefault("dns_unmatched_responses", 0)
    pending: dict[tuple, list[int]] = {}
    records: list[dict] = []
    for p in packets:
        if p.proto != PROTO_UDP or 53 not in (p.src_port, p.dst_port):
            continue
        try:
            msg = decode_dns(p.payload)
        except (_DnsError, ValueError, struct.error):
            stats["dns_undecodable"] += 1
            continue
        if not msg["qr"]:
            key = (msg["id"], p.src, p.dst)
            pending.setdefault(key, []).append(len(records))
            records.append({"ts": p.ts, "client": p.src, "server": p.dst,
                            "qname": msg["qname"] or "", "response": None, "rcode": None})
        else:
            queue = pending.get((msg["id"], p.dst, p.src))
            if not queue:
                stats["dns_unmatched_responses"] += 1
                continue
            rec = records[queue.pop(0)]
            rec["rcode"] = msg["rcode"]
            rec["response"] = _render_answer(msg["answers"])
    return [DnsTransaction(r["ts"], r["client"], r["server"], r["qname"], r["response"], r["rcode"])
            for r in records]


# ---------------------------------------------------------------- records


def build_records(flows: list[TcpFlow], http: list[HttpTransaction], dns: list[DnsTransaction],
                  family_label) -> Dataset:
    """One Data2-schema row per TCP flow.

    HTTP fields describe the flow's first transaction; DNS fields come from
    the latest transaction at or before the flow start whose answer equals
    the flow's server address.
    """
    fam = family(family_label)
    by_flow: dict[int, list[HttpTransaction]] = {}
    for t in http:
        by_flow.setdefault(t.flow_index, []).append(t)
    dns_sorted = sorted(dns, key=lambda d: d.timestamp)

    rows = []
    for fi, flow in enumerate(flows):
        tx = by_flow.get(fi, [])
        first = tx[0] if tx else None
        match = None
        for d in dns_sorted:
            if d.timestamp > flow.first_ts:
                break
            if d.response is not None and d.response == flow.server[0]:
                match = d
        rows.append([
            endpoint_str(flow.client),
            endpoint_str(flow.server),
            str(flow.bytes_c2s),
            str(flow.bytes_s2c),
            float(flow.rst_c2s),
            float(flow.rst_s2c),
            float(flow.fin_c2s),
            float(flow.fin_s2c),
            float(len(tx)),
            first.method if first else None,
            str(first.response_code) if first and first.response_code is not None else None,
            first.url if first else None,
            match.timestamp if match else np.nan,
            endpoint_str(match.client) if match else None,
            endpoint_str(match.server) if match else None,
            float(match.rcode) if match and match.rcode is not None else np.nan,
            match.qname if match else None,
            match.response if match else None,
        ])
    columns = [[row[j] for row in rows] for j in range(len(DATA2_SCHEMA))]
    return Dataset(DATA2_SCHEMA, columns, [fam.index] * len(rows))


def featurize_capture(data: bytes, family_label, stats: dict | None = None) -> Dataset:
    """Full path: bytes of one capture to its Data2-schema rows."""
    pstats = ParseStats()
    packets = parse_pcap(data, pstats)
    flows = assemble_flows(packets)
    http = extract_http(packets, flows)
    dns_stats: dict = {}
    dns = extract_dns(packets, dns_stats)
    if stats is not None:
        stats.update(frames=pstats.frames, retained=pstats.retained,
                     skipped=pstats.skipped_malformed, unsupported=pstats.skipped_unsupported,
                     flows=len(flows), http=len(http), dns=len(dns), **dns_stats)
    return build_records(flows, http, dns, family_label)


# ---------------------------------------------------------------- crafting
# Frame builders used for fixtures and demos.


def _ip_checksum(header: bytes) -> int:
    s = sum(struct.unpack(f"!{len(header) // 2}H", header))
    while s >> 16:
        s = (s & 0xFFFF) + (s >> 16)
    return ~s & 0xFFFF


def ipv4_frame(src_ip: str, dst_ip: str, proto: int, transport: bytes,
               src_mac=b"\x02\x00\x00\x00\x00\x01", dst_mac=b"\x02\x00\x00\x00\x00\x02") -> bytes:
    total = 20 + len(transport)
    hdr = struct.pack("!BBHHHBBH4s4s", 0x45, 0, total, 0, 0x4000, 64, proto, 0,
                      ipaddress.IPv4Address(src_ip).packed, ipaddress.IPv4Address(dst_ip).packed)
    hdr = hdr[:10] + struct.pack("!H", _ip_checksum(hdr)) + hdr[12:]
    return dst_mac + src_mac + struct.pack("!H", ETH_IPV4) + hdr + transport


def tcp_frame(src: tuple[str, int], dst: tuple[str, int], flags: int, payload: bytes = b"",
              seq: int = 0, ack: int = 0) -> bytes:
    tcp = struct.pack("!HHIIBBHHH", src[1], dst[1], seq, ack, 5 << 4, flags, 65535, 0, 0)
    return ipv4_frame(src[0], dst[0], PROTO_TCP, tcp + payload)


def udp_frame(src: tuple[str, int], dst: tuple[str, int], payload: bytes) -> bytes:
    udp = struct.pack("!HHHH", src[1], dst[1], 8 + len(payload), 0)
    return ipv4_frame(src[0], dst[0], PROTO_UDP, udp + payload)


def _encode_name(name: str) -> bytes:
    out = b""
    for label in name.strip(".").split("."):
        if label:
            out += bytes([len(label)]) + label.encode("ascii")
    return out + b"\x00"


def dns_message(tid: int, qname: str, response: bool = False, rcode: int = 0,
                answers=(), qtype: int = 1) -> bytes:
    """Build a DNS message. ``answers`` holds ``("A", "1.2.3.4")``,
    ``("AAAA", "::1")`` or ``("CNAME", "host.example")`` tuples."""
    flags = (0x8000 | 0x0100 | 0x0080 | (rcode & 0xF)) if response else 0x0100
    msg = struct.pack("!HHHHHH", tid, flags, 1, len(answers), 0, 0)
    msg += _encode_name(qname) + struct.pack("!HH", qtype, 1)
    for kind, value in answers:
        if kind == "A":
            rtype, rdata = 1, ipaddress.IPv4Address(value).packed
        elif kind == "AAAA":
            rtype, rdata = 28, ipaddress.IPv6Address(value).packed
        elif kind == "CNAME":
            rtype, rdata = 5, _encode_name(value)
        else:
            raise ValueError(f"unsupported answer type {kind!r}")
        msg += b"\xc0\x0c" + struct.pack("!HHIH", rtype, 1, 300, len(rdata)) + rdata
    return msg


def write_pcap(records, big_endian: bool = False, linktype: int = LINKTYPE_ETHERNET) -> bytes:
    """Serialise ``(timestamp_seconds, frame_bytes)`` pairs as a classic capture."""
    e = ">" if big_endian else "<"
    out = [struct.pack(e + "IHHiIII", 0xA1B2C3D4, 2, 4, 0, 0, 65535, linktype)]
    for ts, frame in records:
        sec = int(ts)
        usec = int(round((ts - sec) * 1e6))
        out.append(struct.pack(e + "IIII", sec, usec, len(frame), len(frame)) + frame)
    return b"".join(out)
