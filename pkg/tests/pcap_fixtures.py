"""Hand-designed captures whose extracted values are known in advance."""
import struct

from ransomxai.pcap import ACK, FIN, PSH, RST, SYN, dns_message, tcp_frame, udp_frame, write_pcap

HOST = "192.168.1.10"
RESOLVER = ("8.8.8.8", 53)
WEB = ("10.0.0.5", 80)
TLS = ("10.0.0.7", 443)
DEAD = ("10.0.0.9", 8080)

PIPELINED_REQ = b"GET /a HTTP/1.1\r\nHost: evil.example\r\n\r\nGET /b?x=1 HTTP/1.1\r\nHost: evil.example\r\n\r\n"
PIPELINED_RESP = (b"HTTP/1.1 200 OK\r\nContent-Length: 5\r\n\r\nhello"
                  b"HTTP/1.1 404 Not Found\r\nContent-Length: 0\r\n\r\n")


def main_capture_records():
    """Three TCP flows plus DNS traffic and a few frames the parser must skip.

    flow A  HOST:40000 -> WEB     handshake, pipelined GETs (200, 404), FIN both ways,
                                  preceded by DNS evil.example -> 10.0.0.5
    flow B  HOST:40001 -> TLS     handshake, 100 bytes up, 240 bytes down, FIN s2c then c2s,
                                  DNS for it answered NXDOMAIN (so no join)
    flow C  HOST:40002 -> DEAD    SYN answered by a single RST
    """
    c_a, c_b, c_c = (HOST, 40000), (HOST, 40001), (HOST, 40002)
    recs = [
        (1.000, udp_frame((HOST, 5353), RESOLVER, dns_message(0x1111, "Evil.Example."))),
        (1.050, udp_frame(RESOLVER, (HOST, 5353), dns_message(0x1111, "evil.example", response=True,
                                                              answers=[("A", "10.0.0.5")]))),
        (1.100, udp_frame((HOST, 5354), RESOLVER, dns_message(0x2222, "tls.example"))),
        (1.150, udp_frame(RESOLVER, (HOST, 5354), dns_message(0x2222, "tls.example", response=True, rcode=3))),
        (1.200, udp_frame((HOST, 5355), RESOLVER, dns_message(0x3333, "lost.example"))),
        (2.000, tcp_frame(c_a, WEB, SYN, seq=100)),
        (2.010, tcp_frame(WEB, c_a, SYN | ACK, seq=500, ack=101)),
        (2.020, tcp_frame(c_a, WEB, ACK, seq=101, ack=501)),
        (2.030, tcp_frame(c_a, WEB, PSH | ACK, PIPELINED_REQ, seq=101, ack=501)),
        (2.040, tcp_frame(WEB, c_a, PSH | ACK, PIPELINED_RESP, seq=501, ack=101 + len(PIPELINED_REQ))),
        (2.050, tcp_frame(WEB, c_a, FIN | ACK)),
        (2.060, tcp_frame(c_a, WEB, FIN | ACK)),
        (2.070, tcp_frame(WEB, c_a, ACK)),
        (3.000, tcp_frame(c_b, TLS, SYN)),
        (3.010, tcp_frame(TLS, c_b, SYN | ACK)),
        (3.020, tcp_frame(c_b, TLS, ACK)),
        (3.030, tcp_frame(c_b, TLS, PSH | ACK, b"\x16\x03\x01" + bytes(97))),
        (3.040, tcp_frame(TLS, c_b, PSH | ACK, b"\x16\x03\x03" + bytes(237))),
        (3.050, tcp_frame(TLS, c_b, FIN | ACK)),
        (3.060, tcp_frame(c_b, TLS, FIN | ACK)),
        (4.000, tcp_frame(c_c, DEAD, SYN)),
        (4.010, tcp_frame(DEAD, c_c, RST | ACK)),
        # skipped: ARP frame, truncated IPv4 frame, non-IPv4 EtherType inside a VLAN tag
        (5.000, b"\xff" * 6 + b"\x02" * 6 + b"\x08\x06" + bytes(28)),
        (5.010, b"\xff" * 6 + b"\x02" * 6 + b"\x08\x00" + b"\x45\x00"),
        (5.020, b"\xff" * 6 + b"\x02" * 6 + b"\x81\x00\x00\x01\x86\xdd" + bytes(40)),
    ]
    return recs


def main_capture(big_endian=False):
    return write_pcap(main_capture_records(), big_endian=big_endian)


def ten_tcp_frames():
    c, s = (HOST, 41000), WEB
    frames = [tcp_frame(c, s, SYN), tcp_frame(s, c, SYN | ACK), tcp_frame(c, s, ACK)]
    frames += [tcp_frame(c, s, PSH | ACK, bytes([i]) * (i + 1)) for i in range(5)]
    frames += [tcp_frame(c, s, FIN | ACK), tcp_frame(s, c, FIN | ACK)]
    return write_pcap([(10.0 + i / 100, f) for i, f in enumerate(frames)])


def simple_capture(client_port, server, request=b"POST /gate.php HTTP/1.1\r\nContent-Length: 0\r\n\r\n"):
    c = (HOST, client_port)
    return write_pcap([
        (1.0, tcp_frame(c, server, SYN)),
        (1.1, tcp_frame(server, c, SYN | ACK)),
        (1.2, tcp_frame(c, server, PSH | ACK, request)),
        (1.3, tcp_frame(server, c, PSH | ACK, b"HTTP/1.0 302 Found\r\n\r\n")),
    ])


def ns_magic(capture: bytes) -> bytes:
    """Rewrite a little-endian microsecond capture to the nanosecond magic."""
    out = bytearray(capture)
    out[0:4] = struct.pack("<I", 0xA1B23C4D)
    off = 24
    while off < len(out):
        sec, usec, incl, orig = struct.unpack_from("<IIII", out, off)
        struct.pack_into("<IIII", out, off, sec, usec * 1000, incl, orig)
        off += 16 + incl
    return bytes(out)
