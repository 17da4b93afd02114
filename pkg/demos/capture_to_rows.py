"""Build a small capture in memory, then turn it into connection rows.

Shows the three stages behind ``ransomxai extract``: frame parsing, flow
assembly with HTTP and DNS dissection, and one feature row per TCP flow.

    python demos/capture_to_rows.py
"""
from ransomxai.pcap import (ACK, FIN, PSH, SYN, ParseStats, assemble_flows, dns_message, extract_dns,
                            extract_http, featurize_capture, parse_pcap, tcp_frame, udp_frame, write_pcap)

host, resolver, server = ("192.168.7.2", 50000), ("1.1.1.1", 53), ("203.0.113.9", 80)
request = b"POST /gate.php HTTP/1.1\r\nHost: c2.example\r\nContent-Length: 4\r\n\r\nping"
response = b"HTTP/1.1 200 OK\r\nContent-Length: 2\r\n\r\nok"
records = [
    (0.00, udp_frame(("192.168.7.2", 5353), resolver, dns_message(7, "c2.example"))),
    (0.02, udp_frame(resolver, ("192.168.7.2", 5353),
                     dns_message(7, "c2.example", response=True, answers=[("A", server[0])]))),
    (0.10, tcp_frame(host, server, SYN)),
    (0.11, tcp_frame(server, host, SYN | ACK)),
    (0.12, tcp_frame(host, server, ACK)),
    (0.13, tcp_frame(host, server, PSH | ACK, request)),
    (0.20, tcp_frame(server, host, PSH | ACK, response)),
    (0.21, tcp_frame(host, server, FIN | ACK)),
    (0.22, tcp_frame(server, host, FIN | ACK)),
]
blob = write_pcap(records)

stats = ParseStats()
packets = parse_pcap(blob, stats)
flows = assemble_flows(packets)
print(f"{len(packets)} packets decoded, {len(flows)} TCP flow(s)")
for tx in extract_http(packets, flows):
    print(f"HTTP {tx.method} {tx.url} -> {tx.response_code}")
for d in extract_dns(packets):
    print(f"DNS {d.qname} -> {d.response} (rcode {d.rcode})")

rows = featurize_capture(blob, "Locky")
for name in rows.feature_names:
    print(f"{name:55s} {rows.column(name)[0]}")
