"""Run accounting: counters, latency percentiles, report serialization.

Latency is one-way per message: last packet handed to the receiving
application minus message creation time.  Percentiles use the nearest-rank
definition (value at 1-based index ceil(q/100 * n) of the sorted sample),
so every reported percentile is an observed value.  Reports serialize with
a fixed field order; two runs of the same configuration and seed produce
byte-identical output.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .engine import NS_PER_SEC

DROP_CAUSES = ("buffer_overrun", "unsolicited_threshold")
DROP_BUCKET_NS = 10_000_000  # 10 ms drop-count buckets


def percentile(values, q) -> int:
    """Nearest-rank percentile of an unsorted sample; q in (0, 100]."""
    if not 0 < q <= 100:
        raise ValueError("percentile rank must be in (0, 100]")
    if not values:
        raise ValueError("percentile of an empty sample")
    ordered = sorted(values)
    n = len(ordered)
    if isinstance(q, int):
        k = -(-q * n // 100)  # exact integer ceiling
    else:
        k = math.ceil(q * n / 100)
    return ordered[k - 1]


class MetricsSink:
    """In-process sink every component reports into."""

    def __init__(self, sim, collect_packet_latency=False):
        self.sim = sim
        self.collect_packet_latency = collect_packet_latency
        self.messages_generated = 0
        self.message_bytes_generated = 0
        self.messages_completed = 0
        self.packets_sent = 0          # data frames handed to a NIC, copies included
        self.data_bytes_sent = 0
        self.control_bytes_sent = 0
        self.control_frames_sent = 0
        self.packets_delivered = 0     # unique data frames handed to the application
        self.delivered_bytes = 0
        self.delivered_bytes_total = 0  # duplicates included
        self.duplicates = 0
        self.drops = {cause: 0 for cause in DROP_CAUSES}
        self.dropped_bytes = 0
        self.drop_buckets = {}
        self.per_sender_bytes = {}
        self.latencies = []
        self.packet_latencies = []
        self.completion_listeners = []
        self.horizon = None

    def mark_horizon(self) -> None:
        """Freeze the rate counters at the end of the measurement window.

        The run keeps dispatching after the window so in-flight messages can
        finish, but bytes delivered during that drain must not count toward
        rates averaged over the window.
        """
        self.horizon = {
            "delivered_bytes": self.delivered_bytes,
            "delivered_bytes_total": self.delivered_bytes_total,
            "data_bytes_sent": self.data_bytes_sent,
            "control_bytes_sent": self.control_bytes_sent,
            "per_sender_bytes": dict(self.per_sender_bytes),
        }

    # -- workload side -------------------------------------------------
    def on_message_generated(self, msg) -> None:
        self.messages_generated += 1
        self.message_bytes_generated += msg.size

    # -- sender side ---------------------------------------------------
    def on_data_sent(self, nbytes: int) -> None:
        self.packets_sent += 1
        self.data_bytes_sent += nbytes

    def on_control_sent(self, nbytes: int) -> None:
        self.control_frames_sent += 1
        self.control_bytes_sent += nbytes

    # -- switch side ---------------------------------------------------
    def on_drop(self, cause: str, pkt, now: int) -> None:
        self.drops[cause] += 1
        self.dropped_bytes += pkt.size
        bucket = now // DROP_BUCKET_NS
        self.drop_buckets[bucket] = self.drop_buckets.get(bucket, 0) + 1

    # -- receiver side -------------------------------------------------
    def on_packet_delivered(self, pkt) -> None:
        self.packets_delivered += 1
        self.delivered_bytes += pkt.size
        self.delivered_bytes_total += pkt.size
        sender = self.per_sender_bytes.get(pkt.src)
        self.per_sender_bytes[pkt.src] = pkt.size if sender is None else sender + pkt.size
        if self.collect_packet_latency:
            self.packet_latencies.append(self.sim.now - pkt.created_ns)

    def on_duplicate(self, pkt) -> None:
        self.duplicates += 1
        self.delivered_bytes_total += pkt.size

    def on_message_complete(self, pkt) -> None:
        self.messages_completed += 1
        self.latencies.append(self.sim.now - pkt.created_ns)
        for fn in self.completion_listeners:
            fn(pkt)

    # -- summaries -----------------------------------------------------
    def drops_total(self) -> int:
        return sum(self.drops.values())

    def latency_stats(self):
        if not self.latencies:
            return {"count": 0, "p50_ns": None, "p99_ns": None,
                    "p999_ns": None, "max_ns": None}
        ordered = sorted(self.latencies)
        n = len(ordered)
        def rank(q):
            k = -(-q * n // 1000)
            return ordered[k - 1]
        return {
            "count": n,
            "p50_ns": rank(500),
            "p99_ns": rank(990),
            "p999_ns": rank(999),
            "max_ns": ordered[-1],
        }


@dataclass
class RunReport:
    """Everything a run reports, in stable order."""

    label: str
    protocol: str
    seed: int
    duration_ns: int
    final_clock_ns: int
    events_dispatched: int
    messages_generated: int
    messages_completed: int
    messages_incomplete: int
    packets_sent: int
    packets_delivered: int
    duplicates_suppressed: int
    drops_buffer_overrun: int
    drops_unsolicited: int
    packets_in_flight: int
    data_bytes_sent: int
    control_bytes_sent: int
    control_frames_sent: int
    overhead_fraction: float
    goodput_bps: float
    throughput_bps: float
    latency_count: int
    latency_p50_ns: int | None
    latency_p99_ns: int | None
    latency_p999_ns: int | None
    latency_max_ns: int | None
    peak_port_queue_bytes: int
    peak_shared_queue_bytes: int
    mean_shared_queue_bytes: float
    per_sender_goodput_bps: dict = field(default_factory=dict)
    drop_series: dict = field(default_factory=dict)

    CSV_FIELDS = (
        "label", "protocol", "seed", "duration_ns", "final_clock_ns",
        "events_dispatched", "messages_generated", "messages_completed",
        "messages_incomplete", "packets_sent", "packets_delivered",
        "duplicates_suppressed", "drops_buffer_overrun", "drops_unsolicited",
        "packets_in_flight", "data_bytes_sent", "control_bytes_sent",
        "control_frames_sent", "overhead_fraction", "goodput_bps",
        "throughput_bps", "latency_count", "latency_p50_ns", "latency_p99_ns",
        "latency_p999_ns", "latency_max_ns", "peak_port_queue_bytes",
        "peak_shared_queue_bytes", "mean_shared_queue_bytes",
    )

    def to_dict(self) -> dict:
        out = {name: getattr(self, name) for name in self.CSV_FIELDS}
        out["per_sender_goodput_bps"] = {
            str(k): self.per_sender_goodput_bps[k]
            for k in sorted(self.per_sender_goodput_bps)
        }
        out["drop_series"] = {
            str(k): self.drop_series[k] for k in sorted(self.drop_series)
        }
        return out

    def to_json_bytes(self) -> bytes:
        return (json.dumps(self.to_dict(), indent=2) + "\n").encode("utf-8")

    def csv_header(self) -> str:
        return ",".join(self.CSV_FIELDS)

    def to_csv_row(self) -> str:
        cells = []
        for name in self.CSV_FIELDS:
            v = getattr(self, name)
            cells.append("" if v is None else repr(v) if isinstance(v, float) else str(v))
        return ",".join(cells)


def build_report(label, protocol, seed, duration_ns, sim, metrics, switch,
                 in_flight: int) -> RunReport:
    stats = metrics.latency_stats()
    win = metrics.horizon or {
        "delivered_bytes": metrics.delivered_bytes,
        "delivered_bytes_total": metrics.delivered_bytes_total,
        "data_bytes_sent": metrics.data_bytes_sent,
        "control_bytes_sent": metrics.control_bytes_sent,
        "per_sender_bytes": metrics.per_sender_bytes,
    }
    total_sent = win["data_bytes_sent"] + win["control_bytes_sent"]
    seconds = duration_ns / NS_PER_SEC if duration_ns > 0 else 0.0
    return RunReport(
        label=label,
        protocol=protocol,
        seed=seed,
        duration_ns=duration_ns,
        final_clock_ns=sim.now,
        events_dispatched=sim.events_dispatched,
        messages_generated=metrics.messages_generated,
        messages_completed=metrics.messages_completed,
        messages_incomplete=metrics.messages_generated - metrics.messages_completed,
        packets_sent=metrics.packets_sent,
        packets_delivered=metrics.packets_delivered,
        duplicates_suppressed=metrics.duplicates,
        drops_buffer_overrun=metrics.drops["buffer_overrun"],
        drops_unsolicited=metrics.drops["unsolicited_threshold"],
        packets_in_flight=in_flight,
        data_bytes_sent=metrics.data_bytes_sent,
        control_bytes_sent=metrics.control_bytes_sent,
        control_frames_sent=metrics.control_frames_sent,
        overhead_fraction=(
            win["control_bytes_sent"] / total_sent if total_sent else 0.0
        ),
        goodput_bps=(win["delivered_bytes"] * 8 / seconds if seconds else 0.0),
        throughput_bps=(
            win["delivered_bytes_total"] * 8 / seconds if seconds else 0.0
        ),
        latency_count=stats["count"],
        latency_p50_ns=stats["p50_ns"],
        latency_p99_ns=stats["p99_ns"],
        latency_p999_ns=stats["p999_ns"],
        latency_max_ns=stats["max_ns"],
        peak_port_queue_bytes=switch.peak_port_bytes if switch else 0,
        peak_shared_queue_bytes=switch.peak_shared_bytes if switch else 0,
        mean_shared_queue_bytes=(
            round(switch.mean_shared_depth(duration_ns), 3) if switch else 0.0
        ),
        per_sender_goodput_bps={
            h: b * 8 / seconds if seconds else 0.0
            for h, b in win["per_sender_bytes"].items()
        },
        drop_series=dict(metrics.drop_buckets),
    )
