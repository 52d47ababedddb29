"""Shared-buffer switch with per-port reservation registers.

The switch keeps two counter arrays indexed by port, ``inbound`` and
``outbound``, measured in timeslots (one slot serializes one full frame).
A reservation frame asking for ``demand`` slots is answered with the
pre-increment values of both counters, after which each counter grows by
``demand``.  Each solicited data frame decrements both counters by one,
floored at zero, on arrival.  The receive half of the answer adds the
destination port's current queue depth in frames: the counter tracks
bookings still in flight, the queue holds frames already here, and the
next free slot on the port is behind both.  Without the queue term any
standing backlog (timing jitter, duplicate copies, unsolicited bursts)
would be invisible to later grants and would never be asked to drain.
Queue depth is something egress pipelines already expose per packet,
and folding it in makes the grant loop self-correcting in both
directions.  Unsolicited data frames are
admitted through a single fused test-and-decrement while the
destination's outbound counter is at or below a configured threshold,
otherwise they are dropped without touching the registers.

Granted frames leave through the egress control queue, which the TxPort
serves ahead of data.  Data admission is bounded by a per-port byte cap
and a shared buffer cap; overruns are dropped and counted by cause.
"""

from __future__ import annotations

from dataclasses import dataclass

from .network import KIND_DATA, KIND_GRT, KIND_RSV, Packet


@dataclass(frozen=True)
class GrtInfo:
    """Grant payload: pre-increment register reads for one reservation."""

    send_slot: int
    recv_slot: int
    demand: int
    burst_id: int


@dataclass(frozen=True)
class SwitchConfig:
    num_ports: int
    unsolicited_threshold: int = 60  # slots; guards unscheduled admissions
    port_capacity_bytes: int = 1_500_000
    shared_capacity_bytes: int = 2_000_000
    max_demand: int = 4  # slots one reservation may ask for

    def __post_init__(self):
        if self.num_ports < 1:
            raise ValueError("switch needs at least one port")
        if self.unsolicited_threshold < 1:
            raise ValueError("unsolicited threshold must be >= 1 slot")
        if self.port_capacity_bytes < 1 or self.shared_capacity_bytes < 1:
            raise ValueError("buffer capacities must be positive")
        if self.max_demand < 1:
            raise ValueError("max demand must be >= 1 slot")


class ReservationRegisters:
    """Per-port slot counters with a single read-modify-write discipline.

    Every public method performs exactly one atomic-style update on exactly
    one array; callers compose them.  When a recorder list is attached each
    operation appends the array it touched, letting tests verify that one
    packet never does two updates on the same array.
    """

    __slots__ = ("inbound", "outbound", "recorder")

    def __init__(self, num_ports: int, recorder=None):
        self.inbound = [0] * num_ports
        self.outbound = [0] * num_ports
        self.recorder = recorder

    def fetch_add_in(self, port: int, delta: int) -> int:
        if self.recorder is not None:
            self.recorder.append("in")
        prev = self.inbound[port]
        self.inbound[port] = prev + delta
        return prev

    def fetch_add_out(self, port: int, delta: int) -> int:
        if self.recorder is not None:
            self.recorder.append("out")
        prev = self.outbound[port]
        self.outbound[port] = prev + delta
        return prev

    def dec_floor_in(self, port: int) -> None:
        if self.recorder is not None:
            self.recorder.append("in")
        v = self.inbound[port]
        if v > 0:
            self.inbound[port] = v - 1

    def dec_floor_out(self, port: int) -> None:
        if self.recorder is not None:
            self.recorder.append("out")
        v = self.outbound[port]
        if v > 0:
            self.outbound[port] = v - 1

    def admit_dec_out(self, port: int, threshold: int) -> bool:
        """Single conditional RMW: admit and decrement iff value <= threshold."""
        if self.recorder is not None:
            self.recorder.append("out")
        v = self.outbound[port]
        if v > threshold:
            return False
        if v > 0:
            self.outbound[port] = v - 1
        return True


class RegisterAuditor:
    """Shadow recomputation of the registers from the event stream.

    Maintains its own copies with the same saturating arithmetic, fed by
    grant/data notifications rather than by reading the switch state, plus
    per-burst grant bookkeeping.  In runs with no unsolicited admissions it
    additionally checks exact conservation: each inbound register must equal
    the granted-but-not-yet-arrived slot count over bursts sourced at
    that port (same for outbound at the destination).
    """

    def __init__(self, num_ports: int):
        self.shadow_in = [0] * num_ports
        self.shadow_out = [0] * num_ports
        self.bursts = {}  # burst_id -> [src, dst, demand, arrivals]
        self.clean = True  # no unsolicited admissions, no over-demand arrivals

    def on_grant(self, src_port, dst_port, demand, burst_id):
        self.shadow_in[src_port] += demand
        self.shadow_out[dst_port] += demand
        self.bursts[burst_id] = [src_port, dst_port, demand, 0]

    def _dec(self, src_port, dst_port):
        if self.shadow_out[dst_port] > 0:
            self.shadow_out[dst_port] -= 1
        if self.shadow_in[src_port] > 0:
            self.shadow_in[src_port] -= 1

    def on_reserved_data(self, src_port, dst_port, burst_id):
        self._dec(src_port, dst_port)
        rec = self.bursts.get(burst_id)
        if rec is None:
            self.clean = False
        else:
            rec[3] += 1
            if rec[3] > rec[2]:
                self.clean = False

    def on_unsolicited_admit(self, src_port, dst_port):
        self._dec(src_port, dst_port)
        self.clean = False

    def verify(self, regs: ReservationRegisters):
        assert regs.inbound == self.shadow_in, (
            f"inbound registers diverged: {regs.inbound} != {self.shadow_in}"
        )
        assert regs.outbound == self.shadow_out, (
            f"outbound registers diverged: {regs.outbound} != {self.shadow_out}"
        )
        if self.clean:
            nports = len(self.shadow_in)
            want_in = [0] * nports
            want_out = [0] * nports
            for src, dst, demand, arrived in self.bursts.values():
                left = demand - arrived
                if left > 0:
                    want_in[src] += left
                    want_out[dst] += left
            assert regs.inbound == want_in, (
                f"inbound conservation broken: {regs.inbound} != {want_in}"
            )
            assert regs.outbound == want_out, (
                f"outbound conservation broken: {regs.outbound} != {want_out}"
            )


class Switch:
    """One shared-buffer switch.  Attach output TxPorts before running."""

    def __init__(self, sim, config: SwitchConfig, metrics, debug=False):
        self.sim = sim
        self.config = config
        self.metrics = metrics
        self.debug = debug
        self._recorder = [] if debug else None
        self.regs = ReservationRegisters(config.num_ports, self._recorder)
        self.auditor = RegisterAuditor(config.num_ports) if debug else None
        self.out_ports = [None] * config.num_ports
        self.occupancy = [0] * config.num_ports
        self.occupied_frames = [0] * config.num_ports
        self.shared_occupancy = 0
        self.peak_port_bytes = 0
        self.peak_shared_bytes = 0
        self._area = 0  # shared occupancy integrated over time
        self._area_t = 0
        self.grt_log = None  # set to a list to record grant emissions

    def attach_port(self, port: int, txport) -> None:
        txport.on_tx_done = self._data_departed
        self.out_ports[port] = txport

    # Delivery callback for every uplink; switching delay already elapsed.
    def ingress(self, pkt: Packet) -> None:
        kind = pkt.kind
        if kind == KIND_DATA:
            if pkt.solicited is None:
                self._enqueue(pkt)
            else:
                self._reserved_data(pkt)
        elif kind == KIND_RSV:
            self._reserve(pkt)
        else:
            self.out_ports[pkt.dst_port].send(pkt)

    def _reserve(self, pkt: Packet) -> None:
        # over-demand reservations are a sender-model bug, not a drop cause
        assert 1 <= pkt.demand <= self.config.max_demand, (
            f"malformed reservation: demand {pkt.demand} outside "
            f"[1, {self.config.max_demand}]"
        )
        if self._recorder is not None:
            del self._recorder[:]
        send = self.regs.fetch_add_in(pkt.src_port, pkt.demand)
        recv = self.regs.fetch_add_out(pkt.dst_port, pkt.demand)
        # bookings count frames not yet arrived, the queue counts frames not
        # yet forwarded; the next free slot on the port is behind both
        recv += self.occupied_frames[pkt.dst_port]
        grant = GrtInfo(send, recv, pkt.demand, pkt.burst_id)
        if self.grt_log is not None:
            self.grt_log.append((self.sim.now, pkt.burst_id, send, recv))
        if self.auditor is not None:
            self.auditor.on_grant(pkt.src_port, pkt.dst_port, pkt.demand, pkt.burst_id)
            self._check_rmw()
            self.auditor.verify(self.regs)
        reply = Packet(
            kind=KIND_GRT,
            size=pkt.size,
            src=-1,
            dst=pkt.src,
            src_port=pkt.dst_port,
            dst_port=pkt.reply_port,
            burst_id=pkt.burst_id,
            payload=grant,
            extra_ns=pkt.extra2_ns,
        )
        self.metrics.on_control_sent(reply.size)
        self.out_ports[pkt.reply_port].send(reply)

    def _reserved_data(self, pkt: Packet) -> None:
        if self._recorder is not None:
            del self._recorder[:]
        if pkt.solicited:
            self.regs.dec_floor_out(pkt.dst_port)
            self.regs.dec_floor_in(pkt.src_port)
            if self.auditor is not None:
                self.auditor.on_reserved_data(pkt.src_port, pkt.dst_port, pkt.burst_id)
            self._after_audit()
            self._enqueue(pkt)
        elif self.regs.admit_dec_out(pkt.dst_port, self.config.unsolicited_threshold):
            self.regs.dec_floor_in(pkt.src_port)
            if self.auditor is not None:
                self.auditor.on_unsolicited_admit(pkt.src_port, pkt.dst_port)
            self._after_audit()
            self._enqueue(pkt)
        else:
            self._after_audit()
            self.metrics.on_drop("unsolicited_threshold", pkt, self.sim.now)

    def _after_audit(self):
        if self.auditor is not None:
            self._check_rmw()
            self.auditor.verify(self.regs)

    def _check_rmw(self):
        rec = self._recorder
        assert rec.count("in") <= 1 and rec.count("out") <= 1, (
            f"register discipline broken: one packet performed {rec}"
        )

    def _enqueue(self, pkt: Packet) -> None:
        port = pkt.dst_port
        size = pkt.size
        occ = self.occupancy[port]
        cfg = self.config
        if (occ + size > cfg.port_capacity_bytes
                or self.shared_occupancy + size > cfg.shared_capacity_bytes):
            self.metrics.on_drop("buffer_overrun", pkt, self.sim.now)
            return
        now = self.sim.now
        self._area += self.shared_occupancy * (now - self._area_t)
        self._area_t = now
        occ += size
        self.occupancy[port] = occ
        self.occupied_frames[port] += 1
        self.shared_occupancy += size
        if occ > self.peak_port_bytes:
            self.peak_port_bytes = occ
        if self.shared_occupancy > self.peak_shared_bytes:
            self.peak_shared_bytes = self.shared_occupancy
        self.out_ports[port].send(pkt)

    def _data_departed(self, pkt: Packet) -> None:
        if pkt.kind != KIND_DATA:
            return
        port = pkt.dst_port
        now = self.sim.now
        self._area += self.shared_occupancy * (now - self._area_t)
        self._area_t = now
        self.occupancy[port] -= pkt.size
        self.occupied_frames[port] -= 1
        self.shared_occupancy -= pkt.size

    def queue_depth(self, port: int) -> int:
        """Buffered data bytes for one output port, in-serialization included."""
        return self.occupancy[port]

    def queued_frames_total(self) -> int:
        return sum(self.occupied_frames)

    def mean_shared_depth(self, end_ns: int) -> float:
        area = self._area + self.shared_occupancy * (end_ns - self._area_t)
        return area / end_ns if end_ns > 0 else 0.0
