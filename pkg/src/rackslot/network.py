"""Wire-level plumbing shared by every protocol: frames, ports, topology.

A host owns one uplink ``TxPort`` toward the switch; the switch owns one
downlink ``TxPort`` per output port.  A TxPort serializes one frame at a
time at the link rate, picks queued control frames before queued data
frames (non-preemptively), and hands each frame to its receiver after a
fixed latency pad plus any per-frame extras (switching delay on the way
into the switch, leg pads on reservation traffic).  Per-class FIFO order
is preserved even when per-frame jitter would reorder deliveries.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from heapq import heappush

from .engine import NS_PER_SEC, Simulator

# Frame kinds.
KIND_DATA = 0
KIND_RSV = 1
KIND_GRT = 2
KIND_GRANT = 3
KIND_LOSS = 4
KIND_ACK = 5

CTRL_KINDS = (KIND_RSV, KIND_GRT, KIND_GRANT, KIND_LOSS, KIND_ACK)


class Packet:
    """One frame on the wire.  Control frames are fixed-size; data frames
    carry a (message, sequence) identity used for dedup and reassembly."""

    __slots__ = (
        "kind",
        "size",
        "src",
        "dst",
        "src_port",
        "dst_port",
        "msg_id",
        "seq",
        "total",
        "msg_size",
        "burst_id",
        "demand",
        "solicited",
        "reply_port",
        "payload",
        "extra_ns",
        "extra2_ns",
        "created_ns",
    )

    def __init__(
        self,
        kind,
        size,
        src,
        dst,
        src_port,
        dst_port,
        msg_id=-1,
        seq=0,
        total=0,
        msg_size=0,
        burst_id=-1,
        demand=0,
        solicited=None,
        reply_port=-1,
        payload=None,
        extra_ns=0,
        extra2_ns=0,
        created_ns=0,
    ):
        self.kind = kind
        self.size = size
        self.src = src
        self.dst = dst
        self.src_port = src_port
        self.dst_port = dst_port
        self.msg_id = msg_id
        self.seq = seq
        self.total = total
        self.msg_size = msg_size
        self.burst_id = burst_id
        self.demand = demand
        self.solicited = solicited
        self.reply_port = reply_port
        self.payload = payload
        self.extra_ns = extra_ns
        self.extra2_ns = extra2_ns
        self.created_ns = created_ns

    def __repr__(self):  # pragma: no cover
        names = {v: k for k, v in globals().items() if k.startswith("KIND_")}
        return (
            f"<{names.get(self.kind, self.kind)} {self.src}->{self.dst}"
            f" msg={self.msg_id} seq={self.seq} size={self.size}>"
        )


@dataclass(frozen=True)
class Topology:
    """Hosts around one switch.  Port maps default to the identity, but
    several hosts may share a port."""

    num_hosts: int
    rate_bps: int = 100 * NS_PER_SEC  # 100 Gbit/s
    mtu: int = 1500
    ctrl_bytes: int = 64
    host_in_port: tuple = ()
    host_out_port: tuple = ()

    def __post_init__(self):
        if self.num_hosts < 2:
            raise ValueError("need at least two hosts")
        if self.mtu <= 0 or self.ctrl_bytes <= 0:
            raise ValueError("frame sizes must be positive")
        if not self.host_in_port:
            object.__setattr__(self, "host_in_port", tuple(range(self.num_hosts)))
        if not self.host_out_port:
            object.__setattr__(self, "host_out_port", tuple(range(self.num_hosts)))
        for mapping in (self.host_in_port, self.host_out_port):
            if len(mapping) != self.num_hosts or any(p < 0 for p in mapping):
                raise ValueError("port maps must cover every host")

    @property
    def num_ports(self) -> int:
        return 1 + max(max(self.host_in_port), max(self.host_out_port))


class TxPort:
    """Serializing endpoint of one link direction."""

    __slots__ = (
        "sim",
        "rate_bps",
        "latency_ns",
        "deliver",
        "jitter_fn",
        "on_tx_done",
        "name",
        "ctrl",
        "data",
        "busy",
        "data_bytes",
        "in_transit",
        "data_in_transit",
        "current",
        "_num",
        "_ser",
        "_last_data_ns",
        "_last_ctrl_ns",
    )

    def __init__(self, sim: Simulator, rate_bps, latency_ns, deliver,
                 jitter_fn=None, on_tx_done=None, name=""):
        self.sim = sim
        self.rate_bps = rate_bps
        self.latency_ns = latency_ns
        self.deliver = deliver
        self.jitter_fn = jitter_fn
        self.on_tx_done = on_tx_done
        self.name = name
        self.ctrl = deque()
        self.data = deque()
        self.busy = False
        self.data_bytes = 0  # queued plus in-serialization data payload
        self.in_transit = 0  # frames handed off but not yet delivered
        self.data_in_transit = 0
        self.current = None  # frame in serialization, if any
        self._num = 8 * NS_PER_SEC
        self._ser = {}  # size -> serialization ns; a handful of sizes recur
        self._last_data_ns = -1
        self._last_ctrl_ns = -1

    def queued_frames(self) -> int:
        return len(self.ctrl) + len(self.data) + (1 if self.busy else 0)

    def data_frames_in_flight(self) -> int:
        """Data frames queued, serializing, or on the wire right now."""
        serializing = self.current is not None and self.current.kind == KIND_DATA
        return len(self.data) + (1 if serializing else 0) + self.data_in_transit

    def send(self, pkt: Packet) -> None:
        if pkt.kind == KIND_DATA:
            self.data.append(pkt)
            self.data_bytes += pkt.size
        else:
            self.ctrl.append(pkt)
        if not self.busy:
            self._start()

    def _start(self) -> None:
        if self.ctrl:
            pkt = self.ctrl.popleft()
        elif self.data:
            pkt = self.data.popleft()
        else:
            return
        self.busy = True
        self.current = pkt
        size = pkt.size
        ser = self._ser.get(size)
        if ser is None:
            ser = (size * self._num + self.rate_bps - 1) // self.rate_bps
            self._ser[size] = ser
        # inlined Simulator.post: this and _tx_done are the two hottest
        # scheduling sites, and the delay is never negative here
        sim = self.sim
        seq = sim._seq
        sim._seq = seq + 1
        heappush(sim._heap, (sim.now + ser, seq, self._tx_done, pkt))

    def _tx_done(self, pkt: Packet) -> None:
        sim = self.sim
        is_data = pkt.kind == KIND_DATA
        if is_data:
            self.data_bytes -= pkt.size
        if self.on_tx_done is not None:
            self.on_tx_done(pkt)
        t = sim.now + self.latency_ns + pkt.extra_ns
        if self.jitter_fn is not None:
            t += self.jitter_fn()
        # keep same-class FIFO order even under jitter
        if is_data:
            if t <= self._last_data_ns:
                t = self._last_data_ns + 1
            self._last_data_ns = t
            self.data_in_transit += 1
        else:
            if t <= self._last_ctrl_ns:
                t = self._last_ctrl_ns + 1
            self._last_ctrl_ns = t
        self.in_transit += 1
        seq = sim._seq
        sim._seq = seq + 1
        heappush(sim._heap, (t, seq, self._deliver, pkt))
        if self.ctrl or self.data:
            self._start()
        else:
            self.busy = False
            self.current = None

    def _deliver(self, pkt: Packet) -> None:
        self.in_transit -= 1
        if pkt.kind == KIND_DATA:
            self.data_in_transit -= 1
        self.deliver(pkt)


class Host:
    """Receive-side dispatch shell; protocol objects register handlers."""

    __slots__ = ("host_id", "nic", "handlers")

    def __init__(self, host_id: int, nic: TxPort):
        self.host_id = host_id
        self.nic = nic
        self.handlers = {}

    def on(self, kind: int, fn) -> None:
        self.handlers[kind] = fn

    def receive(self, pkt: Packet) -> None:
        fn = self.handlers.get(pkt.kind)
        if fn is None:
            raise RuntimeError(
                f"host {self.host_id} has no handler for frame kind {pkt.kind}"
            )
        fn(pkt)
