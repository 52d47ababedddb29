"""Baseline transports: raw line-rate Ethernet and a receiver-driven scheme.

Raw senders hand every packet of a message to the NIC the moment the
message arrives; there is no control loop, no retransmission, and the only
losses are switch buffer overruns.

The receiver-driven scheme sends one bandwidth-delay product (the blind
window) immediately and transmits the rest only against receiver grants of
at most ``grant_window`` packets in flight, handed out per-receiver in
FIFO message order.  Receivers report sequence gaps the moment a later
packet arrives; sender and receiver each keep a millisecond-scale timer,
the sender resending its blind window when a message has seen no response
and the receiver asking again for whatever is still missing when progress
stalls.  A completion acknowledgement retires the sender state.  All
control rides in minimum-size frames through the same switch.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .network import (
    KIND_ACK,
    KIND_DATA,
    KIND_GRANT,
    KIND_LOSS,
    Packet,
)


@dataclass(frozen=True)
class RdsParams:
    blind_bytes: int = 62_464       # one bandwidth-delay product at rack scale
    grant_window: int = 4           # granted packets in flight per receiver
    timeout_ns: int = 1_000_000     # sender and receiver recovery timers

    def __post_init__(self):
        if self.blind_bytes < 1:
            raise ValueError("blind window must cover at least one byte")
        if self.grant_window < 1:
            raise ValueError("grant window must be >= 1 packet")
        if self.timeout_ns < 1:
            raise ValueError("timeout must be positive")


def blind_packet_count(size: int, npkts: int, blind_bytes: int, mtu: int) -> int:
    """Packets of a ``size``-byte message covered by the blind window."""
    if size <= blind_bytes:
        return npkts
    count = blind_bytes // mtu
    return count if count >= 1 else 1


class _Endpoint:
    """Shared NIC handoff for sender and receiver halves on one host."""

    def __init__(self, sim, host, topo, metrics):
        self.sim = sim
        self.host = host
        self.host_id = host.host_id
        self.topo = topo
        self.metrics = metrics

    def _data_packet(self, msg, seq):
        topo = self.topo
        size = topo.mtu if seq < msg.npkts - 1 else msg.tail_size
        return Packet(
            kind=KIND_DATA,
            size=size,
            src=self.host_id,
            dst=msg.dst,
            src_port=topo.host_in_port[self.host_id],
            dst_port=topo.host_out_port[msg.dst],
            msg_id=msg.msg_id,
            seq=seq,
            total=msg.npkts,
            msg_size=msg.size,
            created_ns=msg.created_ns,
        )

    def _send_range(self, msg, first, last):
        nic = self.host.nic
        metrics = self.metrics
        for seq in range(first, last):
            pkt = self._data_packet(msg, seq)
            metrics.on_data_sent(pkt.size)
            nic.send(pkt)

    def _control(self, kind, dst, payload):
        topo = self.topo
        pkt = Packet(
            kind=kind,
            size=topo.ctrl_bytes,
            src=self.host_id,
            dst=dst,
            src_port=topo.host_in_port[self.host_id],
            dst_port=topo.host_out_port[dst],
            payload=payload,
        )
        self.metrics.on_control_sent(pkt.size)
        self.host.nic.send(pkt)


class RawSender(_Endpoint):
    """Line-rate transmission with no feedback at all."""

    def submit(self, msg) -> None:
        self._send_range(msg, 0, msg.npkts)


class _RdsSenderMsg:
    __slots__ = ("msg", "blind_pkts", "granted_upto", "deadline")

    def __init__(self, msg, blind_pkts, deadline):
        self.msg = msg
        self.blind_pkts = blind_pkts
        self.granted_upto = blind_pkts  # the blind window needs no grant
        self.deadline = deadline


class RdsSender(_Endpoint):
    def __init__(self, sim, host, topo, params: RdsParams, metrics):
        super().__init__(sim, host, topo, metrics)
        self.params = params
        self.states = {}
        self.on_msg_sent = None  # closed-loop hook: every packet sent once
        host.on(KIND_GRANT, self.on_grant)
        host.on(KIND_LOSS, self.on_loss)
        host.on(KIND_ACK, self.on_ack)

    def submit(self, msg) -> None:
        blind = blind_packet_count(msg.size, msg.npkts, self.params.blind_bytes,
                                   self.topo.mtu)
        st = _RdsSenderMsg(msg, blind, self.sim.now + self.params.timeout_ns)
        self.states[msg.msg_id] = st
        self._send_range(msg, 0, blind)
        self.sim.post(st.deadline, self._timer, msg.msg_id)
        if blind == msg.npkts and self.on_msg_sent is not None:
            self.on_msg_sent(self, st.msg)

    def on_grant(self, pkt) -> None:
        msg_id, upto = pkt.payload
        st = self.states.get(msg_id)
        if st is None:
            return
        st.deadline = self.sim.now + self.params.timeout_ns
        if upto > st.granted_upto:
            self._send_range(st.msg, st.granted_upto, upto)
            st.granted_upto = upto
            if upto == st.msg.npkts and self.on_msg_sent is not None:
                self.on_msg_sent(self, st.msg)

    def on_loss(self, pkt) -> None:
        msg_id, missing = pkt.payload
        st = self.states.get(msg_id)
        if st is None:
            return
        st.deadline = self.sim.now + self.params.timeout_ns
        for seq in missing:
            self._send_range(st.msg, seq, seq + 1)

    def on_ack(self, pkt) -> None:
        self.states.pop(pkt.payload[0], None)

    def _timer(self, msg_id) -> None:
        st = self.states.get(msg_id)
        if st is None:
            return
        now = self.sim.now
        if now < st.deadline:
            self.sim.post(st.deadline, self._timer, msg_id)
            return
        # nothing heard for a full timeout: the blind window may be gone
        self._send_range(st.msg, 0, st.blind_pkts)
        st.deadline = now + self.params.timeout_ns
        self.sim.post(st.deadline, self._timer, msg_id)


class _RdsRecvMsg:
    __slots__ = ("src", "total", "blind_pkts", "bitmap", "remaining",
                 "expected", "nacked", "granted_upto", "outstanding",
                 "deadline", "complete")

    def __init__(self, src, total, blind_pkts, deadline):
        self.src = src
        self.total = total
        self.blind_pkts = blind_pkts
        self.bitmap = 0
        self.remaining = total
        self.expected = 0
        self.nacked = 0
        self.granted_upto = blind_pkts
        self.outstanding = 0
        self.deadline = deadline
        self.complete = False


class RdsReceiver(_Endpoint):
    """Receiver half: dedup, gap signalling, FIFO grant scheduling."""

    def __init__(self, sim, host, topo, params: RdsParams, metrics):
        super().__init__(sim, host, topo, metrics)
        self.params = params
        self.states = {}
        self.grant_queue = deque()
        host.on(KIND_DATA, self.on_data)

    def on_data(self, pkt) -> None:
        now = self.sim.now
        st = self.states.get(pkt.msg_id)
        if st is None:
            blind = blind_packet_count(pkt.msg_size, pkt.total,
                                       self.params.blind_bytes, self.topo.mtu)
            st = _RdsRecvMsg(pkt.src, pkt.total, blind,
                             now + self.params.timeout_ns)
            self.states[pkt.msg_id] = st
            if st.granted_upto < st.total:
                self.grant_queue.append(pkt.msg_id)
            self.sim.post(st.deadline, self._timer, pkt.msg_id)
        bit = 1 << pkt.seq
        if st.bitmap & bit:
            self.metrics.on_duplicate(pkt)
            return
        st.bitmap |= bit
        st.remaining -= 1
        st.deadline = now + self.params.timeout_ns
        self.metrics.on_packet_delivered(pkt)
        if st.blind_pkts <= pkt.seq < st.granted_upto and st.outstanding > 0:
            st.outstanding -= 1
        if pkt.seq > st.expected:
            missing = []
            m = st.expected
            probe = st.bitmap | st.nacked
            while m < pkt.seq:
                if not probe >> m & 1:
                    missing.append(m)
                m += 1
            if missing:
                for seq in missing:
                    st.nacked |= 1 << seq
                self._control(KIND_LOSS, st.src, (pkt.msg_id, tuple(missing)))
        while st.bitmap >> st.expected & 1:
            st.expected += 1
        if st.remaining == 0:
            st.complete = True
            self.metrics.on_message_complete(pkt)
            self._control(KIND_ACK, st.src, (pkt.msg_id,))
        self._pump()

    def _pump(self) -> None:
        queue = self.grant_queue
        while queue:
            st = self.states[queue[0]]
            if st.complete or st.granted_upto >= st.total:
                queue.popleft()
                continue
            credits = self.params.grant_window - st.outstanding
            avail = st.total - st.granted_upto
            n = credits if credits < avail else avail
            if n > 0:
                upto = st.granted_upto + n
                st.granted_upto = upto
                st.outstanding += n
                self._control(KIND_GRANT, st.src, (queue[0], upto))
            if st.granted_upto >= st.total:
                queue.popleft()
                continue
            return

    def _timer(self, msg_id) -> None:
        st = self.states.get(msg_id)
        if st is None or st.complete:
            return
        now = self.sim.now
        if now < st.deadline:
            self.sim.post(st.deadline, self._timer, msg_id)
            return
        # progress stalled for a full timeout: ask for everything missing
        missing = []
        for seq in range(st.total):
            if not st.bitmap >> seq & 1:
                missing.append(seq)
                st.nacked |= 1 << seq
        if missing:
            self._control(KIND_LOSS, st.src, (msg_id, tuple(missing)))
        st.deadline = now + self.params.timeout_ns
        self.sim.post(st.deadline, self._timer, msg_id)
