"""Host-side reservation scheduling.

Each message is cut into bursts of at most ``k_max`` packets.  A flow
(one sender thread talking to one destination by default) keeps at most
one reservation outstanding: it sends a reservation frame, waits for the
grant carrying its send and receive slot numbers, picks
``chosen = max(send, recv)`` and transmits the burst after

    chosen * slot_time - exchange_estimate - pending_data_time

clamped at zero.  Under low load a flow may transmit the burst together
with the reservation instead of waiting: it does so when its last chosen
slot was below the low-load gate and the previous grant is recent.  If the
grant then reveals the network was busier than expected (chosen above the
gate), the burst is sent again on the scheduled path; the receiver drops
the duplicate copy.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .delays import exchange_base_path_ns, sample_exchange_delay, split_exchange_extra
from .engine import NS_PER_SEC, serialization_delay
from .network import KIND_DATA, KIND_GRT, KIND_RSV, Packet
from .switch import GrtInfo


@dataclass(frozen=True)
class SchedulerParams:
    k_max: int = 4                      # packets per burst, slots per reservation
    low_load_slots: int = 15            # gate for sending without waiting
    recency_window_ns: int | None = None  # None: twice the exchange estimate
    pipeline_segments: bool = False     # next reservation at grant vs at handoff
    per_destination_flows: bool = False

    def __post_init__(self):
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")
        if self.low_load_slots < 0:
            raise ValueError("low-load gate must be >= 0")
        if self.recency_window_ns is not None and self.recency_window_ns < 0:
            raise ValueError("recency window must be >= 0")


def chosen_timeslot(grant: GrtInfo) -> int:
    """The slot a granted burst schedules against: the later of the two."""
    send, recv = grant.send_slot, grant.recv_slot
    if send < 0 or recv < 0:
        raise ValueError("grant slots must be >= 0")
    return send if send >= recv else recv


def waiting_time(chosen_slot: int, exchange_ns: int, nic_pending_bytes: int,
                 slot_ns: int, rate_bps: int) -> int:
    """Delay before transmitting a granted burst, clamped at zero.

    The chosen slot is ``chosen_slot`` slot-times away; half the control
    round trip already passed carrying the grant and the other half covers
    the first packet's flight, so the whole measured exchange is credited,
    as is the drain time of data already sitting at the NIC.
    """
    if chosen_slot < 0:
        raise ValueError("chosen slot must be >= 0")
    if nic_pending_bytes < 0:
        raise ValueError("pending bytes must be >= 0")
    pending_ns = (nic_pending_bytes * 8 * NS_PER_SEC + rate_bps - 1) // rate_bps
    w = chosen_slot * slot_ns - exchange_ns - pending_ns
    return w if w > 0 else 0


class ExchangeDelayTracker:
    """Running estimate of the control round trip, robust to tail samples.

    Moves toward each sample by at most an eighth of the current value, so
    a rare 10x outlier shifts the estimate only slightly while sustained
    change is tracked geometrically.  Zero means no measurement yet.
    """

    __slots__ = ("value",)

    def __init__(self):
        self.value = 0

    def update(self, sample_ns: int) -> None:
        v = self.value
        if v == 0:
            self.value = sample_ns
            return
        delta = sample_ns - v
        cap = v >> 3
        if cap < 1:
            cap = 1
        if delta > cap:
            delta = cap
        elif delta < -cap:
            delta = -cap
        self.value = v + delta


class BurstRecord:
    __slots__ = ("msg", "first_seq", "count", "burst_id",
                 "rsv_sent_ns", "unsolicited_sent", "tx_time")

    def __init__(self, msg, first_seq, count, burst_id, rsv_sent_ns):
        self.msg = msg
        self.first_seq = first_seq
        self.count = count
        self.burst_id = burst_id
        self.rsv_sent_ns = rsv_sent_ns
        self.unsolicited_sent = False
        self.tx_time = None


class FlowState:
    __slots__ = ("key", "dst", "queue", "outstanding",
                 "last_chosen", "last_response_ns", "tracker")

    def __init__(self, key, dst):
        self.key = key
        self.dst = dst
        self.queue = deque()
        self.outstanding = None
        self.last_chosen = -1      # no grant seen yet
        self.last_response_ns = 0
        self.tracker = ExchangeDelayTracker()


@dataclass(frozen=True)
class BurstTrace:
    """One grant as observed by the host, for comparing against references."""

    burst_id: int
    rsv_sent_ns: int
    send_slot: int
    recv_slot: int
    chosen_slot: int
    grt_recv_ns: int
    tx_time_ns: int | None


class Pl2Host:
    """Sender-side protocol state for one host."""

    def __init__(self, sim, host, topo, params: SchedulerParams, delay_model,
                 exchange_rng, metrics, burst_ids, trace=None):
        self.sim = sim
        self.host = host
        self.host_id = host.host_id
        self.topo = topo
        self.params = params
        self.delay_model = delay_model
        self.exchange_rng = exchange_rng
        self.metrics = metrics
        self.burst_ids = burst_ids  # shared iterator of burst ids
        self.trace = trace
        self.flows = {}
        self._by_burst = {}
        self.on_flow_idle = None  # closed-loop refill hook
        self.slot_ns = serialization_delay(topo.mtu, topo.rate_bps)
        ctrl_ser = serialization_delay(topo.ctrl_bytes, topo.rate_bps)
        self._base_path_ns = exchange_base_path_ns(delay_model, ctrl_ser)
        host.on(KIND_GRT, self.on_grt)

    def _flow(self, dst, thread) -> FlowState:
        key = (dst,) if self.params.per_destination_flows else (dst, thread)
        flow = self.flows.get(key)
        if flow is None:
            flow = FlowState(key, dst)
            self.flows[key] = flow
        return flow

    def submit(self, msg) -> None:
        """Queue one message; its bursts go out in order on the same flow."""
        flow = self._flow(msg.dst, msg.thread)
        k = self.params.k_max
        first = 0
        while first < msg.npkts:
            count = msg.npkts - first
            if count > k:
                count = k
            flow.queue.append((msg, first, count))
            first += count
        if flow.outstanding is None:
            self._issue(flow)

    def _issue(self, flow: FlowState) -> None:
        assert flow.outstanding is None, "flow already has a reservation in flight"
        if not flow.queue:
            return
        msg, first, count = flow.queue.popleft()
        burst_id = next(self.burst_ids)
        now = self.sim.now
        rec = BurstRecord(msg, first, count, burst_id, now)
        flow.outstanding = rec
        self._by_burst[burst_id] = flow
        total = sample_exchange_delay(self.delay_model, self.exchange_rng)
        pad_req, pad_rep = split_exchange_extra(total, self._base_path_ns)
        topo = self.topo
        rsv = Packet(
            kind=KIND_RSV,
            size=topo.ctrl_bytes,
            src=self.host_id,
            dst=msg.dst,
            src_port=topo.host_in_port[self.host_id],
            dst_port=topo.host_out_port[msg.dst],
            burst_id=burst_id,
            demand=count,
            reply_port=topo.host_out_port[self.host_id],
            extra_ns=pad_req,
            extra2_ns=pad_rep,
        )
        self.metrics.on_control_sent(rsv.size)
        self.host.nic.send(rsv)
        gate = self.params.low_load_slots
        if 0 <= flow.last_chosen < gate:
            window = self.params.recency_window_ns
            if window is None:
                window = 2 * flow.tracker.value
            if now - flow.last_response_ns <= window:
                rec.unsolicited_sent = True
                self._send_burst(rec, solicited=False)

    def on_grt(self, pkt: Packet) -> None:
        flow = self._by_burst.pop(pkt.burst_id)
        rec = flow.outstanding
        assert rec is not None and rec.burst_id == pkt.burst_id
        now = self.sim.now
        flow.tracker.update(now - rec.rsv_sent_ns)
        grant: GrtInfo = pkt.payload
        chosen = chosen_timeslot(grant)
        gate = self.params.low_load_slots
        schedule_tx = True
        if rec.unsolicited_sent:
            # the copy already left; send again only if it went out prematurely
            schedule_tx = chosen > gate and flow.last_chosen < gate
        if schedule_tx:
            w = waiting_time(chosen, flow.tracker.value, self.host.nic.data_bytes,
                             self.slot_ns, self.topo.rate_bps)
            rec.tx_time = now + w
            self.sim.post(rec.tx_time, self._tx, (flow, rec))
        flow.last_chosen = chosen
        flow.last_response_ns = now
        if self.trace is not None:
            self.trace.append(BurstTrace(
                rec.burst_id, rec.rsv_sent_ns, grant.send_slot, grant.recv_slot,
                chosen, now, rec.tx_time,
            ))
        if rec.tx_time is None or self.params.pipeline_segments:
            self._complete(flow)

    def _tx(self, arg) -> None:
        flow, rec = arg
        self._send_burst(rec, solicited=True)
        if flow.outstanding is rec:
            # the sending thread pushes frames into the NIC at line rate and
            # only then turns to the next reservation
            self.sim.post(self.sim.now + self._burst_work_ns(rec),
                          self._finish_tx, flow)

    def _finish_tx(self, flow: FlowState) -> None:
        self._complete(flow)

    def _burst_work_ns(self, rec: BurstRecord) -> int:
        msg = rec.msg
        nbytes = rec.count * self.topo.mtu
        if rec.first_seq + rec.count == msg.npkts:
            nbytes += msg.tail_size - self.topo.mtu
        return serialization_delay(nbytes, self.topo.rate_bps)

    def _send_burst(self, rec: BurstRecord, solicited: bool) -> None:
        # hottest sender path: frames are built field by field and the two
        # sink counters bumped inline, skipping the constructor overhead
        msg = rec.msg
        topo = self.topo
        nic = self.host.nic
        metrics = self.metrics
        last = msg.npkts - 1
        mtu = topo.mtu
        host_id = self.host_id
        dst = msg.dst
        src_port = topo.host_in_port[host_id]
        dst_port = topo.host_out_port[dst]
        first = rec.first_seq
        new = Packet.__new__
        for seq in range(first, first + rec.count):
            size = mtu if seq < last else msg.tail_size
            pkt = new(Packet)
            pkt.kind = KIND_DATA
            pkt.size = size
            pkt.src = host_id
            pkt.dst = dst
            pkt.src_port = src_port
            pkt.dst_port = dst_port
            pkt.msg_id = msg.msg_id
            pkt.seq = seq
            pkt.total = msg.npkts
            pkt.msg_size = msg.size
            pkt.burst_id = rec.burst_id
            pkt.demand = 0
            pkt.solicited = solicited
            pkt.reply_port = -1
            pkt.payload = None
            pkt.extra_ns = 0
            pkt.extra2_ns = 0
            pkt.created_ns = msg.created_ns
            metrics.packets_sent += 1
            metrics.data_bytes_sent += size
            nic.send(pkt)

    def _complete(self, flow: FlowState) -> None:
        flow.outstanding = None
        if flow.queue:
            self._issue(flow)
        elif self.on_flow_idle is not None:
            self.on_flow_idle(self, flow)


class ReceiverLedger:
    """Per-message delivery bitmaps: exactly-once handoff to the application.

    Records are kept for the whole run so a late duplicate of an already
    complete message is still recognized as a duplicate.
    """

    __slots__ = ("metrics", "msgs")

    def __init__(self, metrics):
        self.metrics = metrics
        self.msgs = {}

    def on_data(self, pkt: Packet, now=None) -> bool:
        """Accept one data frame; returns True if it was new."""
        rec = self.msgs.get(pkt.msg_id)
        if rec is None:
            rec = [0, pkt.total]
            self.msgs[pkt.msg_id] = rec
        bit = 1 << pkt.seq
        if rec[0] & bit:
            self.metrics.on_duplicate(pkt)
            return False
        rec[0] |= bit
        rec[1] -= 1
        self.metrics.on_packet_delivered(pkt)
        if rec[1] == 0:
            self.metrics.on_message_complete(pkt)
        return True


def attach_receiver(host, metrics) -> ReceiverLedger:
    ledger = ReceiverLedger(metrics)
    host.on(KIND_DATA, ledger.on_data)
    return ledger
