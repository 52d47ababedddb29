import pytest

from rackslot.engine import Simulator
from rackslot.metrics import MetricsSink
from rackslot.network import KIND_DATA, KIND_GRT, KIND_RSV, Packet
from rackslot.switch import ReservationRegisters, Switch, SwitchConfig


class _Port:
    """Records frames instead of serializing them."""

    def __init__(self):
        self.sent = []
        self.on_tx_done = None

    def send(self, pkt):
        self.sent.append(pkt)


def _switch(num_ports=4, debug=False, **kw):
    sim = Simulator()
    metrics = MetricsSink(sim)
    sw = Switch(sim, SwitchConfig(num_ports=num_ports, **kw), metrics,
                debug=debug)
    ports = [_Port() for _ in range(num_ports)]
    for i, port in enumerate(ports):
        sw.attach_port(i, port)
    return sw, ports, metrics


def _rsv(src_port, dst_port, demand, burst_id=0):
    return Packet(kind=KIND_RSV, size=64, src=src_port, dst=dst_port,
                  src_port=src_port, dst_port=dst_port, burst_id=burst_id,
                  demand=demand, reply_port=src_port)


def _data(src_port, dst_port, solicited, size=1500, burst_id=0, seq=0):
    return Packet(kind=KIND_DATA, size=size, src=src_port, dst=dst_port,
                  src_port=src_port, dst_port=dst_port, msg_id=0, seq=seq,
                  total=4, burst_id=burst_id, solicited=solicited)


def test_first_reservation_reads_zeros_then_adds_demand():
    sw, ports, _ = _switch()
    sw.ingress(_rsv(1, 2, demand=4))
    assert sw.regs.inbound[1] == 4
    assert sw.regs.outbound[2] == 4
    [grt] = ports[1].sent
    assert grt.kind == KIND_GRT
    assert grt.size == 64
    assert (grt.payload.send_slot, grt.payload.recv_slot) == (0, 0)


def test_second_reservation_sees_first_booking():
    sw, ports, _ = _switch()
    sw.ingress(_rsv(1, 2, demand=4, burst_id=0))
    sw.ingress(_rsv(3, 2, demand=4, burst_id=1))
    grant = ports[3].sent[0].payload
    assert (grant.send_slot, grant.recv_slot) == (0, 4)
    assert sw.regs.outbound[2] == 8


def test_staged_registers_reported_pre_increment():
    sw, ports, _ = _switch()
    sw.regs.inbound[1] = 4
    sw.regs.outbound[2] = 5
    sw.ingress(_rsv(1, 2, demand=2))
    grant = ports[1].sent[0].payload
    assert (grant.send_slot, grant.recv_slot) == (4, 5)
    assert sw.regs.inbound[1] == 6
    assert sw.regs.outbound[2] == 7


def test_grant_includes_frames_already_queued_on_the_port():
    sw, ports, _ = _switch()
    for seq in range(3):
        sw.ingress(_data(0, 2, solicited=None, seq=seq))  # raw-style arrivals
    assert sw.occupied_frames[2] == 3
    sw.ingress(_rsv(1, 2, demand=4))
    grant = ports[1].sent[-1].payload
    assert grant.recv_slot == 3  # 0 booked + 3 waiting to leave
    assert sw.regs.outbound[2] == 4  # register itself holds only the booking


def test_queued_frames_release_on_departure():
    sw, ports, _ = _switch()
    pkt = _data(0, 2, solicited=None)
    sw.ingress(pkt)
    assert sw.occupied_frames[2] == 1
    ports[2].on_tx_done(pkt)  # serialization finished
    assert sw.occupied_frames[2] == 0
    sw.ingress(_rsv(1, 2, demand=1))
    assert ports[1].sent[0].payload.recv_slot == 0


def test_solicited_data_decrements_both_floored():
    sw, _, _ = _switch()
    sw.regs.inbound[1] = 4
    sw.regs.outbound[2] = 4
    sw.ingress(_data(1, 2, solicited=True))
    assert sw.regs.inbound[1] == 3
    assert sw.regs.outbound[2] == 3
    sw.regs.inbound[1] = 0
    sw.regs.outbound[2] = 0
    sw.ingress(_data(1, 2, solicited=True, seq=1))
    assert sw.regs.inbound[1] == 0  # floor holds
    assert sw.regs.outbound[2] == 0


def test_unsolicited_above_threshold_dropped_without_touching_registers():
    sw, ports, metrics = _switch()
    sw.regs.outbound[2] = 61  # threshold is 60
    sw.regs.inbound[1] = 7
    sw.ingress(_data(1, 2, solicited=False))
    assert metrics.drops["unsolicited_threshold"] == 1
    assert sw.regs.outbound[2] == 61
    assert sw.regs.inbound[1] == 7
    assert ports[2].sent == []


def test_unsolicited_at_zero_forwarded():
    sw, ports, metrics = _switch()
    sw.ingress(_data(1, 2, solicited=False))
    assert metrics.drops["unsolicited_threshold"] == 0
    assert len(ports[2].sent) == 1
    assert sw.regs.outbound[2] == 0  # decrement of zero floors


def test_unsolicited_admission_is_a_fused_test_and_decrement():
    sw, ports, _ = _switch()
    sw.regs.outbound[2] = 5
    sw.regs.inbound[1] = 5
    sw.ingress(_data(1, 2, solicited=False))
    assert len(ports[2].sent) == 1
    assert sw.regs.outbound[2] == 4
    assert sw.regs.inbound[1] == 4


def test_unsolicited_admitted_exactly_at_threshold():
    sw, ports, _ = _switch()
    sw.regs.outbound[2] = 60
    sw.ingress(_data(1, 2, solicited=False))
    assert len(ports[2].sent) == 1
    assert sw.regs.outbound[2] == 59


def test_overlong_reservation_is_a_model_bug():
    sw, _, _ = _switch()
    with pytest.raises(AssertionError):
        sw.ingress(_rsv(1, 2, demand=5))  # max_demand defaults to 4


def test_queue_depth_tracks_bytes():
    sw, ports, _ = _switch()
    assert sw.queue_depth(2) == 0
    a = _data(0, 2, solicited=None, seq=0)
    b = _data(1, 2, solicited=None, seq=1)
    sw.ingress(a)
    sw.ingress(b)
    assert sw.queue_depth(2) == 3000
    ports[2].on_tx_done(a)
    assert sw.queue_depth(2) == 1500


def test_port_capacity_overrun_drops():
    sw, ports, metrics = _switch(port_capacity_bytes=3000)
    for seq in range(3):
        sw.ingress(_data(0, 2, solicited=None, seq=seq))
    assert metrics.drops["buffer_overrun"] == 1
    assert len(ports[2].sent) == 2
    assert sw.queue_depth(2) == 3000
    assert sw.peak_port_bytes == 3000


def test_shared_capacity_overrun_drops():
    sw, _, metrics = _switch(shared_capacity_bytes=4000)
    sw.ingress(_data(0, 1, solicited=None, seq=0))
    sw.ingress(_data(0, 2, solicited=None, seq=1))
    sw.ingress(_data(0, 3, solicited=None, seq=2))  # 4500 > 4000 shared
    assert metrics.drops["buffer_overrun"] == 1
    assert sw.shared_occupancy == 3000
    assert sw.peak_shared_bytes == 3000


def test_grant_log_records_emissions():
    sw, _, _ = _switch()
    sw.grt_log = []
    sw.ingress(_rsv(1, 2, demand=4, burst_id=11))
    sw.ingress(_rsv(3, 2, demand=2, burst_id=12))
    assert sw.grt_log == [(0, 11, 0, 0), (0, 12, 0, 4)]


def test_control_frames_bypass_buffer_accounting():
    sw, ports, _ = _switch()
    grt = Packet(kind=KIND_GRT, size=64, src=-1, dst=0, src_port=2, dst_port=0)
    sw.ingress(grt)
    assert ports[0].sent == [grt]
    assert sw.shared_occupancy == 0
    assert sw.occupied_frames[0] == 0


def test_register_ops_touch_one_array_each():
    rec = []
    regs = ReservationRegisters(4, rec)
    regs.fetch_add_in(1, 4)
    regs.fetch_add_out(2, 4)
    regs.dec_floor_in(1)
    regs.dec_floor_out(2)
    regs.admit_dec_out(2, 60)
    assert rec == ["in", "out", "in", "out", "out"]


def test_audit_follows_a_clean_exchange():
    sw, ports, _ = _switch(debug=True)
    sw.ingress(_rsv(1, 2, demand=2, burst_id=5))
    sw.ingress(_data(1, 2, solicited=True, burst_id=5, seq=0))
    sw.ingress(_data(1, 2, solicited=True, burst_id=5, seq=1))
    sw.auditor.verify(sw.regs)  # exact conservation: everything arrived
    assert sw.regs.inbound[1] == 0
    assert sw.regs.outbound[2] == 0


def test_audit_catches_corrupted_register():
    sw, _, _ = _switch(debug=True)
    sw.ingress(_rsv(1, 2, demand=2, burst_id=5))
    sw.regs.inbound[1] = 99
    with pytest.raises(AssertionError):
        sw.auditor.verify(sw.regs)


def test_switch_config_validation():
    with pytest.raises(ValueError):
        SwitchConfig(num_ports=0)
    with pytest.raises(ValueError):
        SwitchConfig(num_ports=2, unsolicited_threshold=0)
    with pytest.raises(ValueError):
        SwitchConfig(num_ports=2, port_capacity_bytes=0)
    with pytest.raises(ValueError):
        SwitchConfig(num_ports=2, max_demand=0)
