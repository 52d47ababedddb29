import pytest

from rackslot.engine import (
    Event,
    LinkModel,
    SchedulingInPastError,
    Simulator,
    serialization_delay,
)


def test_serialization_full_frame_at_line_rate():
    assert serialization_delay(1500, 100_000_000_000) == 120


def test_serialization_control_frame_rounds_up():
    # 64 B at 100 Gbps is 5.12 ns on the wire
    assert serialization_delay(64, 100_000_000_000) == 6


def test_serialization_slower_link():
    assert serialization_delay(1500, 10_000_000_000) == 1200


def test_serialization_accepts_link_model():
    link = LinkModel(rate_bps=100_000_000_000, latency_ns=50)
    assert serialization_delay(1500, link) == 120


def test_serialization_rejects_empty_frame():
    with pytest.raises(ValueError):
        serialization_delay(0, 100_000_000_000)


def test_serialization_rejects_bad_rate():
    with pytest.raises(ValueError):
        serialization_delay(1500, 0)


def test_link_model_validation():
    with pytest.raises(ValueError):
        LinkModel(rate_bps=0)
    with pytest.raises(ValueError):
        LinkModel(rate_bps=1, latency_ns=-1)


def test_events_fire_in_time_order():
    sim = Simulator()
    out = []
    sim.post(30, out.append, "c")
    sim.post(10, out.append, "a")
    sim.post(20, out.append, "b")
    sim.run()
    assert out == ["a", "b", "c"]
    assert sim.now == 30
    assert sim.events_dispatched == 3


def test_same_time_events_fire_in_scheduling_order():
    sim = Simulator()
    out = []
    for tag in "abcde":
        sim.post(5, out.append, tag)
    sim.run()
    assert out == list("abcde")


def test_callbacks_can_schedule_more_work():
    sim = Simulator()
    out = []

    def step(n):
        out.append(n)
        if n < 3:
            sim.after(7, step, n + 1)

    sim.post(0, step, 0)
    sim.run()
    assert out == [0, 1, 2, 3]
    assert sim.now == 21


def test_scheduling_in_past_raises():
    sim = Simulator()
    sim.post(100, lambda _: None)
    sim.run()
    with pytest.raises(SchedulingInPastError):
        sim.post(99, lambda _: None)


def test_run_until_stops_and_advances_clock():
    sim = Simulator()
    out = []
    sim.post(10, out.append, "early")
    sim.post(500, out.append, "late")
    sim.run(until=100)
    assert out == ["early"]
    assert sim.now == 100  # horizon reached even though nothing fired there
    assert sim.pending() == 1
    sim.run()
    assert out == ["early", "late"]


def test_schedule_stamps_sequence_and_fires():
    sim = Simulator()
    fired = []
    ev = sim.schedule(Event(fire_time=42, action=lambda: fired.append(True)))
    assert ev.sequence >= 0
    sim.run()
    assert fired == [True]
    assert sim.now == 42
