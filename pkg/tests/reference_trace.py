"""Independent brute-force evaluator for the reservation protocol.

This module replays a fixed list of single-burst messages through the
switch register rules and the host scheduling rules directly, using plain
dicts and a flat sorted worklist.  It shares nothing with the package
implementation; it exists so simulator traces can be checked against a
second, much simpler derivation of the same protocol.

Model, with every delay constant:

* Each host has one uplink wire and one downlink wire.  A wire serializes
  one frame at a time; control frames are picked before queued data frames
  but never preempt a frame already on the wire.
* A frame that finishes serializing at time t reaches the switch at
  t + nic + prop + switching (+ a fixed request-leg pad for reservation
  frames, standing in for NIC-side variability).
* Reservation arrival, registers indexed by port: send = in[src],
  in[src] += demand, recv = out[dst] plus the count of data frames queued
  or serializing on dst's downlink, out[dst] += demand; the grant frame
  carrying (send, recv) is handed to the source host's downlink at the same
  instant and reaches the host at txdone + prop + nic (+ reply-leg pad).
* Data arrival: out[dst] and in[src] each drop by 1, floored at zero, and
  the frame joins dst's downlink data queue, leaving it when its own
  serialization finishes.
* The host, on grant: measures the round trip, picks
  chosen = max(send, recv), waits
  max(0, chosen * slot - round_trip_estimate - pending_data_ns)
  and then hands the whole burst to its uplink data queue.  The estimate is
  the most recent measurement, updated before use; pending_data_ns is the
  serialization time of data bytes sitting at the uplink at grant time.
"""

from __future__ import annotations

import heapq
from collections import deque

NS = 1_000_000_000


def _ser(nbytes: int, rate_bps: int) -> int:
    return -(-nbytes * 8 * NS // rate_bps)


def _new_wire() -> dict:
    return {"busy": False, "ctrl": deque(), "data": deque(), "pending": 0}


def reference_trace(bursts, c):
    """Replay ``bursts`` and return (per-burst records, grant emission order).

    ``bursts`` is a list of (submit_time_ns, src_host, dst_host, demand)
    tuples; burst ids are list positions.  ``c`` is a dict of constants:
    rate_bps, mtu, ctrl_bytes, nic_ns, prop_ns, switching_ns, exchange_ns.
    """
    rate = c["rate_bps"]
    mtu = c["mtu"]
    slot = _ser(mtu, rate)
    ctrl_ser = _ser(c["ctrl_bytes"], rate)
    base = 2 * (c["nic_ns"] + c["prop_ns"] + ctrl_ser) + c["switching_ns"]
    extra = c["exchange_ns"] - base
    if extra < 0:
        raise ValueError("constant exchange delay smaller than the modeled path")
    pad_request = extra - extra // 2
    pad_reply = extra // 2
    to_switch = c["nic_ns"] + c["prop_ns"] + c["switching_ns"]
    to_host = c["prop_ns"] + c["nic_ns"]

    nhosts = 1 + max(max(b[1], b[2]) for b in bursts)
    uplink = [_new_wire() for _ in range(nhosts)]
    downlink = [_new_wire() for _ in range(nhosts)]
    reg_in = [0] * nhosts
    reg_out = [0] * nhosts
    occupied = [0] * nhosts  # data frames held at each downlink
    estimate = {}  # flow id (burst id here) -> last measured round trip

    records = [None] * len(bursts)
    grant_order = []
    switch_times = []

    heap = []
    seq = 0

    def push(t, kind, payload):
        nonlocal seq
        heapq.heappush(heap, (t, seq, kind, payload))
        seq += 1

    def wire_start(wires, h, t, done_kind):
        w = wires[h]
        if w["busy"]:
            return
        if w["ctrl"]:
            frame = w["ctrl"].popleft()
        elif w["data"]:
            frame = w["data"].popleft()
        else:
            return
        w["busy"] = True
        push(t + _ser(frame["size"], rate), done_kind, (h, frame))

    for bid, (t0, src, dst, demand) in enumerate(bursts):
        if not 1 <= demand <= c.get("k", demand):
            raise ValueError(f"burst {bid}: demand {demand} out of range")
        records[bid] = {"rsv_handoff": t0, "src": src, "dst": dst, "demand": demand}
        push(t0, "submit", bid)

    while heap:
        t, _, kind, payload = heapq.heappop(heap)

        if kind == "submit":
            bid = payload
            src = bursts[payload][1]
            uplink[src]["ctrl"].append(
                {"size": c["ctrl_bytes"], "rsv": True, "bid": bid}
            )
            wire_start(uplink, src, t, "up_txdone")

        elif kind == "up_txdone":
            h, frame = payload
            w = uplink[h]
            w["busy"] = False
            if not frame.get("rsv"):
                w["pending"] -= frame["size"]
            pad = pad_request if frame.get("rsv") else 0
            push(t + to_switch + pad, "sw_arrive", frame)
            wire_start(uplink, h, t, "up_txdone")

        elif kind == "sw_arrive":
            frame = payload
            switch_times.append(t)
            if frame.get("rsv"):
                bid = frame["bid"]
                _, src, dst, demand = bursts[bid]
                send = reg_in[src]
                reg_in[src] += demand
                recv = reg_out[dst] + occupied[dst]
                reg_out[dst] += demand
                rec = records[bid]
                rec["grt_time"] = t
                rec["grt_send"] = send
                rec["grt_recv"] = recv
                rec["queue_term"] = occupied[dst]
                grant_order.append(bid)
                downlink[src]["ctrl"].append(
                    {"size": c["ctrl_bytes"], "grt": True, "bid": bid}
                )
                wire_start(downlink, src, t, "down_txdone")
            else:
                bid = frame["bid"]
                src = bursts[bid][1]
                dst = bursts[bid][2]
                if reg_out[dst] > 0:
                    reg_out[dst] -= 1
                if reg_in[src] > 0:
                    reg_in[src] -= 1
                occupied[dst] += 1
                downlink[dst]["data"].append(frame)
                wire_start(downlink, dst, t, "down_txdone")

        elif kind == "down_txdone":
            h, frame = payload
            downlink[h]["busy"] = False
            if frame.get("grt"):
                push(t + to_host + pad_reply, "host_arrive", frame)
            else:
                occupied[h] -= 1  # forwarded; host-side delivery is not traced
            wire_start(downlink, h, t, "down_txdone")

        elif kind == "host_arrive":
            bid = payload["bid"]
            rec = records[bid]
            measured = t - rec["rsv_handoff"]
            estimate[bid] = measured  # update before use
            chosen = max(rec["grt_send"], rec["grt_recv"])
            pending = uplink[rec["src"]]["pending"]
            pending_ns = (pending * 8 * NS + rate - 1) // rate
            wait = chosen * slot - estimate[bid] - pending_ns
            if wait < 0:
                wait = 0
            rec["measured"] = measured
            rec["chosen"] = chosen
            rec["grt_deliver"] = t
            rec["tx_time"] = t + wait
            push(t + wait, "tx", bid)

        elif kind == "tx":
            bid = payload
            rec = records[bid]
            w = uplink[rec["src"]]
            for _ in range(rec["demand"]):
                w["data"].append({"size": mtu, "bid": bid})
                w["pending"] += mtu
            wire_start(uplink, rec["src"], t, "up_txdone")

        else:  # pragma: no cover
            raise AssertionError(kind)

    if len(switch_times) != len(set(switch_times)):
        raise ValueError(
            "scenario is ambiguous: two frames reach the switch at the same instant"
        )
    return records, grant_order


if __name__ == "__main__":
    demo = [(0, 0, 2, 4), (17, 1, 2, 4), (2000, 0, 2, 3)]
    constants = {
        "rate_bps": 100 * NS,
        "mtu": 1500,
        "ctrl_bytes": 64,
        "nic_ns": 100,
        "prop_ns": 50,
        "switching_ns": 347,
        "exchange_ns": 1060,
        "k": 4,
    }
    recs, order = reference_trace(demo, constants)
    for i, r in enumerate(recs):
        print(i, r)
    print("grant order:", order)
