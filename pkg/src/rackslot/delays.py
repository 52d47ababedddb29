"""Latency models measured off rack hardware: control-exchange and switching.

The reservation/grant control exchange is dominated by NIC and DMA costs
that are not modeled structurally, so its NIC-to-NIC round-trip delay is
drawn from a three-point-anchored distribution (min / median / max) with a
heavy right tail, or held constant for hand-checkable runs.  Switching
delay is a constant by default with an optional uniform jitter band; the
jitter also serves to decorrelate packet arrival phases across input ports.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .engine import SimTime


@dataclass(frozen=True, slots=True)
class DelayModel:
    # Control round trip, NIC to NIC, idle network.
    exchange_min_ns: SimTime = 1_000
    exchange_median_ns: SimTime = 1_060
    exchange_max_ns: SimTime = 14_000
    exchange_sigma: float = 2.0
    exchange_constant_ns: SimTime | None = None  # degenerate option

    # Port-to-port switching latency.
    switching_ns: SimTime = 347
    switching_jitter: bool = False
    switching_min_ns: SimTime = 346
    switching_max_ns: SimTime = 508

    # Fixed handoff cost between a host and its link, each direction.
    nic_fixed_ns: SimTime = 100
    propagation_ns: SimTime = 50

    def __post_init__(self) -> None:
        if self.exchange_constant_ns is None:
            if not (
                0 < self.exchange_min_ns
                <= self.exchange_median_ns
                <= self.exchange_max_ns
            ):
                raise ValueError("exchange anchors must satisfy 0 < min <= median <= max")
            if self.exchange_sigma <= 0:
                raise ValueError("exchange sigma must be positive")
        elif self.exchange_constant_ns <= 0:
            raise ValueError("constant exchange delay must be positive")
        if self.switching_ns <= 0:
            raise ValueError("switching delay must be positive")
        if self.switching_jitter and not (
            0 < self.switching_min_ns <= self.switching_max_ns
        ):
            raise ValueError("switching jitter band is empty")


def sample_exchange_delay(model: DelayModel, rng: random.Random) -> SimTime:
    """One NIC-to-NIC control round-trip delay, in ns.

    The variable part above the floor is lognormal with its median pinned to
    (median - min); samples are clamped into [min, max], which preserves the
    median and caps the tail.
    """
    if model.exchange_constant_ns is not None:
        return model.exchange_constant_ns
    spread = model.exchange_median_ns - model.exchange_min_ns
    if spread <= 0:
        return model.exchange_median_ns
    x = model.exchange_min_ns + rng.lognormvariate(math.log(spread), model.exchange_sigma)
    d = int(round(x))
    if d < model.exchange_min_ns:
        return model.exchange_min_ns
    if d > model.exchange_max_ns:
        return model.exchange_max_ns
    return d


def sample_switching_delay(model: DelayModel, rng: random.Random) -> SimTime:
    if not model.switching_jitter:
        return model.switching_ns
    # uniform over the closed band; random() is much cheaper than randint
    # on this per-packet path
    lo = model.switching_min_ns
    return lo + int(rng.random() * (model.switching_max_ns - lo + 1))


def exchange_base_path_ns(model: DelayModel, ctrl_serialization_ns: SimTime) -> SimTime:
    """Deterministic in-model part of a control round trip on an idle network.

    Request leg: NIC handoff, serialization, propagation, switching.
    Reply leg: serialization, propagation, NIC handoff.
    """
    one_way_pads = model.nic_fixed_ns + model.propagation_ns
    return 2 * (one_way_pads + ctrl_serialization_ns) + model.switching_ns


def split_exchange_extra(total_ns: SimTime, base_ns: SimTime) -> tuple[SimTime, SimTime]:
    """Split the sampled round trip minus the modeled path into two legs.

    The remainder models NIC-side variability and is charged half to the
    request leg and half to the reply leg (odd nanosecond goes to the
    request).  A misconfigured base larger than the sample clamps to zero.
    """
    extra = total_ns - base_ns
    if extra <= 0:
        return 0, 0
    half = extra // 2
    return extra - half, half
