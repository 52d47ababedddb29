"""Traffic generation: size distributions, arrivals, and scenario patterns.

Message sizes come from parametric distributions or an empirical CDF table
loaded from a whitespace-separated file.  Arrivals are open-loop (Poisson
or fixed-gap, independent of completions) or closed-loop (a backlog driver
keeps every flow busy for the whole run).  Patterns cover incast (many
senders, one receiver), outcast (one sender, many receivers), shuffle
(all workers to all servers), alternating request/response pairs, and
explicit scripted message lists for hand-checked traces.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass
from importlib import resources
from statistics import NormalDist

from .engine import NS_PER_SEC


class WorkloadError(ValueError):
    """A size distribution, CDF file, or scenario was invalid."""


@dataclass(slots=True)
class Message:
    msg_id: int
    src: int
    dst: int
    size: int
    npkts: int
    tail_size: int
    created_ns: int
    thread: int = 0


def make_message(msg_id, src, dst, size, created_ns, mtu, thread=0):
    if size < 1:
        raise WorkloadError("message size must be >= 1 byte")
    npkts = -(-size // mtu)
    return Message(msg_id, src, dst, size, npkts,
                   size - (npkts - 1) * mtu, created_ns, thread)


class MessageFactory:
    """Allocates message ids and reports each arrival to the metrics sink."""

    __slots__ = ("metrics", "mtu", "_next_id")

    def __init__(self, metrics, mtu):
        self.metrics = metrics
        self.mtu = mtu
        self._next_id = 0

    def create(self, src, dst, size, now, thread=0):
        msg = make_message(self._next_id, src, dst, size, now,
                           self.mtu, thread)
        self._next_id += 1
        self.metrics.on_message_generated(msg)
        return msg


# --- message-size distributions ---------------------------------------------

class FixedSize:
    def __init__(self, nbytes):
        if nbytes < 1:
            raise WorkloadError("fixed size must be >= 1 byte")
        self.nbytes = nbytes

    def sample(self, rng):
        return self.nbytes

    def mean_bytes(self):
        return float(self.nbytes)


class UniformSize:
    def __init__(self, lo, hi):
        if lo < 1 or hi < lo:
            raise WorkloadError("uniform bounds need 1 <= lo <= hi")
        self.lo = lo
        self.hi = hi

    def sample(self, rng):
        return rng.randint(self.lo, self.hi)

    def mean_bytes(self):
        return (self.lo + self.hi) / 2


class LognormalSize:
    """Lognormal around a median, clamped to [lo, hi]."""

    def __init__(self, median, sigma, lo=1, hi=None):
        if median < 1 or sigma <= 0:
            raise WorkloadError("lognormal needs median >= 1 and sigma > 0")
        if lo < 1 or (hi is not None and hi < max(lo, median)):
            raise WorkloadError("lognormal clamp range is inconsistent")
        self.median = median
        self.sigma = sigma
        self.lo = lo
        self.hi = hi
        self._mu = math.log(median)
        self._mean = None

    def sample(self, rng):
        size = round(rng.lognormvariate(self._mu, self.sigma))
        if size < self.lo:
            return self.lo
        if self.hi is not None and size > self.hi:
            return self.hi
        return size

    def mean_bytes(self):
        # quantile-midpoint estimate so the clamps are honoured exactly
        # enough for load computation; good to well under 1%
        if self._mean is None:
            n = 4096
            inv = NormalDist().inv_cdf
            total = 0.0
            for i in range(n):
                size = math.exp(self._mu + self.sigma * inv((i + 0.5) / n))
                if size < self.lo:
                    size = self.lo
                elif self.hi is not None and size > self.hi:
                    size = self.hi
                total += size
            self._mean = total / n
        return self._mean


class BimodalSize:
    def __init__(self, small, large, p_large):
        if small < 1 or large < small:
            raise WorkloadError("bimodal needs 1 <= small <= large")
        if not 0.0 <= p_large <= 1.0:
            raise WorkloadError("bimodal p_large must be in [0, 1]")
        self.small = small
        self.large = large
        self.p_large = p_large

    def sample(self, rng):
        return self.large if rng.random() < self.p_large else self.small

    def mean_bytes(self):
        return self.small + (self.large - self.small) * self.p_large


class EmpiricalSize:
    """Inverse-transform sampling over a step CDF of (size, cum_prob)."""

    def __init__(self, points):
        if not points:
            raise WorkloadError("empirical CDF has no points")
        sizes = []
        probs = []
        for size, prob in points:
            if size < 1:
                raise WorkloadError("CDF sizes must be >= 1 byte")
            if sizes and size <= sizes[-1]:
                raise WorkloadError("CDF sizes must be strictly increasing")
            if probs and prob < probs[-1]:
                raise WorkloadError("CDF probabilities must not decrease")
            if not 0.0 <= prob <= 1.0 + 1e-9:
                raise WorkloadError("CDF probabilities must lie in [0, 1]")
            sizes.append(size)
            probs.append(prob)
        if abs(probs[-1] - 1.0) > 1e-9:
            raise WorkloadError("CDF does not reach 1.0")
        self.sizes = sizes
        self.probs = probs

    def sample(self, rng):
        return self.sizes[bisect_left(self.probs, rng.random())]

    def mean_bytes(self):
        total = 0.0
        prev = 0.0
        for size, prob in zip(self.sizes, self.probs):
            total += size * (prob - prev)
            prev = prob
        return total


def _parse_cdf_lines(lines, origin):
    points = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 2:
            raise WorkloadError(
                f"{origin}, line {lineno}: expected 'size cum_prob' pair")
        try:
            size = int(float(fields[0]))
            prob = float(fields[1])
        except ValueError:
            raise WorkloadError(
                f"{origin}, line {lineno}: malformed number") from None
        if points:
            prev_size, prev_prob = points[-1]
            if size <= prev_size:
                raise WorkloadError(
                    f"{origin}, line {lineno}: sizes must be strictly increasing")
            if prob < prev_prob:
                raise WorkloadError(
                    f"{origin}, line {lineno}: cumulative probability went down")
        points.append((size, prob))
    if not points:
        raise WorkloadError(f"{origin}: CDF file has no data lines")
    try:
        return EmpiricalSize(points)
    except WorkloadError as exc:
        raise WorkloadError(f"{origin}: {exc}") from None


def load_cdf(path):
    """Load an empirical size CDF from ``path``.

    Format: two whitespace-separated columns, message size in bytes and
    cumulative probability, one point per line, '#' starts a comment.
    """
    with open(path, "r", encoding="utf-8") as fh:
        return _parse_cdf_lines(fh, str(path))


def bundled_cdf_names():
    root = resources.files("rackslot").joinpath("data")
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cdf"))


def bundled_cdf(name):
    res = resources.files("rackslot").joinpath("data", name + ".cdf")
    try:
        text = res.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise WorkloadError(
            f"no bundled CDF named {name!r}; "
            f"available: {', '.join(bundled_cdf_names())}") from None
    return _parse_cdf_lines(text.splitlines(), f"bundled:{name}")


def parse_size_dist(spec):
    """Build a size distribution from a colon-separated spec string.

    fixed:BYTES | uniform:LO:HI | lognormal:MEDIAN:SIGMA[:LO[:HI]]
    | bimodal:SMALL:LARGE:P_LARGE | cdf:NAME_OR_PATH
    """
    kind, _, rest = spec.strip().partition(":")
    args = rest.split(":") if rest else []
    try:
        if kind == "fixed" and len(args) == 1:
            return FixedSize(int(args[0]))
        if kind == "uniform" and len(args) == 2:
            return UniformSize(int(args[0]), int(args[1]))
        if kind == "lognormal" and 2 <= len(args) <= 4:
            lo = int(args[2]) if len(args) > 2 else 1
            hi = int(args[3]) if len(args) > 3 else None
            return LognormalSize(int(args[0]), float(args[1]), lo, hi)
        if kind == "bimodal" and len(args) == 3:
            return BimodalSize(int(args[0]), int(args[1]), float(args[2]))
        if kind == "cdf" and len(args) >= 1:
            name = rest
            if "/" in name or name.endswith(".cdf"):
                return load_cdf(name)
            return bundled_cdf(name)
    except (ValueError, TypeError):
        raise WorkloadError(f"malformed size distribution spec {spec!r}") from None
    raise WorkloadError(f"unknown size distribution spec {spec!r}")


# --- arrival processes ------------------------------------------------------

@dataclass(frozen=True)
class ArrivalProcess:
    """Open-loop inter-arrival sampler; arrivals ignore completions."""

    kind: str             # poisson | deterministic
    mean_gap_ns: int

    def __post_init__(self):
        if self.kind not in ("poisson", "deterministic"):
            raise WorkloadError(f"unknown arrival kind {self.kind!r}")
        if self.mean_gap_ns < 1:
            raise WorkloadError("mean inter-arrival must be >= 1 ns")

    @classmethod
    def from_load(cls, kind, dist, load_bps):
        if load_bps <= 0:
            raise WorkloadError("offered load must be positive")
        gap = round(dist.mean_bytes() * 8 * NS_PER_SEC / load_bps)
        return cls(kind, gap if gap >= 1 else 1)

    def sample_gap(self, rng):
        if self.kind == "poisson":
            return int(rng.expovariate(1.0 / self.mean_gap_ns))
        return self.mean_gap_ns


# --- scenarios --------------------------------------------------------------

@dataclass(frozen=True)
class FlowSpec:
    src: int
    dst: int
    thread: int = 0


@dataclass(frozen=True)
class Scenario:
    """Declarative traffic description, resolved to flows and drivers.

    pattern incast: ``width`` senders (hosts 0..width-1) to one receiver
    (host ``width``).  outcast: host 0 to ``width`` receivers.  shuffle:
    ``width`` workers each to ``servers`` servers.  rpc: ``threads``
    alternating request/response chains between hosts 0 and 1.  script:
    explicit (time_ns, src, dst, size, thread) tuples.
    """

    pattern: str
    width: int = 1
    servers: int = 0
    threads: int = 11
    arrival: str = "poisson"      # poisson | deterministic | backlogged
    load_bps: float = 18e9        # per sending host, open-loop only
    size_spec: str = "fixed:6000"
    duration_ns: int = NS_PER_SEC
    request_bytes: int = 0
    response_bytes: int = 0
    script: tuple = ()

    def __post_init__(self):
        if self.pattern not in ("incast", "outcast", "shuffle", "rpc", "script"):
            raise WorkloadError(f"unknown traffic pattern {self.pattern!r}")
        if self.pattern in ("incast", "outcast") and self.width < 1:
            raise WorkloadError("incast/outcast width must be >= 1")
        if self.pattern == "shuffle" and (self.width < 1 or self.servers < 1):
            raise WorkloadError("shuffle needs >= 1 worker and >= 1 server")
        if self.pattern == "rpc" and (self.request_bytes < 1
                                      or self.response_bytes < 1):
            raise WorkloadError("rpc needs request and response sizes")
        if self.pattern == "script" and not self.script:
            raise WorkloadError("script scenario has no entries")
        if self.threads < 1:
            raise WorkloadError("thread count must be >= 1")
        if self.duration_ns < 1:
            raise WorkloadError("duration must be positive")
        if self.arrival not in ("poisson", "deterministic", "backlogged"):
            raise WorkloadError(f"unknown arrival mode {self.arrival!r}")

    def num_hosts(self):
        if self.pattern in ("incast", "outcast"):
            return self.width + 1
        if self.pattern == "shuffle":
            return self.width + self.servers
        if self.pattern == "rpc":
            return 2
        return 1 + max(max(e[1], e[2]) for e in self.script)

    def flows(self):
        threads = range(self.threads)
        if self.pattern == "incast":
            return tuple(FlowSpec(s, self.width, th)
                         for s in range(self.width) for th in threads)
        if self.pattern == "outcast":
            return tuple(FlowSpec(0, 1 + r, th)
                         for r in range(self.width) for th in threads)
        if self.pattern == "shuffle":
            return tuple(FlowSpec(w, self.width + s, th)
                         for w in range(self.width)
                         for s in range(self.servers) for th in threads)
        if self.pattern == "rpc":
            return tuple(FlowSpec(0, 1, th) for th in threads)
        return tuple(FlowSpec(e[1], e[2], e[4] if len(e) > 4 else 0)
                     for e in self.script)


# --- drivers ----------------------------------------------------------------

class OpenLoopSource:
    """One flow's independent arrival stream."""

    __slots__ = ("sim", "submit", "flow", "dist", "arrival", "size_rng",
                 "gap_rng", "end_ns", "factory")

    def __init__(self, sim, submit, flow, dist, arrival, size_rng, gap_rng,
                 end_ns, factory):
        self.sim = sim
        self.submit = submit
        self.flow = flow
        self.dist = dist
        self.arrival = arrival
        self.size_rng = size_rng
        self.gap_rng = gap_rng
        self.end_ns = end_ns
        self.factory = factory

    def start(self):
        self._arm(self.sim.now + self.arrival.sample_gap(self.gap_rng))

    def _arm(self, at):
        if at < self.end_ns:
            self.sim.post(at, self._fire)

    def _fire(self, _arg=None):
        now = self.sim.now
        flow = self.flow
        msg = self.factory.create(flow.src, flow.dst,
                                  self.dist.sample(self.size_rng), now,
                                  flow.thread)
        self.submit(msg)
        self._arm(now + self.arrival.sample_gap(self.gap_rng))


class Pl2Backlog:
    """Closed loop for one reservation-scheduling sender: a flow going
    idle immediately receives its next message, until the run ends."""

    def __init__(self, sim, pl2, flows, dist, size_rng, end_ns, factory):
        self.sim = sim
        self.pl2 = pl2
        self.flows = flows
        self.dist = dist
        self.size_rng = size_rng
        self.end_ns = end_ns
        self.factory = factory
        pl2.on_flow_idle = self._idle

    def start(self):
        for flow in self.flows:
            msg = self.factory.create(flow.src, flow.dst,
                                      self.dist.sample(self.size_rng),
                                      self.sim.now, flow.thread)
            self.pl2.submit(msg)

    def _idle(self, pl2, flow_state):
        if self.sim.now >= self.end_ns:
            return
        dst = flow_state.dst
        thread = flow_state.key[1] if len(flow_state.key) > 1 else 0
        msg = self.factory.create(pl2.host_id, dst,
                                  self.dist.sample(self.size_rng),
                                  self.sim.now, thread)
        pl2.submit(msg)


class RawBacklog:
    """Closed loop for a raw sender: keep the NIC queue above a watermark
    so the uplink never starves, cycling round-robin over the flows."""

    def __init__(self, sim, sender, flows, dist, size_rng, end_ns, factory,
                 low_bytes=None):
        self.sim = sim
        self.sender = sender
        self.flows = flows
        self.dist = dist
        self.size_rng = size_rng
        self.end_ns = end_ns
        self.factory = factory
        self.low_bytes = 32 * factory.mtu if low_bytes is None else low_bytes
        self._next = 0
        sender.host.nic.on_tx_done = self._tx_done

    def start(self):
        self._refill()

    def _tx_done(self, pkt):
        if self.sender.host.nic.data_bytes < self.low_bytes:
            self._refill()

    def _refill(self):
        now = self.sim.now
        if now >= self.end_ns:
            return
        nic = self.sender.host.nic
        flows = self.flows
        while nic.data_bytes < self.low_bytes:
            flow = flows[self._next]
            self._next = (self._next + 1) % len(flows)
            msg = self.factory.create(flow.src, flow.dst,
                                      self.dist.sample(self.size_rng), now,
                                      flow.thread)
            self.sender.submit(msg)


class RdsBacklog:
    """Closed loop for a receiver-driven sender: a flow submits its next
    message once the previous one has been handed to the NIC in full."""

    def __init__(self, sim, sender, flows, dist, size_rng, end_ns, factory):
        self.sim = sim
        self.sender = sender
        self.flows = flows
        self.dist = dist
        self.size_rng = size_rng
        self.end_ns = end_ns
        self.factory = factory
        sender.on_msg_sent = self._sent

    def start(self):
        for flow in self.flows:
            self._submit(flow.dst, flow.thread)

    def _submit(self, dst, thread):
        msg = self.factory.create(self.sender.host_id, dst,
                                  self.dist.sample(self.size_rng),
                                  self.sim.now, thread)
        self.sender.submit(msg)

    def _sent(self, sender, msg):
        if self.sim.now < self.end_ns:
            self._submit(msg.dst, msg.thread)


class RpcDriver:
    """Alternating request/response chains between a client/server pair.

    Each chain is closed-loop: the client sends a request, the server
    answers when the request message completes, and the next request goes
    out when the response completes.
    """

    def __init__(self, sim, submit_by_host, client, server, chains,
                 request_bytes, response_bytes, end_ns, factory):
        self.sim = sim
        self.submit_by_host = submit_by_host
        self.client = client
        self.server = server
        self.chains = chains
        self.request_bytes = request_bytes
        self.response_bytes = response_bytes
        self.end_ns = end_ns
        self.factory = factory
        self._role = {}     # msg_id -> ("req" | "resp", chain)
        factory.metrics.completion_listeners.append(self._complete)

    def start(self):
        for chain in range(self.chains):
            self._send("req", chain)

    def _send(self, role, chain):
        if role == "req":
            src, dst, size = self.client, self.server, self.request_bytes
        else:
            src, dst, size = self.server, self.client, self.response_bytes
        msg = self.factory.create(src, dst, size, self.sim.now, chain)
        self._role[msg.msg_id] = (role, chain)
        self.submit_by_host[src](msg)

    def _complete(self, pkt):
        entry = self._role.pop(pkt.msg_id, None)
        if entry is None or self.sim.now >= self.end_ns:
            return
        role, chain = entry
        self._send("resp" if role == "req" else "req", chain)


class ScriptSource:
    """Replays an explicit list of (time_ns, src, dst, size, thread)."""

    def __init__(self, sim, submit_by_host, script, factory):
        self.sim = sim
        self.submit_by_host = submit_by_host
        self.script = script
        self.factory = factory

    def start(self):
        for entry in self.script:
            self.sim.post(entry[0], self._fire, entry)

    def _fire(self, entry):
        at, src, dst, size = entry[:4]
        thread = entry[4] if len(entry) > 4 else 0
        msg = self.factory.create(src, dst, size, self.sim.now, thread)
        self.submit_by_host[src](msg)
