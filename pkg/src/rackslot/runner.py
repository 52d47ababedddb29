"""Assembles a runnable simulation from a RunConfig and executes it.

One Runtime owns one Simulator plus all hosts, ports, protocol state,
and traffic drivers for a single run.  Parameter sweeps build several
Runtimes from independent configs; nothing is shared between them.
"""

from __future__ import annotations

import gc
import itertools
from collections import Counter

from .baselines import RawSender, RdsReceiver, RdsSender
from .config import RunConfig
from .delays import sample_switching_delay
from .engine import NS_PER_SEC, Simulator
from .host import Pl2Host, attach_receiver
from .metrics import MetricsSink, build_report
from .network import Host, Topology, TxPort
from .rng import RngStreams
from .switch import Switch, SwitchConfig
from .workload import (
    ArrivalProcess,
    MessageFactory,
    OpenLoopSource,
    Pl2Backlog,
    RawBacklog,
    RdsBacklog,
    RpcDriver,
    ScriptSource,
    parse_size_dist,
)

# Post-traffic settle budget: enough for several retransmit timeouts so
# recovered messages still count toward latency tails.
DRAIN_NS = 2 * NS_PER_SEC

QUEUE_SAMPLE_NS = 1_000  # queue depth series resolution


class Runtime:
    """Everything one run owns.  Tests reach into the pieces directly."""

    def __init__(self, cfg: RunConfig, debug=False, trace=False):
        scenario = cfg.scenario
        num_hosts = scenario.num_hosts()
        if num_hosts < 2:
            raise ValueError("a scenario needs at least two hosts")

        self.cfg = cfg
        self.end_ns = scenario.duration_ns
        self.sim = Simulator()
        self.streams = RngStreams(cfg.seed)
        self.metrics = MetricsSink(self.sim,
                                   collect_packet_latency=cfg.collect_packet_latency)
        self.topo = Topology(
            num_hosts=num_hosts,
            rate_bps=cfg.rate_bps,
            mtu=cfg.mtu,
            ctrl_bytes=cfg.ctrl_bytes,
        )
        self.switch = Switch(
            self.sim,
            SwitchConfig(
                num_ports=self.topo.num_ports,
                unsolicited_threshold=cfg.unsolicited_threshold,
                port_capacity_bytes=cfg.port_capacity_bytes,
                shared_capacity_bytes=cfg.shared_capacity_bytes,
                max_demand=cfg.scheduler.k_max,
            ),
            self.metrics,
            debug=cfg.debug_audit or debug,
        )
        if trace:
            self.switch.grt_log = []

        self._delays = cfg.delays
        self._switch_rng = self.streams.stream("switching")
        link_ns = cfg.delays.nic_fixed_ns + cfg.delays.propagation_ns

        self.hosts = []
        self.uplinks = []
        self.downlinks = []
        for h in range(num_hosts):
            up = TxPort(self.sim, cfg.rate_bps, link_ns, self.switch.ingress,
                        jitter_fn=self._switching, name=f"up{h}")
            host = Host(h, up)
            down = TxPort(self.sim, cfg.rate_bps, link_ns, host.receive,
                          name=f"down{h}")
            self.switch.attach_port(self.topo.host_out_port[h], down)
            self.hosts.append(host)
            self.uplinks.append(up)
            self.downlinks.append(down)

        self.pl2 = {}
        self.raw = {}
        self.rds_send = {}
        self.rds_recv = {}
        self.ledgers = {}
        self.traces = {}
        submit = {}
        if cfg.protocol == "pl2":
            burst_ids = itertools.count()
            for h, host in enumerate(self.hosts):
                tr = [] if trace else None
                p = Pl2Host(self.sim, host, self.topo, cfg.scheduler,
                            cfg.delays, self.streams.stream("exchange", h),
                            self.metrics, burst_ids, trace=tr)
                self.pl2[h] = p
                if tr is not None:
                    self.traces[h] = tr
                self.ledgers[h] = attach_receiver(host, self.metrics)
                submit[h] = p.submit
        elif cfg.protocol == "raw":
            for h, host in enumerate(self.hosts):
                s = RawSender(self.sim, host, self.topo, self.metrics)
                self.raw[h] = s
                self.ledgers[h] = attach_receiver(host, self.metrics)
                submit[h] = s.submit
        else:
            for h, host in enumerate(self.hosts):
                self.rds_send[h] = RdsSender(self.sim, host, self.topo,
                                             cfg.rds, self.metrics)
                self.rds_recv[h] = RdsReceiver(self.sim, host, self.topo,
                                               cfg.rds, self.metrics)
                submit[h] = self.rds_send[h].submit
        self.submit_by_host = submit

        self.factory = MessageFactory(self.metrics, cfg.mtu)
        self.drivers = self._build_drivers(scenario, parse_size_dist(scenario.size_spec))
        self.queue_series = [] if cfg.timeseries else None

    def _switching(self):
        return sample_switching_delay(self._delays, self._switch_rng)

    def _build_drivers(self, scenario, dist):
        sim = self.sim
        streams = self.streams
        submit = self.submit_by_host
        factory = self.factory
        end = self.end_ns
        cfg = self.cfg

        if scenario.pattern == "rpc":
            return [RpcDriver(sim, submit, 0, 1, scenario.threads,
                              scenario.request_bytes, scenario.response_bytes,
                              end, factory)]
        if scenario.pattern == "script":
            return [ScriptSource(sim, submit, scenario.script, factory)]

        flows = scenario.flows()
        if scenario.arrival == "backlogged":
            by_src = {}
            for flow in flows:
                by_src.setdefault(flow.src, []).append(flow)
            drivers = []
            for src in sorted(by_src):
                group = by_src[src]
                size_rng = streams.stream("size", src)
                if cfg.protocol == "pl2":
                    drivers.append(Pl2Backlog(sim, self.pl2[src], group, dist,
                                              size_rng, end, factory))
                elif cfg.protocol == "raw":
                    drivers.append(RawBacklog(sim, self.raw[src], group, dist,
                                              size_rng, end, factory))
                else:
                    drivers.append(RdsBacklog(sim, self.rds_send[src], group,
                                              dist, size_rng, end, factory))
            return drivers

        flows_per_src = Counter(flow.src for flow in flows)
        drivers = []
        for flow in flows:
            arrival = ArrivalProcess.from_load(
                scenario.arrival, dist,
                scenario.load_bps / flows_per_src[flow.src])
            drivers.append(OpenLoopSource(
                sim, submit[flow.src], flow, dist, arrival,
                streams.stream("size", flow.src, flow.dst, flow.thread),
                streams.stream("gap", flow.src, flow.dst, flow.thread),
                end, factory))
        return drivers

    def start(self) -> None:
        for driver in self.drivers:
            driver.start()

    def data_frames_in_flight(self) -> int:
        total = 0
        for port in self.uplinks:
            total += port.data_frames_in_flight()
        for port in self.downlinks:
            total += port.data_frames_in_flight()
        return total

    def _freeze_window(self, _arg) -> None:
        self.metrics.mark_horizon()

    def _sample_queue(self, _arg) -> None:
        self.queue_series.append(self.switch.shared_occupancy)
        nxt = self.sim.now + QUEUE_SAMPLE_NS
        if nxt <= self.end_ns:
            self.sim.post(nxt, self._sample_queue)

    def run(self, drain_ns: int = DRAIN_NS):
        self.start()
        # Rates are averaged over [0, end_ns); the drain phase only lets
        # in-flight messages finish so completion counts stay honest.
        self.sim.post(self.end_ns, self._freeze_window)
        if self.queue_series is not None:
            self.sim.post(0, self._sample_queue)
        # The event loop allocates heavily but cycle-free; generational GC
        # passes only burn time there.
        gc_was_on = gc.isenabled()
        gc.disable()
        try:
            self.sim.run(until=self.end_ns + drain_ns)
        finally:
            if gc_was_on:
                gc.enable()
        if self.switch.auditor is not None:
            self.switch.auditor.verify(self.switch.regs)
        cfg = self.cfg
        return build_report(cfg.label, cfg.protocol, cfg.seed, self.end_ns,
                            self.sim, self.metrics, self.switch,
                            self.data_frames_in_flight())


def run_config(cfg: RunConfig, debug=False, trace=False, drain_ns=DRAIN_NS):
    """Build and execute one run; returns its RunReport."""
    return Runtime(cfg, debug=debug, trace=trace).run(drain_ns=drain_ns)
