"""Parameter sweeps with paired replicate seeds and confidence intervals.

Every swept value runs the same set of replicate seeds, derived from the
base seed, so values differ only in the parameter under test.  Runs are
independent simulations and may execute in parallel worker processes.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .config import ConfigError, load_config
from .rng import derive_seed
from .runner import run_config

SWEEPABLE = {
    "k": ("scheduler", "burst_packets"),
    "t": ("scheduler", "low_load_slots"),
    "threshold": ("switch", "unsolicited_threshold"),
    "load_gbps": ("scenario", "load_gbps"),
    "width": ("scenario", "width"),
}

# Two-sided 95% Student-t critical values keyed by sample count; for a
# count between entries the next smaller one applies, which only widens
# the interval.
_T95 = {
    2: 12.706, 3: 4.303, 4: 3.182, 5: 2.776, 6: 2.571, 7: 2.447,
    8: 2.365, 9: 2.306, 10: 2.262, 12: 2.201, 15: 2.145, 20: 2.093,
    30: 2.045, 60: 2.001, 120: 1.980,
}


def t_critical_95(n: int) -> float:
    if n < 2:
        raise ValueError("confidence interval needs at least two samples")
    best = 2
    for count in _T95:
        if count <= n:
            best = max(best, count)
    return _T95[best]


def mean_ci(samples):
    """(mean, 95% half-width) of a list of numbers."""
    n = len(samples)
    mean = sum(samples) / n
    if n < 2:
        return mean, float("inf")
    var = sum((x - mean) ** 2 for x in samples) / (n - 1)
    return mean, t_critical_95(n) * math.sqrt(var / n)


def intervals_overlap(a, b) -> bool:
    """True when two (mean, half_width) intervals intersect."""
    return abs(a[0] - b[0]) <= a[1] + b[1]


@dataclass(frozen=True)
class SweepPoint:
    param: str
    value: object
    seeds: tuple
    p99_ns: tuple
    loss_rate: tuple
    goodput_bps: tuple
    unsolicited_drops: int
    buffer_drops: int

    def p99_ci(self):
        return mean_ci([x for x in self.p99_ns if x is not None])

    def loss_ci(self):
        return mean_ci(list(self.loss_rate))

    def goodput_ci(self):
        return mean_ci(list(self.goodput_bps))

    def to_dict(self):
        p99 = self.p99_ci()
        loss = self.loss_ci()
        return {
            "param": self.param,
            "value": self.value,
            "seeds": list(self.seeds),
            "p99_ns": list(self.p99_ns),
            "loss_rate": list(self.loss_rate),
            "goodput_bps": list(self.goodput_bps),
            "unsolicited_drops": self.unsolicited_drops,
            "buffer_drops": self.buffer_drops,
            "p99_mean_ns": p99[0],
            "p99_ci95_ns": p99[1],
            "loss_mean": loss[0],
            "loss_ci95": loss[1],
        }


def replicate_seeds(base_seed: int, replicates: int):
    """The paired seed list shared by every swept value."""
    return tuple(derive_seed(base_seed, "sweep", rep) % (1 << 63)
                 for rep in range(replicates))


def _one_run(task):
    value, seed, config_path, overrides, extra, drain_ns = task
    cfg = load_config(config_path, overrides, extra)
    report = run_config(cfg, drain_ns=drain_ns)
    sent = report.packets_sent
    dropped = report.drops_buffer_overrun + report.drops_unsolicited
    return {
        "value": value,
        "seed": seed,
        "p99_ns": report.latency_p99_ns,
        "loss_rate": dropped / sent if sent else 0.0,
        "goodput_bps": report.goodput_bps,
        "unsolicited_drops": report.drops_unsolicited,
        "buffer_drops": report.drops_buffer_overrun,
    }


def sweep(param, values, replicates=5, base_seed=1, config_path=None,
          overrides=(), extra=None, jobs=1, drain_ns=2_000_000_000):
    """Run ``param`` over ``values`` with paired seeds; returns SweepPoints."""
    if param not in SWEEPABLE:
        raise ConfigError(
            f"cannot sweep {param!r}; choose from {', '.join(sorted(SWEEPABLE))}")
    if not values:
        raise ConfigError("sweep needs at least one value")
    if replicates < 1:
        raise ConfigError("sweep needs at least one replicate")
    section, key = SWEEPABLE[param]
    seeds = replicate_seeds(base_seed, replicates)

    tasks = []
    for value in values:
        for seed in seeds:
            ovr = tuple(overrides) + (
                f"{section}.{key}={value}",
                f"run.seed={seed}",
                f"run.label=sweep_{param}_{value}",
            )
            tasks.append((value, seed, config_path, ovr, extra, drain_ns))

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_one_run, tasks))
    else:
        rows = [_one_run(task) for task in tasks]

    points = []
    for value in values:
        mine = [r for r in rows if r["value"] == value]
        points.append(SweepPoint(
            param=param,
            value=value,
            seeds=seeds,
            p99_ns=tuple(r["p99_ns"] for r in mine),
            loss_rate=tuple(r["loss_rate"] for r in mine),
            goodput_bps=tuple(r["goodput_bps"] for r in mine),
            unsolicited_drops=sum(r["unsolicited_drops"] for r in mine),
            buffer_drops=sum(r["buffer_drops"] for r in mine),
        ))
    return points
