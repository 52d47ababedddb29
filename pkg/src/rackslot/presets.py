"""Canned scenario configurations.

Each preset is a dict of INI sections layered over the defaults before
any user config file or override, so ``--set`` still wins.  Protocols
are switchable per run: the traffic a preset offers is identical under
pl2, raw, and rds for a given seed.
"""

from .config import ConfigError

# Five senders blast 61 KiB messages at one receiver, open loop, about
# ninety percent of the receiver's line rate in aggregate.  One simulated
# second.  The canonical stress for drop behaviour and tail latency.
_MICROBURST = {
    "run": {"label": "microburst"},
    "delays": {"switching_jitter": "true"},
    "scenario": {
        "pattern": "incast",
        "width": "5",
        "threads": "11",
        "arrival": "poisson",
        "load_gbps": "18",
        "size_dist": "fixed:62464",
        "duration_ns": "1000000000",
    },
}


def _persistent_incast(n):
    return {
        "run": {"label": f"persistent_incast_{n}"},
        "delays": {"switching_jitter": "true"},
        "scenario": {
            "pattern": "incast",
            "width": str(n),
            "threads": "12",
            "arrival": "backlogged",
            "size_dist": "fixed:6000",
            "duration_ns": "200000000",
        },
    }


PRESETS = {
    "microburst": _MICROBURST,
    "persistent_incast_1": _persistent_incast(1),
    "persistent_incast_2": _persistent_incast(2),
    "persistent_incast_3": _persistent_incast(3),
    "persistent_incast_4": _persistent_incast(4),
    # One host keeps 12 flows busy across four receivers; the sender's
    # own uplink is the bottleneck.
    "persistent_outcast_4": {
        "run": {"label": "persistent_outcast_4"},
        "delays": {"switching_jitter": "true"},
        "scenario": {
            "pattern": "outcast",
            "width": "4",
            "threads": "3",
            "arrival": "backlogged",
            "size_dist": "fixed:6000",
            "duration_ns": "200000000",
        },
    },
    # One backlogged flow between a single host pair, sized so every
    # burst carries full demand; the cleanest read of signaling overhead.
    "single_flow": {
        "run": {"label": "single_flow"},
        "delays": {"switching_jitter": "true"},
        "scenario": {
            "pattern": "incast",
            "width": "1",
            "threads": "1",
            "arrival": "backlogged",
            "size_dist": "fixed:60000",
            "duration_ns": "100000000",
        },
    },
    # Three-way incast drawing sizes from a bundled empirical CDF,
    # open loop at a moderate aggregate load.
    "wtrace_incast_3": {
        "run": {"label": "wtrace_incast_3"},
        "delays": {"switching_jitter": "true"},
        "scenario": {
            "pattern": "incast",
            "width": "3",
            "threads": "11",
            "arrival": "poisson",
            "load_gbps": "25",
            "size_dist": "cdf:web_search",
            "duration_ns": "100000000",
        },
    },
    # Four workers stream large tensors to two servers, closed loop.
    "shuffle_4x2": {
        "run": {"label": "shuffle_4x2"},
        "delays": {"switching_jitter": "true"},
        "scenario": {
            "pattern": "shuffle",
            "width": "4",
            "servers": "2",
            "threads": "2",
            "arrival": "backlogged",
            "size_dist": "lognormal:524288:1.0:65536:4194304",
            "duration_ns": "200000000",
        },
    },
    # Eleven request/response chains between one client/server pair.
    "rpc_pingpong": {
        "run": {"label": "rpc_pingpong"},
        "delays": {"switching_jitter": "true"},
        "scenario": {
            "pattern": "rpc",
            "threads": "11",
            "request_bytes": "512",
            "response_bytes": "65536",
            "duration_ns": "200000000",
        },
    },
    # Light open-loop incast where the no-wait transmission gate actually
    # engages; the base scenario for gate-threshold sweeps.
    "lowload_incast_4": {
        "run": {"label": "lowload_incast_4"},
        "delays": {"switching_jitter": "true"},
        "scenario": {
            "pattern": "incast",
            "width": "4",
            "threads": "11",
            "arrival": "poisson",
            "load_gbps": "6",
            "size_dist": "fixed:6000",
            "duration_ns": "100000000",
        },
    },
}


def preset(name):
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(
            f"unknown preset {name!r}; available: "
            f"{', '.join(sorted(PRESETS))}") from None
