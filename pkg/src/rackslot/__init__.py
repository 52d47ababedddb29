"""rackslot: deterministic discrete-event simulation of a rack-scale network.

A single shared-buffer switch connects a handful of hosts over full-duplex
links.  Three transport behaviors can drive traffic through it:

* ``pl2``: hosts reserve transmission timeslots from per-port switch counters
  before sending each packet burst, so switch queues stay near-empty.
* ``raw``: hosts transmit at line rate with no control loop; drops happen in
  the switch buffer only.
* ``rds``: a receiver-driven scheme where senders blast one bandwidth-delay
  product blindly and the receiver grants the rest a few packets at a time.

Runs are fully deterministic for a given seed and configuration.
"""

from .engine import Event, LinkModel, Simulator, serialization_delay
from .metrics import RunReport, percentile

__version__ = "0.1.0"

__all__ = [
    "Event",
    "LinkModel",
    "RunReport",
    "Simulator",
    "percentile",
    "serialization_delay",
    "__version__",
]
