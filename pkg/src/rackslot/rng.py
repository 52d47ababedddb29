"""Seeded random-number streams with stable cross-process derivation.

Stream seeds are derived by hashing the base seed together with a label
path, so adding a consumer never perturbs the draws seen by existing ones
and results do not depend on interpreter hash randomization.
"""

from __future__ import annotations

import hashlib
import random


def derive_seed(base_seed: int, *labels) -> int:
    text = str(base_seed) + "/" + "/".join(str(x) for x in labels)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


class RngStreams:
    """A family of independent ``random.Random`` streams under one seed."""

    def __init__(self, base_seed: int) -> None:
        self.base_seed = base_seed
        self._streams: dict[tuple, random.Random] = {}

    def stream(self, *labels) -> random.Random:
        key = tuple(labels)
        rng = self._streams.get(key)
        if rng is None:
            rng = random.Random(derive_seed(self.base_seed, *labels))
            self._streams[key] = rng
        return rng
