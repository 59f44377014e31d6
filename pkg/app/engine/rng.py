"""
Named random streams derived from one root seed.

Each consumer (dropout, policy sampling, buffer sampling, trace synthesis,
episode offsets, weight init) draws from its own generator, so adding draws in
one place never shifts the numbers another consumer sees.
"""
import zlib

import numpy as np

KNOWN_STREAMS = (
    "init",
    "dropout",
    "policy",
    "buffer",
    "synthesis",
    "episodes",
    "warmup",
    "batches",
)


class RngStreams:
    """Lazily created, independent generators keyed by consumer name."""

    def __init__(self, seed: int):
        if seed < 0:
            raise ValueError(f"seed must be non-negative, got {seed}")
        self.seed = seed
        self._streams: dict[str, np.random.Generator] = {}

    def get_stream(self, name: str) -> np.random.Generator:
        """
        Return the generator for `name`, creating it on first use.

        Args:
            name: Consumer name. Any string works; KNOWN_STREAMS lists the ones the
                simulator uses.

        Returns:
            numpy Generator seeded from (root seed, crc32(name)).
        """
        if name not in self._streams:
            self._streams[name] = fresh_stream(self.seed, name)
        return self._streams[name]

    def child(self, name: str) -> "RngStreams":
        """Derive a new family of streams, e.g. one per evaluated policy."""
        return RngStreams(int(np.random.SeedSequence([self.seed, _key(name)]).generate_state(1)[0]))


def fresh_stream(seed: int, name: str) -> np.random.Generator:
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=(_key(name),))
    return np.random.default_rng(sequence)


def _key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))
