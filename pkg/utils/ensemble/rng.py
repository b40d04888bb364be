"""
.. module:: rng
   :platform: Python
   :synopsis: Counter-based random streams keyed by (master seed, stream index, substream).

Module `rng` provides :class:`RngStream`, a thin wrapper over numpy's Philox generator.
A stream is identified by ``(master_seed, stream_index, substream)`` only, so any stream can
be replayed bit-exactly in any process and in any order. Draw order inside a stream is the
only state and is tracked by :attr:`RngStream.position`.
"""

from typing import Tuple

import numpy as np

from utils.errors import InvalidConfigError

_UINT64 = 2**64
# uniforms are mapped onto the open grid (k + 1/2) * 2**-52, k < 2**52
_GRID = float(2**52)


class RngStream:
    """
    Reproducible stream of open-interval uniforms.

    :Example:

    .. code-block:: python

        stream = RngStream(master_seed=7, stream_index=3)
        u = stream.uniforms(5)
        replay = RngStream(7, 3).uniforms(5)   # identical to u
    """

    def __init__(self, master_seed: int, stream_index: int, substream: Tuple[int, ...] = ()):
        """
        :param master_seed: 64-bit master seed of the run.
        :type master_seed: int
        :param stream_index: 64-bit stream index, one per Monte Carlo sample.
        :type stream_index: int
        :param substream: Further non-negative integers that split a sample's stream
            (diagonal offset and side for matrix entries, experiment tags elsewhere).
        :type substream: tuple[int, ...]
        :raises InvalidConfigError: If any key is negative or does not fit in 64 bits.
        """
        for key in (master_seed, stream_index, *substream):
            if not 0 <= int(key) < _UINT64:
                raise InvalidConfigError(f"stream key {key} is not an unsigned 64-bit integer")
        self.master_seed = int(master_seed)
        self.stream_index = int(stream_index)
        self.substream = tuple(int(k) for k in substream)
        self.position = 0
        seed_seq = np.random.SeedSequence(entropy=self.master_seed, spawn_key=(self.stream_index, *self.substream))
        self._generator = np.random.Generator(np.random.Philox(seed_seq))

    def uniforms(self, size: int) -> np.ndarray:
        """
        Draw ``size`` uniforms strictly inside (0, 1).

        :param size: Number of draws.
        :type size: int
        :return: Array of shape ``(size,)``.
        :rtype: numpy.ndarray
        """
        raw = self._generator.random(size)
        self.position += size
        return (np.floor(raw * _GRID) + 0.5) / _GRID

    def uniform(self) -> float:
        return float(self.uniforms(1)[0])

    def spawn(self, *substream: int) -> "RngStream":
        """
        Derive an independent child stream of the same sample.
        """
        return RngStream(self.master_seed, self.stream_index, self.substream + tuple(substream))

    def __repr__(self) -> str:
        return (
            f"RngStream(master_seed={self.master_seed}, stream_index={self.stream_index}, "
            f"substream={self.substream}, position={self.position})"
        )
