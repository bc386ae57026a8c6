"""
Reproducible random sources for simulation episodes.

An episode owns two independent streams (link receptions and plant noise),
both derived from (base_seed, episode_index) through numpy's SeedSequence,
so episodes can run in any order or on any worker and still draw the same
numbers.
"""
from dataclasses import dataclass

import numpy as np

DEFAULT_BLOCK = 4096


class RandomStream:
    """Block-buffered draws from a numpy Generator.

    Draws are taken from pre-generated blocks, which keeps per-step overhead
    low; the sequence only depends on the order of requests.
    """

    def __init__(self, generator: np.random.Generator, block: int = DEFAULT_BLOCK):
        self.generator = generator
        self.block = block
        self._uniforms = np.empty(0)
        self._uniform_pos = 0
        self._normals = np.empty(0)
        self._normal_pos = 0

    @classmethod
    def from_seed(cls, seed: int | np.random.SeedSequence, block: int = DEFAULT_BLOCK) -> "RandomStream":
        return cls(np.random.default_rng(seed), block=block)

    def uniform(self) -> float:
        if self._uniform_pos >= self._uniforms.size:
            self._uniforms = self.generator.random(self.block)
            self._uniform_pos = 0
        value = self._uniforms[self._uniform_pos]
        self._uniform_pos += 1
        return float(value)

    def normals(self, n: int) -> np.ndarray:
        """n independent standard normal draws."""
        if self._normal_pos + n > self._normals.size:
            self._normals = self.generator.standard_normal(max(self.block, n))
            self._normal_pos = 0
        values = self._normals[self._normal_pos:self._normal_pos + n]
        self._normal_pos += n
        return values


@dataclass
class EpisodeStreams:
    link: RandomStream
    noise: RandomStream

    @classmethod
    def for_episode(cls, base_seed: int, episode_index: int) -> "EpisodeStreams":
        root = np.random.SeedSequence(entropy=base_seed, spawn_key=(episode_index,))
        link_seed, noise_seed = root.spawn(2)
        return cls(link=RandomStream.from_seed(link_seed), noise=RandomStream.from_seed(noise_seed))
