"""Lattice vertices, the two edge models, and reproducible site randomness.

Vertices are plain tuples of ints; tuple comparison gives the lexicographic
order used everywhere a deterministic tie-break is needed.

Site randomness is a counter-based keyed hash rather than a streamed RNG:
the uniform variate at a vertex is a pure function of (seed, coordinates),
which gives O(1) random access on the infinite lattice, bit-exact replay
across machines and processes, and cheap single-site flips.

Generator identity (``GENERATOR_ID``): a splitmix64 absorption chain.
Starting from ``h = mix(seed ^ stream_tag)``, each 64-bit word ``c`` (the
coordinates, in order, two's complement) updates ``h = mix(h ^ c)``, where
``mix`` is the splitmix64 increment-and-finalize step.  The uniform variate
is the top 53 bits of the final state scaled to [0, 1).  The site value at
level p is the indicator {U_v < p}, so one field of uniforms couples all p
monotonically.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

GENERATOR_ID = "splitmix64-chain-v1"

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# Stream tags keep the site field, the walk stream and derived sub-seeds
# in disjoint hash domains.
SITE_STREAM = 0x5349544553495445
WALK_STREAM = 0x57414C4B57414C4B
SEED_STREAM = 0x5355425353554253


def mix64(z: int) -> int:
    """One splitmix64 step: add the increment, then finalize. Pure, total."""
    z = (z + _GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def hash_words(seed: int, words, tag: int = SITE_STREAM) -> int:
    """Absorb integer words into the chain; returns the 64-bit state."""
    h = mix64((seed & _MASK64) ^ tag)
    for c in words:
        h = mix64(h ^ (c & _MASK64))
    return h


def uniform_from_hash(h: int) -> float:
    """Top 53 bits of the state as a double in [0, 1). Bit-exact everywhere."""
    return (h >> 11) * (2.0**-53)


def subseed(master: int, *indices: int) -> int:
    """Derive an independent 64-bit sub-seed, e.g. per trial or grid cell."""
    return hash_words(master, indices, tag=SEED_STREAM)


class ModelKind(Enum):
    """Edge semantics of the two models.

    ORTHANT: a 1-site points all d positive edges, a 0-site all d negative.
    HALF_ORTHANT: positive edges always present, negative edges iff the
    site value is 0.  The half-orthant model dominates the orthant model
    edge-for-edge under the shared uniform field.
    """

    ORTHANT = "orthant"
    HALF_ORTHANT = "half-orthant"

    @classmethod
    def from_str(cls, text: str) -> "ModelKind":
        key = text.strip().lower().replace("_", "-")
        for kind in cls:
            if kind.value == key or kind.name.lower().replace("_", "-") == key:
                return kind
        raise ValueError(f"unknown model {text!r}")


@dataclass(frozen=True)
class Direction:
    """One of the 2d axis directions: e_axis with the given sign."""

    axis: int
    sign: int

    def step(self, v: tuple) -> tuple:
        w = list(v)
        w[self.axis] += self.sign
        return tuple(w)


def all_directions(d: int) -> list[Direction]:
    """E = E_+ ∪ E_-: the d positive directions first, then the d negative."""
    return [Direction(a, +1) for a in range(d)] + [Direction(a, -1) for a in range(d)]


class SiteField:
    """Deterministic uniform variates on Z^d, keyed by a 64-bit seed.

    The cache is a concurrent-read idempotent-write memo: values are pure
    functions of (seed, vertex), so racing writers store identical entries.
    """

    def __init__(self, seed: int, d: int):
        if d < 2:
            raise ValueError("dimension must be at least 2")
        self.seed = seed
        self.d = d
        self._cache: dict[tuple, float] = {}

    def uniform(self, v: tuple) -> float:
        u = self._cache.get(v)
        if u is None:
            u = uniform_from_hash(hash_words(self.seed, v, tag=SITE_STREAM))
            self._cache[v] = u
        return u

    def sample(self, v: tuple, p: float) -> int:
        """Site value at level p: 1 iff U_v < p. Bernoulli(p) across seeds."""
        return 1 if self.uniform(v) < p else 0

    def flip(self, v: tuple) -> "FlippedField":
        return FlippedField(self, v)

    def window_uniforms(self, coords: np.ndarray) -> np.ndarray:
        """Vectorized uniforms for an (M, d) int array of coordinates.

        Bit-exact equal to calling :meth:`uniform` per row; bypasses the cache.
        """
        h = np.full(coords.shape[0], _nb_u64(self.seed) ^ np.uint64(SITE_STREAM))
        h = _mix64_np(h)
        for a in range(coords.shape[1]):
            h = _mix64_np(h ^ coords[:, a].astype(np.int64).view(np.uint64))
        return (h >> np.uint64(11)) * (2.0**-53)


class FlippedField:
    """A field that agrees with its base except at one pivot vertex.

    Only Boolean (level-p) queries are defined; the pivot's Boolean value is
    negated, so flipping twice restores the base at every site.
    """

    def __init__(self, base, pivot: tuple):
        self.base = base
        self.pivot = tuple(pivot)
        self.d = base.d

    def sample(self, v: tuple, p: float) -> int:
        bit = self.base.sample(v, p)
        return 1 - bit if v == self.pivot else bit

    def flip(self, v: tuple):
        if v == self.pivot:
            return self.base
        return FlippedField(self, v)


def _nb_u64(x: int) -> np.uint64:
    return np.uint64(x & _MASK64)


def _mix64_np(z: np.ndarray) -> np.ndarray:
    z = z + np.uint64(_GAMMA)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def sample_site(field, v: tuple, p: float) -> int:
    """Indicator {U_v < p}; deterministic in (seed, v, p)."""
    return field.sample(v, p)


def out_neighbors(model: ModelKind, field, v: tuple, p: float) -> list[tuple]:
    """Directed out-neighbors of v under the given model at level p.

    Orthant: all v+e_i if the site is 1, else all v-e_i (always d edges).
    Half-orthant: all v+e_i, plus all v-e_i iff the site is 0.
    """
    d = len(v)
    bit = field.sample(v, p)
    pos = [v[:a] + (v[a] + 1,) + v[a + 1 :] for a in range(d)]
    neg = [v[:a] + (v[a] - 1,) + v[a + 1 :] for a in range(d)]
    if model is ModelKind.ORTHANT:
        return pos if bit else neg
    return pos if bit else pos + neg


def flip(field, v: tuple) -> FlippedField:
    """The single-site flip of a field at v."""
    return field.flip(tuple(v))
