"""Exact lattice geometry: diagonal cones, slabs, and sup-norm windows.

All membership tests are carried out in integer/rational arithmetic.  This
is not pedantry: the exploration algorithm partitions space by cone
membership, and a float tie at the boundary would make the partition (and
every trace built on it) seed-dependent.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product


def parse_eta(text: str) -> Fraction:
    """Parse a cone parameter given as 'a/b' (or a plain integer string)."""
    eta = Fraction(text.strip())
    if not 0 <= eta <= 1:
        raise ValueError(f"cone parameter {text!r} outside [0, 1]")
    return eta


@dataclass(frozen=True)
class Cone:
    """The diagonal cone {x : x·1 >= eta * ||x||_1} shifted to -shift * 1.

    A point x belongs to the shifted cone iff x + shift*1 satisfies the
    defining inequality.  eta is an exact rational in [0, 1]; membership of
    integer points reduces to one integer comparison.
    """

    eta: Fraction
    shift: int = 0

    def __post_init__(self):
        eta = Fraction(self.eta)
        if not 0 <= eta <= 1:
            raise ValueError(f"cone parameter {eta} outside [0, 1]")
        object.__setattr__(self, "eta", eta)


def cone_contains(cone: Cone, x: tuple) -> bool:
    """Exact membership of a lattice point in the shifted cone."""
    num, den = cone.eta.numerator, cone.eta.denominator
    s = 0
    l1 = 0
    for c in x:
        c += cone.shift
        s += c
        l1 += c if c >= 0 else -c
    return den * s >= num * l1


def _neighbors(x: tuple):
    for a in range(len(x)):
        yield x[:a] + (x[a] + 1,) + x[a + 1 :]
        yield x[:a] + (x[a] - 1,) + x[a + 1 :]


@dataclass(frozen=True)
class Window:
    """Sup-norm ball of the given radius around the origin."""

    radius: int

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("window radius must be nonnegative")

    def contains(self, v: tuple) -> bool:
        return all(-self.radius <= c <= self.radius for c in v)

    def site_count(self, d: int) -> int:
        return (2 * self.radius + 1) ** d

    def iter_points(self, d: int):
        rng = range(-self.radius, self.radius + 1)
        return product(rng, repeat=d)


def cone_boundary(cone: Cone, window: Window, d: int) -> set[tuple]:
    """Inner boundary within the window: cone points with a neighbor outside.

    The true boundary is infinite, so callers must pass the governing
    window; the neighbor witnessing the boundary may lie outside it.
    """
    out = set()
    for x in window.iter_points(d):
        if cone_contains(cone, x) and any(
            not cone_contains(cone, y) for y in _neighbors(x)
        ):
            out.add(x)
    return out


def cone_outer_boundary(cone: Cone, window: Window, d: int) -> set[tuple]:
    """Outer boundary within the window: outside points with a neighbor inside."""
    out = set()
    for x in window.iter_points(d):
        if not cone_contains(cone, x) and any(
            cone_contains(cone, y) for y in _neighbors(x)
        ):
            out.add(x)
    return out


@dataclass(frozen=True)
class Slab:
    """Integer points z with m*(u.v) <= z.v < n*(u.v), exact in rationals.

    u is an integer direction off the diagonal, v a rational normal with
    u.v > 0 and v.1 = 0; m and n may be None for an unbounded side.
    """

    u: tuple
    v: tuple
    m: int | None
    n: int | None

    def __post_init__(self):
        u = tuple(int(c) for c in self.u)
        v = tuple(Fraction(c) for c in self.v)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)
        if len(u) != len(v):
            raise ValueError("u and v must have equal dimension")
        if all(c == u[0] for c in u):
            raise ValueError("u must not be a multiple of the all-ones vector")
        if sum(v) != 0:
            raise ValueError("v must satisfy v·1 = 0")
        if self.dot_uv() <= 0:
            raise ValueError("u and v must satisfy u·v > 0")

    def dot_uv(self) -> Fraction:
        return sum((Fraction(a) * b for a, b in zip(self.u, self.v)), Fraction(0))


def slab_contains(slab: Slab, z: tuple) -> bool:
    """Exact rational comparison of z against the slab inequalities."""
    uv = slab.dot_uv()
    zv = sum((Fraction(a) * b for a, b in zip(z, slab.v)), Fraction(0))
    if slab.m is not None and zv < slab.m * uv:
        return False
    if slab.n is not None and zv >= slab.n * uv:
        return False
    return True
