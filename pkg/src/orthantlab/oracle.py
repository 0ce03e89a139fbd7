"""Brute-force ground truth on tiny windows.

Enumerates all 2^M site configurations of a window and counts, per number
of one-sites, the configurations where the escape event holds, where a
given site is pivotal, and where a given site is revealed by the
deterministic exploration tree.  Counts are exact integers, so every
downstream quantity (theta, derivative, influence, revealment) evaluates
exactly at rational p.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _kernels
from .errors import EnumerationTooLarge
from .geometry import Window

DEFAULT_CAP = 26


@dataclass(frozen=True)
class ThetaPolynomial:
    """theta(p) = sum_j counts[j] p^j (1-p)^(site_count-j), counts exact."""

    counts: tuple
    site_count: int

    def eval_exact(self, p: Fraction) -> Fraction:
        p = Fraction(p)
        q = 1 - p
        total = Fraction(0)
        for j, c in enumerate(self.counts):
            if c:
                total += c * p**j * q ** (self.site_count - j)
        return total

    def eval(self, p: float) -> float:
        q = 1.0 - p
        total = 0.0
        for j, c in enumerate(self.counts):
            if c:
                total += c * p**j * q ** (self.site_count - j)
        return total

    def derivative_exact(self, p: Fraction) -> Fraction:
        p = Fraction(p)
        q = 1 - p
        n = self.site_count
        total = Fraction(0)
        for j, c in enumerate(self.counts):
            if not c:
                continue
            if j > 0:
                total += c * j * p ** (j - 1) * q ** (n - j)
            if n - j > 0:
                total -= c * (n - j) * p**j * q ** (n - j - 1)
        return total

    def to_dict(self) -> dict:
        return {"counts": [int(c) for c in self.counts],
                "site_count": self.site_count}


@dataclass(frozen=True)
class ExactInstance:
    """One enumerated escape event: its f-table and theta polynomial."""

    n: int
    eta: Fraction
    window: Window
    d: int
    site_count: int
    f_table: np.ndarray
    theta: ThetaPolynomial


_cache: OrderedDict = OrderedDict()
_CACHE_MAX = 4


def _cached(key, build):
    if key in _cache:
        _cache.move_to_end(key)
        return _cache[key]
    val = build()
    _cache[key] = val
    while len(_cache) > _CACHE_MAX:
        _cache.popitem(last=False)
    return val


def _check_cap(w: Window, d: int, cap: int) -> int:
    m = w.site_count(d)
    if m > cap:
        raise EnumerationTooLarge(m, cap)
    return m


def exact_instance(n: int, eta, w: Window, d: int = 2,
                   cap: int = DEFAULT_CAP) -> ExactInstance:
    """Enumerate the windowed escape event over all configurations."""
    m = _check_cap(w, d, cap)
    num, den = _kernels.eta_pair(eta)
    key = ("instance", d, w.radius, num, den, n)

    def build():
        t = _kernels.window_table(d, w.radius)
        target = (1 - _kernels.cone_mask(d, w.radius, num, den, n)).astype(np.uint8)
        f_table = np.empty(1 << m, dtype=np.uint8)
        _kernels._enumerate_f(t.nbr, target, t.origin, f_table)
        counts = np.zeros((_kernels.N_BLOCKS, m + 1), dtype=np.int64)
        _kernels._count_theta(f_table, m, counts)
        theta = ThetaPolynomial(
            tuple(int(c) for c in counts.sum(axis=0)), m
        )
        return ExactInstance(n, Fraction(num, den), w, d, m, f_table, theta)

    return _cached(key, build)


def enumerate_theta(n: int, eta, w: Window, d: int = 2,
                    cap: int = DEFAULT_CAP) -> ThetaPolynomial:
    """Exact escape polynomial by iterating all window configurations."""
    return exact_instance(n, eta, w, d, cap).theta


def thetas_upto(n: int, eta, w: Window, d: int = 2,
                cap: int = DEFAULT_CAP) -> list[ThetaPolynomial]:
    """Theta polynomials for every shift 0..n (for partial sums)."""
    return [enumerate_theta(k, eta, w, d, cap) for k in range(n + 1)]


def exact_influences(n: int, eta, w: Window, d: int = 2,
                     cap: int = DEFAULT_CAP) -> dict:
    """Per-vertex exact pivotality polynomials for the windowed event."""
    m = _check_cap(w, d, cap)
    num, den = _kernels.eta_pair(eta)
    key = ("influence", d, w.radius, num, den, n)

    def build():
        inst = exact_instance(n, eta, w, d, cap)
        t = _kernels.window_table(d, w.radius)
        counts = np.zeros((_kernels.N_BLOCKS, m, m + 1), dtype=np.int64)
        _kernels._count_influence(inst.f_table, m, counts)
        merged = counts.sum(axis=0)
        out = {}
        for v in range(m):
            row = merged[v]
            if row.any():
                vert = tuple(int(c) for c in t.coords[v])
                out[vert] = ThetaPolynomial(tuple(int(c) for c in row), m)
        return out

    return _cached(key, build)


def exact_revealments(n: int, eta, w: Window, k: int, d: int = 2,
                      cap: int = DEFAULT_CAP) -> dict:
    """Per-vertex exact revealment polynomials under the tree T_k.

    Runs the deterministic tree on every configuration; while doing so,
    cross-checks the tree outcome against the enumerated f-table and raises
    if they ever disagree (the tree must determine the windowed event).
    """
    if not 1 <= k <= n:
        raise ValueError("tree index k must satisfy 1 <= k <= n")
    m = _check_cap(w, d, cap)
    num, den = _kernels.eta_pair(eta)
    key = ("revealment", d, w.radius, num, den, n, k)

    def build():
        inst = exact_instance(n, eta, w, d, cap)
        t = _kernels.window_table(d, w.radius)
        in_k = _kernels.cone_mask(d, w.radius, num, den, k)
        bnd, bplus = _kernels.boundary_masks(d, w.radius, num, den, k)
        in_n = _kernels.cone_mask(d, w.radius, num, den, n)
        cap_rounds = w.radius + m + 1
        rev = np.zeros((_kernels.N_BLOCKS, m, m + 1), dtype=np.int64)
        mism = np.zeros(_kernels.N_BLOCKS, dtype=np.int64)
        _kernels._tree_enumerate(
            t.nbr, t.norm_inf, in_k, bnd, bplus, in_n, t.origin,
            n, w.radius, cap_rounds, inst.f_table, rev, mism,
        )
        bad = int(mism.sum())
        if bad:
            raise RuntimeError(
                f"exploration tree disagreed with direct evaluation on {bad} configurations"
            )
        merged = rev.sum(axis=0)
        out = {}
        for v in range(m):
            row = merged[v]
            if row.any():
                vert = tuple(int(c) for c in t.coords[v])
                out[vert] = ThetaPolynomial(tuple(int(c) for c in row), m)
        return out

    return _cached(key, build)


class ConfigField:
    """Field whose site values come from a fixed window configuration.

    Sites outside the window never get queried by windowed searches; asking
    for one is a bug, so it raises.
    """

    def __init__(self, bits: dict, d: int):
        self.bits = dict(bits)
        self.d = d

    def sample(self, v: tuple, p: float) -> int:
        return self.bits[v]


def enumerate_theta_reference(n: int, eta, w: Window, d: int = 2,
                              cap: int = 14) -> ThetaPolynomial:
    """Pure-Python enumeration (tiny windows); oracle for the compiled path."""
    from .reach import escapes_cone_reference

    m = _check_cap(w, d, cap)
    verts = sorted(w.iter_points(d))
    counts = [0] * (m + 1)
    for mask in range(1 << m):
        bits = {v: (mask >> i) & 1 for i, v in enumerate(verts)}
        field = ConfigField(bits, d)
        if escapes_cone_reference(field, 0.5, n, eta, w):
            counts[bin(mask).count("1")] += 1
    return ThetaPolynomial(tuple(counts), m)
