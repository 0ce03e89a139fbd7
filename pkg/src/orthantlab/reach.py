"""Window-truncated directed reachability and the profile quantities.

Every search is confined to a sup-norm window: paths may only use vertices
inside it, so each answer is exact for the windowed event and carries a
truncation flag saying whether a larger window could change it.  The
pure-Python breadth-first routines here are the reference; `_kernels`
holds compiled equivalents used by the estimators, and the tests pin the
two routes together.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _kernels
from .geometry import Cone, Window, cone_contains
from .lattice import ModelKind, SiteField, FlippedField, out_neighbors


@dataclass(frozen=True)
class ReachResult:
    """Forward-cluster answer within a window.

    frontier_hit_window=False certifies the answer is window-independent:
    no search path was cut at the boundary.
    """

    reached: frozenset
    hit_target: bool | None
    frontier_hit_window: bool


@dataclass(frozen=True)
class ProfileValue:
    """A windowed infimum over shifts; None means no hit in the scanned
    range (an upper-truncation artifact, never minus infinity)."""

    value: int | None
    window: Window


def forward_cluster(model: ModelKind, field, p: float, v: tuple, w: Window,
                    target=None) -> ReachResult:
    """Breadth-first closure of v under out-edges, never leaving the window.

    `target` is an optional predicate; when given, the search stops at the
    first reached vertex satisfying it and reports hit_target.
    """
    if not w.contains(v):
        raise ValueError(f"start vertex {v} outside window of radius {w.radius}")
    reached = {v}
    frontier_hit = False
    hit = bool(target(v)) if target is not None else None
    queue = deque([v])
    if hit:
        queue.clear()
    while queue:
        x = queue.popleft()
        for y in out_neighbors(model, field, x, p):
            if not w.contains(y):
                frontier_hit = True
                continue
            if y not in reached:
                reached.add(y)
                if target is not None and target(y):
                    return ReachResult(frozenset(reached), True, frontier_hit)
                queue.append(y)
    if target is not None and hit is None:
        hit = False
    return ReachResult(frozenset(reached), hit, frontier_hit)


def _kernel_key(field):
    """(seed, flip_index_vertex) when the field is kernel-representable."""
    if isinstance(field, SiteField):
        return field.seed, None
    if isinstance(field, FlippedField) and isinstance(field.base, SiteField):
        return field.base.seed, field.pivot
    return None


def escapes_cone(field, p: float, n: int, eta, w: Window) -> bool:
    """Does the origin's half-orthant cluster exit the cone shifted by -n*1?

    Evaluated in the half-orthant model; monotone nonincreasing in p under
    the shared uniform field and nondecreasing in the window radius.
    """
    if n < 0:
        raise ValueError("cone shift n must be nonnegative")
    d = field.d
    key = _kernel_key(field)
    if key is not None:
        seed, pivot = key
        t = _kernels.window_table(d, w.radius)
        num, den = _kernels.eta_pair(eta)
        target = (1 - _kernels.cone_mask(d, w.radius, num, den, n)).astype(np.uint8)
        u = _kernels.window_uniforms_njit(seed, t)
        flip_idx = -1 if pivot is None else t.index_of(pivot)
        stamp = np.zeros(t.size, dtype=np.int64)
        stack = np.empty(t.size, dtype=np.int32)
        hit, _ = _kernels._bfs_hit(
            u, p, flip_idx, 1, t.nbr, target, t.origin, stamp, 1, stack
        )
        return bool(hit)
    return escapes_cone_reference(field, p, n, eta, w)


def escapes_cone_reference(field, p: float, n: int, eta, w: Window) -> bool:
    """Pure-Python escape test; same windowed event as escapes_cone."""
    cone = Cone(Fraction(eta), n)
    res = forward_cluster(
        ModelKind.HALF_ORTHANT, field, p, (0,) * field.d, w,
        target=lambda x: not cone_contains(cone, x),
    )
    return bool(res.hit_target)


def _reached_set(model, field, p, w, start=None):
    d = field.d
    start = (0,) * d if start is None else start
    key = _kernel_key(field)
    if key is not None:
        seed, pivot = key
        t = _kernels.window_table(d, w.radius)
        u = _kernels.window_uniforms_njit(seed, t)
        flip_idx = -1 if pivot is None else t.index_of(pivot)
        reached = np.zeros(t.size, dtype=np.uint8)
        code = 0 if model is ModelKind.ORTHANT else 1
        frontier = _kernels._bfs_closure(
            u, p, flip_idx, code, t.nbr, t.index_of(start), reached
        )
        return t, reached, bool(frontier)
    res = forward_cluster(model, field, p, start, w)
    return None, res.reached, res.frontier_hit_window


def l_profile(model: ModelKind, field, p: float, v: tuple, w: Window,
              k_range=None) -> ProfileValue:
    """Minimal k in k_range with v + k*e1 reached from the origin.

    Default scan starts at -(radius * d): no path inside the window can
    push the coordinate sum lower than that.
    """
    d = field.d
    if k_range is None:
        k_range = range(-w.radius * d, w.radius * d + 1)
    t, reached, _ = _reached_set(model, field, p, w)
    for k in k_range:
        pt = (v[0] + k,) + tuple(v[1:])
        if not w.contains(pt):
            continue
        ok = reached[t.index_of(pt)] if t is not None else (pt in reached)
        if ok:
            return ProfileValue(int(k), w)
    return ProfileValue(None, w)


def beta(model: ModelKind, field, p: float, u: tuple, n: int, w: Window,
         k_range=None) -> ProfileValue:
    """Minimal k with k*1 + n*u reached from the origin (windowed)."""
    d = field.d
    if k_range is None:
        k_range = range(-w.radius * d, w.radius * d + 1)
    t, reached, _ = _reached_set(model, field, p, w)
    for k in k_range:
        pt = tuple(k + n * c for c in u)
        if not w.contains(pt):
            continue
        ok = reached[t.index_of(pt)] if t is not None else (pt in reached)
        if ok:
            return ProfileValue(int(k), w)
    return ProfileValue(None, w)


def filled_cluster(model: ModelKind, field, p: float, w: Window) -> set[tuple]:
    """The origin's cluster with +e1 rays added, truncated to the window."""
    d = field.d
    t, reached, _ = _reached_set(model, field, p, w)
    if t is not None:
        side = 2 * w.radius + 1
        grid = reached.reshape((side,) * d).astype(bool)
        filled = np.logical_or.accumulate(grid, axis=0)
        pts = np.argwhere(filled) - w.radius
        return {tuple(int(c) for c in row) for row in pts}
    out = set()
    for x in reached:
        k = 0
        while w.contains((x[0] + k,) + x[1:]):
            out.add((x[0] + k,) + x[1:])
            k += 1
    return out


def fill_agreement(field, p: float, w: Window) -> dict:
    """Compare the half-orthant cluster with the filled orthant cluster.

    The filled orthant cluster is always a subset; the excess fraction is a
    window-convergence diagnostic for the identity between the two
    leftmost-profile constructions.
    """
    half = _reached_as_set(ModelKind.HALF_ORTHANT, field, p, w)
    filled = filled_cluster(ModelKind.ORTHANT, field, p, w)
    extra = half - filled
    missing = filled - half
    return {
        "half_size": len(half),
        "filled_size": len(filled),
        "half_only": len(extra),
        "filled_only": len(missing),
        "excess_rate": len(extra) / max(1, len(half)),
    }


def _reached_as_set(model, field, p, w):
    t, reached, _ = _reached_set(model, field, p, w)
    if t is None:
        return set(reached)
    idx = np.flatnonzero(reached)
    return {tuple(int(c) for c in t.coords[i]) for i in idx}
