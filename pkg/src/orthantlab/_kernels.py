"""Window tabulation and compiled hot loops.

Everything here is an accelerator behind the pure-Python reference
implementations in `lattice`, `reach` and `explore`; the test suite checks
bit-for-bit agreement between the two routes.

Windows are linearized in C order of (x + r), which coincides with the
lexicographic order of the coordinate tuples — the tree kernel relies on
"smallest index = lexicographically minimal vertex".

All Monte Carlo kernels accumulate into a fixed number of blocks that is
independent of the numba thread count; block results are merged in index
order, so outputs are identical for any `--threads` setting.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

import numpy as np
from numba import njit, prange

from .lattice import _GAMMA, _MASK64, _MIX1, _MIX2, SEED_STREAM, SITE_STREAM, WALK_STREAM

N_BLOCKS = 256

U64 = np.uint64
_G = U64(_GAMMA)
_M1 = U64(_MIX1)
_M2 = U64(_MIX2)
_SITE = U64(SITE_STREAM)
_WALK = U64(WALK_STREAM)
_SEED = U64(SEED_STREAM)
_INV53 = 2.0**-53


# ---------------------------------------------------------------------------
# window tables


class WindowTable:
    """Dense tabulation of a sup-norm window: coordinates and neighbor indices.

    nbr columns 0..d-1 are the +e_a neighbors, d..2d-1 the -e_a neighbors;
    -1 marks a neighbor outside the window.
    """

    def __init__(self, d: int, radius: int):
        self.d = d
        self.radius = radius
        side = 2 * radius + 1
        self.size = side**d
        axes = [np.arange(-radius, radius + 1, dtype=np.int64)] * d
        mesh = np.meshgrid(*axes, indexing="ij")
        self.coords = np.stack([m.ravel() for m in mesh], axis=1)
        strides = np.array([side ** (d - 1 - a) for a in range(d)], dtype=np.int64)
        self.nbr = np.full((self.size, 2 * d), -1, dtype=np.int32)
        idx = np.arange(self.size, dtype=np.int64)
        for a in range(d):
            ok = self.coords[:, a] < radius
            self.nbr[ok, a] = idx[ok] + strides[a]
            ok = self.coords[:, a] > -radius
            self.nbr[ok, d + a] = idx[ok] - strides[a]
        self.norm_inf = np.abs(self.coords).max(axis=1).astype(np.int32)
        self.origin = int(np.flatnonzero(self.norm_inf == 0)[0])

    def index_of(self, v) -> int:
        side = 2 * self.radius + 1
        i = 0
        for c in v:
            if not -self.radius <= c <= self.radius:
                return -1
            i = i * side + (c + self.radius)
        return int(i)


@lru_cache(maxsize=64)
def window_table(d: int, radius: int) -> WindowTable:
    return WindowTable(d, radius)


@lru_cache(maxsize=256)
def cone_mask(d: int, radius: int, eta_num: int, eta_den: int, shift: int):
    """Exact-integer membership of every window point in the shifted cone."""
    t = window_table(d, radius)
    sh = t.coords + shift
    s = sh.sum(axis=1)
    l1 = np.abs(sh).sum(axis=1)
    return (eta_den * s >= eta_num * l1).astype(np.uint8)


@lru_cache(maxsize=256)
def boundary_masks(d: int, radius: int, eta_num: int, eta_den: int, shift: int):
    """(inner boundary, outer boundary) masks of the shifted cone.

    Neighbors outside the window are evaluated directly on coordinates, so
    the masks agree with the infinite-lattice boundary restricted to the
    window.
    """
    t = window_table(d, radius)
    inside = cone_mask(d, radius, eta_num, eta_den, shift).astype(bool)

    def member(pts):
        sh = pts + shift
        return eta_den * sh.sum(axis=1) >= eta_num * np.abs(sh).sum(axis=1)

    any_out = np.zeros(t.size, dtype=bool)
    any_in = np.zeros(t.size, dtype=bool)
    for a in range(d):
        for sgn in (+1, -1):
            pts = t.coords.copy()
            pts[:, a] += sgn
            m = member(pts)
            any_out |= ~m
            any_in |= m
    bnd = (inside & any_out).astype(np.uint8)
    bplus = (~inside & any_in).astype(np.uint8)
    return bnd, bplus


def eta_pair(eta) -> tuple[int, int]:
    f = Fraction(eta)
    return f.numerator, f.denominator


# ---------------------------------------------------------------------------
# hashing (must match lattice.mix64 / hash_words bit for bit)


@njit(cache=True, inline="always")
def _mix64(z):
    z = z + _G
    z = (z ^ (z >> U64(30))) * _M1
    z = (z ^ (z >> U64(27))) * _M2
    return z ^ (z >> U64(31))


@njit(cache=True)
def _site_u01(seed, coords, m, d):
    h = _mix64(seed ^ _SITE)
    for a in range(d):
        h = _mix64(h ^ U64(coords[m, a]))
    return np.float64(h >> U64(11)) * _INV53


@njit(cache=True)
def _site_u01_vec(seed, x0, x1, x2, x3, d):
    h = _mix64(seed ^ _SITE)
    h = _mix64(h ^ U64(x0))
    h = _mix64(h ^ U64(x1))
    if d > 2:
        h = _mix64(h ^ U64(x2))
    if d > 3:
        h = _mix64(h ^ U64(x3))
    return np.float64(h >> U64(11)) * _INV53


@njit(cache=True)
def _subseed1(master, idx):
    h = _mix64(master ^ _SEED)
    return _mix64(h ^ U64(idx))


@njit(cache=True)
def _fill_uniforms(seed, coords, u):
    m, d = coords.shape
    for i in range(m):
        u[i] = _site_u01(seed, coords, i, d)


def window_uniforms_njit(seed: int, table: WindowTable) -> np.ndarray:
    u = np.empty(table.size, dtype=np.float64)
    _fill_uniforms(U64(seed & _MASK64), table.coords, u)
    return u


# ---------------------------------------------------------------------------
# reachability kernels


@njit(cache=True, inline="always")
def _site_open(u, p, flip_idx, x):
    val = u[x] < p
    if x == flip_idx:
        val = not val
    return val


@njit(cache=True)
def _bfs_hit(u, p, flip_idx, model_code, nbr, target, origin, stamp, sval, stack):
    """Early-exit search: does the cluster of `origin` hit `target`?

    Returns (hit, frontier_hit).  All paths confined to the window; a cut
    edge (neighbor index -1) sets frontier_hit.
    """
    d = nbr.shape[1] // 2
    if target[origin]:
        return True, False
    top = 0
    stack[top] = origin
    top += 1
    stamp[origin] = sval
    frontier = False
    while top > 0:
        top -= 1
        x = stack[top]
        bit = _site_open(u, p, flip_idx, x)
        if model_code == 0:
            lo, hi = (0, d) if bit else (d, 2 * d)
        else:
            lo, hi = (0, d) if bit else (0, 2 * d)
        for a in range(lo, hi):
            y = nbr[x, a]
            if y < 0:
                frontier = True
                continue
            if stamp[y] != sval:
                if target[y]:
                    return True, frontier
                stamp[y] = sval
                stack[top] = y
                top += 1
    return False, frontier


@njit(cache=True)
def _bfs_closure(u, p, flip_idx, model_code, nbr, origin, reached):
    """Full forward closure of `origin` within the window (no early exit)."""
    d = nbr.shape[1] // 2
    m = nbr.shape[0]
    stack = np.empty(m, dtype=np.int32)
    top = 0
    stack[top] = origin
    top += 1
    reached[origin] = 1
    frontier = False
    while top > 0:
        top -= 1
        x = stack[top]
        bit = _site_open(u, p, flip_idx, x)
        if model_code == 0:
            lo, hi = (0, d) if bit else (d, 2 * d)
        else:
            lo, hi = (0, d) if bit else (0, 2 * d)
        for a in range(lo, hi):
            y = nbr[x, a]
            if y < 0:
                frontier = True
                continue
            if not reached[y]:
                reached[y] = 1
                stack[top] = y
                top += 1
    return frontier


@njit(cache=True, parallel=True)
def _theta_mc(master, trials, coords, nbr, targets, origin, p_grid, successes, truncated):
    """Escape counts over (target, p) cells; block-deterministic."""
    nn = targets.shape[0]
    npg = p_grid.shape[0]
    m = nbr.shape[0]
    nblocks = successes.shape[0]
    span = (trials + nblocks - 1) // nblocks
    for b in prange(nblocks):
        u = np.empty(m, dtype=np.float64)
        stamp = np.zeros(m, dtype=np.int64)
        stack = np.empty(m, dtype=np.int32)
        sval = 0
        lo = b * span
        hi = min(trials, lo + span)
        for t in range(lo, hi):
            seed_t = _subseed1(master, t)
            _fill_uniforms(seed_t, coords, u)
            for ni in range(nn):
                for pi in range(npg):
                    sval += 1
                    hit, frontier = _bfs_hit(
                        u, p_grid[pi], -1, 1, nbr, targets[ni], origin, stamp, sval, stack
                    )
                    if hit:
                        successes[b, ni, pi] += 1
                    elif frontier:
                        truncated[b, ni, pi] += 1


@njit(cache=True)
def _escape_matrix(seed, coords, nbr, targets, origin, p_grid, out):
    """Per-realization escape indicators over (target, p) for one seed."""
    nn = targets.shape[0]
    npg = p_grid.shape[0]
    m = nbr.shape[0]
    u = np.empty(m, dtype=np.float64)
    stamp = np.zeros(m, dtype=np.int64)
    stack = np.empty(m, dtype=np.int32)
    _fill_uniforms(seed, coords, u)
    sval = 0
    for ni in range(nn):
        for pi in range(npg):
            sval += 1
            hit, _ = _bfs_hit(
                u, p_grid[pi], -1, 1, nbr, targets[ni], origin, stamp, sval, stack
            )
            out[ni, pi] = 1 if hit else 0


@njit(cache=True, parallel=True)
def _influence_mc(master, trials, coords, nbr, target, origin, p, flip_idx, changed):
    """Count trials where flipping `flip_idx` changes the escape indicator."""
    m = nbr.shape[0]
    nblocks = changed.shape[0]
    span = (trials + nblocks - 1) // nblocks
    for b in prange(nblocks):
        u = np.empty(m, dtype=np.float64)
        stamp = np.zeros(m, dtype=np.int64)
        stack = np.empty(m, dtype=np.int32)
        sval = 0
        lo = b * span
        hi = min(trials, lo + span)
        for t in range(lo, hi):
            seed_t = _subseed1(master, t)
            _fill_uniforms(seed_t, coords, u)
            sval += 1
            base, _ = _bfs_hit(u, p, -1, 1, nbr, target, origin, stamp, sval, stack)
            sval += 1
            flipped, _ = _bfs_hit(
                u, p, flip_idx, 1, nbr, target, origin, stamp, sval, stack
            )
            if base != flipped:
                changed[b] += 1


# ---------------------------------------------------------------------------
# exact enumeration (small windows, every site configuration)


@njit(cache=True, inline="always")
def _popcount(x):
    x = x - ((x >> U64(1)) & U64(0x5555555555555555))
    x = (x & U64(0x3333333333333333)) + ((x >> U64(2)) & U64(0x3333333333333333))
    x = (x + (x >> U64(4))) & U64(0x0F0F0F0F0F0F0F0F)
    return (x * U64(0x0101010101010101)) >> U64(56)


@njit(cache=True, inline="always")
def _config_escape(mask, nbr, target, origin, stack, stamp, sval, d):
    if target[origin]:
        return True
    top = 0
    stack[top] = origin
    top += 1
    stamp[origin] = sval
    while top > 0:
        top -= 1
        x = stack[top]
        hi = d if (mask >> np.int64(x)) & np.int64(1) else 2 * d
        for a in range(hi):
            y = nbr[x, a]
            if y < 0:
                continue
            if stamp[y] != sval:
                if target[y]:
                    return True
                stamp[y] = sval
                stack[top] = y
                top += 1
    return False


@njit(cache=True, parallel=True)
def _enumerate_f(nbr, target, origin, f_table):
    """Windowed half-orthant escape indicator for every configuration."""
    m = nbr.shape[0]
    d = nbr.shape[1] // 2
    total = np.int64(1) << np.int64(m)
    span = (total + N_BLOCKS - 1) // N_BLOCKS
    for b in prange(N_BLOCKS):
        stack = np.empty(m, dtype=np.int32)
        stamp = np.zeros(m, dtype=np.int64)
        sval = 0
        lo = b * span
        hi = min(total, lo + span)
        for mask in range(lo, hi):
            sval += 1
            f_table[mask] = 1 if _config_escape(
                np.int64(mask), nbr, target, origin, stack, stamp, sval, d
            ) else 0


@njit(cache=True, parallel=True)
def _count_theta(f_table, m, counts):
    """counts[b, j] = one-site count histogram of configurations with f=1."""
    total = np.int64(1) << np.int64(m)
    span = (total + N_BLOCKS - 1) // N_BLOCKS
    for b in prange(N_BLOCKS):
        lo = b * span
        hi = min(total, lo + span)
        for mask in range(lo, hi):
            if f_table[mask]:
                counts[b, _popcount(U64(mask))] += 1


@njit(cache=True, parallel=True)
def _count_influence(f_table, m, counts):
    """counts[b, v, j] = configs with j one-sites where flipping v changes f."""
    total = np.int64(1) << np.int64(m)
    span = (total + N_BLOCKS - 1) // N_BLOCKS
    for b in prange(N_BLOCKS):
        lo = b * span
        hi = min(total, lo + span)
        for mask in range(lo, hi):
            fv = f_table[mask]
            j = _popcount(U64(mask))
            for v in range(m):
                if fv != f_table[mask ^ (np.int64(1) << np.int64(v))]:
                    counts[b, v, j] += 1


# ---------------------------------------------------------------------------
# exploration tree (compiled twin of explore.run_tree; half-orthant edges)
#
# Incremental closures, all marked at push time:
#   reach0    = vertices reachable from the origin through revealed sites
#   reachBnd  = vertices reaching the outer cone boundary through revealed
#               sites (the outer boundary itself is seeded at start)
#   reachPlus = forward closure, through revealed sites, of outer-boundary
#               vertices already reached from the origin
# Phase-one activation adds unrevealed cone vertices next to a revealed
# vertex in reachBnd; reachPlus members migrate to the phase-two set.


@njit(cache=True)
def _t_activate(z, nbr, in_kcone, inR, inB, inA):
    for a in range(nbr.shape[1]):
        w = nbr[z, a]
        if w >= 0 and in_kcone[w] and not inR[w] and not inB[w]:
            inA[w] = 1


@njit(cache=True)
def _t_add_reachbnd(x0, bits, nbr, in_kcone, inR, inA, inB, reachBnd, stack):
    d = nbr.shape[1] // 2
    if reachBnd[x0]:
        return
    reachBnd[x0] = 1
    top = 0
    stack[top] = x0
    top += 1
    while top > 0:
        top -= 1
        z = stack[top]
        if inR[z]:
            _t_activate(z, nbr, in_kcone, inR, inB, inA)
        for a in range(d):
            x = nbr[z, d + a]  # source of the positive edge into z
            if x >= 0 and inR[x] and not reachBnd[x]:
                reachBnd[x] = 1
                stack[top] = x
                top += 1
            x = nbr[z, a]  # source of the negative edge into z
            if x >= 0 and inR[x] and bits[x] == 0 and not reachBnd[x]:
                reachBnd[x] = 1
                stack[top] = x
                top += 1


@njit(cache=True)
def _t_seed_reachplus(x0, bits, nbr, inR, inA, inB, reachPlus, stack):
    d = nbr.shape[1] // 2
    if reachPlus[x0]:
        return
    reachPlus[x0] = 1
    if not inR[x0]:
        inB[x0] = 1
        inA[x0] = 0
        return
    top = 0
    stack[top] = x0
    top += 1
    while top > 0:
        top -= 1
        z = stack[top]
        hi = d if bits[z] else 2 * d
        for a in range(hi):
            w = nbr[z, a]
            if w >= 0 and not reachPlus[w]:
                reachPlus[w] = 1
                if inR[w]:
                    stack[top] = w
                    top += 1
                else:
                    inB[w] = 1
                    inA[w] = 0


@njit(cache=True)
def _t_add_reach0(y0, bits, nbr, in_ncone, bplus, inR, inA, inB, reach0, reachPlus, stack, stack2):
    """Add y0 to reach0 and close through revealed sites. True on escape."""
    d = nbr.shape[1] // 2
    if reach0[y0]:
        return False
    reach0[y0] = 1
    if not in_ncone[y0]:
        return True
    if bplus[y0]:
        _t_seed_reachplus(y0, bits, nbr, inR, inA, inB, reachPlus, stack2)
    top = 0
    stack[top] = y0
    top += 1
    while top > 0:
        top -= 1
        y = stack[top]
        if not inR[y]:
            continue
        hi = d if bits[y] else 2 * d
        for a in range(hi):
            w = nbr[y, a]
            if w >= 0 and not reach0[w]:
                reach0[w] = 1
                if not in_ncone[w]:
                    return True
                if bplus[w]:
                    _t_seed_reachplus(w, bits, nbr, inR, inA, inB, reachPlus, stack2)
                stack[top] = w
                top += 1
    return False


@njit(cache=True)
def _t_reveal_update(v, bits, nbr, in_kcone, in_ncone, bplus, inR, inA, inB,
                     reach0, reachBnd, reachPlus, stack, stack2):
    d = nbr.shape[1] // 2
    inR[v] = 1
    inA[v] = 0
    inB[v] = 0
    hi = d if bits[v] else 2 * d
    if reachBnd[v]:
        _t_activate(v, nbr, in_kcone, inR, inB, inA)
    else:
        for a in range(hi):
            w = nbr[v, a]
            if w >= 0 and reachBnd[w]:
                _t_add_reachbnd(v, bits, nbr, in_kcone, inR, inA, inB, reachBnd, stack)
                break
    if reach0[v]:
        for a in range(hi):
            w = nbr[v, a]
            if w >= 0:
                if _t_add_reach0(w, bits, nbr, in_ncone, bplus, inR, inA, inB,
                                 reach0, reachPlus, stack, stack2):
                    return True
    if reachPlus[v]:
        for a in range(hi):
            w = nbr[v, a]
            if w >= 0:
                _t_seed_reachplus(w, bits, nbr, inR, inA, inB, reachPlus, stack2)
    return False


@njit(cache=True)
def _tree_run(bits, nbr, norm_inf, in_kcone, bnd, bplus, in_ncone, origin,
              n_shift, r_w, round_cap, order, phases, round_of,
              inA, inB, inR, reach0, reachBnd, reachPlus, stack, stack2):
    """One exploration run. Returns (status, reveals): status 1 = escaped,
    0 = window exhausted, 2 = round cap exceeded."""
    m = nbr.shape[0]
    for x in range(m):
        inA[x] = 0
        inB[x] = 0
        inR[x] = 0
        reach0[x] = 0
        reachBnd[x] = 0
        reachPlus[x] = 0
    for x in range(m):
        if bplus[x]:
            reachBnd[x] = 1
    reach0[origin] = 1
    step = 0
    i_round = n_shift
    while True:
        if i_round > round_cap:
            return 2, step
        for x in range(m):
            if bnd[x] and norm_inf[x] <= i_round and not inR[x] and not inB[x]:
                inA[x] = 1
        escaped = False
        while True:  # phase one: drain the cone-interior active set
            v = -1
            for x in range(m):
                if inA[x] and norm_inf[x] <= i_round:
                    v = x
                    break
            if v < 0:
                break
            order[step] = v
            phases[step] = 1
            round_of[step] = i_round
            step += 1
            if _t_reveal_update(v, bits, nbr, in_kcone, in_ncone, bplus, inR,
                                inA, inB, reach0, reachBnd, reachPlus, stack, stack2):
                escaped = True
                break
        if not escaped:
            while True:  # phase two: drain the beyond-boundary active set
                v = -1
                for x in range(m):
                    if inB[x] and norm_inf[x] <= i_round:
                        v = x
                        break
                if v < 0:
                    break
                order[step] = v
                phases[step] = 2
                round_of[step] = i_round
                step += 1
                if _t_reveal_update(v, bits, nbr, in_kcone, in_ncone, bplus, inR,
                                    inA, inB, reach0, reachBnd, reachPlus, stack, stack2):
                    escaped = True
                    break
        if escaped:
            return 1, step
        if i_round >= r_w:
            alive = False
            for x in range(m):
                if inA[x] or inB[x]:
                    alive = True
                    break
            if not alive:
                return 0, step
        i_round += 1


@njit(cache=True, parallel=True)
def _tree_enumerate(nbr, norm_inf, in_kcone, bnd, bplus, in_ncone, origin,
                    n_shift, r_w, round_cap, f_table, rev_counts, mismatches):
    """Run the deterministic tree on every configuration of the window.

    rev_counts[b, v, j] counts configurations with j one-sites in which v
    was revealed; mismatches[b] counts disagreements with f_table (must end
    up zero: the tree determines the windowed escape event).
    """
    m = nbr.shape[0]
    total = np.int64(1) << np.int64(m)
    span = (total + N_BLOCKS - 1) // N_BLOCKS
    for b in prange(N_BLOCKS):
        bits = np.empty(m, dtype=np.uint8)
        inA = np.empty(m, dtype=np.uint8)
        inB = np.empty(m, dtype=np.uint8)
        inR = np.empty(m, dtype=np.uint8)
        reach0 = np.empty(m, dtype=np.uint8)
        reachBnd = np.empty(m, dtype=np.uint8)
        reachPlus = np.empty(m, dtype=np.uint8)
        stack = np.empty(m, dtype=np.int32)
        stack2 = np.empty(m, dtype=np.int32)
        order = np.empty(m, dtype=np.int32)
        phases = np.empty(m, dtype=np.uint8)
        round_of = np.empty(m, dtype=np.int32)
        lo = b * span
        hi = min(total, lo + span)
        for mask in range(lo, hi):
            for v in range(m):
                bits[v] = (mask >> v) & 1
            status, nsteps = _tree_run(
                bits, nbr, norm_inf, in_kcone, bnd, bplus, in_ncone, origin,
                n_shift, r_w, round_cap, order, phases, round_of,
                inA, inB, inR, reach0, reachBnd, reachPlus, stack, stack2,
            )
            f = 1 if status == 1 else 0
            if f != f_table[mask]:
                mismatches[b] += 1
            j = _popcount(U64(mask))
            for s in range(nsteps):
                rev_counts[b, order[s], j] += 1


# ---------------------------------------------------------------------------
# random walk on the orthant-model cluster


@njit(cache=True)
def _walk_u01(walk_seed, t):
    h = _mix64(walk_seed ^ _WALK)
    h = _mix64(h ^ U64(t))
    return np.float64(h >> U64(11)) * _INV53


@njit(cache=True)
def _env_u01(env_seed, pos, d):
    h = _mix64(env_seed ^ _SITE)
    for a in range(d):
        h = _mix64(h ^ U64(pos[a]))
    return np.float64(h >> U64(11)) * _INV53


@njit(cache=True)
def _walk_kernel(env_seed, walk_seed, p, steps, d, out):
    """Uniform choice among the d orthant out-edges, environment hashed lazily."""
    pos = np.zeros(d, dtype=np.int64)
    for a in range(d):
        out[0, a] = 0
    for t in range(steps):
        bit = _env_u01(env_seed, pos, d) < p
        axis = int(_walk_u01(walk_seed, t) * d)
        if axis >= d:
            axis = d - 1
        pos[axis] += 1 if bit else -1
        for a in range(d):
            out[t + 1, a] = pos[a]
