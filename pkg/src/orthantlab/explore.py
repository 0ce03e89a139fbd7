"""Two-phase exploration trees for the cone-escape event, with revealment
and influence bookkeeping.

The tree indexed by k explores, in rounds of growing sup-norm balls, the
part of the cone shifted by -k*1 whose sites can reach the cone's outer
boundary through revealed sites (phase one), and the forward cluster of the
origin beyond that boundary (phase two).  It stops as soon as the revealed
sites alone certify that the origin reaches outside the cone shifted by
-n*1, and otherwise runs until the window is exhausted, which settles the
windowed event to 0.

Three incremental closures drive the updates after each reveal:

* ``reach0``    — vertices reachable from the origin through revealed sites;
* ``reach_bnd`` — vertices that reach the outer boundary through revealed
  sites (outer-boundary vertices count trivially);
* ``reach_plus``— forward closure, through revealed sites, of outer-boundary
  vertices already in ``reach0``; its unrevealed members form phase two's
  active set.

Phase one's active set receives, besides the boundary itself, every
unrevealed cone vertex adjacent to a revealed vertex in ``reach_bnd``.
This activation fires no matter which phase revealed the evidence; see the
package notes for why the update must be evidence-driven.

The compiled twin in `_kernels` reproduces the reveal sequence bit for bit;
tests compare the two on random and exhaustive instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _kernels
from .errors import RoundCapExceeded
from .geometry import Cone, Window, cone_boundary, cone_contains, cone_outer_boundary
from .lattice import SiteField, subseed
from .reach import escapes_cone
from . import oracle as _oracle


@dataclass
class ExplorationTrace:
    """Full record of one tree run: reveal order, phases, rounds, outcome."""

    k: int
    n: int
    eta: Fraction
    p: float
    window: Window
    outcome: str  # "escaped" | "exhausted"
    revealed: list  # (vertex, bit, phase 'A'|'B', round)
    active_a: frozenset
    active_b: frozenset
    snapshots: list | None = None

    @property
    def revealed_vertices(self):
        return [r[0] for r in self.revealed]


@dataclass(frozen=True)
class InfluenceEstimate:
    v: tuple
    trials: int
    flips_changed: int
    estimate: float
    stderr: float


class _Escape(Exception):
    pass


class _TreeState:
    """Mutable exploration state over coordinate tuples (reference path)."""

    def __init__(self, field, p, n, eta, k, w):
        self.field = field
        self.p = p
        self.d = field.d
        self.w = w
        self.cone_k = Cone(Fraction(eta), k)
        self.cone_n = Cone(Fraction(eta), n)
        self.bnd = cone_boundary(self.cone_k, w, self.d)
        self.bplus = cone_outer_boundary(self.cone_k, w, self.d)
        self.in_a: set = set()
        self.in_b: set = set()
        self.revealed: dict = {}
        self.reach0 = {(0,) * self.d}
        self.reach_bnd = set(self.bplus)
        self.reach_plus: set = set()
        self.trace: list = []

    # -- neighbor helpers ---------------------------------------------------

    def _out(self, v, bit):
        d = self.d
        pos = [v[:a] + (v[a] + 1,) + v[a + 1 :] for a in range(d)]
        if bit:
            return pos
        return pos + [v[:a] + (v[a] - 1,) + v[a + 1 :] for a in range(d)]

    def _undirected(self, v):
        for a in range(self.d):
            yield v[:a] + (v[a] + 1,) + v[a + 1 :]
            yield v[:a] + (v[a] - 1,) + v[a + 1 :]

    # -- incremental closures -----------------------------------------------

    def _activate(self, z):
        for w_ in self._undirected(z):
            if (
                self.w.contains(w_)
                and cone_contains(self.cone_k, w_)
                and w_ not in self.revealed
                and w_ not in self.in_b
            ):
                self.in_a.add(w_)

    def _add_reach_bnd(self, x0):
        if x0 in self.reach_bnd:
            return
        self.reach_bnd.add(x0)
        stack = [x0]
        while stack:
            z = stack.pop()
            if z in self.revealed:
                self._activate(z)
            for a in range(self.d):
                x = z[:a] + (z[a] - 1,) + z[a + 1 :]  # positive edge source
                if x in self.revealed and x not in self.reach_bnd:
                    self.reach_bnd.add(x)
                    stack.append(x)
                x = z[:a] + (z[a] + 1,) + z[a + 1 :]  # negative edge source
                if (
                    x in self.revealed
                    and self.revealed[x] == 0
                    and x not in self.reach_bnd
                ):
                    self.reach_bnd.add(x)
                    stack.append(x)

    def _seed_reach_plus(self, x0):
        if x0 in self.reach_plus:
            return
        self.reach_plus.add(x0)
        if x0 not in self.revealed:
            self.in_b.add(x0)
            self.in_a.discard(x0)
            return
        stack = [x0]
        while stack:
            z = stack.pop()
            for w_ in self._out(z, self.revealed[z]):
                if self.w.contains(w_) and w_ not in self.reach_plus:
                    self.reach_plus.add(w_)
                    if w_ in self.revealed:
                        stack.append(w_)
                    else:
                        self.in_b.add(w_)
                        self.in_a.discard(w_)

    def _add_reach0(self, y0):
        if y0 in self.reach0:
            return
        self.reach0.add(y0)
        if not cone_contains(self.cone_n, y0):
            raise _Escape
        if y0 in self.bplus:
            self._seed_reach_plus(y0)
        stack = [y0]
        while stack:
            y = stack.pop()
            if y not in self.revealed:
                continue
            for w_ in self._out(y, self.revealed[y]):
                if self.w.contains(w_) and w_ not in self.reach0:
                    self.reach0.add(w_)
                    if not cone_contains(self.cone_n, w_):
                        raise _Escape
                    if w_ in self.bplus:
                        self._seed_reach_plus(w_)
                    stack.append(w_)

    # -- one reveal ------------------------------------------------------

    def reveal(self, v, phase, round_i):
        bit = self.field.sample(v, self.p)
        self.revealed[v] = bit
        self.in_a.discard(v)
        self.in_b.discard(v)
        self.trace.append((v, bit, phase, round_i))
        out_v = [w_ for w_ in self._out(v, bit) if self.w.contains(w_)]
        if v in self.reach_bnd:
            self._activate(v)
        elif any(w_ in self.reach_bnd for w_ in out_v):
            self._add_reach_bnd(v)
        if v in self.reach0:
            for w_ in out_v:
                self._add_reach0(w_)
        if v in self.reach_plus:
            for w_ in out_v:
                self._seed_reach_plus(w_)


def default_round_cap(n: int, w: Window, d: int) -> int:
    """Rounds can exceed the window radius only while reveals continue, so
    radius + site count + 1 always suffices."""
    return w.radius + w.site_count(d) + 1


def run_tree(field, p: float, n: int, eta, k: int, w: Window,
             round_cap: int | None = None, record_sets: bool = False) -> ExplorationTrace:
    """Run the exploration tree T_k for the depth-n escape event.

    Raises RoundCapExceeded if the round index passes round_cap with the
    windowed event still unresolved (never silently reported as 0).
    """
    if not 1 <= k <= n:
        raise ValueError("tree index k must satisfy 1 <= k <= n")
    d = field.d
    cap = default_round_cap(n, w, d) if round_cap is None else round_cap
    st = _TreeState(field, p, n, eta, k, w)
    snapshots = [] if record_sets else None
    outcome = None
    i = n
    try:
        while True:
            if i > cap:
                raise RoundCapExceeded(i, cap)
            for x in st.bnd:
                if (
                    max(abs(c) for c in x) <= i
                    and x not in st.revealed
                    and x not in st.in_b
                ):
                    st.in_a.add(x)
            while True:
                cand = [x for x in st.in_a if max(abs(c) for c in x) <= i]
                if not cand:
                    break
                st.reveal(min(cand), "A", i)
                if record_sets:
                    snapshots.append((frozenset(st.in_a), frozenset(st.in_b), i))
            while True:
                cand = [x for x in st.in_b if max(abs(c) for c in x) <= i]
                if not cand:
                    break
                st.reveal(min(cand), "B", i)
                if record_sets:
                    snapshots.append((frozenset(st.in_a), frozenset(st.in_b), i))
            if i >= w.radius and not st.in_a and not st.in_b:
                outcome = "exhausted"
                break
            i += 1
    except _Escape:
        outcome = "escaped"
    return ExplorationTrace(
        k=k, n=n, eta=Fraction(eta), p=p, window=w, outcome=outcome,
        revealed=st.trace, active_a=frozenset(st.in_a), active_b=frozenset(st.in_b),
        snapshots=snapshots,
    )


def certifies_escape(trace: ExplorationTrace, d: int) -> bool:
    """Replay a trace's revealed sites alone and re-derive the escape.

    Sound certificates are part of the tree's contract: when the outcome is
    "escaped", the revealed sites must witness it without any other site.
    """
    bits = {v: b for v, b, _, _ in trace.revealed}
    cone_n = Cone(trace.eta, trace.n)
    w = trace.window
    reach = {(0,) * d}
    stack = [(0,) * d]
    while stack:
        x = stack.pop()
        if x not in bits:
            continue
        pos = [x[:a] + (x[a] + 1,) + x[a + 1 :] for a in range(d)]
        nxt = pos if bits[x] else pos + [
            x[:a] + (x[a] - 1,) + x[a + 1 :] for a in range(d)
        ]
        for y in nxt:
            if w.contains(y) and y not in reach:
                reach.add(y)
                if not cone_contains(cone_n, y):
                    return True
                stack.append(y)
    return False


def run_tree_fast(seed: int, p: float, n: int, eta, k: int, w: Window, d: int,
                  round_cap: int | None = None):
    """Compiled tree run; returns (outcome, revealed index array, phases, rounds).

    Same reveal sequence as run_tree on the matching SiteField.
    """
    t = _kernels.window_table(d, w.radius)
    num, den = _kernels.eta_pair(eta)
    in_k = _kernels.cone_mask(d, w.radius, num, den, k)
    bnd, bplus = _kernels.boundary_masks(d, w.radius, num, den, k)
    in_n = _kernels.cone_mask(d, w.radius, num, den, n)
    u = _kernels.window_uniforms_njit(seed, t)
    bits = (u < p).astype(np.uint8)
    cap = default_round_cap(n, w, d) if round_cap is None else round_cap
    m = t.size
    scratch = [np.empty(m, dtype=np.uint8) for _ in range(6)]
    stacks = [np.empty(m, dtype=np.int32) for _ in range(2)]
    order = np.empty(m, dtype=np.int32)
    phases = np.empty(m, dtype=np.uint8)
    round_of = np.empty(m, dtype=np.int32)
    status, steps = _kernels._tree_run(
        bits, t.nbr, t.norm_inf, in_k, bnd, bplus, in_n, t.origin,
        n, w.radius, cap, order, phases, round_of, *scratch, *stacks,
    )
    if status == 2:
        raise RoundCapExceeded(cap + 1, cap)
    outcome = "escaped" if status == 1 else "exhausted"
    return outcome, order[:steps].copy(), phases[:steps].copy(), round_of[:steps].copy()


def revealment_profile(p: float, n: int, eta, w: Window, seeds, d: int = 2) -> dict:
    """Monte Carlo revealment of every vertex under each tree T_1..T_n.

    Returns {"counts": {vertex: per-k array}, "trials": len(seeds),
    "summed": {vertex: sum over k of estimates}}.
    """
    seeds = list(seeds)
    counts: dict = {}
    for seed in seeds:
        field = SiteField(seed, d)
        for k in range(1, n + 1):
            trace = run_tree(field, p, n, eta, k, w)
            for v, _, _, _ in trace.revealed:
                arr = counts.get(v)
                if arr is None:
                    arr = counts[v] = np.zeros(n, dtype=np.int64)
                arr[k - 1] += 1
    trials = len(seeds)
    summed = {v: float(arr.sum()) / trials for v, arr in counts.items()}
    return {"counts": counts, "trials": trials, "summed": summed}


def influence(master_seed: int, p: float, n: int, eta, v: tuple, w: Window,
              trials: int, d: int = 2) -> InfluenceEstimate:
    """Frequency, over fresh fields, that flipping v changes the escape event.

    Trial seeds are derived from the master seed, so estimates for
    different v share their randomness (common random numbers).
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    t = _kernels.window_table(d, w.radius)
    num, den = _kernels.eta_pair(eta)
    target = (1 - _kernels.cone_mask(d, w.radius, num, den, n)).astype(np.uint8)
    flip_idx = t.index_of(v)
    if flip_idx < 0:
        changed = 0  # flipping outside the window cannot touch the event
    else:
        blocks = np.zeros(_kernels.N_BLOCKS, dtype=np.int64)
        _kernels._influence_mc(
            np.uint64(master_seed & 0xFFFFFFFFFFFFFFFF), trials, t.coords,
            t.nbr, target, t.origin, p, flip_idx, blocks,
        )
        changed = int(blocks.sum())
    est = changed / trials
    stderr = math.sqrt(max(est * (1.0 - est), 1.0 / trials) / trials)
    return InfluenceEstimate(tuple(v), trials, changed, est, stderr)


def osss_check(p, n: int, eta, w: Window, d: int = 2, exact: bool = True,
               cap: int = 26, master_seed: int = 0, trials: int = 2000) -> dict:
    """Verify the variance/influence/revealment inequality on a window.

    Exact mode enumerates all site configurations (the tree is deterministic
    given the configuration), reporting the per-tree inequality and the
    k-summed form with their slacks at each requested p.  Monte Carlo mode
    estimates the same terms and reports them without asserting.
    """
    p_values = list(p) if isinstance(p, (list, tuple)) else [p]
    if exact:
        return _osss_exact(p_values, n, eta, w, d, cap)
    return _osss_mc(p_values, n, eta, w, d, master_seed, trials)


def _osss_exact(p_values, n, eta, w, d, cap):
    inst = _oracle.exact_instance(n, eta, w, d, cap=cap)
    infl = _oracle.exact_influences(n, eta, w, d, cap=cap)
    revs = [_oracle.exact_revealments(n, eta, w, k, d, cap=cap) for k in range(1, n + 1)]
    report = {"exact": True, "n": n, "eta": str(Fraction(eta)),
              "window": w.radius, "site_count": inst.site_count, "p": []}
    for p in p_values:
        pf = Fraction(p).limit_denominator(10**9)
        theta = inst.theta.eval_exact(pf)
        var = theta * (1 - theta)
        per_k = []
        total = Fraction(0)
        verts = sorted(set(infl) | {v for rev in revs for v in rev})
        terms = {v: {"v": list(v),
                     "influence": float(infl[v].eval_exact(pf)) if v in infl else 0.0,
                     "revealment_by_k": []} for v in verts}
        for k_i, rev in enumerate(revs, start=1):
            rhs = Fraction(0)
            for v in verts:
                rv = rev[v].eval_exact(pf) if v in rev else Fraction(0)
                terms[v]["revealment_by_k"].append(float(rv))
                if v in infl:
                    rhs += infl[v].eval_exact(pf) * rv
            total += rhs
            per_k.append({
                "k": k_i,
                "rhs": float(rhs),
                "var": float(var),
                "slack": float(rhs - var),
                "holds": rhs >= var,
            })
        summed_lhs = n * var
        report["p"].append({
            "p": float(pf),
            "theta": float(theta),
            "variance": float(var),
            "per_tree": per_k,
            "terms": [terms[v] for v in verts],
            "summed_lhs": float(summed_lhs),
            "summed_rhs": float(total),
            "summed_slack": float(total - summed_lhs),
            "summed_holds": total >= summed_lhs,
        })
    return report


def _osss_mc(p_values, n, eta, w, d, master_seed, trials):
    report = {"exact": False, "n": n, "eta": str(Fraction(eta)),
              "window": w.radius, "trials": trials, "p": []}
    seeds = [subseed(master_seed, 7001, t) for t in range(trials)]
    for p in p_values:
        prof = revealment_profile(p, n, eta, w, seeds, d)
        succ = sum(
            1 for s in seeds if escapes_cone(SiteField(s, d), p, n, eta, w)
        )
        theta = succ / trials
        var = theta * (1 - theta)
        rhs = 0.0
        for v, arr in prof["counts"].items():
            inf_est = influence(subseed(master_seed, 7002), p, n, eta, v, w,
                                trials, d).estimate
            rhs += inf_est * float(arr.sum()) / trials
        report["p"].append({
            "p": p, "theta": theta, "variance": var,
            "summed_lhs": n * var, "summed_rhs": rhs,
        })
    return report


def russo_check(n: int, eta, w: Window, p_grid, d: int = 2, cap: int = 26) -> dict:
    """Exact derivative-versus-total-influence comparison on a window.

    For the windowed decreasing event both sides come from the same finite
    product space, so they agree identically; the report carries the
    maximum absolute discrepancy over the grid.
    """
    inst = _oracle.exact_instance(n, eta, w, d, cap=cap)
    infl = _oracle.exact_influences(n, eta, w, d, cap=cap)
    rows = []
    worst = Fraction(0)
    for p in p_grid:
        pf = Fraction(p).limit_denominator(10**9)
        lhs = -inst.theta.derivative_exact(pf)
        by_vertex = {
            ",".join(str(c) for c in v): float(poly.eval_exact(pf))
            for v, poly in sorted(infl.items())
        }
        rhs = sum((poly.eval_exact(pf) for poly in infl.values()), Fraction(0))
        diff = abs(lhs - rhs)
        worst = max(worst, diff)
        rows.append({"p": float(pf), "neg_dtheta": float(lhs),
                     "total_influence": float(rhs), "abs_diff": float(diff),
                     "influences": by_vertex})
    return {"n": n, "eta": str(Fraction(eta)), "window": w.radius,
            "rows": rows, "max_abs_diff": float(worst)}
