"""Monte Carlo estimation: escape-probability curves, decay-rate fits,
finite-size critical brackets, and the directional growth function.

All randomness is derived from (master seed, trial index) through the
keyed hash, and compiled kernels accumulate into a fixed block grid, so
results are independent of thread count and scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _kernels
from .errors import BracketFailure, InsufficientData, TruncationDominated
from .geometry import Window
from .lattice import ModelKind, SiteField, subseed
from .reach import beta as beta_profile
from .reach import filled_cluster


@dataclass
class ThetaCurve:
    """Escape-probability estimates over a (p, n) grid.

    Per-trial fields are shared across the whole grid, so the per-seed
    indicators inherit the exact monotone coupling in p and n.
    """

    eta: Fraction
    d: int
    p_grid: tuple
    n_list: tuple
    windows: tuple  # radius per entry of n_list
    trials: int
    master_seed: int
    successes: np.ndarray  # (len(n_list), len(p_grid)) int64
    truncated: np.ndarray

    def _cell(self, n, p):
        ni = self.n_list.index(n)
        pi = self.p_grid.index(p)
        return ni, pi

    def estimate(self, n, p) -> float:
        ni, pi = self._cell(n, p)
        return self.successes[ni, pi] / self.trials

    def stderr(self, n, p) -> float:
        th = self.estimate(n, p)
        return math.sqrt(max(th * (1 - th), 1.0 / self.trials) / self.trials)

    def truncation_rate(self, n, p) -> float:
        ni, pi = self._cell(n, p)
        return self.truncated[ni, pi] / self.trials

    def partial_sums(self, p) -> dict:
        """S_n over the sampled levels: sum of estimates for k <= n.

        Partial in the literal sense: only levels present in n_list enter.
        """
        pi = self.p_grid.index(p)
        out = {}
        acc = 0.0
        for ni, n in enumerate(self.n_list):
            acc += self.successes[ni, pi] / self.trials
            out[n] = acc
        return out

    def rows(self):
        for ni, n in enumerate(self.n_list):
            for pi, p in enumerate(self.p_grid):
                yield {
                    "p": p,
                    "n": n,
                    "eta": str(self.eta),
                    "successes": int(self.successes[ni, pi]),
                    "trials": self.trials,
                    "window": self.windows[ni],
                    "truncation_rate": self.truncated[ni, pi] / self.trials,
                }


def _escape_targets(d, radius, eta, n_list):
    num, den = _kernels.eta_pair(eta)
    return np.stack(
        [1 - _kernels.cone_mask(d, radius, num, den, n) for n in n_list]
    ).astype(np.uint8)


def estimate_theta(p_grid, n_list, eta, w, trials, d: int = 2,
                   master_seed: int = 0) -> ThetaCurve:
    """Estimate the escape probability on a (p, n) grid.

    `w` may be a single Window or one per entry of n_list.  Every cell is
    evaluated directly (no monotone shortcut), so the per-realization
    monotonicity checks exercise real output.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    p_grid = tuple(float(p) for p in p_grid)
    n_list = tuple(int(n) for n in n_list)
    if isinstance(w, Window):
        windows = tuple(w.radius for _ in n_list)
    else:
        windows = tuple(int(x.radius) for x in w)
        if len(windows) != len(n_list):
            raise ValueError("need one window per entry of n_list")
    successes = np.zeros((len(n_list), len(p_grid)), dtype=np.int64)
    truncated = np.zeros_like(successes)
    p_arr = np.asarray(p_grid, dtype=np.float64)
    by_radius: dict = {}
    for i, n in enumerate(n_list):
        by_radius.setdefault(windows[i], []).append((i, n))
    for radius, entries in by_radius.items():
        t = _kernels.window_table(d, radius)
        targets = _escape_targets(d, radius, eta, [n for _, n in entries])
        succ = np.zeros((_kernels.N_BLOCKS, len(entries), len(p_grid)), dtype=np.int64)
        trunc = np.zeros_like(succ)
        _kernels._theta_mc(
            np.uint64(master_seed & 0xFFFFFFFFFFFFFFFF), trials, t.coords,
            t.nbr, targets, t.origin, p_arr, succ, trunc,
        )
        for row, (i, _) in enumerate(entries):
            successes[i] = succ[:, row, :].sum(axis=0)
            truncated[i] = trunc[:, row, :].sum(axis=0)
    return ThetaCurve(
        eta=Fraction(eta), d=d, p_grid=p_grid, n_list=n_list, windows=windows,
        trials=trials, master_seed=master_seed, successes=successes,
        truncated=truncated,
    )


def escape_matrix(seed: int, p_grid, n_list, eta, w: Window, d: int = 2) -> np.ndarray:
    """Per-realization escape indicators for one field over (n, p)."""
    t = _kernels.window_table(d, w.radius)
    targets = _escape_targets(d, w.radius, eta, n_list)
    p_arr = np.asarray([float(p) for p in p_grid], dtype=np.float64)
    out = np.zeros((len(n_list), len(p_arr)), dtype=np.uint8)
    _kernels._escape_matrix(
        np.uint64(seed & 0xFFFFFFFFFFFFFFFF), t.coords, t.nbr, targets,
        t.origin, p_arr, out,
    )
    return out


@dataclass
class DecayFit:
    """Weighted log-linear fit of the escape probability against the shift."""

    p: float
    eta: Fraction
    n_range: tuple
    c_p: float  # decay rate per unit shift (positive = decaying)
    intercept: float
    stderr: float
    r2: float
    censored_levels: tuple
    s_partial: dict
    min_successes: int

    @property
    def is_decaying(self) -> bool:
        return self.c_p > 0 and self.c_p >= 3 * self.stderr and self.r2 >= 0.9


def fit_decay(curve: ThetaCurve, p, eta=None, min_successes: int = 10) -> DecayFit:
    """Fit log theta_n = intercept - c_p * n by weighted least squares.

    Levels with fewer than min_successes successes are censored from the
    fit (and listed); weights are inverse delta-method variances of the
    log estimate.
    """
    p = float(p)
    pi = curve.p_grid.index(p)
    xs, ys, ws_ = [], [], []
    censored = []
    for ni, n in enumerate(curve.n_list):
        s = int(curve.successes[ni, pi])
        if s < min_successes:
            censored.append(n)
            continue
        t = curve.trials
        th = s / t
        th_c = min(max(th, 0.5 / t), 1 - 0.5 / t)
        var_log = (1 - th_c) / (th_c * t)
        xs.append(n)
        ys.append(math.log(th))
        ws_.append(1.0 / var_log)
    if len(xs) < 3:
        raise InsufficientData(
            f"only {len(xs)} usable levels (needed 3); censored: {censored}"
        )
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    wgt = np.asarray(ws_, dtype=float)
    wsum = wgt.sum()
    xbar = (wgt * x).sum() / wsum
    ybar = (wgt * y).sum() / wsum
    sxx = (wgt * (x - xbar) ** 2).sum()
    slope = (wgt * (x - xbar) * (y - ybar)).sum() / sxx
    intercept = ybar - slope * xbar
    resid = y - (intercept + slope * x)
    sstot = (wgt * (y - ybar) ** 2).sum()
    ssres = (wgt * resid**2).sum()
    r2 = 0.0 if sstot <= 0 else 1.0 - ssres / sstot
    stderr = math.sqrt(1.0 / sxx)
    return DecayFit(
        p=p, eta=curve.eta if eta is None else Fraction(eta),
        n_range=(min(xs), max(xs)), c_p=-slope, intercept=intercept,
        stderr=stderr, r2=r2, censored_levels=tuple(censored),
        s_partial=curve.partial_sums(p), min_successes=min_successes,
    )


@dataclass
class CriticalEstimate:
    """Finite-size bracket for a critical parameter, with the defining
    statistic at both bracket endpoints."""

    eta: Fraction | None
    p_lo: float
    p_hi: float
    stat_lo: float
    stat_hi: float
    method: str
    n: int
    window: int
    threshold: float
    trials: int

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.p_lo + self.p_hi)

    @property
    def width(self) -> float:
        return self.p_hi - self.p_lo


def _bisect_threshold(stat, threshold, tol):
    """Bisection for a nonincreasing statistic crossing the threshold."""
    lo, hi = 0.0, 1.0
    s_lo = stat(lo)
    s_hi = stat(hi)
    if s_lo <= threshold or s_hi >= threshold:
        raise BracketFailure(s_lo, s_hi, threshold)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        s_mid = stat(mid)
        if s_mid > threshold:
            lo, s_lo = mid, s_mid
        else:
            hi, s_hi = mid, s_mid
    return lo, hi, s_lo, s_hi


def _mc_statistic(target, w, trials, d, master_seed):
    t = _kernels.window_table(d, w.radius)
    targets = target[None, :]

    def stat(p):
        succ = np.zeros((_kernels.N_BLOCKS, 1, 1), dtype=np.int64)
        trunc = np.zeros_like(succ)
        _kernels._theta_mc(
            np.uint64(master_seed & 0xFFFFFFFFFFFFFFFF), trials, t.coords,
            t.nbr, targets, t.origin, np.asarray([p], dtype=np.float64),
            succ, trunc,
        )
        return succ.sum() / trials

    return stat


def estimate_ptilde(eta, n: int, w: Window, trials: int, tol: float,
                    d: int = 2, master_seed: int = 0,
                    threshold: float = 0.5) -> CriticalEstimate:
    """Bisection bracket for the cone-containment critical point.

    Finite-size proxy: the escape probability at fixed shift n against the
    threshold; the shared uniform field makes the empirical statistic
    exactly nonincreasing in p, so bisection is valid realization-wise.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    num, den = _kernels.eta_pair(eta)
    target = (1 - _kernels.cone_mask(d, w.radius, num, den, n)).astype(np.uint8)
    stat = _mc_statistic(target, w, trials, d, master_seed)
    lo, hi, s_lo, s_hi = _bisect_threshold(stat, threshold, tol)
    return CriticalEstimate(
        eta=Fraction(eta), p_lo=lo, p_hi=hi, stat_lo=s_lo, stat_hi=s_hi,
        method="bisection", n=n, window=w.radius, threshold=threshold,
        trials=trials,
    )


def estimate_pc(w: Window, trials: int, tol: float, d: int = 2,
                master_seed: int = 0, depth: int | None = None,
                threshold: float = 0.5) -> CriticalEstimate:
    """Bisection bracket for the leftmost-reach critical point.

    Statistic: probability that the half-orthant cluster reaches a point
    k*e1 with k < -depth inside the window (depth defaults to half the
    radius, leaving room for paths to come back).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    m = w.radius // 2 if depth is None else int(depth)
    if not 0 <= m < w.radius:
        raise ValueError("depth must lie inside the window")
    t = _kernels.window_table(d, w.radius)
    target = np.zeros(t.size, dtype=np.uint8)
    for j in range(-w.radius, -m):
        target[t.index_of((j,) + (0,) * (d - 1))] = 1
    stat = _mc_statistic(target, w, trials, d, master_seed)
    lo, hi, s_lo, s_hi = _bisect_threshold(stat, threshold, tol)
    return CriticalEstimate(
        eta=None, p_lo=lo, p_hi=hi, stat_lo=s_lo, stat_hi=s_hi,
        method="bisection", n=m, window=w.radius, threshold=threshold,
        trials=trials,
    )


@dataclass
class ShapeEstimate:
    """Directional growth estimates: beta_n(u)/n across shifts and seeds."""

    u: tuple
    p: float
    n_list: tuple
    per_n: dict  # n -> (mean, stderr, samples, none_count)
    gamma_hat: float
    stderr: float
    trials: int


def estimate_gamma(u, n_list, w: Window, trials: int, p: float, d: int = 2,
                   master_seed: int = 0, model: ModelKind = ModelKind.ORTHANT,
                   none_limit: float = 0.2) -> ShapeEstimate:
    """Average beta_n(u)/n over fresh fields for each n; the headline
    estimate comes from the largest shift.

    Raises TruncationDominated when too many samples found no shift in
    range at the largest n (the window was too small for the direction).
    """
    u = tuple(int(c) for c in u)
    n_list = tuple(sorted(int(n) for n in n_list))
    per_n = {}
    for n in n_list:
        vals = []
        nones = 0
        for tr in range(trials):
            fld = SiteField(subseed(master_seed, 31, n, tr), d)
            pv = beta_profile(model, fld, p, u, n, w)
            if pv.value is None:
                nones += 1
            else:
                vals.append(pv.value / n)
        if vals:
            mean = float(np.mean(vals))
            se = float(np.std(vals, ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
        else:
            mean, se = float("nan"), float("nan")
        per_n[n] = (mean, se, len(vals), nones)
    n_top = n_list[-1]
    mean, se, cnt, nones = per_n[n_top]
    total = cnt + nones
    if total and nones / total > none_limit:
        raise TruncationDominated(nones / total, none_limit)
    return ShapeEstimate(
        u=u, p=p, n_list=n_list, per_n=per_n, gamma_hat=mean, stderr=se,
        trials=trials,
    )


def shape_cloud(p: float, n: int, w: Window, seeds, d: int = 2,
                model: ModelKind = ModelKind.ORTHANT) -> list:
    """Per-seed point clouds: the filled cluster scaled by 1/n."""
    clouds = []
    for seed in seeds:
        fld = SiteField(seed, d)
        pts = filled_cluster(model, fld, p, w)
        arr = np.asarray(sorted(pts), dtype=np.float64) / n
        clouds.append(arr)
    return clouds


def cloud_hausdorff(a: np.ndarray, b: np.ndarray, subsample: int = 2000) -> float:
    """Symmetric Hausdorff distance between two point clouds.

    Clouds larger than `subsample` are thinned by a deterministic stride;
    the value is a reported refinement metric, not an exact invariant.
    """
    def thin(x):
        if len(x) > subsample:
            stride = int(math.ceil(len(x) / subsample))
            return x[::stride]
        return x

    a = thin(np.asarray(a, dtype=float))
    b = thin(np.asarray(b, dtype=float))

    def directed(x, y):
        worst = 0.0
        chunk = 256
        for i in range(0, len(x), chunk):
            dif = x[i : i + chunk, None, :] - y[None, :, :]
            dmin = np.sqrt((dif**2).sum(axis=2)).min(axis=1)
            worst = max(worst, float(dmin.max()))
        return worst

    return max(directed(a, b), directed(b, a))


def gamma_containment_report(p: float, n: int, w: Window, fan, trials: int,
                             d: int = 2, master_seed: int = 0,
                             gamma_trials: int = 40) -> dict:
    """Compare cloud extent along a fan of directions with independent
    growth estimates.

    For each direction u, the first diagonal shift putting n*u in the
    filled cluster, divided by n, should match gamma_hat(u) from fresh
    fields; the report carries both sides and their gap in stderr units.
    """
    rows = []
    for u in fan:
        u = tuple(int(c) for c in u)
        est = estimate_gamma(
            u, [n], w, gamma_trials, p, d,
            master_seed=subseed(master_seed, 41, *u),
        )
        vals = []
        for tr in range(trials):
            fld = SiteField(subseed(master_seed, 42, tr), d)
            pv = beta_profile(ModelKind.ORTHANT, fld, p, u, n, w)
            if pv.value is not None:
                vals.append(pv.value / n)
        cloud_side = float(np.mean(vals)) if vals else float("nan")
        spread = math.hypot(est.stderr or 0.0,
                            float(np.std(vals, ddof=1) / math.sqrt(len(vals)))
                            if len(vals) > 1 else 0.0)
        rows.append({
            "u": u,
            "cloud_extent": cloud_side,
            "gamma_hat": est.gamma_hat,
            "gap": abs(cloud_side - est.gamma_hat),
            "spread": spread,
        })
    return {"p": p, "n": n, "window": w.radius, "rows": rows}
