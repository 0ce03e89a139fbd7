"""Acceptance suite: one test per criterion, each printing a PASS line.

Scales and tolerances are pinned here, not tuned at runtime.  Criterion 7
is executed exactly at its stated parameters; see its docstring for why
those parameters cannot produce the required fit, and the companion
demonstration in test_estimators.py for the same pipeline succeeding at a
measurable operating point.

Run with `pytest tests/test_acceptance.py -v -s`.
"""

import math
from fractions import Fraction

import numpy as np
import pytest

from orthantlab import oracle
from orthantlab.cli import main as cli_main
from orthantlab.errors import InsufficientData
from orthantlab.estimators import (
    escape_matrix,
    estimate_gamma,
    estimate_theta,
    fit_decay,
)
from orthantlab.explore import osss_check, run_tree, russo_check
from orthantlab.geometry import Window
from orthantlab.lattice import ModelKind, SiteField, subseed
from orthantlab.reach import escapes_cone, l_profile
from orthantlab.walk import (
    ballisticity_report,
    multinomial_covariance,
    multinomial_speed,
)

ETA0 = Fraction(0)


def _report(num, msg):
    print(f"\nACCEPTANCE {num:2d} PASS: {msg}")


def test_c01_endpoint_exactness():
    """theta_n(0) = 1 and theta_n(1) = 0 exactly, d = 2 and 3, window 4nd."""
    for d, trials in ((2, 200), (3, 60)):
        n_list = [1, 2, 4]
        windows = [Window(4 * n * d) for n in n_list]
        curve = estimate_theta([0.0, 1.0], n_list, ETA0, windows, trials,
                               d=d, master_seed=101)
        for n in n_list:
            assert curve.estimate(n, 0.0) == 1.0, (d, n)
            assert curve.estimate(n, 1.0) == 0.0, (d, n)
    _report(1, "endpoint escape probabilities exact for d=2,3 and n=1,2,4")


def test_c02_oracle_equivalence():
    """Monte Carlo matches exact enumeration within 4 binomial sigma."""
    w = Window(2)
    trials = 10**5
    poly = oracle.enumerate_theta(1, ETA0, w, 2)
    assert poly.site_count == 25
    curve = estimate_theta([0.2, 0.5, 0.8], [1], ETA0, w, trials,
                           d=2, master_seed=102)
    gaps = []
    for p in (0.2, 0.5, 0.8):
        exact = poly.eval(p)
        sigma = math.sqrt(exact * (1 - exact) / trials)
        gap = abs(curve.estimate(1, p) - exact)
        assert gap < 4 * sigma, (p, gap, sigma)
        gaps.append(gap / sigma)
    _report(2, "MC vs enumeration gaps = %.2f/%.2f/%.2f sigma at p=0.2/0.5/0.8"
            % tuple(gaps))


def test_c03_russo_equality():
    """|-theta'(p) - total influence| below 1e-9 at three p values."""
    rep = russo_check(1, ETA0, Window(2), [Fraction(1, 4), Fraction(1, 2),
                                           Fraction(3, 4)], d=2)
    assert rep["max_abs_diff"] < 1e-9
    _report(3, "derivative equals total influence, max gap %.1e"
            % rep["max_abs_diff"])


def test_c04_osss_verification():
    """Var(f) <= sum of influence*revealment per tree and k-summed, exactly."""
    rep = osss_check([0.25, 0.5, 0.75], 1, ETA0, Window(2), d=2, exact=True)
    slacks = []
    for row in rep["p"]:
        for tree_row in row["per_tree"]:
            assert tree_row["holds"], row
        assert row["summed_holds"], row
        slacks.append(row["summed_slack"])
    _report(4, "variance bound holds exactly; summed slacks %.3f/%.3f/%.3f"
            % tuple(slacks))


def test_c05_determination():
    """Tree outcome equals the direct escape test on 10^4 random triples."""
    rng = np.random.default_rng(105)
    trials = 10**4
    agree = 0
    for _ in range(trials):
        n = int(rng.integers(1, 7))
        k = int(rng.integers(1, n + 1))
        p = float(rng.uniform(0.02, 0.98))
        seed = int(rng.integers(0, 2**48))
        w = Window(n + 3)
        f = SiteField(seed, 2)
        trace = run_tree(f, p, n, ETA0, k, w)
        if (trace.outcome == "escaped") == escapes_cone(f, p, n, ETA0, w):
            agree += 1
    assert agree == trials, f"{trials - agree} disagreements"
    _report(5, "tree determined the escape event in %d/%d runs" % (agree, trials))


def test_c06_differential_inequality():
    """-theta' >= (1/4d)(n/S_n) theta (1-theta) at 21 exact grid points."""
    w = Window(2)
    thetas = oracle.thetas_upto(1, ETA0, w, 2)
    worst = None
    for j in range(21):
        p = Fraction(j, 20)
        th = thetas[1].eval_exact(p)
        var_term = th * (1 - th)
        if var_term == 0:
            rhs = Fraction(0)
        else:
            s1 = thetas[0].eval_exact(p) + th
            rhs = Fraction(1, 8) * var_term / s1
        lhs = -thetas[1].derivative_exact(p)
        assert lhs >= rhs, (p, float(lhs), float(rhs))
        margin = lhs - rhs
        if worst is None or margin < worst[0]:
            worst = (margin, p)
    _report(6, "inequality exact at all 21 points; tightest margin %.4f at p=%s"
            % (float(worst[0]), worst[1]))


def test_c07_exponential_decay():
    """Decay fit at the stated operating point (p=0.9, 1e4 trials/level).

    The p=0.2 arm must be flagged non-decaying.  The p=0.9 arm is executed
    exactly as stated; measured escape probabilities at these parameters
    are theta_2 ~ 1.1e-3, theta_3 ~ 4.5e-5, theta_4 ~ 2e-6 (decay rate
    ~3.2 per level), so at 1e4 trials per level at most one level clears
    any usable success threshold and a three-level weighted fit cannot
    exist.  The assertion is kept faithful rather than weakened; the same
    pipeline demonstrably fits the decay at measurable operating points
    (see test_decay_pipeline_positive_rate_at_feasible_point).
    """
    eta = Fraction(1, 10)
    ns = list(range(2, 13))
    windows = [Window(8 * n) for n in ns]
    trials = 10**4

    curve_low = estimate_theta([0.2], ns, eta, windows, trials,
                               d=2, master_seed=1071)
    fit_low = fit_decay(curve_low, 0.2)
    assert not fit_low.is_decaying
    print("\nACCEPTANCE  7 (arm p=0.2): correctly flagged non-decaying "
          f"(c_p={fit_low.c_p:.2e}, r2={fit_low.r2:.3f})")

    curve = estimate_theta([0.9], ns, eta, windows, trials,
                           d=2, master_seed=1072)
    succ = [int(curve.successes[i, 0]) for i in range(len(ns))]
    try:
        fit = fit_decay(curve, 0.9)
    except InsufficientData as exc:
        pytest.fail(
            "criterion 7 unattainable as stated: successes per level "
            f"n=2..12 were {succ} out of {trials} trials, so fewer than "
            "three levels are usable for the weighted log-linear fit "
            f"({exc}); the measured decay rate at p=0.9 is ~3.2 per level, "
            "which needs ~1e7 trials per level to expose three levels"
        )
    assert fit.c_p > 0 and fit.c_p >= 3 * fit.stderr and fit.r2 >= 0.9
    _report(7, "decay fit c_p=%.3f (+-%.3f), r2=%.3f" %
            (fit.c_p, fit.stderr, fit.r2))


def test_c08_coupled_monotonicity():
    """Per-realization escape indicators monotone in p and n, 1e4 seeds."""
    w = Window(16)
    grid = np.linspace(0.0, 1.0, 11)
    n_list = [1, 2, 4]
    violations = 0
    for t in range(10**4):
        m = escape_matrix(subseed(108, t), grid, n_list, ETA0, w, 2).astype(int)
        if np.any(np.diff(m, axis=1) > 0) or np.any(np.diff(m, axis=0) > 0):
            violations += 1
    assert violations == 0
    _report(8, "0 monotonicity violations over 10^4 realization matrices")


def test_c09_shape_function():
    """Growth function: exact at p=1, symmetric and subadditive at p=0.9."""
    rng = np.random.default_rng(109)
    w = Window(20)
    for _ in range(10):
        u = tuple(int(c) for c in rng.integers(-2, 3, size=2))
        est = estimate_gamma(u, [3, 5], w, 4, 1.0, d=2, master_seed=1091)
        assert est.gamma_hat == -min(u), u

    # permutation symmetry within 3 sigma at p=0.9
    w9 = Window(40)
    n_list = [6, 10]
    for u in [(2, -1), (1, 0), (2, 1)]:
        a = estimate_gamma(u, n_list, w9, 60, 0.9, d=2, master_seed=1092)
        b = estimate_gamma(u[::-1], n_list, w9, 60, 0.9, d=2, master_seed=1093)
        spread = max(math.hypot(a.stderr, b.stderr), 1e-9)
        assert abs(a.gamma_hat - b.gamma_hat) <= 3 * spread, (u, a, b)

    # subadditivity within 3 sigma on 10 random pairs
    checked = 0
    tries = 0
    while checked < 10 and tries < 40:
        tries += 1
        u = tuple(int(c) for c in rng.integers(-2, 3, size=2))
        v = tuple(int(c) for c in rng.integers(-2, 3, size=2))
        s = tuple(a + b for a, b in zip(u, v))
        if u == (0, 0) or v == (0, 0):
            continue
        try:
            gu = estimate_gamma(u, n_list, w9, 40, 0.9, d=2, master_seed=1094)
            gv = estimate_gamma(v, n_list, w9, 40, 0.9, d=2, master_seed=1095)
            gs = estimate_gamma(s, n_list, w9, 40, 0.9, d=2, master_seed=1096)
        except Exception:
            continue
        spread = math.sqrt(gu.stderr**2 + gv.stderr**2 + gs.stderr**2)
        assert gs.gamma_hat <= gu.gamma_hat + gv.gamma_hat + 3 * max(spread, 1e-9), \
            (u, v, gs.gamma_hat, gu.gamma_hat + gv.gamma_hat)
        checked += 1
    assert checked == 10

    # diagonal shift identity, exact per realization
    from orthantlab.reach import beta as beta_profile

    for t in range(30):
        f = SiteField(subseed(1097, t), 2)
        for u, r, n in [((1, -1), 1, 6), ((0, 1), 2, 5)]:
            b1 = beta_profile(ModelKind.ORTHANT, f, 0.9, u, n, w9).value
            b2 = beta_profile(
                ModelKind.ORTHANT, f, 0.9, tuple(c + r for c in u), n, w9
            ).value
            assert b1 is not None and b2 is not None
            assert b2 == b1 - r * n
    _report(9, "exact p=1 values, 3-sigma symmetry and subadditivity, "
               "exact diagonal shifts")


def test_c10_walk_ballisticity():
    """Walk moments at p=1 match the closed form; drift and nondegeneracy
    at p=0.9.

    At p=1 every step increments the coordinate sum, so the endpoint
    covariance is singular along the diagonal by the same closed form the
    criterion cites; the nondegeneracy assertion therefore belongs to the
    p=0.9 arm, where backward steps mix the diagonal.
    """
    d = 2
    stats = ballisticity_report(1.0, 10**4, 10**3, d=d, master_seed=110)
    want_speed = multinomial_speed(d)
    for a in range(d):
        assert abs(stats.speed[a] - want_speed[a]) < 3 * stats.speed_stderr[a]
    want_cov = multinomial_covariance(d)
    band = 3 * (np.abs(want_cov) + 0.5) / math.sqrt(stats.walks)
    assert np.all(np.abs(stats.covariance - want_cov) <= band)
    assert abs(stats.min_eigenvalue) < 1e-9  # singular, as the moments say

    stats9 = ballisticity_report(0.9, 10**4, 10**3, d=d, master_seed=111)
    for a, b, diff, se in stats9.pairwise_speed_diffs:
        assert abs(diff) <= 3 * se, (a, b, diff, se)
    assert stats9.drift_along_ones > 3 * stats9.drift_stderr
    assert stats9.min_eigenvalue > 3 * stats9.min_eigenvalue_stderr
    _report(10, "p=1 moments within 3 sigma (singular diagonal as derived); "
                "p=0.9 symmetric, ballistic, nondegenerate "
                f"(min eig {stats9.min_eigenvalue:.4f})")


def test_c11_lprofile_coupling():
    """Half-orthant leftmost reach never exceeds the orthant one; equality
    rate nondecreasing across window radii."""
    p = 0.62
    vs = [(0, 0), (1, -1), (2, 0), (0, 2), (2, -2), (-1, 1), (3, 1), (1, 3)]
    fields = [SiteField(subseed(112, t), 2) for t in range(10**3)]
    rates = []
    for r in (8, 16, 32):
        w = Window(r)
        equal = 0
        total = 0
        for f in fields:
            for v in vs:
                lo = l_profile(ModelKind.ORTHANT, f, p, v, w).value
                lh = l_profile(ModelKind.HALF_ORTHANT, f, p, v, w).value
                if lo is not None:
                    assert lh is not None and lh <= lo, (v, lo, lh)
                total += 1
                if lo == lh:
                    equal += 1
        rates.append(equal / total)
    assert rates[0] <= rates[1] <= rates[2], rates
    _report(11, "coupling held in 100%% of cases; equality rates "
                "%.4f <= %.4f <= %.4f over radii 8/16/32" % tuple(rates))


def test_c12_reproducibility(tmp_path):
    """Byte-identical outputs for the same master seed at thread counts 1
    and 8 (requests above the platform's core budget are clamped)."""
    outputs = {}
    for threads in (1, 8):
        for name, args in {
            "theta": ["theta", "--p-grid", "0.3,0.6,0.9", "--n", "2",
                      "--eta", "1/3", "--window", "12", "--trials", "2000",
                      "--seed", "77"],
            "critical": ["critical", "--kind", "ptilde", "--eta", "0",
                         "--n", "4", "--window", "12", "--trials", "400",
                         "--seed", "78"],
        }.items():
            out = tmp_path / f"{name}-t{threads}"
            rc = cli_main(args + ["--threads", str(threads),
                                  "--out-dir", str(out)])
            assert rc == 0
            files = sorted(fn for fn in out.iterdir() if fn.suffix == ".csv")
            outputs[(name, threads)] = b"".join(fn.read_bytes() for fn in files)
    assert outputs[("theta", 1)] == outputs[("theta", 8)]
    assert outputs[("critical", 1)] == outputs[("critical", 8)]
    _report(12, "CSV bodies byte-identical across thread counts 1 and 8")
