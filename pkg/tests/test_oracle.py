import math
from fractions import Fraction

import numpy as np
import pytest

from orthantlab.errors import EnumerationTooLarge
from orthantlab.estimators import estimate_theta
from orthantlab.geometry import Window
from orthantlab.oracle import (
    ConfigField,
    ThetaPolynomial,
    enumerate_theta,
    enumerate_theta_reference,
    exact_influences,
    exact_revealments,
    thetas_upto,
)


def test_single_site_window_polynomial_is_zero():
    # with only the origin available, no path can leave the shifted cone
    poly = enumerate_theta(1, Fraction(0), Window(0), 2)
    assert poly.counts == (0, 0)
    assert poly.eval(0.3) == 0.0


def test_compiled_enumeration_matches_reference():
    for n, eta in [(0, Fraction(0)), (1, Fraction(0)), (1, Fraction(1, 2)),
                   (0, Fraction(1, 3))]:
        fast = enumerate_theta(n, eta, Window(1), 2)
        ref = enumerate_theta_reference(n, eta, Window(1), 2)
        assert fast.counts == ref.counts, (n, eta)


def test_counts_bounded_by_binomials():
    poly = enumerate_theta(0, Fraction(0), Window(1), 2)
    m = poly.site_count
    assert m == 9
    for j, c in enumerate(poly.counts):
        assert 0 <= c <= math.comb(m, j)
    assert any(c > 0 for c in poly.counts)


def test_endpoint_values_match_deterministic_configs():
    # evaluation at p=0 is decided by the all-zeros configuration, at p=1
    # by the all-ones configuration
    w = Window(1)
    poly = enumerate_theta(0, Fraction(0), w, 2)
    assert poly.eval_exact(Fraction(0)) == poly.counts[0]
    assert poly.eval_exact(Fraction(1)) == poly.counts[-1]
    from orthantlab.reach import escapes_cone_reference

    verts = sorted(w.iter_points(2))
    zeros = ConfigField({v: 0 for v in verts}, 2)
    ones = ConfigField({v: 1 for v in verts}, 2)
    assert poly.counts[0] == int(escapes_cone_reference(zeros, 0.5, 0, 0, w))
    assert poly.counts[-1] == int(escapes_cone_reference(ones, 0.5, 0, 0, w))


def test_theta_monotone_nonincreasing_on_grid():
    poly = enumerate_theta(0, Fraction(0), Window(1), 2)
    vals = [poly.eval(p) for p in np.linspace(0, 1, 101)]
    assert all(vals[i] >= vals[i + 1] - 1e-12 for i in range(len(vals) - 1))


def test_russo_identity_is_exact():
    # -theta'(p) equals the total influence identically in exact arithmetic
    w = Window(1)
    theta = enumerate_theta(0, Fraction(0), w, 2)
    infl = exact_influences(0, Fraction(0), w, 2)
    for p in [Fraction(1, 7), Fraction(2, 5), Fraction(9, 10)]:
        lhs = -theta.derivative_exact(p)
        rhs = sum((poly.eval_exact(p) for poly in infl.values()), Fraction(0))
        assert lhs == rhs


def test_influences_respect_coordinate_symmetry():
    # the event and the window are symmetric under coordinate permutation
    infl = exact_influences(0, Fraction(0), Window(1), 2)
    for (a, b), poly in infl.items():
        assert infl[(b, a)].counts == poly.counts


def test_unreachable_vertices_have_zero_influence():
    # shift 1 on the tiny window: escape needs a sum below the window
    # minimum, so the event is constant and no site is ever pivotal
    infl = exact_influences(1, Fraction(0), Window(1), 2)
    assert infl == {}


def test_enumeration_cap():
    with pytest.raises(EnumerationTooLarge):
        enumerate_theta(1, Fraction(0), Window(3), 2, cap=26)
    with pytest.raises(EnumerationTooLarge):
        exact_influences(1, Fraction(0), Window(2), 2, cap=10)


def test_thetas_upto_lengths():
    polys = thetas_upto(1, Fraction(0), Window(1), 2)
    assert len(polys) == 2
    assert polys[0].site_count == polys[1].site_count == 9


def test_revealments_probabilities_in_unit_interval():
    revs = exact_revealments(1, Fraction(0), Window(1), 1, 2)
    total = 1 << 9
    for v, poly in revs.items():
        for p in (Fraction(1, 3), Fraction(1, 2)):
            val = poly.eval_exact(p)
            assert 0 <= val <= 1
        assert sum(poly.counts) <= total


def test_mc_agrees_with_polynomial():
    w = Window(1)
    poly = enumerate_theta(0, Fraction(0), w, 2)
    trials = 20000
    curve = estimate_theta([0.5], [0], Fraction(0), w, trials, d=2, master_seed=4)
    exact = poly.eval(0.5)
    sigma = math.sqrt(exact * (1 - exact) / trials)
    assert abs(curve.estimate(0, 0.5) - exact) < 4 * sigma


def test_polynomial_exact_float_consistency():
    poly = ThetaPolynomial((1, 3, 0), 2)
    for p in (0.0, 0.25, 1.0):
        assert abs(poly.eval(p) - float(poly.eval_exact(Fraction(p)))) < 1e-15
