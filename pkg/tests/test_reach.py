from fractions import Fraction

import numpy as np
import pytest

from orthantlab.geometry import Window
from orthantlab.lattice import ModelKind, SiteField
from orthantlab.reach import (
    beta,
    escapes_cone,
    escapes_cone_reference,
    fill_agreement,
    filled_cluster,
    forward_cluster,
    l_profile,
)


class PythonOnlyField:
    """Wraps a SiteField but hides its type, forcing the reference path."""

    def __init__(self, base):
        self._base = base
        self.d = base.d

    def sample(self, v, p):
        return self._base.sample(v, p)


def test_forward_cluster_half_orthant_p1():
    f = SiteField(1, 2)
    w = Window(4)
    res = forward_cluster(ModelKind.HALF_ORTHANT, f, 1.0, (0, 0), w)
    expected = {(a, b) for a in range(5) for b in range(5)}
    assert set(res.reached) == expected
    assert res.frontier_hit_window


def test_forward_cluster_orthant_p0():
    f = SiteField(2, 2)
    w = Window(3)
    res = forward_cluster(ModelKind.ORTHANT, f, 0.0, (0, 0), w)
    expected = {(-a, -b) for a in range(4) for b in range(4)}
    assert set(res.reached) == expected


def test_forward_cluster_window_monotone():
    f = SiteField(3, 2)
    small = forward_cluster(ModelKind.HALF_ORTHANT, f, 0.6, (0, 0), Window(3))
    big = forward_cluster(ModelKind.HALF_ORTHANT, f, 0.6, (0, 0), Window(6))
    assert set(small.reached) <= set(big.reached)
    # every cluster of these models is infinite, so a full closure always
    # touches the window boundary
    assert small.frontier_hit_window and big.frontier_hit_window


def test_forward_cluster_start_outside_window():
    f = SiteField(3, 2)
    with pytest.raises(ValueError):
        forward_cluster(ModelKind.HALF_ORTHANT, f, 0.5, (9, 0), Window(2))


def test_forward_cluster_target_early_exit():
    f = SiteField(4, 2)
    w = Window(4)
    res = forward_cluster(
        ModelKind.HALF_ORTHANT, f, 1.0, (0, 0), w, target=lambda v: v == (2, 2)
    )
    assert res.hit_target
    res2 = forward_cluster(
        ModelKind.HALF_ORTHANT, f, 1.0, (0, 0), w, target=lambda v: v == (-1, 0)
    )
    assert not res2.hit_target


def test_escape_endpoints():
    w = Window(9)  # r > n*d for n=2, d=2
    for seed in range(5):
        f = SiteField(seed, 2)
        assert escapes_cone(f, 0.0, 2, Fraction(0), w)
        assert not escapes_cone(f, 1.0, 2, Fraction(0), w)
        assert not escapes_cone(f, 1.0, 2, Fraction(1, 2), w)


def test_escape_monotone_in_p():
    w = Window(8)
    for seed in range(30):
        f = SiteField(seed, 2)
        vals = [escapes_cone(f, p / 10, 1, Fraction(0), w) for p in range(1, 10)]
        assert all(vals[i] >= vals[i + 1] for i in range(len(vals) - 1))


def test_escape_eta_nesting_per_realization():
    w = Window(8)
    for seed in range(30):
        f = SiteField(seed, 2)
        if escapes_cone(f, 0.55, 2, Fraction(0), w):
            assert escapes_cone(f, 0.55, 2, Fraction(1, 2), w)


def test_escape_kernel_matches_reference():
    w = Window(5)
    for seed in range(60):
        f = SiteField(seed, 2)
        for p in (0.2, 0.5, 0.8):
            assert escapes_cone(f, p, 1, Fraction(1, 3), w) == \
                escapes_cone_reference(f, p, 1, Fraction(1, 3), w)


def test_escape_window_monotone():
    for seed in range(30):
        f = SiteField(seed, 2)
        a = escapes_cone(f, 0.6, 2, Fraction(0), Window(5))
        b = escapes_cone(f, 0.6, 2, Fraction(0), Window(10))
        assert (not a) or b


def test_l_profile_p1():
    f = SiteField(11, 2)
    w = Window(6)
    assert l_profile(ModelKind.HALF_ORTHANT, f, 1.0, (0, 0), w).value == 0
    assert l_profile(ModelKind.HALF_ORTHANT, f, 1.0, (0, -1), w).value is None
    assert l_profile(ModelKind.HALF_ORTHANT, f, 1.0, (0, 3), w).value == 0
    assert l_profile(ModelKind.HALF_ORTHANT, f, 1.0, (-2, 1), w).value == 2


def test_l_profile_coupling_and_kernel_parity():
    w = Window(8)
    vs = [(0, 0), (1, -1), (2, 1), (-1, 2)]
    for seed in range(40):
        f = SiteField(seed, 2)
        g = PythonOnlyField(f)
        for v in vs:
            lo = l_profile(ModelKind.ORTHANT, f, 0.7, v, w).value
            lh = l_profile(ModelKind.HALF_ORTHANT, f, 0.7, v, w).value
            # domination: the half-orthant leftmost reach is no larger
            if lo is not None:
                assert lh is not None and lh <= lo
            # reference path agrees with the compiled path
            assert l_profile(ModelKind.ORTHANT, g, 0.7, v, w).value == lo
            assert l_profile(ModelKind.HALF_ORTHANT, g, 0.7, v, w).value == lh


def test_l_profile_window_monotone_value():
    for seed in range(25):
        f = SiteField(seed, 2)
        a = l_profile(ModelKind.HALF_ORTHANT, f, 0.7, (0, 0), Window(6)).value
        b = l_profile(ModelKind.HALF_ORTHANT, f, 0.7, (0, 0), Window(12)).value
        if a is not None:
            assert b is not None and b <= a


def test_beta_p1_closed_form():
    w = Window(20)
    f = SiteField(13, 2)
    rng = np.random.default_rng(0)
    for _ in range(10):
        u = tuple(int(c) for c in rng.integers(-2, 3, size=2))
        n = int(rng.integers(1, 5))
        got = beta(ModelKind.HALF_ORTHANT, f, 1.0, u, n, w).value
        assert got == -n * min(u)
    assert beta(ModelKind.HALF_ORTHANT, f, 1.0, (1, 1), 3, w).value == -3


def test_beta_matches_per_k_oracle():
    # independent oracle: a fresh targeted reachability run for every k
    f = SiteField(7, 2)
    w = Window(10)
    u, n, p = (1, -1), 4, 0.8
    got = beta(ModelKind.HALF_ORTHANT, f, p, u, n, w).value
    expected = None
    for k in range(-w.radius * 2, w.radius * 2 + 1):
        pt = tuple(k + n * c for c in u)
        if not w.contains(pt):
            continue
        res = forward_cluster(
            ModelKind.HALF_ORTHANT, PythonOnlyField(f), p, (0, 0), w,
            target=lambda v, pt=pt: v == pt,
        )
        if res.hit_target:
            expected = k
            break
    assert got == expected


def test_filled_cluster_p1_and_closure():
    f = SiteField(17, 2)
    w = Window(4)
    filled = filled_cluster(ModelKind.HALF_ORTHANT, f, 1.0, w)
    assert filled == {(a, b) for a in range(5) for b in range(5)}
    # generic p: contains the raw cluster and is +e1 closed in the window
    raw = forward_cluster(ModelKind.ORTHANT, f, 0.6, (0, 0), w).reached
    filled2 = filled_cluster(ModelKind.ORTHANT, f, 0.6, w)
    assert set(raw) <= filled2
    for (a, b) in filled2:
        if a < w.radius:
            assert (a + 1, b) in filled2


def test_filled_cluster_python_path_parity():
    f = SiteField(23, 2)
    w = Window(4)
    fast = filled_cluster(ModelKind.ORTHANT, f, 0.55, w)
    slow = filled_cluster(ModelKind.ORTHANT, PythonOnlyField(f), 0.55, w)
    assert fast == slow


def test_fill_agreement_diagnostic():
    w = Window(6)
    for seed in range(20):
        rep = fill_agreement(SiteField(seed, 2), 0.75, w)
        # the filled orthant cluster never exceeds the half-orthant one
        assert rep["filled_only"] == 0
        assert 0.0 <= rep["excess_rate"] <= 1.0


def test_higher_dimensions_smoke():
    # d=3 and d=4 share all the machinery; endpoints and parity must hold
    for d in (3, 4):
        w = Window(2 if d == 4 else 5)
        f = SiteField(31, d)
        assert escapes_cone(f, 1.0, 1, Fraction(0), w) is False
        if w.radius > d:  # room to walk past the cone floor
            assert escapes_cone(f, 0.0, 1, Fraction(0), w) is True
        for p in (0.3, 0.7):
            assert escapes_cone(f, p, 1, Fraction(1, 2), w) == \
                escapes_cone_reference(f, p, 1, Fraction(1, 2), w)


def test_flipped_field_reach_parity():
    # kernel path must honor the single-site flip
    from orthantlab.lattice import flip

    w = Window(5)
    for seed in range(25):
        f = SiteField(seed, 2)
        g = flip(f, (0, 0))
        fast = escapes_cone(g, 0.6, 1, Fraction(0), w)
        slow = escapes_cone_reference(g, 0.6, 1, Fraction(0), w)
        assert fast == slow
