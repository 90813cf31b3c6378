import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mmwave_assoc.geometry import (BlockerField, Torus, UserGenerator, blocked_matrix, is_blocked, make_hex_layout,
                                   min_image, offspring_counts, sample_blockers, sample_matern, sample_ppp,
                                   scaled_torus, toroidal_angle, toroidal_distance)

BIG = Torus(800.0, 1040.0)


# -- distance / angle ----------------------------------------------------------

def test_distance_wraps_around():
    assert toroidal_distance((0, 0), (790, 0), BIG) == pytest.approx(10.0, abs=1e-12)


def test_distance_identity():
    assert toroidal_distance((0, 0), (0, 0), BIG) == 0.0


def test_distance_diagonal_wrap():
    assert toroidal_distance((10, 10), (790, 1030), BIG) == pytest.approx(28.284271247461901, rel=1e-12)


def test_distance_broadcasts():
    a = np.array([[0, 0], [10, 10]])
    b = np.array([[790, 0], [790, 1030]])
    np.testing.assert_allclose(toroidal_distance(a, b, BIG), [10.0, math.sqrt(800)])


@pytest.mark.parametrize("src,dst,expected", [
    ((0, 0), (10, 0), 0.0),
    ((0, 0), (0, 10), math.pi / 2),
    ((790, 0), (10, 0), 0.0),
    ((10, 0), (790, 0), math.pi),
    ((0, 0), (0, 1030), 3 * math.pi / 2),
])
def test_angle_examples(src, dst, expected):
    assert toroidal_angle(src, dst, BIG) == pytest.approx(expected, abs=1e-12)


def test_angle_rejects_coincident_points():
    with pytest.raises(ValueError, match="degenerate direction"):
        toroidal_angle((5, 5), (805, 5), BIG)


coord = st.floats(0, 799.999, allow_nan=False)
ycoord = st.floats(0, 1039.999, allow_nan=False)
point = st.tuples(coord, ycoord)


@given(point, point, point)
def test_distance_is_a_metric(a, b, c):
    dab = toroidal_distance(a, b, BIG)
    assert dab == pytest.approx(toroidal_distance(b, a, BIG), abs=1e-9)
    assert dab <= toroidal_distance(a, c, BIG) + toroidal_distance(c, b, BIG) + 1e-9
    assert dab <= math.hypot(400, 520) + 1e-9
    assert toroidal_distance(a, a, BIG) == 0.0


@given(point, point)
def test_min_image_matches_distance(a, b):
    d = min_image(np.subtract(b, a), BIG)
    assert math.hypot(*d) == pytest.approx(toroidal_distance(a, b, BIG), abs=1e-9)
    assert abs(d[0]) <= 400 + 1e-9 and abs(d[1]) <= 520 + 1e-9


# -- hex layout ------------------------------------------------------------------

def test_reference_layout_has_24_sites():
    lay = make_hex_layout(BIG, 200.0)
    assert lay.n_bs == 24
    assert BIG.contains(lay.bs_positions)
    assert lay.height_offset == 22.5


def test_single_cell_layout():
    assert make_hex_layout(Torus(200.0, 173.2), 200.0).n_bs == 1


def test_desk_layout_pairwise_distance():
    lay = make_hex_layout(Torus(400.0, 346.4), 200.0)
    assert lay.n_bs == 4
    d = [toroidal_distance(a, b, lay.torus) for a, b in itertools.combinations(lay.bs_positions, 2)]
    assert min(d) == pytest.approx(200.0, rel=1e-3)


@pytest.mark.parametrize("cols,rows", [(4, 4), (4, 6), (6, 4)])
def test_every_site_has_six_neighbours_at_isd(cols, rows):
    torus = scaled_torus(cols, rows, 200.0)
    lay = make_hex_layout(torus, 200.0)
    assert lay.n_bs == cols * rows
    pts = lay.bs_positions
    d = toroidal_distance(pts[:, None, :], pts[None, :, :], torus)
    np.fill_diagonal(d, np.inf)
    assert np.all(d.min(axis=1) >= 200.0 - 1e-6)
    assert np.all(np.sum(np.isclose(d, 200.0), axis=1) == 6)


def test_no_site_on_the_seam():
    lay = make_hex_layout(BIG, 200.0)
    assert np.all(lay.bs_positions[:, 0] > 0) and np.all(lay.bs_positions[:, 1] > 0)


@pytest.mark.parametrize("isd", [0.0, -5.0])
def test_layout_rejects_bad_isd(isd):
    with pytest.raises(ValueError):
        make_hex_layout(BIG, isd)


def test_layout_rejects_non_tiling_torus():
    with pytest.raises(ValueError, match="not tiled"):
        make_hex_layout(Torus(850.0, 1040.0), 200.0)


# -- users ---------------------------------------------------------------------------

def test_ppp_zero_density():
    assert len(sample_ppp(BIG, 0.0, 1)) == 0


def test_ppp_mean_count():
    counts = np.array([len(sample_ppp(BIG, 750.0, np.random.default_rng(s))) for s in range(1000)])
    mean = 750.0 * BIG.area_km2  # 624
    assert abs(counts.mean() - mean) < 3 * math.sqrt(mean / len(counts))
    assert counts.var() == pytest.approx(mean, rel=0.15)


def test_ppp_points_inside_and_deterministic():
    a = sample_ppp(BIG, 300.0, 7)
    b = sample_ppp(BIG, 300.0, 7)
    assert BIG.contains(a.positions)
    np.testing.assert_array_equal(a.positions, b.positions)
    assert a.generator is UserGenerator.PPP


def test_ppp_thinning_matches_lower_density():
    q = 0.4
    thinned, direct = [], []
    for s in range(400):
        rng = np.random.default_rng(s)
        pts = sample_ppp(BIG, 500.0, rng).positions
        thinned.append(int(np.sum(rng.uniform(size=len(pts)) < q)))
        direct.append(len(sample_ppp(BIG, 500.0 * q, np.random.default_rng(10_000 + s))))
    mean = 500.0 * q * BIG.area_km2
    se = math.sqrt(mean / 400)
    assert abs(np.mean(thinned) - mean) < 4 * se
    assert abs(np.mean(direct) - mean) < 4 * se
    assert np.var(thinned) == pytest.approx(np.var(direct), rel=0.3)


def test_ppp_rejects_negative_density():
    with pytest.raises(ValueError):
        sample_ppp(BIG, -1.0, 0)


def test_matern_equal_offspring():
    users = sample_matern(BIG, 600, 30, 50.0, 3)
    assert len(users) == 600
    assert np.all(np.bincount(users.parent_of, minlength=30) == 20)


def test_matern_remainder_goes_to_first_parents():
    np.testing.assert_array_equal(offspring_counts(65, 30), [3] * 5 + [2] * 25)


def test_matern_single_parent_disk():
    users = sample_matern(BIG, 10, 1, 50.0, 5)
    d = toroidal_distance(users.positions, users.parents[0], BIG)
    assert np.all(d <= 50.0 + 1e-9)


@given(st.integers(0, 300), st.integers(1, 40), st.floats(1.0, 300.0), st.integers(0, 2**32 - 1))
def test_matern_offspring_stay_within_radius(total, parents, radius, seed):
    users = sample_matern(BIG, total, parents, radius, seed)
    assert len(users) == total
    assert BIG.contains(users.positions) or total == 0
    if total:
        d = toroidal_distance(users.positions, users.parents[users.parent_of], BIG)
        assert np.all(d <= radius + 1e-9)


def test_matern_deterministic_and_validates():
    a = sample_matern(BIG, 90, 30, 50.0, 11)
    b = sample_matern(BIG, 90, 30, 50.0, 11)
    np.testing.assert_array_equal(a.positions, b.positions)
    with pytest.raises(ValueError):
        sample_matern(BIG, 90, 30, 0.0, 11)
    with pytest.raises(ValueError):
        sample_matern(BIG, 90, 0, 50.0, 11)


# -- blockers ------------------------------------------------------------------------

def test_blocker_area_stopping_rule():
    field = sample_blockers(BIG, 0.10, rng_seed=4)
    target = 0.10 * BIG.area
    assert target <= field.total_area < target + 20 * 20
    assert field.total_area - field.areas[-1] < target
    assert np.all((field.lengths >= 5) & (field.lengths <= 20))
    assert np.all((field.widths >= 5) & (field.widths <= 20))
    assert np.all((field.angles >= 0) & (field.angles < math.pi))


def test_blockers_deterministic():
    a = sample_blockers(BIG, 0.10, rng_seed=9)
    b = sample_blockers(BIG, 0.10, rng_seed=9)
    np.testing.assert_array_equal(a.centers, b.centers)
    np.testing.assert_array_equal(a.angles, b.angles)


@pytest.mark.parametrize("frac", [0.0, 1.0, -0.1])
def test_blockers_reject_bad_fraction(frac):
    with pytest.raises(ValueError):
        sample_blockers(BIG, frac, rng_seed=0)


def _rect(center, length, width, angle):
    return BlockerField(np.array([center], dtype=float), [length], [width], [angle])


def test_empty_field_never_blocks():
    rng = np.random.default_rng(0)
    users = rng.uniform(size=(20, 2)) * (800, 1040)
    bss = rng.uniform(size=(5, 2)) * (800, 1040)
    assert not blocked_matrix(users, bss, BlockerField.empty(), BIG).any()


def test_segment_through_centre_is_blocked():
    field = _rect((100, 100), 10, 4, 0.7)
    assert is_blocked((50, 50), (150, 150), field, BIG)


def test_segment_missing_rectangle():
    field = _rect((100, 100), 10, 4, 0.0)
    assert not is_blocked((50, 120), (150, 120), field, BIG)


def test_blocking_across_the_seam():
    field = _rect((2, 500), 6, 6, 0.0)
    # segment from x=790 to x=10 wraps through x=0
    assert is_blocked((790, 500), (10, 500), field, BIG)
    assert not is_blocked((790, 520), (10, 520), field, BIG)


# independent exact oracle: orientation-based segment/edge intersection plus containment
def _corners(c, ln, wd, ang):
    u = np.array([math.cos(ang), math.sin(ang)])
    v = np.array([-math.sin(ang), math.cos(ang)])
    c = np.asarray(c, dtype=float)
    return [c + sx * ln / 2 * u + sy * wd / 2 * v for sx, sy in ((-1, -1), (1, -1), (1, 1), (-1, 1))]


def _inside(p, corners):
    signs = []
    for a, b in zip(corners, corners[1:] + corners[:1]):
        signs.append((b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]))
    return all(s >= 0 for s in signs) or all(s <= 0 for s in signs)


def _orient(a, b, c):
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _seg_cross(p, q, a, b):
    d1, d2 = _orient(a, b, p), _orient(a, b, q)
    d3, d4 = _orient(p, q, a), _orient(p, q, b)
    return (d1 * d2 <= 0) and (d3 * d4 <= 0)


def _oracle_blocked(p, q, corners):
    if _inside(p, corners) or _inside(q, corners):
        return True
    return any(_seg_cross(p, q, a, b) for a, b in zip(corners, corners[1:] + corners[:1]))


@given(st.tuples(st.floats(50, 350), st.floats(50, 350)), st.tuples(st.floats(50, 350), st.floats(50, 350)),
       st.tuples(st.floats(100, 300), st.floats(100, 300)), st.floats(1, 40), st.floats(1, 40),
       st.floats(0, math.pi))
def test_blocking_matches_exact_oracle(p, q, c, ln, wd, ang):
    corners = _corners(c, ln, wd, ang)
    expected = _oracle_blocked(np.array(p), np.array(q), corners)
    # stay away from grazing contacts where floating point may legitimately disagree
    margin = [abs(_orient(a, b, np.array(p))) + abs(_orient(a, b, np.array(q)))
              for a, b in zip(corners, corners[1:] + corners[:1])]
    if min(margin) < 1e-6:
        return
    assert is_blocked(p, q, _rect(c, ln, wd, ang), BIG) == expected


@given(st.tuples(st.floats(0, 799), st.floats(0, 1039)), st.integers(0, 2**32 - 1))
def test_endpoint_inside_rectangle_is_blocked(c, seed):
    rng = np.random.default_rng(seed)
    ln, wd, ang = rng.uniform(5, 20), rng.uniform(5, 20), rng.uniform(0, math.pi)
    local = rng.uniform(-0.45, 0.45, 2) * (ln, wd)
    inside = np.array(c) + local[0] * np.array([math.cos(ang), math.sin(ang)]) \
        + local[1] * np.array([-math.sin(ang), math.cos(ang)])
    inside = BIG.wrap(inside)
    other = BIG.wrap(np.array(c) + rng.uniform(-300, 300, 2))
    assert is_blocked(inside, other, _rect(c, ln, wd, ang), BIG)


def test_blocking_is_symmetric():
    field = sample_blockers(BIG, 0.10, rng_seed=2)
    rng = np.random.default_rng(3)
    users = rng.uniform(size=(60, 2)) * (800, 1040)
    bss = make_hex_layout(BIG, 200.0).bs_positions
    forward = blocked_matrix(users, bss, field, BIG)
    backward = blocked_matrix(bss, users, field, BIG).T
    np.testing.assert_array_equal(forward, backward)
    assert 0 < forward.mean() < 1
