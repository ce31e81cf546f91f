import pytest
from hypothesis import given, settings, strategies as st

from sterile_cp.lattice import Box, Rect, SitePath, embed_path, make_rectangles, neighbors

BOX3 = Box(2, (-1, -1), (1, 1))


def test_interior_and_corner_neighbours():
    assert set(neighbors((0, 0), BOX3, "Z")) == {(1, 0), (-1, 0), (0, 1), (0, -1)}
    assert len(neighbors((1, 1), BOX3, "Z")) == 2


def test_matching_lattice_has_diagonals():
    nb = set(neighbors((0, 0), BOX3, "L*"))
    assert len(nb) == 8
    assert (1, 1) in nb and (-1, 1) in nb


def test_periodic_wraps():
    box = Box.cube(2, 1, "periodic")
    assert set(neighbors((2,), box)) == {(1,), (-2,)}


def test_site_outside_box_rejected():
    with pytest.raises(ValueError):
        neighbors((5, 5), BOX3)


def test_box_validation():
    with pytest.raises(ValueError):
        Box(1, (2,), (1,))
    with pytest.raises(ValueError):
        Box(2, (0,), (1,))
    assert Box.cube(3, 2).n_sites == 49


def test_rectangles_n99():
    q1, q2, q3, q4 = make_rectangles(99, 0.5)
    assert q1 == Rect(-42, -24, -99, 99)
    assert q2 == Rect(-99, 99, 24, 42)
    assert q3 == Rect(24, 42, -99, 99)
    assert q4 == Rect(-99, 99, -42, -24)


def test_rectangles_small_n():
    box = Box.cube(9, 2)
    for q in make_rectangles(9, 0.1):
        assert q.width >= 1 and q.height >= 1
        assert q.inside(box)


def test_rectangles_preconditions():
    with pytest.raises(ValueError):
        make_rectangles(7, 0.5)
    with pytest.raises(ValueError):
        make_rectangles(20, 1.5)


def test_embed_path():
    assert embed_path(SitePath([(0, 0), (0, 1), (1, 1)])) == {(0, 0): 0, (0, 1): 1, (1, 1): 2}
    assert embed_path(SitePath([(5, 5)])) == {(5, 5): 0}


def test_invalid_paths():
    with pytest.raises(ValueError):
        SitePath([(0, 0), (1, 1)])
    with pytest.raises(ValueError):
        embed_path(SitePath([(0, 0), (0, 1), (0, 0)]))


def test_vertical_crossing_of_q1_is_long():
    q1 = make_rectangles(99, 0.5)[0]
    path = SitePath([(q1.x0, y) for y in range(q1.y0, q1.y1 + 1)])
    ell = len(embed_path(path)) - 1
    assert ell >= 2 * 99


boxes = st.builds(lambda d, a, b, bd: Box(d, (-a,) * d, (b,) * d, bd),
                  st.integers(1, 2), st.integers(0, 3), st.integers(0, 3),
                  st.sampled_from(["vacant", "periodic"]))


@settings(max_examples=60, deadline=None)
@given(boxes, st.data())
def test_neighbour_symmetry(box, data):
    adj = data.draw(st.sampled_from(["Z", "L*"] if box.dim == 2 else ["Z"]))
    for x in box.sites():
        nb = neighbors(x, box, adj)
        assert len(set(nb)) == len(nb)
        assert len(nb) <= (2 * box.dim if adj == "Z" else 8)
        for y in nb:
            assert x in neighbors(y, box, adj)


@settings(max_examples=40, deadline=None)
@given(st.integers(8, 300), st.floats(0.05, 0.95))
def test_rectangles_contained_and_symmetric(N, eta):
    box = Box.cube(N, 2)
    q1, q2, q3, q4 = make_rectangles(N, eta)
    for q in (q1, q2, q3, q4):
        assert q.inside(box)
    assert (q3.x0, q3.x1) == (-q1.x1, -q1.x0) and (q1.y0, q1.y1) == (q3.y0, q3.y1)
    assert (q2.y0, q2.y1) == (-q4.y1, -q4.y0)
    assert (q2.x0, q2.x1, q2.y0, q2.y1) == (q3.y0, q3.y1, q3.x0, q3.x1)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.sampled_from([(1, 0), (0, 1), (-1, 0), (0, -1)]), max_size=30))
def test_embed_inverse_is_identity(steps):
    sites, seen = [(0, 0)], {(0, 0)}
    for dx, dy in steps:
        nxt = (sites[-1][0] + dx, sites[-1][1] + dy)
        if nxt in seen:
            break
        sites.append(nxt)
        seen.add(nxt)
    emb = embed_path(SitePath(sites))
    inv = {i: s for s, i in emb.items()}
    assert [emb[inv[i]] for i in range(len(sites))] == list(range(len(sites)))
