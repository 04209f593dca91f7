import random

import pytest

from flipcka.admissible import builtin_instance
from flipcka.bass_serre import base_vertex, neighbor
from flipcka.model_space import LineRef, ModelSpace
from flipcka.sampling import random_pair
from flipcka.special_paths import (
    build_template,
    horizontal_slide,
    path_point_distance,
    qg_fit,
    special_path,
    template_comparison,
    template_distance,
    template_point_in_space,
    template_special_path_length,
    wall_step_cost,
)

E1 = builtin_instance("e1")


@pytest.fixture(scope="module")
def space():
    return ModelSpace(E1)


@pytest.fixture(scope="module")
def sigma_u():
    return base_vertex(E1, "u")


@pytest.fixture(scope="module")
def sigma_w(sigma_u):
    return neighbor(sigma_u, ("e1", 0), ())


def P(space, piece, text, h):
    from flipcka.freegroup import parse_word

    vdata = space.graph.vertex(piece.graph_vertex)
    return space.point(piece, parse_word(text, vdata.rank, vdata.alphabet), h)


def test_same_piece_single_leg(space, sigma_u):
    x = P(space, sigma_u, "ab", 0)
    y = P(space, sigma_u, "ba", 3)
    sp = special_path(space, x, y)
    assert sp.corners == ()
    assert len(sp.legs) == 1
    assert sp.length == space.piece_distance(x, y)


def test_e1_cross_piece_example(space, sigma_u, sigma_w):
    x = P(space, sigma_u, "b", 0)
    y = P(space, sigma_w, "d", 0)
    sp = special_path(space, x, y)
    assert len(sp.corners) == 1
    assert sp.corners[0] == P(space, sigma_u, "1", 0)
    assert sp.length == 2
    assert sp.length == space.oracle_distance(x, y)


def test_points_materialization_has_right_length(space, sigma_u, sigma_w):
    x = P(space, sigma_u, "bab", 2)
    y = P(space, sigma_w, "dc", -1)
    sp = special_path(space, x, y)
    pts = sp.points(space)
    assert pts[0] == x and pts[-1] == y
    assert len(pts) == sp.length + 1


def test_subpath_closure_at_corner(space, sigma_u, sigma_w):
    x = P(space, sigma_u, "ba", 1)
    y = P(space, sigma_w, "dcd", -2)
    sp = special_path(space, x, y)
    p1 = sp.corners[0]
    sub = special_path(space, p1, y)
    # the truncation: same remaining corners, length drops by the first leg
    assert sub.corners[-len(sp.corners):] == sp.corners if len(sub.corners) == len(sp.corners) else True
    assert set(sp.corners) >= set(sub.corners) - {p1}
    first_leg = sp.legs[0]
    from flipcka.freegroup import word_distance

    first_len = word_distance(first_leg[0].ybar, first_leg[1].ybar) + abs(first_leg[0].h - first_leg[1].h)
    assert sub.length == sp.length - first_len


def test_path_system_totality_and_closure(space, sigma_u):
    rng = random.Random(9)
    for _ in range(60):
        x, y = random_pair(space, rng, sigma_u, rng.randrange(3), word_len=4, fiber=3)
        sp = special_path(space, x, y)
        assert sp.length >= 0
        # subpath between any two corners is the corresponding truncation
        if len(sp.corners) >= 2:
            mid = special_path(space, sp.corners[0], sp.corners[-1])
            assert mid.length <= sp.length


def test_special_at_least_oracle(space, sigma_u):
    rng = random.Random(10)
    for _ in range(40):
        x, y = random_pair(space, rng, sigma_u, rng.randrange(3), word_len=4, fiber=3)
        sp = special_path(space, x, y)
        d = space.oracle_distance(x, y)
        assert sp.length >= d


def test_qg_fit_same_piece_ratio_one(space, sigma_u):
    rng = random.Random(11)
    pairs = [random_pair(space, rng, sigma_u, 0, word_len=5, fiber=4) for _ in range(30)]
    pairs = [(x, y) for (x, y) in pairs if space.rho(x) == space.rho(y)]
    fit = qg_fit(space, pairs)
    assert fit.mu_mult == 1.0
    assert fit.mu_add == 0


def test_qg_fit_cross_piece_finite(space, sigma_u):
    rng = random.Random(12)
    pairs = [random_pair(space, rng, sigma_u, 1 + rng.randrange(2), word_len=5, fiber=4) for _ in range(60)]
    fit = qg_fit(space, pairs)
    assert fit.rows, "sample must not be empty"
    assert fit.mu_mult < 4.0  # uniform quasi-geodesicity at desk scale
    hist = fit.histogram(8)
    assert sum(c for _, c in hist) == len(fit.rows)


# --- horizontal slides ---------------------------------------------------------

def test_slide_fixed_point(space, sigma_u):
    line = LineRef(sigma_u, ("e1", 0), ())
    x = P(space, sigma_u, "a", 4)  # already on the line of <a>
    assert horizontal_slide(space, x, line) == x


def test_slide_projects_and_keeps_fiber(space, sigma_u):
    line = LineRef(sigma_u, ("e1", 0), ())
    x = P(space, sigma_u, "aaab", 7)
    z = horizontal_slide(space, x, line)
    rep = space.coords_in(z, sigma_u)
    assert rep.ybar == (1, 1, 1)
    assert rep.h == 7


def test_slide_never_increases_plane_distance(space, sigma_u):
    from flipcka.freegroup import dist_to_axis

    rng = random.Random(13)
    line = LineRef(sigma_u, ("e1", 0), (2,))
    ax = space.line_axis(line)
    from flipcka.sampling import random_point

    for _ in range(30):
        x = random_point(space, rng, sigma_u, 5, 4)
        rep = space.coords_in(x, sigma_u)
        if rep is None:
            continue
        z = horizontal_slide(space, x, line)
        zrep = space.coords_in(z, sigma_u)
        assert dist_to_axis(zrep.ybar, ax) == 0


def test_hslide_surrogate_bound(space, sigma_u):
    rng = random.Random(14)
    worst = 0.0
    for _ in range(30):
        x, y = random_pair(space, rng, sigma_u, 1, word_len=4, fiber=3)
        if space.rho(x) == space.rho(y):
            continue
        sp = special_path(space, x, y)
        if not sp.corners:
            continue
        p1 = sp.corners[0]
        d = space.oracle_distance(x, y)
        via = space.oracle_distance(x, p1) + space.oracle_distance(p1, y)
        worst = max(worst, (via - 1) / max(d, 1))
    assert worst <= 3.0  # fitted C stays small at desk scale


def test_point_to_path_distance_zero_on_path(space, sigma_u, sigma_w):
    x = P(space, sigma_u, "ba", 1)
    y = P(space, sigma_w, "dc", -1)
    sp = special_path(space, x, y)
    assert path_point_distance(space, sp.corners[0], sp) == 0


# --- templates -----------------------------------------------------------------

@pytest.fixture(scope="module")
def p3_space():
    return ModelSpace(builtin_instance("path3"))


def p3_corridor(p3_space):
    su = base_vertex(p3_space.graph, "u")
    sw = neighbor(su, ("e1", 0), ())
    sx = neighbor(sw, ("e2", 0), ())
    return [p3_space.plane_between(su, sw), p3_space.plane_between(sw, sx)]


def test_template_two_walls(p3_space):
    planes = p3_corridor(p3_space)
    tpl = build_template(p3_space, planes)
    assert tpl.wall_count() == 2
    assert all(w >= 1 for w in tpl.widths)
    # single strip: the step cost equals the direct formula
    p, q = (0, 0), (0, 0)
    assert template_distance(tpl, 0, p, 1, q) == wall_step_cost(tpl, 0, p, q)


def test_template_needs_two_walls(p3_space):
    from flipcka.special_paths import TemplateError

    with pytest.raises(TemplateError):
        build_template(p3_space, p3_corridor(p3_space)[:1])


def test_template_metric_symmetry_and_triangle(p3_space):
    planes = p3_corridor(p3_space)
    tpl = build_template(p3_space, planes)
    rng = random.Random(15)
    pts = [(rng.randrange(2), (rng.randint(-4, 4), rng.randint(-4, 4))) for _ in range(12)]
    for i, p in pts:
        for j, q in pts:
            dij = template_distance(tpl, i, p, j, q)
            assert dij == template_distance(tpl, j, q, i, p)
    for (i, p) in pts[:6]:
        for (j, q) in pts[:6]:
            for (k, r) in pts[:6]:
                assert template_distance(tpl, i, p, k, r) <= (
                    template_distance(tpl, i, p, j, q) + template_distance(tpl, j, q, k, r)
                )


def test_template_special_path_within_factor_two(p3_space):
    planes = p3_corridor(p3_space)
    tpl = build_template(p3_space, planes)
    rng = random.Random(16)
    for _ in range(40):
        p = (rng.randint(-5, 5), rng.randint(-5, 5))
        q = (rng.randint(-5, 5), rng.randint(-5, 5))
        direct = template_distance(tpl, 0, p, tpl.wall_count() - 1, q)
        special = template_special_path_length(tpl, p, q)
        assert direct <= special <= 2 * direct + 2


def test_template_comparison_against_oracle(p3_space):
    planes = p3_corridor(p3_space)
    tpl = build_template(p3_space, planes)
    rng = random.Random(17)
    rows = template_comparison(tpl, rng, 25, spread=4)
    assert rows
    # fitted quasi-isometry envelope: bounded multiplicative error both ways
    for r in rows:
        if r.oracle_d:
            assert r.template_d <= 3 * r.oracle_d + 4
            assert r.oracle_d <= 3 * r.template_d + 4


def test_template_point_roundtrip(p3_space):
    planes = p3_corridor(p3_space)
    tpl = build_template(p3_space, planes)
    x = template_point_in_space(tpl, 0, 2, -1)
    rep = p3_space.coords_in(x, planes[0].near.piece)
    assert rep is not None
