import random

import pytest
from hypothesis import given, settings, strategies as st

from flipcka.freegroup import (
    Axis,
    CyclicWord,
    FreeGroup,
    NoRootError,
    WordError,
    ball,
    bridge,
    concat,
    d_gamma,
    dist_to_axis,
    format_word,
    independent,
    inverse,
    line_distance,
    parse_word,
    primitive_root,
    projection_interval,
    project_to_axis,
    reduce_word,
    shortlex_key,
    shortlex_min_coset,
    word_distance,
)

F2 = FreeGroup(2)


def W(text):
    return F2.parse(text)


def brute_nearest(x, axis, window=12):
    """Independent oracle: scan axis vertices in a parameter window."""
    pts = [(word_distance(x, axis.vertex(t)), abs(t), t) for t in range(-window, window + 1)]
    d, _, t = min(pts)
    return axis.vertex(t), t, d


# --- reduce -----------------------------------------------------------------

def test_reduce_cancels_adjacent_inverses():
    assert reduce_word([1, 2, -2, 1]) == (1, 1)          # "a b B a" -> "aa"


def test_reduce_empty():
    assert reduce_word([]) == ()


def test_reduce_two_cancellations():
    # "a b A a B" -> "a": the inner A a cancels, then b B
    assert reduce_word(W("abAaB")) == (1,)


def test_reduce_rejects_out_of_range():
    with pytest.raises(WordError):
        reduce_word([3], rank=2)
    with pytest.raises(WordError):
        reduce_word([0])


def test_parse_format_roundtrip():
    for text in ["abAB", "a", "1", "bAb"]:
        w = W(text)
        assert W(format_word(w)) == w


# --- primitive roots --------------------------------------------------------

def test_primitive_root_visible_period():
    cyc, conj = primitive_root(W("abab"))
    assert cyc == CyclicWord(W("ab"), 2)
    assert conj == ()


def test_primitive_root_single_letter():
    cyc, _ = primitive_root(W("a"))
    assert cyc == CyclicWord((1,), 1)


def test_primitive_root_conjugate():
    # b a b^-1 has cyclically reduced core "a" with conjugator "b"
    cyc, conj = primitive_root(W("baB"))
    assert cyc == CyclicWord((1,), 1)
    assert conj == (2,)


def test_primitive_root_empty_raises():
    with pytest.raises(NoRootError):
        primitive_root(())


def brute_conjugate_power(u, v, radius=4):
    """Oracle: search conjugators g with |g| <= radius and small powers."""
    from flipcka.freegroup import word_power

    for g in ball(radius, 2):
        for m in range(1, 4):
            for n in range(1, 4):
                for sm in (m, -m):
                    lhs = concat(g, word_power(u, sm), inverse(g))
                    if lhs == word_power(v, n):
                        return True
    return False


def test_independent_basic():
    a = CyclicWord((1,))
    b = CyclicWord((2,))
    assert independent(a, b)
    # oracle agrees: no conjugate powers in ball radius 4
    assert not brute_conjugate_power((1,), (2,))


def test_independent_same_root_rotation():
    ab = CyclicWord(W("ab"))
    ba = CyclicWord(W("ba"))
    assert not independent(ab, ba)


def test_independent_inverse_root():
    ab = CyclicWord(W("ab"))
    BA = CyclicWord(W("BA"))
    assert not independent(ab, BA)
    assert brute_conjugate_power(W("ab"), W("BA"))


# --- axes and projections ---------------------------------------------------

def test_axis_canonical_base_is_conjugator():
    ax = Axis.through(W("b"), W("a"))
    assert ax.base == (2,)
    assert ax.word.root == (1,)


def test_axis_same_line_different_presentation():
    # base "a" with root "ba" presents the same line as base 1 root "ab"
    ax1 = Axis.through((), W("ab"))
    ax2 = Axis.through(W("a"), W("ba"))
    assert ax1 == ax2


def test_axis_vertices_are_geodesic():
    ax = Axis.through(W("b"), W("ab"))
    for t in range(-6, 6):
        assert word_distance(ax.vertex(t), ax.vertex(t + 1)) == 1
    assert word_distance(ax.vertex(-5), ax.vertex(5)) == 10


def test_project_point_off_axis():
    ax = Axis.of_element(W("a"))
    point, param = project_to_axis(W("b"), ax)
    assert (point, param) == ((), 0)
    bp, bt, bd = brute_nearest(W("b"), ax)
    assert (bp, bt) == (point, param) and bd == 1


def test_project_fixed_point():
    ax = Axis.of_element(W("a"))
    x = ax.vertex(7)
    assert project_to_axis(x, ax) == (x, 7)


def test_project_a3b():
    ax = Axis.of_element(W("a"))
    point, param = project_to_axis(W("aaab"), ax)
    assert point == W("aaa") and param == 3
    bp, bt, _ = brute_nearest(W("aaab"), ax)
    assert (bp, bt) == (point, param)


def test_d_gamma_examples():
    ax = Axis.of_element(W("a"))
    # both project to the identity
    assert d_gamma(ax, W("baaa"), W("B")) == 0
    assert d_gamma(ax, W("AAb"), W("aaaaa")) == 7
    assert d_gamma(ax, W("ab"), W("ab")) == 0


def test_projection_idempotent():
    rng = random.Random(7)
    ax = Axis.through(W("b"), W("ab"))
    words = list(ball(5, 2))
    for _ in range(50):
        x = words[rng.randrange(len(words))]
        p, t = project_to_axis(x, ax)
        assert project_to_axis(p, ax) == (p, t)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from([1, -1, 2, -2]), max_size=8),
       st.lists(st.sampled_from([1, -1, 2, -2]), max_size=8))
def test_projection_is_one_lipschitz(xs, ys):
    ax = Axis.of_element(W("ab"))
    x, y = reduce_word(xs), reduce_word(ys)
    assert d_gamma(ax, x, y) <= word_distance(x, y)


def test_shortlex_min_coset():
    assert shortlex_min_coset(W("aaa"), W("a")) == ()
    assert shortlex_min_coset(W("ba"), W("a")) == W("b")
    assert shortlex_min_coset(W("a"), W("a")) == ()
    # brute force agreement on random cosets
    rng = random.Random(5)
    words = list(ball(5, 2))
    for _ in range(50):
        u = words[rng.randrange(len(words))]
        root = W("ab")
        best = min(
            (concat(u, root * m) if m >= 0 else concat(u, inverse(root) * -m) for m in range(-8, 9)),
            key=shortlex_key,
        )
        assert shortlex_min_coset(u, root) == best


# --- bridges ----------------------------------------------------------------

def test_bridge_crossing_axes():
    # axes of "a" and "b" both pass through the identity
    br = bridge(Axis.of_element(W("a")), Axis.of_element(W("b")))
    assert br.width == 0
    assert br.foot_a == ()
    assert br.overlap is not None


def test_bridge_disjoint_lines():
    # axis of "a" vs axis of b a^2 b^-1 (line through "b"): bridge 1 -> "b"
    ax1 = Axis.of_element(W("a"))
    ax2 = Axis.through(W("b"), W("aa"))
    br = bridge(ax1, ax2)
    assert br.width == 1
    assert br.foot_a == ()
    assert br.foot_b == (2,)


def test_line_distance_matches_brute():
    ax1 = Axis.of_element(W("ab"))
    ax2 = Axis.through(W("bb"), W("aB"))
    br = bridge(ax1, ax2)
    for pa in range(-4, 5):
        for pb in range(-4, 5):
            assert line_distance(ax1, pa, ax2, pb, br) == word_distance(
                ax1.vertex(pa), ax2.vertex(pb)
            )


def test_line_distance_overlapping_lines():
    ax1 = Axis.of_element(W("aab"))
    ax2 = Axis.of_element(W("aabb"))
    br = bridge(ax1, ax2)
    assert br.width == 0
    for pa in range(-3, 6):
        for pb in range(-3, 6):
            assert line_distance(ax1, pa, ax2, pb, br) == word_distance(
                ax1.vertex(pa), ax2.vertex(pb)
            )


# --- invariants -------------------------------------------------------------

def test_bounded_projection_stabilizes():
    """Projections between independent axes stabilize as the window grows."""
    u = Axis.of_element(W("ab"))
    v = Axis.of_element(W("aB"))
    assert independent(u.word, v.word)
    diams = []
    for r in (10, 20, 40):
        params = [project_to_axis(v.vertex(t), u)[1] for t in range(-r, r + 1)]
        diams.append(max(params) - min(params))
    assert diams[0] == diams[1] == diams[2]
    lo, hi = projection_interval(u, v)
    assert hi - lo == diams[0]


def test_four_point_condition_delta_zero():
    """Trees are 0-hyperbolic: the two largest pair sums agree on quadruples."""
    rng = random.Random(3)
    words = list(ball(6, 2))
    for _ in range(300):
        x, y, z, w = (words[rng.randrange(len(words))] for _ in range(4))
        s1 = word_distance(x, y) + word_distance(z, w)
        s2 = word_distance(x, z) + word_distance(y, w)
        s3 = word_distance(x, w) + word_distance(y, z)
        a, b, c = sorted((s1, s2, s3))
        assert c == b  # delta = 0


def test_random_triple_lipschitz_bulk():
    rng = random.Random(11)
    ax = Axis.through(W("b"), W("ab"))
    words = list(ball(6, 2))
    for _ in range(1000):
        x = words[rng.randrange(len(words))]
        y = words[rng.randrange(len(words))]
        assert d_gamma(ax, x, y) <= word_distance(x, y)


# --- hypothesis property tests -------------------------------------------------

letters = st.sampled_from([1, -1, 2, -2])


@settings(max_examples=80, deadline=None)
@given(st.lists(letters, max_size=14))
def test_reduce_idempotent(raw):
    w = reduce_word(raw)
    assert reduce_word(w) == w


@settings(max_examples=80, deadline=None)
@given(st.lists(letters, max_size=12), st.lists(letters, max_size=12))
def test_concat_inverse_cancels(xs, ys):
    u, v = reduce_word(xs), reduce_word(ys)
    assert concat(u, v, inverse(v)) == u
    assert concat(inverse(u), u) == ()


@settings(max_examples=80, deadline=None)
@given(st.lists(letters, min_size=1, max_size=12))
def test_primitive_root_reconstructs(raw):
    w = reduce_word(raw)
    if not w:
        return
    cyc, conj = primitive_root(w)
    from flipcka.freegroup import word_power

    rebuilt = concat(conj, word_power(cyc.root, cyc.power), inverse(conj))
    assert rebuilt == w


@settings(max_examples=60, deadline=None)
@given(st.lists(letters, max_size=10), st.lists(letters, max_size=10), st.lists(letters, max_size=10))
def test_word_distance_triangle(a, b, c):
    x, y, z = reduce_word(a), reduce_word(b), reduce_word(c)
    assert word_distance(x, z) <= word_distance(x, y) + word_distance(y, z)
    assert word_distance(x, y) == word_distance(y, x)
