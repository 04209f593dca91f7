import random

import pytest

from flipcka.admissible import builtin_instance
from flipcka.bass_serre import VElt, base_vertex, normalize, translation_length, vertex_element
from flipcka.model_space import ModelSpace
from flipcka.sampling import random_pair
from flipcka.subgroups import (
    ContractionReport,
    NotFreeEvidence,
    SubgroupSpec,
    act_on_point,
    build_core,
    contraction_check,
    distance_to_core,
    group_ball,
    height_probe,
    instance_generators,
    morse_test,
    orbit_map_fit,
    ps_projection,
    screen_free,
    tree_projection,
)

E1 = builtin_instance("e1")
E = ("e1", 0)
EBAR = ("e1", 1)


@pytest.fixture(scope="module")
def model():
    return ModelSpace(E1)


def loxo():
    # (b,0) e1 (d,0) e1': translation length 2
    return normalize(E1, "u", [VElt((2,)), E, VElt((2,)), EBAR])


def elliptic():
    return vertex_element(E1, "u", (1, 2), 3)


# --- morse test -------------------------------------------------------------------

def test_morse_vertex_element_false():
    assert morse_test(elliptic()) is False


def test_morse_amalgam_element_true():
    assert morse_test(loxo()) is True


def test_morse_identity_raises():
    from flipcka.bass_serre import identity

    with pytest.raises(ValueError):
        morse_test(identity(E1, "u"))


def test_morse_conjugation_invariant():
    g = loxo()
    for h in (vertex_element(E1, "u", (1,)), loxo(), vertex_element(E1, "u", (), 2)):
        assert morse_test(h.mul(g).mul(h.inv())) == morse_test(g)


def test_morse_agrees_with_translation_classification(model):
    rng = random.Random(0)
    pool = [loxo(), elliptic(), vertex_element(E1, "u", (2,)), loxo().inv()]
    mixed = []
    for i in range(100):
        g = pool[rng.randrange(len(pool))]
        h = pool[rng.randrange(len(pool))]
        mixed.append(g.mul(h).mul(g.inv()))
    for g in mixed:
        if g.is_identity():
            continue
        length, cls = translation_length(g)
        assert morse_test(g) == (cls == "loxodromic")


# --- freeness screen ---------------------------------------------------------------

def test_screen_free_accepts_cyclic_loxodromic():
    spec = screen_free(SubgroupSpec([loxo()]), 4)
    assert spec.verified_free_up_to == 4


def test_screen_free_rejects_elliptic():
    with pytest.raises(NotFreeEvidence):
        screen_free(SubgroupSpec([elliptic()]), 2)


def test_group_ball_sizes():
    ball = group_ball(SubgroupSpec([loxo()]), 3)
    # cyclic: 1 + 2 * 3 elements
    assert len(ball) == 7


# --- core construction ----------------------------------------------------------------

@pytest.fixture(scope="module")
def core(model):
    spec = screen_free(SubgroupSpec([loxo()]), 4)
    return build_core(model, spec, orbit_radius=2)


def test_core_refuses_elliptic(model):
    with pytest.raises(NotFreeEvidence):
        build_core(model, SubgroupSpec([elliptic()]))


def test_core_is_quasi_line(core, model):
    # cyclic Morse subgroup: the tree window is a segment of the axis
    assert len(core.tree_window) >= 5
    assert core.mu_core >= 0
    # every orbit vertex is on the window
    for v in core.orbit_vertices:
        assert v in core.tree_window


def test_core_mu_stable_under_orbit_growth(model):
    spec = screen_free(SubgroupSpec([loxo()]), 4)
    small = build_core(model, spec, orbit_radius=1)
    big = build_core(model, spec, orbit_radius=2)
    assert small.mu_core == big.mu_core


def test_act_on_point_is_action(model):
    g, h = loxo(), loxo().inv()
    x = model.point(base_vertex(E1, "u"), (1, 2), 1)
    assert act_on_point(model, g, act_on_point(model, h, x)) == act_on_point(model, g.mul(h), x)


def test_act_on_point_preserves_distance(model):
    g = loxo()
    x = model.point(base_vertex(E1, "u"), (2,), 0)
    y = model.point(base_vertex(E1, "u"), (1,), 3)
    dxy = model.oracle_distance(x, y)
    assert model.oracle_distance(act_on_point(model, g, x), act_on_point(model, g, y)) == dxy


# --- projection and contraction ----------------------------------------------------------

def test_projection_lands_on_orbit(core, model):
    x = model.point(base_vertex(E1, "u"), (1, 2, 1), 2)
    pi = ps_projection(model, core, x)
    orbit_points = {act_on_point(model, g, core.basepoint) for _, g in core.orbit}
    assert pi in orbit_points


def test_projection_deterministic(core, model):
    x = model.point(base_vertex(E1, "u"), (2, 1), -1)
    assert ps_projection(model, core, x) == ps_projection(model, core, x)


def test_projection_fixes_tree_window_points(core, model):
    # x with rho(x) on the minimal subtree: the tree coordinate is preserved
    sigma = core.tree_window[len(core.tree_window) // 2]
    r = tree_projection(core, sigma)
    assert r == sigma


def test_core_points_project_close(core, model):
    worst = 0
    for p in core.points[:: max(1, len(core.points) // 12)]:
        pi = ps_projection(model, core, p)
        worst = max(worst, model.oracle_distance(p, pi))
    assert worst <= 2 * core.mu_core + 2 * core.delta_prime + 8


def test_contraction_check_passes(core, model):
    rng = random.Random(1)
    su = base_vertex(E1, "u")
    pairs = [random_pair(model, rng, su, rng.randrange(3), word_len=4, fiber=3) for _ in range(25)]
    rep = contraction_check(model, core, pairs, rng=random.Random(2))
    assert rep.passed, f"violations: {rep.violations}"
    assert rep.neighborhood_R <= 10


def test_neighborhood_R_stable(core, model):
    rep1 = contraction_check(model, core, [], core_pairs=4, rng=random.Random(3))
    spec = screen_free(SubgroupSpec([loxo()]), 4)
    bigger = build_core(model, spec, orbit_radius=3)
    rep2 = contraction_check(model, bigger, [], core_pairs=4, rng=random.Random(3))
    assert abs(rep1.neighborhood_R - rep2.neighborhood_R) <= 2


# --- orbit map fit ------------------------------------------------------------------------

def test_orbit_map_qi_for_morse(model):
    spec = screen_free(SubgroupSpec([loxo()]), 4)
    fit = orbit_map_fit(model, spec, 4)
    assert fit.lower_slope >= 1.0  # translation length 2 per letter
    assert fit.upper_slope <= 2.0


def test_orbit_map_degenerates_for_elliptic(model):
    spec = SubgroupSpec([elliptic()])
    fit = orbit_map_fit(model, spec, 4)
    assert fit.lower_slope == 0.0


# --- height probe -------------------------------------------------------------------------

def test_instance_generators_cover_both_vertices(model):
    gens = instance_generators(model)
    assert len(gens) >= 6


def test_height_probe_cyclic_morse(model):
    spec = screen_free(SubgroupSpec([loxo()]), 4)
    rep = height_probe(model, spec, conj_radius=1, member_length=2)
    assert rep.vertex_intersections_trivial
    assert not rep.finite_index_signal
    assert rep.lower_bound() >= 1


def test_height_probe_whole_group_signal(model):
    gens = instance_generators(model, fiber=False)
    # the subgroup generated by everything: intersections are infinite everywhere
    spec = SubgroupSpec(gens[:4])
    rep = height_probe(model, spec, conj_radius=1, member_length=2)
    assert rep.finite_index_signal
    assert not rep.vertex_intersections_trivial


def test_height_probe_excludes_own_cosets(model):
    spec = screen_free(SubgroupSpec([loxo()]), 4)
    rep = height_probe(model, spec, conj_radius=1, member_length=2)
    # conjugating by a member is never counted as essentially distinct
    for w in rep.witnesses:
        assert w.conjugator  # witnesses carry explicit words
