"""Subgroup geometry: Morse screening, orbit cores, contraction and height probes.

A subgroup is given by generators in the instance's fundamental group.  The
workbench screens freeness up to a recorded word length (every short
nontrivial word must act loxodromically), materializes a core as the orbit of
basepoint geodesics, builds the path-system projection onto it, and gathers
bounded-search evidence for contraction constants, neighborhood containment,
orbit-map distortion, and height.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .bass_serre import (
    GroupElement,
    TreeVertex,
    act,
    base_vertex,
    coset,
    identity,
    translation_length,
    tree_distance,
    tree_geodesic,
)
from .freegroup import concat, word_distance
from .model_space import ModelSpace, XPoint
from .special_paths import path_point_distance, special_path


class NotFreeEvidence(ValueError):
    """A short word in the generators is elliptic (or trivial)."""

    def __init__(self, word_descr: str):
        super().__init__(f"freeness screen failed: {word_descr} is not loxodromic")
        self.word_descr = word_descr


def morse_test(g: GroupElement) -> bool:
    """Morse iff the element translates the tree (equivalently: not conjugate
    into a vertex group)."""
    if g.is_identity():
        raise ValueError("the identity is not an infinite-order element")
    return translation_length(g)[0] > 0


@dataclass
class SubgroupSpec:
    generators: list[GroupElement]
    verified_free_up_to: int = 0

    def __post_init__(self):
        if not self.generators:
            raise ValueError("generator list must be nonempty")

    def symmetric_generators(self) -> list[GroupElement]:
        out = list(self.generators)
        out.extend(g.inv() for g in self.generators)
        return out


def reduced_letter_words(n_letters: int, max_len: int) -> Iterable[tuple[int, ...]]:
    """Nonempty words in letters 0..2n-1 avoiding immediate inverses."""

    def inv(i):
        return i + n_letters if i < n_letters else i - n_letters

    frontier = [(i,) for i in range(2 * n_letters)]
    while frontier:
        nxt = []
        for w in frontier:
            yield w
            if len(w) < max_len:
                for i in range(2 * n_letters):
                    if i != inv(w[-1]):
                        nxt.append(w + (i,))
        frontier = nxt


def screen_free(spec: SubgroupSpec, up_to: int) -> SubgroupSpec:
    """Check every nontrivial word of length <= up_to is loxodromic.

    Freeness is screened, not decided; the verified length is recorded on the
    returned spec.  Raises NotFreeEvidence with a witness otherwise.
    """
    gens = spec.symmetric_generators()
    n = len(spec.generators)
    for letters in reduced_letter_words(n, up_to):
        g = identity(spec.generators[0].graph, spec.generators[0].start)
        for i in letters:
            g = g.mul(gens[i])
        if g.is_identity() or translation_length(g)[0] == 0:
            raise NotFreeEvidence(f"letters {letters}")
    return SubgroupSpec(spec.generators, verified_free_up_to=up_to)


def group_ball(spec: SubgroupSpec, radius: int) -> list[tuple[tuple[int, ...], GroupElement]]:
    """All elements given by reduced generator words up to the radius."""
    gens = spec.symmetric_generators()
    n = len(spec.generators)
    out = [((), identity(spec.generators[0].graph, spec.generators[0].start))]
    cache = {(): out[0][1]}
    for letters in reduced_letter_words(n, radius):
        prev = cache[letters[:-1]]
        g = prev.mul(gens[letters[-1]])
        cache[letters] = g
        out.append((letters, g))
    return out


def act_on_point(model: ModelSpace, g: GroupElement, x: XPoint) -> XPoint:
    """Left action on model points through the canonical coset decomposition."""
    rep = x.piece.representative()
    moved = g.mul(rep)
    sigma = coset(moved)
    remainder = sigma.representative().inv().mul(moved)
    assert remainder.is_vertex_element()
    u, h = remainder.elts[0].word, remainder.elts[0].fiber
    return model.point(sigma, concat(u, x.ybar), h + x.h)


@dataclass
class CoreSpace:
    basepoint: XPoint
    spec: SubgroupSpec
    orbit: list[tuple[tuple[int, ...], GroupElement]]
    points: list[XPoint]
    by_piece: dict
    tree_window: list[TreeVertex]
    orbit_vertices: dict  # TreeVertex key -> (letters, element)
    mu_core: int
    delta_prime: int


def build_core(model: ModelSpace, spec: SubgroupSpec, orbit_radius: int = 2) -> CoreSpace:
    """Materialize the orbit of basepoint geodesics and measure its spread.

    Refuses (NotFreeEvidence) unless the generators were screened free up to
    at least twice the largest generator translation length.
    """
    lengths = [translation_length(g)[0] for g in spec.generators]
    if any(l == 0 for l in lengths):
        raise NotFreeEvidence("an elliptic generator cannot span a free core")
    need = 2 * max(lengths)
    if spec.verified_free_up_to < min(need, 4):
        spec = screen_free(spec, min(need, 4))
    base = base_vertex(model.graph, spec.generators[0].start)
    x0 = model.point(base, (), 0)
    orbit = group_ball(spec, orbit_radius)
    segments = []
    for g in spec.symmetric_generators():
        segments.append(model.geodesic(x0, act_on_point(model, g, x0)))
    points: dict[XPoint, None] = {}
    for _, g in orbit:
        for seg in segments:
            for p in seg:
                points[act_on_point(model, g, p)] = None
    by_piece: dict = {}
    for p in points:
        by_piece.setdefault(p.piece, []).append(p)
    mu_core = 0
    for piece, pts in by_piece.items():
        for a in pts:
            for b in pts:
                mu_core = max(mu_core, word_distance(a.ybar, b.ybar) + abs(a.h - b.h))
    orbit_vertices = {}
    tree_window: dict = {}
    for letters, g in orbit:
        v = act(g, base)
        orbit_vertices.setdefault(v, (letters, g))
        for w in tree_geodesic(base, v):
            tree_window.setdefault(w, None)
    delta_prime = 0
    for w in tree_window:
        delta_prime = max(delta_prime, min(tree_distance(w, v) for v in orbit_vertices))
    return CoreSpace(
        basepoint=x0,
        spec=spec,
        orbit=orbit,
        points=list(points),
        by_piece=by_piece,
        tree_window=sorted(tree_window, key=lambda t: t.key()),
        orbit_vertices=orbit_vertices,
        mu_core=mu_core,
        delta_prime=delta_prime,
    )


def tree_projection(core: CoreSpace, sigma: TreeVertex) -> TreeVertex:
    """Nearest vertex of the windowed minimal subtree (deterministic ties)."""
    return min(core.tree_window, key=lambda w: (tree_distance(w, sigma), w.key()))


def ps_projection(model: ModelSpace, core: CoreSpace, x: XPoint) -> XPoint:
    """Path-system projection: land on the orbit of the basepoint.

    Projects the piece to the minimal-subtree window, then picks the orbit
    element whose tree vertex is delta'-close, shortlex-least on ties.
    """
    r = tree_projection(core, model.rho(x))
    cands = [
        (letters, g, v)
        for v, (letters, g) in core.orbit_vertices.items()
        if tree_distance(r, v) <= core.delta_prime
    ]
    if not cands:
        cands = [
            min(
                ((letters, g, v) for v, (letters, g) in core.orbit_vertices.items()),
                key=lambda t: (tree_distance(r, t[2]), t[0]),
            )
        ]
    letters, g, _ = min(cands, key=lambda t: (len(t[0]), t[0]))
    return act_on_point(model, g, core.basepoint)


def distance_to_core(model: ModelSpace, core: CoreSpace, p: XPoint) -> int:
    """Upper bound on d(p, core): exact within shared pieces, else via oracle."""
    best: Optional[int] = None
    for rep in model.representations(p):
        for q in core.by_piece.get(rep.piece, ()):  # exact in a shared piece
            d = word_distance(rep.ybar, q.ybar) + abs(rep.h - q.h)
            if best is None or d < best:
                best = d
    if best is not None:
        return best
    anchor = min(
        core.points,
        key=lambda q: (tree_distance(q.piece, p.piece), word_distance(q.ybar, p.ybar)),
    )
    d = model.oracle_distance(p, anchor)
    assert d is not None
    return d


@dataclass
class ContractionReport:
    constant: int
    samples: int
    checked: int
    violations: list[int] = field(default_factory=list)
    neighborhood_R: int = 0

    @property
    def passed(self) -> bool:
        return not self.violations


def contraction_check(
    model: ModelSpace,
    core: CoreSpace,
    sample_pairs: Sequence[tuple[XPoint, XPoint]],
    C: Optional[int] = None,
    core_pairs: int = 6,
    rng: Optional[random.Random] = None,
) -> ContractionReport:
    """Verify the two contraction conditions and fit the neighborhood constant.

    (1) points on the core project C-close to themselves; (2) pairs with far
    projections have both projections C-close to their special path.  The
    neighborhood constant R is fitted over special paths between core points.
    """
    rng = rng or random.Random(0)
    # fit C from condition (1) if not supplied
    ones = []
    for p in core.points[:: max(1, len(core.points) // 24)]:
        pi = ps_projection(model, core, p)
        d = model.oracle_distance(p, pi)
        ones.append(d)
    fitted = max(ones, default=0)
    if C is None:
        C = max(2 * fitted + 2, 4)
    violations = []
    checked = 0
    for i, (x, y) in enumerate(sample_pairs):
        px = ps_projection(model, core, x)
        py = ps_projection(model, core, y)
        dpp = model.oracle_distance(px, py)
        if dpp is None or dpp < C:
            continue
        checked += 1
        gamma = special_path(model, x, y)
        if path_point_distance(model, px, gamma) > C or path_point_distance(model, py, gamma) > C:
            violations.append(i)
    # neighborhood containment over special paths between core points
    R = 0
    pts = core.points
    for _ in range(core_pairs):
        a = pts[rng.randrange(len(pts))]
        b = pts[rng.randrange(len(pts))]
        gamma = special_path(model, a, b)
        for p in gamma.points(model)[:: 2]:
            R = max(R, distance_to_core(model, core, p))
    return ContractionReport(C, len(sample_pairs), checked, violations, R)


@dataclass
class OrbitMapFit:
    rows: list[tuple[int, int]]  # (word length, tree distance)

    @property
    def lower_slope(self) -> float:
        vals = [d / l for l, d in self.rows if l > 0]
        return min(vals, default=0.0)

    @property
    def upper_slope(self) -> float:
        vals = [d / l for l, d in self.rows if l > 0]
        return max(vals, default=0.0)


def orbit_map_fit(model: ModelSpace, spec: SubgroupSpec, radius: int) -> OrbitMapFit:
    """Word length against tree displacement for the orbit map into the tree."""
    base = base_vertex(model.graph, spec.generators[0].start)
    rows = []
    for letters, g in group_ball(spec, radius):
        if letters:
            rows.append((len(letters), tree_distance(base, act(g, base))))
    return OrbitMapFit(rows)


# --- height probe ---------------------------------------------------------------


@dataclass
class HeightWitness:
    conjugator: str
    element: str


@dataclass
class HeightReport:
    conj_radius: int
    member_length: int
    essentially_distinct: int
    witnesses: list[HeightWitness]
    vertex_intersections_trivial: bool
    finite_index_signal: bool

    def lower_bound(self) -> int:
        return 1 + len(self.witnesses)


def instance_generators(model: ModelSpace, fiber: bool = True) -> list[GroupElement]:
    """A generating set of the fundamental group based at the first vertex."""
    from .bass_serre import normalize, vertex_element

    graph = model.graph
    base = graph.vertices[0].id
    gens: list[GroupElement] = []
    for a in range(1, graph.vertex(base).rank + 1):
        gens.append(vertex_element(graph, base, (a,)))
    if fiber:
        gens.append(vertex_element(graph, base, (), 1))
    # conjugated generators of the other vertex groups along tree paths
    seen = {base}
    frontier = [(base, identity(graph, base))]
    while frontier:
        v, path = frontier.pop(0)
        for step in graph.steps_at(v):
            w = graph.step_target(step)
            crossing = path.mul(normalize(graph, v, [step]))
            if w not in seen:
                seen.add(w)
                for a in range(1, graph.vertex(w).rank + 1):
                    gens.append(crossing.mul(vertex_element(graph, w, (a,))).mul(crossing.inv()))
                if fiber:
                    gens.append(crossing.mul(vertex_element(graph, w, (), 1)).mul(crossing.inv()))
                frontier.append((w, crossing))
            elif graph.step_source(step) == v and step[1] == 0:
                # non-tree edge: its stable letter is a generator
                gens.append(crossing.mul(path.inv()))
    return gens


def height_probe(
    model: ModelSpace,
    spec: SubgroupSpec,
    conj_radius: int = 2,
    member_length: int = 3,
) -> HeightReport:
    """Bounded-search evidence for the height of the subgroup.

    Enumerates conjugators up to the radius (deduplicated modulo the subgroup
    when a witness certifies the same coset), looks for nontrivial short
    elements in the intersection of the conjugate with the subgroup, and
    checks that vertex-group intersections carry no short nontrivial element.
    Results are explicitly lower-bound evidence, never exact heights.
    """
    members = {}
    for letters, g in group_ball(spec, member_length):
        members[_gkey(g)] = (letters, g)
    nontrivial = [(l, g) for (l, g) in members.values() if not g.is_identity()]

    gens = instance_generators(model)
    conjugators = [identity(model.graph, model.graph.vertices[0].id)]
    frontier = list(conjugators)
    for _ in range(conj_radius):
        nxt = []
        for c in frontier:
            for g in gens:
                for cand in (c.mul(g), c.mul(g.inv())):
                    if all(_gkey(cand) != _gkey(d) for d in conjugators):
                        conjugators.append(cand)
                        nxt.append(cand)
        frontier = nxt

    member_keys = set(members)
    witnesses = []
    distinct = 0
    same_coset_skipped = 0
    for c in conjugators[1:]:
        # essentially distinct: skip when c^-1 is witnessed inside the subgroup
        if _gkey(c) in member_keys:
            same_coset_skipped += 1
            continue
        distinct += 1
        for letters, k in nontrivial:
            conj = c.mul(k).mul(c.inv())
            if _gkey(conj) in member_keys:
                witnesses.append(HeightWitness(c.serialize(), k.serialize()))
                break

    vertex_ok = True
    for c in conjugators:
        for letters, k in nontrivial:
            inner = c.inv().mul(k).mul(c)
            if inner.is_vertex_element() and not inner.is_identity():
                vertex_ok = False
    # every conjugator inside the subgroup's coset (or all distinct ones
    # intersecting infinitely) signals the finite-index branch
    finite_index_signal = (distinct == 0 and same_coset_skipped > 0) or (
        distinct > 0 and len(witnesses) == distinct
    )
    return HeightReport(
        conj_radius,
        member_length,
        distinct,
        witnesses,
        vertex_ok,
        finite_index_signal,
    )


def _gkey(g: GroupElement):
    return (g.start, g.elts, g.steps)
