"""Normal forms for the fundamental group of a flip instance and its tree action.

Elements are groupoid paths: alternating vertex-group elements (word, fiber)
in F_k x Z and directed edge crossings.  Britton reduction plus canonical
coset representatives (shortlex-least word in the <b_e>-coset, fiber 0) give
unique normal forms, so equality, tree distances and translation lengths are
exact.  The Bass-Serre tree is never materialized; its vertices are coset
normal forms built on demand.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

from .admissible import AdmissibleGraph, EdgeStep, step_reverse
from .freegroup import (
    Word,
    WordError,
    concat,
    inverse,
    parse_word,
    format_word,
    power_of,
    shortlex_key,
    shortlex_min_coset,
    word_power,
)


class SyntaxErrorPath(ValueError):
    """Malformed alternation or unknown edge/vertex in a raw path."""


@dataclass(frozen=True)
class VElt:
    """Element (word, fiber) of a vertex group F_k x Z."""

    word: Word
    fiber: int = 0

    def is_identity(self) -> bool:
        return not self.word and self.fiber == 0

    def mul(self, other: "VElt") -> "VElt":
        return VElt(concat(self.word, other.word), self.fiber + other.fiber)

    def inv(self) -> "VElt":
        return VElt(inverse(self.word), -self.fiber)


IDENTITY_ELT = VElt((), 0)


@dataclass(frozen=True)
class GroupElement:
    """Britton-reduced, coset-canonical groupoid path.

    elts has one more entry than steps; elts[i] precedes steps[i].  All but
    the final vertex element are canonical coset representatives for the next
    edge, so structural equality decides group equality.
    """

    graph: AdmissibleGraph
    start: str
    elts: tuple[VElt, ...]
    steps: tuple[EdgeStep, ...]

    @property
    def end(self) -> str:
        if not self.steps:
            return self.start
        return self.graph.step_target(self.steps[-1])

    def is_identity(self) -> bool:
        return not self.steps and self.elts[0].is_identity()

    def is_vertex_element(self) -> bool:
        return not self.steps

    def syllable_length(self) -> int:
        return len(self.steps)

    def mul(self, other: "GroupElement") -> "GroupElement":
        if other.start != self.end:
            raise SyntaxErrorPath(f"cannot compose: path ends at {self.end}, next starts at {other.start}")
        items: list[Union[VElt, EdgeStep]] = []
        for i, e in enumerate(self.elts):
            items.append(e)
            if i < len(self.steps):
                items.append(self.steps[i])
        for i, e in enumerate(other.elts):
            items.append(e)
            if i < len(other.steps):
                items.append(other.steps[i])
        return normalize(self.graph, self.start, items)

    def inv(self) -> "GroupElement":
        items: list[Union[VElt, EdgeStep]] = []
        for i in range(len(self.elts) - 1, -1, -1):
            items.append(self.elts[i].inv())
            if i > 0:
                items.append(step_reverse(self.steps[i - 1]))
        return normalize(self.graph, self.end, items)

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        return self.mul(other)

    def serialize(self) -> str:
        parts = []
        for i, e in enumerate(self.elts):
            v = _vertex_at(self.graph, self.start, self.steps[:i])
            alphabet = self.graph.vertex(v).alphabet
            parts.append(f"({format_word(e.word, alphabet)},{e.fiber})")
            if i < len(self.steps):
                eid, direction = self.steps[i]
                parts.append(eid if direction == 0 else eid + "'")
        return ".".join(parts)


def _vertex_at(graph: AdmissibleGraph, start: str, steps: Sequence[EdgeStep]) -> str:
    v = start
    for s in steps:
        if graph.step_source(s) != v:
            raise SyntaxErrorPath(f"step {s} does not start at {v}")
        v = graph.step_target(s)
    return v


def _edge_subgroup_power(graph: AdmissibleGraph, vertex: str, step: EdgeStep, w: Word) -> Optional[int]:
    """m with w = b^m for b the edge word of `step` at `vertex`, else None."""
    assert graph.step_source(step) == vertex
    return power_of(w, graph.word_at_source(step))


def normalize(
    graph: AdmissibleGraph,
    start: str,
    items: Iterable[Union[VElt, EdgeStep, Word, tuple]],
) -> GroupElement:
    """Britton-reduce and canonicalize a raw alternating path.

    Raw items may interleave vertex elements and edge steps in any order;
    consecutive vertex elements are multiplied, missing ones are identity.
    Raises SyntaxErrorPath on inconsistent edge endpoints.
    """
    elts: list[VElt] = [IDENTITY_ELT]
    steps: list[EdgeStep] = []
    here = start

    def push_elt(e: VElt):
        elts[-1] = elts[-1].mul(e)

    def push_step(s: EdgeStep):
        nonlocal here
        if graph.step_source(s) != here:
            raise SyntaxErrorPath(f"step {s} does not start at {here}")
        if steps and s == step_reverse(steps[-1]):
            m = _edge_subgroup_power(graph, here, s, elts[-1].word)
            if m is not None:
                mid = elts.pop()
                prev = steps.pop()
                here = graph.step_source(prev)
                m2, n2 = _transfer(graph, s, m, mid.fiber)
                far_word = graph.word_at_target(s)
                push_elt(VElt(word_power(far_word, m2), n2))
                return
        steps.append(s)
        elts.append(IDENTITY_ELT)
        here = graph.step_target(s)

    for item in items:
        if isinstance(item, VElt):
            push_elt(item)
        elif isinstance(item, tuple) and len(item) == 2 and isinstance(item[0], str):
            push_step(item)  # EdgeStep
        else:
            raise SyntaxErrorPath(f"unrecognized path item {item!r}")

    # canonical coset representatives left of every edge crossing
    for i in range(len(steps)):
        v = _vertex_at(graph, start, steps[:i])
        b = graph.word_at_source(steps[i])
        u, h = elts[i].word, elts[i].fiber
        u_star = shortlex_min_coset(u, b)
        m = power_of(concat(inverse(u_star), u), b)
        assert m is not None, "coset representative must differ by a root power"
        elts[i] = VElt(u_star, 0)
        m2, n2 = _transfer(graph, steps[i], m, h)
        far_word = graph.word_at_target(steps[i])
        carried = VElt(word_power(far_word, m2), n2)
        elts[i + 1] = carried.mul(elts[i + 1])

    return GroupElement(graph, start, tuple(elts), tuple(steps))


def _transfer(graph: AdmissibleGraph, step: EdgeStep, m: int, n: int) -> tuple[int, int]:
    from .admissible import edge_group_transfer

    return edge_group_transfer(graph, step, m, n)


def identity(graph: AdmissibleGraph, vertex: str) -> GroupElement:
    return GroupElement(graph, vertex, (IDENTITY_ELT,), ())


def vertex_element(graph: AdmissibleGraph, vertex: str, word: Word, fiber: int = 0) -> GroupElement:
    return normalize(graph, vertex, [VElt(word, fiber)])


def parse_element(graph: AdmissibleGraph, text: str, start: str | None = None) -> GroupElement:
    """Inverse of GroupElement.serialize."""
    if start is None:
        start = graph.vertices[0].id
    items: list[Union[VElt, EdgeStep]] = []
    here = start
    for tok in text.strip().split("."):
        tok = tok.strip()
        if not tok:
            continue
        if tok.startswith("("):
            if not tok.endswith(")") or "," not in tok:
                raise SyntaxErrorPath(f"malformed vertex element {tok!r}")
            body = tok[1:-1]
            word_text, _, fiber_text = body.rpartition(",")
            vdata = graph.vertex(here)
            try:
                w = parse_word(word_text, vdata.rank, vdata.alphabet)
                fiber = int(fiber_text)
            except (WordError, ValueError) as exc:
                raise SyntaxErrorPath(f"bad vertex element {tok!r}: {exc}")
            items.append(VElt(w, fiber))
        else:
            direction = 0
            eid = tok
            if tok.endswith("'"):
                direction, eid = 1, tok[:-1]
            try:
                graph.edge(eid)
            except KeyError:
                raise SyntaxErrorPath(f"unknown edge {eid!r}")
            step: EdgeStep = (eid, direction)
            if graph.step_source(step) != here:
                raise SyntaxErrorPath(f"edge {tok!r} does not start at {here}")
            items.append(step)
            here = graph.step_target(step)
    return normalize(graph, start, items)


# --- tree vertices (cosets) ---------------------------------------------------


@dataclass(frozen=True, eq=False)
class TreeVertex:
    """Coset g G_v as the canonical prefix (coset word, step) sequence."""

    graph: AdmissibleGraph
    start: str
    path: tuple[tuple[Word, EdgeStep], ...]

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, TreeVertex):
            return NotImplemented
        return (self.start, self.path) == (other.start, other.path) and self.graph == other.graph

    def __hash__(self):
        h = self.__dict__.get("_hash")
        if h is None:
            h = hash((self.start, self.path))
            object.__setattr__(self, "_hash", h)
        return h

    @property
    def graph_vertex(self) -> str:
        if not self.path:
            return self.start
        return self.graph.step_target(self.path[-1][1])

    @property
    def parity(self) -> int:
        return len(self.path) % 2

    def depth(self) -> int:
        return len(self.path)

    def key(self) -> tuple:
        return (
            len(self.path),
            tuple((s[0], s[1], shortlex_key(u)) for (u, s) in self.path),
        )

    def representative(self) -> GroupElement:
        """The canonical group path from the base to this coset."""
        items: list[Union[VElt, EdgeStep]] = []
        for u, s in self.path:
            items.append(VElt(u, 0))
            items.append(s)
        return normalize(self.graph, self.start, items)

    def serialize(self) -> str:
        rep = self.representative()
        return rep.serialize()


def base_vertex(graph: AdmissibleGraph, vertex: str | None = None) -> TreeVertex:
    if vertex is None:
        vertex = graph.vertices[0].id
    graph.vertex(vertex)
    return TreeVertex(graph, vertex, ())


def coset(g: GroupElement) -> TreeVertex:
    """The tree vertex g G_(end of g)."""
    return TreeVertex(g.graph, g.start, tuple((g.elts[i].word, g.steps[i]) for i in range(len(g.steps))))


def act(g: GroupElement, sigma: TreeVertex) -> TreeVertex:
    """Left action on cosets; g must end where sigma's path begins."""
    if g.end != sigma.start:
        raise SyntaxErrorPath(f"element ends at {g.end}, coset path starts at {sigma.start}")
    return coset(g.mul(sigma.representative()))


def tree_distance(sigma: TreeVertex, tau: TreeVertex) -> int:
    """Edge count of the reduced path between the two cosets."""
    q = sigma.representative().inv().mul(tau.representative())
    return q.syllable_length()


def tree_geodesic_steps(sigma: TreeVertex, tau: TreeVertex) -> list[tuple[Word, EdgeStep]]:
    """The (coset word, step) labels read along the geodesic from sigma to tau."""
    q = sigma.representative().inv().mul(tau.representative())
    return [(q.elts[i].word, q.steps[i]) for i in range(len(q.steps))]


def tree_geodesic(sigma: TreeVertex, tau: TreeVertex) -> list[TreeVertex]:
    """All tree vertices from sigma to tau inclusive."""
    rep = sigma.representative()
    out = [sigma]
    for u, s in tree_geodesic_steps(sigma, tau):
        rep = rep.mul(normalize(sigma.graph, rep.end, [VElt(u, 0), s]))
        out.append(coset(rep))
    return out


def neighbor(sigma: TreeVertex, step: EdgeStep, coset_word: Word) -> TreeVertex:
    """Adjacent coset across `step` with the given coset representative word."""
    rep = sigma.representative()
    return coset(rep.mul(normalize(sigma.graph, rep.end, [VElt(coset_word, 0), step])))


def edge_between(sigma: TreeVertex, tau: TreeVertex) -> tuple[tuple[Word, EdgeStep], tuple[Word, EdgeStep]]:
    """For adjacent cosets, the (coset word, step) seen from each side.

    The child side of the tree edge always sees the identity coset word on
    the way back to its parent.
    """
    if tau.path[: len(sigma.path)] == sigma.path and len(tau.path) == len(sigma.path) + 1:
        u, s = tau.path[-1]
        return (u, s), ((), step_reverse(s))
    if sigma.path[: len(tau.path)] == tau.path and len(sigma.path) == len(tau.path) + 1:
        u, s = sigma.path[-1]
        return ((), step_reverse(s)), (u, s)
    raise ValueError("cosets are not adjacent in the tree")


def translation_length(g: GroupElement) -> tuple[int, str]:
    """Exact tree translation length and elliptic/loxodromic classification."""
    if g.start != g.end:
        raise SyntaxErrorPath("translation length needs a loop (start == end)")
    sigma0 = base_vertex(g.graph, g.start)
    d1 = tree_distance(sigma0, act(g, sigma0))
    d2 = tree_distance(sigma0, act(g.mul(g), sigma0))
    length = max(0, d2 - d1)
    return length, ("loxodromic" if length > 0 else "elliptic")


def parity_member(g: GroupElement) -> bool:
    """Membership in the index-<=2 subgroup preserving the parity classes."""
    if g.start != g.end:
        raise SyntaxErrorPath("parity is defined for loops")
    sigma0 = base_vertex(g.graph, g.start)
    return tree_distance(sigma0, act(g, sigma0)) % 2 == 0


def enumerate_coset_words(graph: AdmissibleGraph, vertex: str, step: EdgeStep, max_len: int) -> list[Word]:
    """Canonical coset representatives of <b_e> in F_v up to word length max_len."""
    from .freegroup import ball

    b = graph.word_at_source(step)
    reps = {}
    for w in ball(max_len, graph.vertex(vertex).rank):
        r = shortlex_min_coset(w, b)
        if len(r) <= max_len:
            reps.setdefault(r, None)
    return sorted(reps, key=shortlex_key)


def tree_ball(
    graph: AdmissibleGraph,
    center: TreeVertex,
    radius: int,
    coset_len: int = 1,
    fan_cap: int | None = None,
) -> list[TreeVertex]:
    """Materialize a tree ball with bounded coset words and branching cap.

    The tree is locally infinite; coset_len bounds the representative words
    and fan_cap (if set) truncates the per-vertex fan after sorting, so the
    result is a deterministic finite window.
    """
    seen = {center.key(): center}
    frontier = [center]
    for _ in range(radius):
        nxt = []
        for sigma in frontier:
            fan = []
            for step in graph.steps_at(sigma.graph_vertex):
                for u in enumerate_coset_words(graph, sigma.graph_vertex, step, coset_len):
                    fan.append(neighbor(sigma, step, u))
            fan.sort(key=lambda t: t.key())
            if fan_cap is not None:
                fan = fan[:fan_cap]
            for tau in fan:
                k = tau.key()
                if k not in seen:
                    seen[k] = tau
                    nxt.append(tau)
        frontier = nxt
    return sorted(seen.values(), key=lambda t: t.key())
