"""Coned-off pieces: apex vertices over peripheral coset lines, thick distances.

A coned piece is a finite window of one tree factor with one cone vertex per
peripheral coset line meeting the window.  Radial edges have length r (1/2
for the coned-off graph convention, 2 for the multicone assembly); weights
are kept doubled so everything stays integral.  Thick distance d^K maximizes
the cutoff sum of K-bounded segment lengths over enumerated geodesics, with
the enumeration mode (complete or sampled) recorded per pair.
"""

from __future__ import annotations

import collections
import heapq
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

from .bass_serre import TreeVertex, tree_distance, tree_geodesic
from .bbf_quasitrees import QuasiLineFamily, contributing_lines, cutoff
from .freegroup import (
    Axis,
    Word,
    ball as fg_ball,
    concat,
    project_to_axis,
    shortlex_key,
    shortlex_min_coset,
    word_distance,
    word_power,
)
from .glued_hyperbolic import GluedPoint, GluedSpace, distance_with_anchors
from .model_space import ModelSpace

Node = Union[Word, tuple]  # words, or ("apex", step, coset_word)


def apex_node(step, coset_word) -> tuple:
    return ("apex", step, coset_word)


def is_apex(node: Node) -> bool:
    return isinstance(node, tuple) and len(node) == 3 and node[0] == "apex"


@dataclass
class ConedPiece:
    """Windowed coned graph of one vertex factor; weights are doubled."""

    space: ModelSpace
    graph_vertex: str
    words: set
    radius2: int  # doubled radial edge length (1 = half edges, 4 = radius 2)
    adjacency: dict = field(default_factory=dict)
    cosets: dict = field(default_factory=dict)  # (step, coset word) -> member words

    def nodes(self) -> list[Node]:
        return sorted(self.adjacency, key=_node_key)

    def dijkstra(self, source: Node) -> dict[Node, int]:
        dist = {source: 0}
        heap = [(0, _node_key(source), source)]
        while heap:
            d, _, u = heapq.heappop(heap)
            if d > dist.get(u, 1 << 60):
                continue
            for v, w in self.adjacency.get(u, ()):
                nd = d + w
                if nd < dist.get(v, 1 << 60):
                    dist[v] = nd
                    heapq.heappush(heap, (nd, _node_key(v), v))
        return dist

    def distance2(self, x: Node, y: Node) -> Optional[int]:
        """Doubled coned distance within the window."""
        return self.dijkstra(x).get(y)

    def distance(self, x: Node, y: Node) -> Optional[Fraction]:
        d = self.distance2(x, y)
        return None if d is None else Fraction(d, 2)

    def geodesics(self, x: Node, y: Node, cap: int = 24, samples: int = 32, rng=None):
        """All geodesic node paths if at most `cap`, else sampled ones.

        Returns (paths, mode) with mode "complete" or "sampled".
        """
        dist = self.dijkstra(x)
        if y not in dist:
            return [], "unreachable"
        preds: dict[Node, list[Node]] = collections.defaultdict(list)
        for u, nbrs in self.adjacency.items():
            for v, w in nbrs:
                if u in dist and v in dist and dist[u] + w == dist[v]:
                    preds[v].append(u)
        for v in preds:
            preds[v].sort(key=_node_key)

        def count_paths(v, memo):
            if v == x:
                return 1
            if v in memo:
                return memo[v]
            memo[v] = sum(count_paths(u, memo) for u in preds[v])
            return memo[v]

        total = count_paths(y, {})
        if total <= cap:
            out = []

            def walk(v, acc):
                if v == x:
                    out.append([x] + acc)
                    return
                for u in preds[v]:
                    walk(u, [v] + acc)

            walk(y, [])
            return out, "complete"
        rng = rng or random.Random(0)
        out = []
        for _ in range(samples):
            path = [y]
            v = y
            while v != x:
                v = preds[v][rng.randrange(len(preds[v]))]
                path.append(v)
            out.append(path[::-1])
        return out, "sampled"


def _node_key(n: Node):
    if is_apex(n):
        return (1, n[1], shortlex_key(n[2]), ())
    return (0, ("", 0), shortlex_key(n), n)


class ConeBudgetError(RuntimeError):
    pass


def build_coned(
    space: ModelSpace,
    graph_vertex: str,
    window_radius: int,
    radius2: int = 1,
    extra_words: Iterable[Word] = (),
    max_nodes: int = 60000,
) -> ConedPiece:
    """Cone off every peripheral coset line meeting the window.

    Half edges run from each coset element in the window to the coset's cone
    vertex.  radius2 is the doubled radial length: 1 gives the peripheral
    edge convention (two halves = length 1), 4 the multicone radius 2.
    """
    vdata = space.graph.vertex(graph_vertex)
    words = set(fg_ball(window_radius, vdata.rank))
    words.update(extra_words)
    piece = ConedPiece(space, graph_vertex, words, radius2)
    adj: dict[Node, list] = collections.defaultdict(list)
    for w in words:
        for a in range(1, vdata.rank + 1):
            for sgn in (a, -a):
                if not w or w[-1] != -sgn:
                    nxt = w + (sgn,)
                else:
                    nxt = w[:-1]
                if nxt in words:
                    adj[w].append((nxt, 2))
        if len(adj) > max_nodes:
            raise ConeBudgetError(f"coned window exceeded {max_nodes} nodes")
    # peripheral cosets: for every edge word b and window word w, the coset
    # of w gets a cone vertex joined to each member in the window
    for step in space.graph.steps_at(graph_vertex):
        b = space.graph.word_at_source(step)
        for w in sorted(words, key=shortlex_key):
            u = shortlex_min_coset(w, b)
            key = (step, u)
            if key not in piece.cosets:
                maxlen = max(len(ww) for ww in words)
                bound = (maxlen + len(u)) // max(1, len(b)) + 2
                members = sorted(
                    (
                        cand
                        for m in range(-bound, bound + 1)
                        if (cand := concat(u, word_power(b, m))) in words
                    ),
                    key=shortlex_key,
                )
                piece.cosets[key] = members
                apex = apex_node(*key)
                for elt in members:
                    adj[elt].append((apex, radius2))
                    adj[apex].append((elt, radius2))
    piece.adjacency = dict(adj)
    return piece


# --- K-bounded decomposition ------------------------------------------------------


@dataclass
class KDecomposition:
    path: list[Node]
    segments: list[tuple[int, int]]  # index ranges of maximal K-bounded parts
    deep_edges: list[int]  # indices of peripheral edges with base distance > K
    thick2: int  # doubled |beta|_K

    @property
    def thick(self) -> Fraction:
        return Fraction(self.thick2, 2)


def k_decompose(piece: ConedPiece, path: Sequence[Node], K: int) -> KDecomposition:
    """Split a coned path at deep peripheral edges and sum cutoff lengths.

    A peripheral edge (element, apex, element) is deep when its endpoints are
    more than K apart in the underlying factor; the surviving maximal
    segments contribute their doubled length when at least 2K.
    """
    deep = []
    for i in range(1, len(path) - 1):
        if is_apex(path[i]):
            a, b = path[i - 1], path[i + 1]
            if not is_apex(a) and not is_apex(b) and word_distance(a, b) > K:
                deep.append(i)
    segments = []
    start = 0
    for i in deep:
        if i - 1 > start:
            segments.append((start, i - 1))
        start = i + 1
    if len(path) - 1 > start:
        segments.append((start, len(path) - 1))

    def seg_len2(lo, hi):
        total = 0
        for i in range(lo, hi):
            w = next(w for v, w in piece.adjacency[path[i]] if v == path[i + 1])
            total += w
        return total

    thick2 = sum(cutoff(seg_len2(lo, hi), 2 * K) for lo, hi in segments)
    return KDecomposition(list(path), segments, deep, thick2)


@dataclass
class ThickDistance:
    value2: int
    mode: str

    @property
    def value(self) -> Fraction:
        return Fraction(self.value2, 2)


def thick_distance(
    piece: ConedPiece, x: Node, y: Node, K: int, cap: int = 24, samples: int = 32, rng=None
) -> Optional[ThickDistance]:
    """d^K: max of |beta|_K over enumerated geodesics (mode recorded)."""
    paths, mode = piece.geodesics(x, y, cap=cap, samples=samples, rng=rng)
    if not paths:
        return None
    best = max(k_decompose(piece, p, K).thick2 for p in paths)
    return ThickDistance(best, mode)


# --- formula fits -----------------------------------------------------------------


def boundary_family(space: ModelSpace, graph_vertex: str) -> QuasiLineFamily:
    """The family containing only the boundary-line root classes."""
    from .freegroup import primitive_root

    vdata = space.graph.vertex(graph_vertex)
    roots = []
    seen = set()
    for step in space.graph.steps_at(graph_vertex):
        cyc = primitive_root(space.graph.word_at_source(step))[0]
        from .bbf_quasitrees import _root_class_key

        key = _root_class_key(cyc)
        if key not in seen:
            seen.add(key)
            roots.append(cyc)
    return QuasiLineFamily(graph_vertex, vdata.rank, roots, list(roots), 0, [])


@dataclass
class ConeoffRow:
    pair_id: int
    d_base: int
    thick2: int
    sigma: int
    mode: str

    @property
    def rhs(self) -> Fraction:
        return Fraction(self.thick2, 2) + self.sigma


def _fit_ratio(pairs, margin: float = 1.5) -> float:
    """Calibrated multiplicative envelope with headroom: num <= m * den."""
    vals = [num / max(den, 1.0) for num, den in pairs]
    return max(1.0, margin * max(vals, default=1.0))


@dataclass
class ConeoffFit:
    rows: list[ConeoffRow]
    K: int

    @property
    def upper_mult(self) -> float:
        vals = [r.d_base / max(float(r.rhs), 1.0) for r in self.rows]
        return max(vals, default=1.0)

    @property
    def lower_mult(self) -> float:
        vals = [float(r.rhs) / max(r.d_base, 1) for r in self.rows]
        return max(vals, default=1.0)

    def fit_envelope(self, add: float, margin: float = 1.5) -> tuple[float, float]:
        """(upper m, lower m'): d <= m*rhs + add and rhs <= m'*d + add."""
        up = _fit_ratio(((r.d_base - add, float(r.rhs)) for r in self.rows), margin)
        lo = _fit_ratio(((float(r.rhs) - add, r.d_base) for r in self.rows), margin)
        return up, lo

    def violations(self, up: float, lo: float, add: float) -> int:
        bad = 0
        for r in self.rows:
            if r.d_base > up * float(r.rhs) + add + 1e-9:
                bad += 1
            if float(r.rhs) > lo * r.d_base + add + 1e-9:
                bad += 1
        return bad


def coned_window_words(pairs: Sequence[tuple[Word, Word]]) -> list[Word]:
    """Geodesic supports of the pairs, for exact windowed coned distances."""
    from .freegroup import geodesic_vertices

    words: set = set()
    for x, y in pairs:
        words.update(geodesic_vertices(x, y))
    return sorted(words, key=shortlex_key)


def piece_coneoff_fit(
    space: ModelSpace,
    piece: ConedPiece,
    pairs: Sequence[tuple[Word, Word]],
    K: int,
    rng=None,
) -> ConeoffFit:
    """Fit the base metric against thick distance plus boundary-line terms."""
    fam = boundary_family(space, piece.graph_vertex)
    rows = []
    for i, (x, y) in enumerate(pairs):
        td = thick_distance(piece, x, y, K, rng=rng)
        if td is None:
            continue
        sigma = sum(cutoff(d, K) for _, d in contributing_lines(fam, x, y, max(K, 1)))
        rows.append(ConeoffRow(i, word_distance(x, y), td.value2, sigma, td.mode))
    return ConeoffFit(rows, K)


# --- glued-level formulas -----------------------------------------------------------


@dataclass
class GluedConeoffRow:
    pair_id: int
    d_glued: int
    thick2: int
    sigma_binding: int
    d_tree: int

    @property
    def rhs(self) -> Fraction:
        return Fraction(self.thick2, 2) + self.sigma_binding


@dataclass
class GluedConeoffFit:
    rows: list[GluedConeoffRow]
    K: int

    @property
    def upper_mult(self) -> float:
        vals = [r.d_glued / max(float(r.rhs), 1.0) for r in self.rows]
        return max(vals, default=1.0)

    @property
    def lower_mult(self) -> float:
        vals = [float(r.rhs) / max(r.d_glued, 1) for r in self.rows]
        return max(vals, default=1.0)

    def fit_envelope(self, add: float, margin: float = 1.5) -> tuple[float, float]:
        up = _fit_ratio(((r.d_glued - add, float(r.rhs)) for r in self.rows), margin)
        lo = _fit_ratio(((float(r.rhs) - add, r.d_glued) for r in self.rows), margin)
        return up, lo

    def violations(self, up: float, lo: float, add: float) -> int:
        bad = 0
        for r in self.rows:
            if r.d_glued > up * float(r.rhs) + add + 1e-9:
                bad += 1
            if float(r.rhs) > lo * r.d_glued + add + 1e-9:
                bad += 1
        return bad


def glued_coneoff_fit(
    model: ModelSpace,
    glued: GluedSpace,
    pairs: Sequence[tuple[GluedPoint, GluedPoint]],
    K: int,
    window_radius: int = 4,
    rng=None,
) -> GluedConeoffFit:
    """Glued distance against summed per-piece thick distances and binding terms.

    The thick part sums d^K over corridor pieces between the optimal entry and
    exit anchor vertices; binding-line contributions are rung-coordinate gaps
    at each link crossing, cut off at K.
    """
    from .freegroup import geodesic_vertices

    coned_cache: dict[str, ConedPiece] = {}

    def coned_for(gv: str, extra: Iterable[Word]) -> ConedPiece:
        piece = coned_cache.get(gv)
        if piece is None or not set(extra) <= piece.words:
            pool = set(piece.words) | set(extra) if piece else set(extra)
            piece = build_coned(model, gv, window_radius, extra_words=sorted(pool, key=shortlex_key))
            coned_cache[gv] = piece
        return piece

    rows = []
    for i, (a, b) in enumerate(pairs):
        d, anchors = distance_with_anchors(glued, a, b)
        thick2 = 0
        for anc in anchors:
            support = geodesic_vertices(anc.entry, anc.exit)
            piece = coned_for(anc.site.graph_vertex, support)
            td = thick_distance(piece, anc.entry, anc.exit, K, rng=rng)
            assert td is not None, "anchor geodesic support must be in the window"
            thick2 += td.value2
        sigma = 0
        geo = tree_geodesic(a.site, b.site)
        for j in range(len(anchors) - 1):
            site = anchors[j].site
            idx = geo.index(site)
            plane_out = model.plane_between(site, geo[idx + 1])
            plane_in = model.plane_between(anchors[j + 1].site, geo[idx + 1])
            ax_out = model.line_axis(plane_out.near)
            ax_in = model.line_axis(plane_in.near)
            _, p_out = project_to_axis(anchors[j].exit, ax_out)
            _, p_in = project_to_axis(anchors[j + 1].entry, ax_in)
            r_out = model.cross_plane(plane_out, p_out, 0)[1]
            r_in = model.cross_plane(plane_in, p_in, 0)[1]
            sigma += cutoff(abs(r_out - r_in), K)
        rows.append(GluedConeoffRow(i, d, thick2, sigma, tree_distance(a.site, b.site)))
    return GluedConeoffFit(rows, K)


def coneoff_family(
    space: ModelSpace, piece: ConedPiece, K: int, triple: Optional[list[Word]] = None, cap: int = 24
) -> list[list[Node]]:
    """Quasi-lines for the coned piece: windowed axes of h*f with ḋ(1,h) = K.

    h runs over window vertices at doubled coned distance 2K from the
    identity whose Dijkstra geodesic is K-bounded (a sampled-geodesic
    surrogate for the exact K-boundedness test, recorded by construction).
    """
    from .bbf_quasitrees import default_triple

    vdata = space.graph.vertex(piece.graph_vertex)
    if triple is None:
        triple = default_triple(vdata.rank)
    dist = piece.dijkstra(())
    shell = [w for w, d in dist.items() if d == 2 * K and not is_apex(w)]
    shell.sort(key=shortlex_key)
    lines: list[list[Node]] = []
    seen = set()
    for h in shell[:cap]:
        paths, _ = piece.geodesics((), h, cap=1, samples=1)
        if not paths:
            continue
        dec = k_decompose(piece, paths[0], K)
        if dec.deep_edges:
            continue  # geodesic is not K-bounded
        for f in triple:
            w = concat(h, f)
            if not w:
                continue
            ax = Axis.of_element(w)
            if ax.line_key() in seen:
                continue
            seen.add(ax.line_key())
            segment = [v for v in (ax.vertex(t) for t in range(-2 * K, 2 * K + 1)) if v in piece.words]
            if len(segment) >= 2:
                lines.append(segment)
    return lines


def coned_projection_diameter(piece: ConedPiece, line: Sequence[Node], dist_map: dict) -> tuple[int, int]:
    """(min doubled distance to the line, index of the nearest line vertex)."""
    best = None
    for idx, v in enumerate(line):
        d = dist_map.get(v)
        if d is not None and (best is None or d < best[0]):
            best = (d, idx)
    return best if best is not None else (1 << 60, -1)


@dataclass
class ConeoffDistanceFormulaRow:
    pair_id: int
    thick2: int
    sigma2: int
    d_tree: int


def coneoff_distance_formula_fit(
    space: ModelSpace,
    piece: ConedPiece,
    lines: Sequence[Sequence[Node]],
    pairs: Sequence[tuple[Word, Word]],
    K: int,
    rng=None,
) -> list[ConeoffDistanceFormulaRow]:
    """Per-pair thick distance against the cutoff sum over coned quasi-lines."""
    rows = []
    for i, (x, y) in enumerate(pairs):
        td = thick_distance(piece, x, y, K, rng=rng)
        if td is None:
            continue
        dx = piece.dijkstra(x)
        dy = piece.dijkstra(y)
        sigma2 = 0
        for line in lines:
            _, ix = coned_projection_diameter(piece, line, dx)
            _, iy = coned_projection_diameter(piece, line, dy)
            if ix < 0 or iy < 0:
                continue
            proj_d = piece.distance2(line[ix], line[iy])
            if proj_d is not None:
                sigma2 += cutoff(proj_d, 2 * K)
        rows.append(ConeoffDistanceFormulaRow(i, td.value2, sigma2, 0))
    return rows


def apex_projection_bound(piece: ConedPiece, lines: Sequence[Sequence[Node]], apex: Node) -> int:
    """Largest doubled diameter of apex projections onto the given lines.

    Cross-piece projections in the multicone assembly factor through the
    shared apex, so this bounds them.
    """
    dist = piece.dijkstra(apex)
    worst = 0
    for line in lines:
        vals = [(dist.get(v), idx) for idx, v in enumerate(line) if dist.get(v) is not None]
        if not vals:
            continue
        m = min(v for v, _ in vals)
        close = [line[idx] for v, idx in vals if v <= m + 2]
        diam = 0
        for a in close:
            da = piece.dijkstra(a)
            for b in close:
                d = da.get(b)
                if d is not None:
                    diam = max(diam, d)
        worst = max(worst, diam)
    return worst


# --- pipeline: glued space vs thick distance times binding quasi-tree -----------------


def nearest_binding_projection(
    model: ModelSpace, glued: GluedSpace, p: GluedPoint
) -> tuple[TreeVertex, int]:
    """(link, rung parameter): the projection to the nearest binding line.

    Every vertex of a piece lies on one coset line per edge; the nearest
    boundary line is chosen deterministically by the smallest step key, and
    its rung coordinate is the binding parameter.
    """
    if p.kind == "binding":
        return p.site, p.t
    refs = model.lines_through(p.site, p.ybar)
    assert refs, "every piece vertex lies on a boundary line"
    ref, s = min(refs, key=lambda rs: (rs[0].step, shortlex_key(rs[0].coset_word)))
    plane = model.plane_of_line(ref)
    link = model.line_neighbor(ref)
    return link, model.cross_plane(plane, s, 0)[1]


def binding_quasitree(
    model: ModelSpace,
    links: Sequence[TreeVertex],
    K: int,
    extra_params: dict | None = None,
    pad: int = 4,
):
    """Quasi-tree over binding lines; bridges join links sharing one piece."""
    from .bbf_quasitrees import QuasiTreeGraph

    links = sorted({l.key(): l for l in links}.values(), key=lambda l: l.key())
    index = {l.key(): i for i, l in enumerate(links)}
    feet: list[list[int]] = [[0] for _ in links]
    if extra_params:
        for l, params in extra_params.items():
            if l.key() in index:
                feet[index[l.key()]].extend(params)
    bridges = []
    for i in range(len(links)):
        for j in range(i + 1, len(links)):
            if tree_distance(links[i], links[j]) != 2:
                continue
            geo = tree_geodesic(links[i], links[j])
            piece = geo[1]
            plane_i = model.plane_between(piece, links[i])
            plane_j = model.plane_between(piece, links[j])
            ax_i = model.line_axis(plane_i.near)
            ax_j = model.line_axis(plane_j.near)
            from .freegroup import bridge as axis_bridge

            br = axis_bridge(ax_i, ax_j)
            r_i = model.cross_plane(plane_i, br.param_a, 0)[1]
            r_j = model.cross_plane(plane_j, br.param_b, 0)[1]
            bridges.append((i, r_i, j, r_j))
            feet[i].append(r_i)
            feet[j].append(r_j)
    windows = [(min(f) - pad, max(f) + pad) for f in feet]
    g = QuasiTreeGraph([None] * len(links), K, windows, bridges)
    g.build_adjacency()
    return g, index


@dataclass
class PipelineRow:
    pair_id: int
    d_glued: int
    thick2: int
    d_binding: int

    @property
    def rhs(self) -> Fraction:
        return Fraction(self.thick2, 2) + self.d_binding


@dataclass
class PipelineReport:
    rows: list[PipelineRow]
    K: int
    excluded: int = 0

    @property
    def upper(self) -> float:
        vals = [r.d_glued / max(float(r.rhs), 1.0) for r in self.rows]
        return max(vals, default=1.0)

    @property
    def lower(self) -> float:
        vals = [float(r.rhs) / max(r.d_glued, 1) for r in self.rows]
        return max(vals, default=1.0)


def qt_pipeline_check(
    model: ModelSpace,
    glued: GluedSpace,
    pairs: Sequence[tuple[GluedPoint, GluedPoint]],
    K: int,
    window_radius: int = 4,
    rng=None,
) -> PipelineReport:
    """Glued distance against thick distance plus the binding quasi-tree term."""
    phi2 = {}
    links_needed: dict = {}
    for a, b in pairs:
        for p in (a, b):
            if p not in phi2:
                phi2[p] = nearest_binding_projection(model, glued, p)
                links_needed.setdefault(phi2[p][0].key(), phi2[p][0])
        for site in tree_geodesic(a.site, b.site):
            if not glued.contains_piece(site):
                links_needed.setdefault(site.key(), site)
    extra: dict = {}
    for link, r in phi2.values():
        extra.setdefault(link, []).append(r)
    graph, index = binding_quasitree(model, list(links_needed.values()), K, extra)

    from .freegroup import geodesic_vertices

    coned_cache: dict[str, ConedPiece] = {}

    def coned_for(gv: str, extra_words):
        piece = coned_cache.get(gv)
        if piece is None or not set(extra_words) <= piece.words:
            pool = set(piece.words) | set(extra_words) if piece else set(extra_words)
            piece = build_coned(model, gv, window_radius, extra_words=sorted(pool, key=shortlex_key))
            coned_cache[gv] = piece
        return piece

    rows = []
    excluded = 0
    for i, (a, b) in enumerate(pairs):
        d, anchors = distance_with_anchors(glued, a, b)
        thick2 = 0
        for anc in anchors:
            support = geodesic_vertices(anc.entry, anc.exit)
            piece = coned_for(anc.site.graph_vertex, support)
            td = thick_distance(piece, anc.entry, anc.exit, K, rng=rng)
            if td is not None:
                thick2 += td.value2
        la, ra = phi2[a]
        lb, rb = phi2[b]
        dc = graph.distance((index[la.key()], ra), (index[lb.key()], rb))
        if dc is None:
            excluded += 1
            continue
        rows.append(PipelineRow(i, d, thick2, dc))
    return PipelineReport(rows, K, excluded)
