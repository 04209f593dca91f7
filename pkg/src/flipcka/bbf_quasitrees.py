"""Quasi-lines, projections with cutoff, greedy partitions, quasi-trees of lines.

A quasi-line family in one tree factor consists of the boundary lines plus
axes of products h*f, h running over a sphere and f over a fixed independent
triple.  Families are never materialized: the lines contributing to a pair
(x, y) are recovered exactly by matching periodic K-grams along the geodesic,
since in a tree a projection diameter >= K forces an overlap segment of that
length.  Quasi-trees glue windowed lines with unit bridge edges between
mutual projection points and are certified by a bottleneck midpoint test.
"""

from __future__ import annotations

import collections
import random
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .bass_serre import TreeVertex, tree_distance, tree_geodesic
from .freegroup import (
    Axis,
    CyclicWord,
    Word,
    ball as fg_ball,
    concat,
    d_gamma,
    dist_to_axis,
    geodesic_vertices,
    independent,
    inverse,
    primitive_root,
    project_to_axis,
    projection_interval,
    shortlex_key,
    sphere,
    word_distance,
)
from .model_space import ModelSpace
from .glued_hyperbolic import GluedPoint, GluedSpace


def cutoff(t: int, K: int) -> int:
    """[t]_K: t when t >= K, else 0."""
    if K < 0:
        raise ValueError("cutoff threshold must be non-negative")
    return t if t >= K else 0


@dataclass(frozen=True)
class CutoffValue:
    t: int
    K: int

    @property
    def value(self) -> int:
        return cutoff(self.t, self.K)


DEFAULT_TRIPLE = ("ab", "bA", "abb")


def default_triple(rank: int) -> list[Word]:
    """A fixed pairwise independent loxodromic triple for rank >= 2."""
    from .freegroup import parse_word

    words = [parse_word(t, rank) for t in DEFAULT_TRIPLE]
    cycs = [primitive_root(w)[0] for w in words]
    for i in range(3):
        for j in range(i + 1, 3):
            assert independent(cycs[i], cycs[j])
    return words


class AnnulusError(ValueError):
    """Empty annulus: the window cannot seed any quasi-lines."""


@dataclass
class QuasiLineFamily:
    """Root classes of the family in one vertex factor, plus seed metadata."""

    graph_vertex: str
    rank: int
    roots: list[CyclicWord]
    boundary_roots: list[CyclicWord]
    k_tilde: int
    triple: list[Word]

    def all_roots(self) -> list[CyclicWord]:
        return self.roots

    def certificate_check(self, window: int = 12) -> bool:
        """Axes of cyclically reduced roots are geodesics: (1, 0) certified."""
        for cyc in self.roots:
            ax = Axis(cyc)
            if word_distance(ax.vertex(-window), ax.vertex(window)) != 2 * window:
                return False
        return True


def _root_class_key(cyc: CyclicWord):
    rots = cyc.rotations() + cyc.inverse_class().rotations()
    return min(rots, key=shortlex_key)


def generate_quasilines(
    space: ModelSpace,
    graph_vertex: str,
    k_tilde: int = 4,
    triple: Optional[list[Word]] = None,
    max_roots: Optional[int] = None,
) -> QuasiLineFamily:
    """Boundary lines plus axes of h*f over the radius-k_tilde sphere.

    The Cayley graph is vertex transitive, so the covering radius is zero and
    the annulus is exactly the sphere.  Every root is cyclically reduced and
    primitive, hence every member axis carries a verified (1, 0) certificate.
    """
    vdata = space.graph.vertex(graph_vertex)
    if triple is None:
        triple = default_triple(vdata.rank)
    shell = sphere(k_tilde, vdata.rank)
    if not shell:
        raise AnnulusError(f"sphere of radius {k_tilde} is empty")
    seen: dict[Word, CyclicWord] = {}
    boundary = []
    for step in space.graph.steps_at(graph_vertex):
        cyc = primitive_root(space.graph.word_at_source(step))[0]
        key = _root_class_key(cyc)
        if key not in seen:
            seen[key] = cyc
        boundary.append(cyc)
    for h in shell:
        for f in triple:
            w = concat(h, f)
            if not w:
                continue
            cyc = primitive_root(w)[0]
            key = _root_class_key(cyc)
            if key not in seen:
                seen[key] = cyc
    roots = [seen[k] for k in sorted(seen, key=shortlex_key)]
    if max_roots is not None and len(roots) > max_roots:
        boundary_keys = {_root_class_key(b) for b in boundary}
        kept = [r for r in roots if _root_class_key(r) in boundary_keys]
        kept.extend(r for r in roots if _root_class_key(r) not in boundary_keys)
        roots = kept[:max_roots]
    fam = QuasiLineFamily(graph_vertex, vdata.rank, roots, boundary, k_tilde, triple)
    assert fam.certificate_check()
    return fam


def _kgram_index(roots: Sequence[CyclicWord], K: int) -> dict[Word, list[tuple[Word, int]]]:
    """K-gram -> [(root word, phase)] over the periodic extensions of all roots."""
    index: dict[Word, list[tuple[Word, int]]] = {}
    for cyc in roots:
        r = cyc.root
        reps = r * (K // len(r) + 2)
        for phase in range(len(r)):
            gram = reps[phase : phase + K]
            index.setdefault(gram, []).append((r, phase))
        ri = inverse(r)
        reps_i = ri * (K // len(ri) + 2)
        for phase in range(len(ri)):
            gram = reps_i[phase : phase + K]
            index.setdefault(gram, []).append((ri, phase))
    return index


def contributing_lines(
    family: QuasiLineFamily, x: Word, y: Word, K: int
) -> list[tuple[Axis, int]]:
    """All family lines with projection diameter >= K for the pair, exactly.

    In a tree, d_gamma(x, y) >= K forces the geodesic [x, y] to overlap gamma
    in a segment of length d_gamma(x, y), so scanning K-grams of the geodesic
    word against the periodic root words finds every contributor.
    """
    if K < 1:
        raise ValueError("cutoff must be positive for line enumeration")
    word = concat(inverse(x), y)
    if len(word) < K:
        return []
    verts = geodesic_vertices(x, y)
    index = _kgram_index(family.roots, K)
    found: dict[tuple, tuple[Axis, int]] = {}
    for i in range(len(word) - K + 1):
        gram = word[i : i + K]
        for root, phase in index.get(gram, ()):  # line through verts[i]
            rot = root[phase:] + root[:phase]
            ax = Axis.of_element(concat(verts[i], rot, inverse(verts[i])))
            lk = ax.line_key()
            if lk in found:
                continue
            d = d_gamma(ax, x, y)
            if d >= K:
                found[lk] = (ax, d)
    return sorted(found.values(), key=lambda t: (t[0].base, t[0].word.root))


def projection_sum(family: QuasiLineFamily, x: Word, y: Word, K: int) -> int:
    return sum(cutoff(d, K) for _, d in contributing_lines(family, x, y, K))


# --- bounded projection -----------------------------------------------------------


@dataclass
class ProjectionReport:
    max_diam: int
    offenders: list[tuple[int, int, int]]  # (i, j, diameter)

    def passes(self, theta: int) -> bool:
        return self.max_diam <= theta


def line_projection_diameter(a: Axis, b: Axis) -> int:
    lo, hi = projection_interval(a, b)
    return hi - lo


def bounded_projection_check(lines: Sequence[Axis], theta: int) -> ProjectionReport:
    """Exact pairwise projection diameters; pass iff all <= theta."""
    worst = 0
    offenders = []
    for i in range(len(lines)):
        for j in range(len(lines)):
            if i == j or lines[i].line_key() == lines[j].line_key():
                continue
            d = line_projection_diameter(lines[i], lines[j])
            worst = max(worst, d)
            if d > theta:
                offenders.append((i, j, d))
    return ProjectionReport(worst, offenders)


def line_distance_between(a: Axis, b: Axis) -> int:
    """min distance between two lines: the bridge width."""
    from .freegroup import bridge

    if a.line_key() == b.line_key():
        return 0
    return bridge(a, b).width


# --- greedy partition ---------------------------------------------------------------


class PartitionError(ValueError):
    """Coverage postcondition failed; carries the uncovered vertex."""


@dataclass
class Partition:
    classes: list[list[Axis]]
    D: int
    covering_radius: int

    def class_count(self) -> int:
        return len(self.classes)


def lines_meeting_window(
    family: QuasiLineFamily, window_words: Sequence[Word], max_lines: Optional[int] = None
) -> list[Axis]:
    """Translates of family roots passing through window vertices, deduplicated."""
    found: dict[tuple, Axis] = {}
    for w in window_words:
        for cyc in family.roots:
            for phase in range(len(cyc.root)):
                rot = cyc.root[phase:] + cyc.root[:phase]
                ax = Axis.of_element(concat(w, rot, inverse(w)))
                found.setdefault(ax.line_key(), ax)
        if max_lines is not None and len(found) >= max_lines:
            break
    lines = [found[k] for k in sorted(found, key=lambda lk: (shortlex_key(lk[0]), lk[1]))]
    return lines[:max_lines] if max_lines is not None else lines


def covering_radius(lines: Sequence[Axis], window_words: Sequence[Word]) -> int:
    worst = 0
    for w in window_words:
        best = min(dist_to_axis(w, ax) for ax in lines)
        worst = max(worst, best)
    return worst


def greedy_partition(
    lines: Sequence[Axis],
    D: int,
    window_words: Sequence[Word],
    R: Optional[int] = None,
) -> Partition:
    """Split into classes with pairwise line distance >= D inside each class.

    Classes may overlap, as permitted; each class is grown greedily until no
    admissible line remains, then both postconditions are machine-checked:
    (1) pairwise >= D inside every class, (2) the (D+R)-neighborhood of every
    class covers the window.
    """
    if R is None:
        R = covering_radius(lines, window_words)
    dist_cache: dict[tuple[int, int], int] = {}

    def ldist(i: int, j: int) -> int:
        key = (min(i, j), max(i, j))
        if key not in dist_cache:
            dist_cache[key] = line_distance_between(lines[key[0]], lines[key[1]])
        return dist_cache[key]

    assigned = [False] * len(lines)
    classes: list[list[int]] = []
    while not all(assigned):
        seed = assigned.index(False)
        members = [seed]
        assigned[seed] = True
        changed = True
        while changed:
            changed = False
            for i in range(len(lines)):
                if i in members:
                    continue
                dmin = min(ldist(i, m) for m in members)
                if dmin >= D and dmin <= D + 2 * R:
                    members.append(i)
                    assigned[i] = True
                    changed = True
        classes.append(sorted(members))

    result = Partition([[lines[i] for i in cls] for cls in classes], D, R)
    verify_partition(result, window_words)
    return result


def verify_partition(partition: Partition, window_words: Sequence[Word]) -> None:
    """Machine-check the two postconditions (raises on violation)."""
    D, R = partition.D, partition.covering_radius
    for ci, cls in enumerate(partition.classes):
        for i in range(len(cls)):
            for j in range(i + 1, len(cls)):
                d = line_distance_between(cls[i], cls[j])
                if d < D:
                    raise PartitionError(f"class {ci}: lines {i},{j} at distance {d} < {D}")
        for w in window_words:
            if min(dist_to_axis(w, ax) for ax in cls) > D + R:
                raise PartitionError(f"class {ci}: vertex {w} not (D+R)-covered")


# --- quasi-trees of quasi-lines ------------------------------------------------------


@dataclass
class QuasiTreeGraph:
    """Windowed lines joined by unit bridge edges between mutual projections."""

    lines: list[Axis]
    K: int
    param_windows: list[tuple[int, int]]
    bridges: list[tuple[int, int, int, int]]  # (i, param_i, j, param_j)
    adjacency: dict = field(default_factory=dict)

    def node(self, i: int, p: int):
        return (i, p)

    def build_adjacency(self):
        adj: dict = collections.defaultdict(list)
        for i, (lo, hi) in enumerate(self.param_windows):
            for p in range(lo, hi):
                adj[(i, p)].append((i, p + 1))
                adj[(i, p + 1)].append((i, p))
        for i, pi, j, pj in self.bridges:
            adj[(i, pi)].append((j, pj))
            adj[(j, pj)].append((i, pi))
        self.adjacency = dict(adj)

    def distance(self, a, b) -> Optional[int]:
        if a not in self.adjacency or b not in self.adjacency:
            return None
        seen = {a: 0}
        q = collections.deque([a])
        while q:
            p = q.popleft()
            if p == b:
                return seen[p]
            for n in self.adjacency.get(p, ()):
                if n not in seen:
                    seen[n] = seen[p] + 1
                    q.append(n)
        return None

    def bfs_path(self, a, b) -> Optional[list]:
        if a not in self.adjacency or b not in self.adjacency:
            return None
        seen = {a: None}
        q = collections.deque([a])
        while q:
            p = q.popleft()
            if p == b:
                path = [p]
                while seen[path[-1]] is not None:
                    path.append(seen[path[-1]])
                return path[::-1]
            for n in self.adjacency.get(p, ()):
                if n not in seen:
                    seen[n] = p
                    q.append(n)
        return None

    def edge_rows(self) -> list[tuple[str, str]]:
        rows = []
        for p, nbrs in self.adjacency.items():
            for n in nbrs:
                a, b = f"{p[0]}:{p[1]}", f"{n[0]}:{n[1]}"
                if a < b:
                    rows.append((a, b))
        return sorted(set(rows))


def build_quasitree(lines: Sequence[Axis], K: int, pad: int = 4) -> QuasiTreeGraph:
    """Connect every pair of the class by one unit edge between projections."""
    lines = list(lines)
    feet: list[list[int]] = [[0] for _ in lines]
    bridges = []
    for i in range(len(lines)):
        for j in range(i + 1, len(lines)):
            lo_i, hi_i = projection_interval(lines[i], lines[j])
            lo_j, hi_j = projection_interval(lines[j], lines[i])
            pi = (lo_i + hi_i) // 2
            pj = (lo_j + hi_j) // 2
            bridges.append((i, pi, j, pj))
            feet[i].append(pi)
            feet[j].append(pj)
    windows = [(min(f) - pad, max(f) + pad) for f in feet]
    g = QuasiTreeGraph(lines, K, windows, bridges)
    g.build_adjacency()
    return g


@dataclass
class BottleneckReport:
    delta: int
    samples: int
    failures: int


def bottleneck_certificate(
    graph: QuasiTreeGraph, rng: random.Random, samples: int, max_delta: int = 16
) -> BottleneckReport:
    """Manning midpoint test: removing a ball around a geodesic midpoint must
    separate the endpoints; the certificate is the largest radius needed."""
    nodes = sorted(graph.adjacency)
    worst = 0
    failures = 0
    for _ in range(samples):
        a = nodes[rng.randrange(len(nodes))]
        b = nodes[rng.randrange(len(nodes))]
        path = graph.bfs_path(a, b)
        if path is None or len(path) < 5:
            continue
        mid = path[len(path) // 2]
        need = None
        for delta in range(max_delta + 1):
            if _separates(graph, a, b, mid, delta):
                need = delta
                break
        if need is None:
            failures += 1
        else:
            worst = max(worst, need)
    return BottleneckReport(worst, samples, failures)


def _separates(graph: QuasiTreeGraph, a, b, center, delta: int) -> bool:
    # ball of radius delta around center (graph metric)
    blocked = {center: 0}
    q = collections.deque([center])
    while q:
        p = q.popleft()
        if blocked[p] == delta:
            continue
        for n in graph.adjacency.get(p, ()):
            if n not in blocked:
                blocked[n] = blocked[p] + 1
                q.append(n)
    if a in blocked or b in blocked:
        return True  # endpoints inside the ball: vacuous block
    seen = {a}
    q = collections.deque([a])
    while q:
        p = q.popleft()
        if p == b:
            return False
        for n in graph.adjacency.get(p, ()):
            if n not in seen and n not in blocked:
                seen.add(n)
                q.append(n)
    return True


# --- distance formula fits ------------------------------------------------------------


@dataclass
class FormulaRow:
    pair_id: int
    d: int
    sigma: int
    d_tree: int = 0


@dataclass
class FormulaFit:
    rows: list[FormulaRow]
    K: int
    flagged: int = 0

    @property
    def lower_n(self) -> float:
        """Least N with (1/N) * sigma <= d for all pairs (d > 0)."""
        vals = [r.sigma / r.d for r in self.rows if r.d > 0]
        return max(vals, default=1.0)

    @property
    def upper_mult(self) -> float:
        """Least m with d <= m * sigma + 2K over pairs with sigma > 0."""
        vals = [(r.d - 2 * self.K) / r.sigma for r in self.rows if r.sigma > 0]
        return max(max(vals, default=0.0), 0.0)

    @property
    def upper_add(self) -> int:
        """Largest d among pairs with zero contribution."""
        return max((r.d for r in self.rows if r.sigma == 0), default=0)


def piece_formula_fit(
    family: QuasiLineFamily, pairs: Sequence[tuple[Word, Word]], K: int
) -> FormulaFit:
    rows = []
    for i, (x, y) in enumerate(pairs):
        d = word_distance(x, y)
        rows.append(FormulaRow(i, d, projection_sum(family, x, y, K)))
    return FormulaFit(rows, K)


@dataclass
class GluedFormulaRow:
    pair_id: int
    d: int
    sigma: int
    d_tree: int


@dataclass
class GluedFormulaFit:
    rows: list[GluedFormulaRow]
    K: int

    @property
    def lower_mu(self) -> float:
        """Least mu with (1/mu) sigma + d_tree - L <= d; L fixed to 0 here."""
        vals = [r.sigma / max(r.d - r.d_tree, 1) for r in self.rows]
        return max(vals, default=1.0)

    def fit_envelope(self, L: float, margin: float = 1.5) -> float:
        """Calibrate mu (with headroom) so the lower envelope holds on this sample."""
        vals = [r.sigma / max(r.d - r.d_tree + L * L, 1) for r in self.rows]
        return max(1.0, margin * max(vals, default=1.0))

    def lower_violations(self, mu: float, L: float) -> int:
        bad = 0
        for r in self.rows:
            if r.sigma / mu + r.d_tree - L * L > r.d + 1e-9:
                bad += 1
        return bad

    @property
    def upper_mult(self) -> float:
        vals = [
            (r.d - 4 * self.K * r.d_tree) / r.sigma for r in self.rows if r.sigma > 0
        ]
        return max(max(vals, default=0.0), 0.0)


# --- local finiteness surrogates ------------------------------------------------------


def lines_near_vertex(roots: Sequence[CyclicWord], z: Word, radius: int, rank: int) -> list[Axis]:
    """All translates of the given roots passing within `radius` of z."""
    found: dict[tuple, Axis] = {}
    for w in fg_ball(radius, rank):
        y = concat(z, w)
        for cyc in roots:
            for phase in range(len(cyc.root)):
                rot = cyc.root[phase:] + cyc.root[:phase]
                ax = Axis.of_element(concat(y, rot, inverse(y)))
                found.setdefault(ax.line_key(), ax)
    return [found[k] for k in sorted(found, key=lambda lk: (shortlex_key(lk[0]), lk[1]))]


def segment_cover_count(
    roots: Sequence[CyclicWord], start: Word, seg: Word, R: int, rank: int
) -> int:
    """Lines (from the root classes) whose R-neighborhood contains the segment."""
    verts = geodesic_vertices(start, concat(start, seg))
    count = 0
    for ax in lines_near_vertex(roots, verts[0], R, rank):
        if all(dist_to_axis(v, ax) <= R for v in verts):
            count += 1
    return count


def translate_projection_count(
    root: CyclicWord, gamma: Axis, theta: int, span: int, rank: int
) -> int:
    """Translates of the root's axis near gamma with projection diameter >= theta."""
    seen: dict[tuple, Axis] = {}
    for t in range(-span, span + 1):
        for ax in lines_near_vertex([root], gamma.vertex(t), 2, rank):
            seen.setdefault(ax.line_key(), ax)
    count = 0
    for ax in seen.values():
        if ax.line_key() == gamma.line_key():
            continue
        if line_projection_diameter(gamma, ax) >= theta:
            count += 1
    return count


def glued_formula_fit(
    model: ModelSpace,
    glued: GluedSpace,
    families: dict[str, QuasiLineFamily],
    pairs: Sequence[tuple[GluedPoint, GluedPoint]],
    K: int,
) -> GluedFormulaFit:
    """Distance formula for the glued space, with the tree-distance term.

    Per-piece contributions are evaluated at the entry/exit vertices of one
    optimal corridor path (projections factor through boundary lines, so
    contributions from pieces off the corridor vanish for K above the cross
    projection bound).
    """
    from .glued_hyperbolic import distance_with_anchors

    rows = []
    for i, (a, b) in enumerate(pairs):
        d, anchors = distance_with_anchors(glued, a, b)
        dt = tree_distance(a.site, b.site)
        sigma = 0
        for anc in anchors:
            fam = families[anc.site.graph_vertex]
            sigma += projection_sum(fam, anc.entry, anc.exit, K)
        rows.append(GluedFormulaRow(i, d, sigma, dt))
    return GluedFormulaFit(rows, K)


# --- product embedding into tree x quasi-trees -----------------------------------------


@dataclass(frozen=True)
class PieceLine:
    """A quasi-line placed in a specific corridor piece."""

    piece: TreeVertex
    axis: Axis


def cross_piece_projection(
    model: ModelSpace, target: PieceLine, other: PieceLine, cap: int = 16
) -> tuple[int, int]:
    """Projection interval of `other` onto `target` when pieces differ.

    The projection factors through the boundary line of the target's piece
    facing the other piece, so the interval is that line's projection.  When
    the target IS that boundary line, parameters transfer through the link by
    matching rung coordinates; parallel lines behind the same link project
    onto the whole line and are reported as a window-capped interval.
    """
    geo = tree_geodesic(target.piece, other.piece)
    plane = model.plane_between(target.piece, geo[1])
    entry = model.line_axis(plane.near)
    if entry.line_key() != target.axis.line_key():
        return projection_interval(target.axis, entry)
    # target is its piece's boundary line toward the link
    plane_far = model.plane_between(geo[2], geo[1])
    far_line = model.line_axis(plane_far.near)
    if far_line.line_key() == other.axis.line_key() or len(geo) > 3:
        # parallel through the link (or factored through a parallel line):
        # the projection sweeps the whole line, truncate to the window
        return (-cap, cap)
    lo, hi = projection_interval(far_line, other.axis)
    rungs = (
        model.cross_plane(plane_far, lo, 0)[1],
        model.cross_plane(plane_far, hi, 0)[1],
    )
    params = sorted(model.near_s_for_far_t(plane, r) for r in rungs)
    return params[0], params[1]


def piece_line_separation(model: ModelSpace, a: PieceLine, b: PieceLine) -> int:
    """Distance between two lines in the glued space (exact through one link).

    Same piece: the bridge width.  Pieces sharing one link: bridge widths to
    the respective boundary lines plus 2 rungs plus the binding-line gap.
    Farther pieces: the tree distance is a certified lower bound, enough for
    separation checks at desk-scale D.
    """
    if a.piece == b.piece:
        return line_distance_between(a.axis, b.axis)
    geo = tree_geodesic(a.piece, b.piece)
    if len(geo) > 3:
        return tree_distance(a.piece, b.piece)
    link = geo[1]
    plane_a = model.plane_between(a.piece, link)
    plane_b = model.plane_between(b.piece, link)
    la, lb = model.line_axis(plane_a.near), model.line_axis(plane_b.near)

    def binding_interval(axis: Axis, boundary: Axis, plane) -> tuple[int, int, int]:
        from .freegroup import bridge as axis_bridge

        if axis.line_key() == boundary.line_key():
            big = 1 << 20
            return (-big, big, 0)
        br = axis_bridge(boundary, axis)
        if br.overlap is not None:
            (blo, bhi), _ = br.overlap
            lo, hi, w = blo, bhi, 0
        else:
            lo, hi, w = br.param_a, br.param_a, br.width
        r1 = model.cross_plane(plane, lo, 0)[1]
        r2 = model.cross_plane(plane, hi, 0)[1]
        return (min(r1, r2), max(r1, r2), w)

    a_lo, a_hi, wa = binding_interval(a.axis, la, plane_a)
    b_lo, b_hi, wb = binding_interval(b.axis, lb, plane_b)
    gap = max(0, max(a_lo, b_lo) - min(a_hi, b_hi))
    return wa + wb + 2 + gap


def mutual_projection(model: ModelSpace, a: PieceLine, b: PieceLine) -> tuple[int, int]:
    """Bridge feet (midpoints of the projection intervals) between two lines."""
    if a.piece == b.piece:
        lo_a, hi_a = projection_interval(a.axis, b.axis)
        lo_b, hi_b = projection_interval(b.axis, a.axis)
    else:
        lo_a, hi_a = cross_piece_projection(model, a, b)
        lo_b, hi_b = cross_piece_projection(model, b, a)
    return (lo_a + hi_a) // 2, (lo_b + hi_b) // 2


def build_class_quasitree(
    model: ModelSpace, lines: Sequence[PieceLine], K: int, extra_params: Sequence[Sequence[int]] = (), pad: int = 4
) -> QuasiTreeGraph:
    """One global quasi-tree over lines spread across corridor pieces."""
    lines = list(lines)
    feet: list[list[int]] = [[0] for _ in lines]
    for i, params in enumerate(extra_params):
        feet[i].extend(params)
    bridges = []
    for i in range(len(lines)):
        for j in range(i + 1, len(lines)):
            pi, pj = mutual_projection(model, lines[i], lines[j])
            bridges.append((i, pi, j, pj))
            feet[i].append(pi)
            feet[j].append(pj)
    windows = [(min(f) - pad, max(f) + pad) for f in feet]
    g = QuasiTreeGraph([l.axis for l in lines], K, windows, bridges)
    g.build_adjacency()
    return g


@dataclass
class ProductEmbedRow:
    pair_id: int
    d_glued: int
    d_tree: int
    class_terms: list[int]

    @property
    def rhs(self) -> int:
        return self.d_tree + sum(self.class_terms)


@dataclass
class ProductEmbedFit:
    rows: list[ProductEmbedRow]
    class_count: int
    excluded: int = 0

    @property
    def upper(self) -> float:
        vals = [r.rhs / r.d_glued for r in self.rows if r.d_glued]
        return max(vals, default=1.0)

    @property
    def lower(self) -> float:
        vals = [r.d_glued / r.rhs for r in self.rows if r.rhs]
        return max(vals, default=1.0)


class CoverageError(ValueError):
    """A class has no line in a sampled piece, so the embedding point is lost."""


def assemble_global_classes(
    model: ModelSpace, per_piece: dict, D: int
) -> list[list[PieceLine]]:
    """Merge per-piece classes into global classes keeping D-separation.

    Boundary lines of pieces sharing a flat link are parallel at distance 2,
    so a per-piece class is appended to the first global class whose members
    all stay >= D away (exactly checked through shared links); otherwise a
    new global class opens.  Every global class keeps full pieces' classes,
    preserving the per-piece coverage postcondition where it has lines.
    """
    global_classes: list[list[PieceLine]] = []
    pieces = sorted(per_piece, key=lambda t: t.key())
    for piece in pieces:
        for cls in per_piece[piece].classes:
            block = [PieceLine(piece, ax) for ax in cls]
            placed = False
            for gc in global_classes:
                ok = True
                for pl in block:
                    for member in gc:
                        if member.piece == pl.piece:
                            ok = False  # one per-piece class per global class
                            break
                        if piece_line_separation(model, pl, member) < D:
                            ok = False
                            break
                    if not ok:
                        break
                if ok:
                    gc.extend(block)
                    placed = True
                    break
            if not placed:
                global_classes.append(block)
    return global_classes


def nearest_class_point(
    model: ModelSpace, cls: list[PieceLine], piece: TreeVertex, ybar: Word
) -> tuple[int, int, int]:
    """(index into cls, param, distance) of the nearest class line to the point.

    Prefers lines in the point's own piece; falls back to lines one link away
    (the exact distance collapses to an L1 chain through the rungs).  Raises
    CoverageError when the class has no line within tree distance 2.
    """
    best = None
    for idx, pl in enumerate(cls):
        if pl.piece != piece:
            continue
        point, param = project_to_axis(ybar, pl.axis)
        d = word_distance(ybar, point)
        if best is None or d < best[2]:
            best = (idx, param, d)
    if best is not None:
        return best
    for idx, pl in enumerate(cls):
        if tree_distance(pl.piece, piece) != 2:
            continue
        geo = tree_geodesic(piece, pl.piece)
        plane_here = model.plane_between(piece, geo[1])
        plane_there = model.plane_between(pl.piece, geo[1])
        line_here = model.line_axis(plane_here.near)
        line_there = model.line_axis(plane_there.near)
        pt, p_x = project_to_axis(ybar, line_here)
        e_x = word_distance(ybar, pt)
        from .freegroup import bridge as axis_bridge

        if line_there.line_key() == pl.axis.line_key():
            foot, width = None, 0
        else:
            br = axis_bridge(line_there, pl.axis)
            foot, width = br.param_a, br.width
        r_x = model.cross_plane(plane_here, p_x, 0)[1]
        # candidate params on the target line: its bridge foot and the rung match
        cands = []
        s_match = model.near_s_for_far_t(plane_there, r_x)
        if foot is None:
            cands.append((s_match, 0))
        else:
            for s_c in (foot, s_match):
                r_c = model.cross_plane(plane_there, s_c, 0)[1]
                cands.append((s_c, abs(s_c - foot) + abs(r_c - r_x)))
        for s_c, inner in cands:
            if foot is not None:
                point, param = project_to_axis(line_there.vertex(s_c), pl.axis)
                d = e_x + 2 + inner + width + 0
            else:
                param = pl.axis.param_of(line_there.vertex(s_c))
                if param is None:
                    continue
                d = e_x + 2 + inner
            if best is None or d < best[2]:
                best = (idx, param, d)
    if best is None:
        raise CoverageError(f"class has no line within reach of {piece.serialize()}")
    return best


def product_embedding_fit(
    model: ModelSpace,
    glued: GluedSpace,
    pairs: Sequence[tuple[GluedPoint, GluedPoint]],
    K: int = 8,
    D: int = 4,
    k_tilde: int = 3,
    window_radius: int = 3,
    max_lines: int = 24,
) -> ProductEmbedFit:
    """Fit the embedding into (tree) x (product of class quasi-trees)."""
    pieces: dict = {}
    for a, b in pairs:
        for site in tree_geodesic(a.site, b.site):
            if glued.contains_piece(site):
                pieces.setdefault(site, None)
    window_words = {
        v: sorted(fg_ball(window_radius, model.graph.vertex(v.graph_vertex).rank))
        for v in pieces
    }
    families = {}
    per_piece = {}
    for v in pieces:
        gv = v.graph_vertex
        if gv not in families:
            families[gv] = generate_quasilines(model, gv, k_tilde)
        lines = lines_meeting_window(families[gv], window_words[v][: 2 * max_lines], max_lines)
        per_piece[v] = greedy_partition(lines, D, window_words[v])
    classes = assemble_global_classes(model, per_piece, D)
    class_count = len(classes)

    # embedding points per class per sampled endpoint
    points = []
    for a, b in pairs:
        points.extend([a, b])
    phi_of: dict = {}
    extra_params: list[dict] = [collections.defaultdict(list) for _ in classes]
    excluded = 0
    usable_pairs = []
    for a, b in pairs:
        try:
            key_a = tuple(
                nearest_class_point(model, cls, a.site, a.ybar)[:2] for cls in classes
            )
            key_b = tuple(
                nearest_class_point(model, cls, b.site, b.ybar)[:2] for cls in classes
            )
        except CoverageError:
            excluded += 1
            continue
        usable_pairs.append((a, b, key_a, key_b))
        for ci in range(class_count):
            extra_params[ci][key_a[ci][0]].append(key_a[ci][1])
            extra_params[ci][key_b[ci][0]].append(key_b[ci][1])

    graphs = []
    for ci, cls in enumerate(classes):
        extras = [extra_params[ci].get(i, []) for i in range(len(cls))]
        graphs.append(build_class_quasitree(model, cls, K, extras))

    rows = []
    for i, (a, b, key_a, key_b) in enumerate(usable_pairs):
        d = glued.distance(a, b)
        dt = tree_distance(a.site, b.site)
        terms = []
        for ci, g in enumerate(graphs):
            dc = g.distance(key_a[ci], key_b[ci])
            terms.append(dc if dc is not None else 0)
        rows.append(ProductEmbedRow(i, d, dt, terms))
    return ProductEmbedFit(rows, class_count, excluded)
