"""Glued hyperbolic spaces: one parity class of tree pieces joined by flat links.

For a parity class, the space collects the Cayley-tree factors of its pieces
and, for every tree vertex of the other parity, a flat link: a binding line
(the fiber of that vertex) plus width-1 strips to each adjacent boundary line,
realized as rung edges at matching parameters.  Distances are exact via a 1-D
corridor dynamic program (piece travel through bridges, link crossings cost
2 plus binding-line travel).  The embedding of the model space splits each
point into its tree coordinate (this side) and fiber coordinate (a binding
parameter on the other side).
"""

from __future__ import annotations

import collections
import random
from dataclasses import dataclass
from typing import Iterable, Optional

from .bass_serre import TreeVertex, tree_geodesic
from .freegroup import (
    Axis,
    Word,
    ball as fg_ball,
    bridge as axis_bridge,
    project_to_axis,
    word_distance,
)
from .model_space import BudgetError, ModelSpace, PlaneRef, XPoint


@dataclass(frozen=True)
class GluedPoint:
    """Either a vertex of a piece's tree factor or a binding-line vertex."""

    site: TreeVertex
    ybar: Optional[Word] = None  # piece point when set
    t: Optional[int] = None  # binding parameter when set

    @property
    def kind(self) -> str:
        return "piece" if self.ybar is not None else "binding"


class GluedSpace:
    """One of the two glued spaces, addressed by tree-vertex parity (0 or 1)."""

    def __init__(self, model: ModelSpace, parity: int):
        if parity not in (0, 1):
            raise ValueError("parity must be 0 or 1")
        self.model = model
        self.parity = parity

    def contains_piece(self, sigma: TreeVertex) -> bool:
        return sigma.parity == self.parity

    def piece_point(self, sigma: TreeVertex, ybar: Word) -> GluedPoint:
        assert self.contains_piece(sigma)
        return GluedPoint(sigma, ybar=ybar)

    def binding_point(self, w: TreeVertex, t: int) -> GluedPoint:
        assert not self.contains_piece(w)
        return GluedPoint(w, t=t)

    # -- the rung parameterization ------------------------------------------

    def rung_param(self, plane: PlaneRef, s: int) -> int:
        """Binding parameter of the rung at line parameter s (affine, +-1)."""
        return self.model.cross_plane(plane, s, 0)[1]

    def line_param(self, plane: PlaneRef, r: int) -> int:
        """Inverse of rung_param."""
        return self.model.near_s_for_far_t(plane, r)

    # -- exact distance -------------------------------------------------------

    def distance(self, a: GluedPoint, b: GluedPoint) -> int:
        """Exact distance in the glued space via the corridor program.

        Cost tables along the corridor are breakpoint dictionaries: a table F
        encodes the 1-Lipschitz function s -> min_v F[v] + |s - v| on the
        current boundary line (or binding line).
        """
        if a.site == b.site:
            if a.kind == "piece" and b.kind == "piece":
                return word_distance(a.ybar, b.ybar)
            if a.kind == "binding" and b.kind == "binding":
                return abs(a.t - b.t)
        tables = self.stage_tables(a, b)
        F = tables["final"]
        if b.kind == "binding":
            return min(c + abs(r - b.t) for r, c in F.items())
        ax = self.model.line_axis(tables["planes_in"][-1].near)
        point, p = project_to_axis(b.ybar, ax)
        e = word_distance(b.ybar, point)
        return min(c + abs(s - p) + e for s, c in F.items())

    def _plane_toward(self, piece: TreeVertex, link: TreeVertex) -> PlaneRef:
        return self.model.plane_between(piece, link)

    def stage_tables(self, a: GluedPoint, b: GluedPoint) -> dict:
        """Forward cost tables on every boundary line along the corridor.

        Returns, per corridor piece: the entry-line table (fin), exit-line
        table (fout), the corresponding planes, and the final table (binding
        parameters when b is a binding point, else the last entry-line table).
        """
        geo = tree_geodesic(a.site, b.site)
        pieces: list[TreeVertex] = []
        planes_in: list[Optional[PlaneRef]] = []
        planes_out: list[Optional[PlaneRef]] = []
        fin: list[Optional[dict]] = []
        fout: list[Optional[dict]] = []
        if a.kind == "binding":
            F = {a.t: 0}
        else:
            plane = self._plane_toward(a.site, geo[1])
            axis = self.model.line_axis(plane.near)
            point, p = project_to_axis(a.ybar, axis)
            F = {p: word_distance(a.ybar, point)}
            pieces.append(a.site)
            planes_in.append(None)
            fin.append(None)
            planes_out.append(plane)
            fout.append(F)
        for i in range(1, len(geo)):
            site = geo[i]
            if not self.contains_piece(site):
                # link crossing: one rung up from the previous exit line
                plane = self._plane_toward(geo[i - 1], site)
                F = {self.rung_param(plane, s): c + 1 for s, c in F.items()}
                continue
            plane_in = self._plane_toward(site, geo[i - 1])
            entry = {self.line_param(plane_in, r): c + 1 for r, c in F.items()}
            pieces.append(site)
            planes_in.append(plane_in)
            fin.append(entry)
            if i + 1 < len(geo):
                plane_out = self._plane_toward(site, geo[i + 1])
                ax_in = self.model.line_axis(plane_in.near)
                ax_out = self.model.line_axis(plane_out.near)
                br = axis_bridge(ax_in, ax_out)
                out: dict[int, int] = {}
                for s_in, c in entry.items():
                    for s_out, extra in _bridge_anchors(ax_in, ax_out, br, s_in):
                        val = c + extra
                        if val < out.get(s_out, 1 << 60):
                            out[s_out] = val
                planes_out.append(plane_out)
                fout.append(out)
                F = out
            else:
                planes_out.append(None)
                fout.append(None)
                F = entry
        return dict(
            pieces=pieces,
            planes_in=planes_in,
            planes_out=planes_out,
            fin=fin,
            fout=fout,
            final=F,
        )


@dataclass(frozen=True)
class PieceAnchors:
    """Entry and exit vertices of one corridor piece on an optimal path."""

    site: TreeVertex
    entry: Word
    exit: Word


def _eval_breakpoints(dct: dict[int, int], s: int) -> int:
    return min(c + abs(s - v) for v, c in dct.items())


def _argmin_sum(f: dict[int, int], g: dict[int, int]) -> tuple[int, int]:
    """Minimize f(s) + g(s) over the union of breakpoints (exact for PL)."""
    best = None
    for s in sorted(set(f) | set(g)):
        val = _eval_breakpoints(f, s) + _eval_breakpoints(g, s)
        if best is None or val < best[1]:
            best = (s, val)
    return best


def distance_with_anchors(
    glued: GluedSpace, a: GluedPoint, b: GluedPoint
) -> tuple[int, list[PieceAnchors]]:
    """Exact distance plus optimal entry/exit vertices per corridor piece.

    Combines the forward and backward stage tables: on each boundary line the
    total cost through parameter s is forward(s) + backward(s), minimized at a
    breakpoint, which pins one optimal crossing per line.
    """
    model = glued.model
    if a.site == b.site:
        if a.kind == "piece":
            return word_distance(a.ybar, b.ybar), [PieceAnchors(a.site, a.ybar, b.ybar)]
        return abs(a.t - b.t), []
    d = glued.distance(a, b)
    fwd = glued.stage_tables(a, b)
    bwd = glued.stage_tables(b, a)
    m = len(fwd["pieces"])
    anchors = []
    for k in range(m):
        site = fwd["pieces"][k]
        kk = m - 1 - k
        if k == 0 and a.kind == "piece":
            w_in = a.ybar
        else:
            s_in, val = _argmin_sum(fwd["fin"][k], bwd["fout"][kk])
            assert val == d, f"anchor consistency failed: {val} != {d}"
            w_in = model.line_axis(fwd["planes_in"][k].near).vertex(s_in)
        if k == m - 1 and b.kind == "piece":
            w_out = b.ybar
        else:
            s_out, val = _argmin_sum(fwd["fout"][k], bwd["fin"][kk])
            assert val == d, f"anchor consistency failed: {val} != {d}"
            w_out = model.line_axis(fwd["planes_out"][k].near).vertex(s_out)
        anchors.append(PieceAnchors(site, w_in, w_out))
    return d, anchors


def _bridge_anchors(ax_in: Axis, ax_out: Axis, br, s_in: int) -> Iterable[tuple[int, int]]:
    """Breakpoint anchors (exit param, cost) for crossing a bridge from s_in.

    For disjoint lines the bridge foot is the single anchor.  For overlapping
    lines the anchor is the matching parameter when s_in sits on the shared
    segment, else the nearest shared end, respecting the alignment direction.
    """
    if br.overlap is None:
        yield (br.param_b, abs(s_in - br.param_a) + br.width)
        return
    (alo, ahi), (blo, bhi) = br.overlap
    if ahi == alo:
        yield (blo, abs(s_in - alo))
        return
    sgn = 1 if ax_out.param_of(ax_in.vertex(alo)) == blo else -1

    def b_of(a_param: int) -> int:
        return blo + (a_param - alo) if sgn == 1 else bhi - (a_param - alo)

    if s_in < alo:
        yield (b_of(alo), alo - s_in)
    elif s_in > ahi:
        yield (b_of(ahi), s_in - ahi)
    else:
        yield (b_of(s_in), 0)


# --- the product embedding -------------------------------------------------------


@dataclass(frozen=True)
class EmbeddingImage:
    first: GluedPoint
    second: GluedPoint


def phi(model: ModelSpace, x: XPoint, side0: GluedSpace, side1: GluedSpace) -> EmbeddingImage:
    """Split a model point into its two glued coordinates.

    The tree factor lands in the glued space containing the point's piece;
    the fiber lands on the binding line of that same tree vertex, seen as a
    flat link of the other space.
    """
    c = model.canonical(x)
    sigma = c.piece
    if side0.contains_piece(sigma):
        own, other = side0, side1
    else:
        own, other = side1, side0
    p_tree = own.piece_point(sigma, c.ybar)
    p_fiber = other.binding_point(sigma, c.h)
    if own is side0:
        return EmbeddingImage(p_tree, p_fiber)
    return EmbeddingImage(p_fiber, p_tree)


@dataclass
class DistortionRow:
    pair_id: int
    d_model: int
    d_first: int
    d_second: int

    @property
    def image_sum(self) -> int:
        return self.d_first + self.d_second


@dataclass
class DistortionReport:
    rows: list[DistortionRow]
    excluded: int

    @property
    def upper(self) -> float:
        """max image/model ratio (0 pairs excluded)."""
        vals = [r.image_sum / r.d_model for r in self.rows if r.d_model]
        return max(vals, default=1.0)

    @property
    def lower(self) -> float:
        """max model/image ratio."""
        vals = [r.d_model / r.image_sum for r in self.rows if r.image_sum]
        return max(vals, default=1.0)


def distortion_report(
    model: ModelSpace,
    pairs: Iterable[tuple[XPoint, XPoint]],
    radius: int = 512,
) -> DistortionReport:
    side0, side1 = GluedSpace(model, 0), GluedSpace(model, 1)
    rows = []
    excluded = 0
    for i, (x, y) in enumerate(pairs):
        d = model.oracle_distance(x, y, radius=radius)
        if d is None:
            excluded += 1
            continue
        ix, iy = phi(model, x, side0, side1), phi(model, y, side0, side1)
        d1 = side0.distance(ix.first, iy.first)
        d2 = side1.distance(ix.second, iy.second)
        rows.append(DistortionRow(i, d, d1, d2))
    return DistortionReport(rows, excluded)


# --- materialized windows (ground truth + export) ---------------------------------


@dataclass
class GluedWindow:
    glued: GluedSpace
    adjacency: dict[GluedPoint, list[GluedPoint]]

    def distance(self, a: GluedPoint, b: GluedPoint) -> Optional[int]:
        if a not in self.adjacency or b not in self.adjacency:
            return None
        seen = {a: 0}
        q = collections.deque([a])
        while q:
            p = q.popleft()
            if p == b:
                return seen[p]
            for n in self.adjacency[p]:
                if n in self.adjacency and n not in seen:
                    seen[n] = seen[p] + 1
                    q.append(n)
        return None

    def edge_rows(self) -> list[tuple[str, str]]:
        def name(p: GluedPoint) -> str:
            if p.kind == "piece":
                from .freegroup import format_word

                alphabet = self.glued.model.graph.vertex(p.site.graph_vertex).alphabet
                return f"piece:{p.site.serialize()}|{format_word(p.ybar, alphabet)}"
            return f"binding:{p.site.serialize()}|{p.t}"

        rows = []
        for p, nbrs in self.adjacency.items():
            for n in nbrs:
                if n in self.adjacency:
                    a, b = name(p), name(n)
                    if a < b:
                        rows.append((a, b))
        return sorted(rows)


def build_glued_window(
    glued: GluedSpace,
    pieces: Iterable[TreeVertex],
    word_radius: int,
    fiber_radius: int,
    max_nodes: int = 200000,
) -> GluedWindow:
    """Materialize a finite window: piece balls, binding segments, rung edges."""
    model = glued.model
    adjacency: dict[GluedPoint, list[GluedPoint]] = {}

    def add_edge(p: GluedPoint, q: GluedPoint):
        adjacency.setdefault(p, []).append(q)
        adjacency.setdefault(q, []).append(p)
        if len(adjacency) > max_nodes:
            raise BudgetError(f"glued window exceeded {max_nodes} nodes")

    pieces = [p for p in pieces if glued.contains_piece(p)]
    for sigma in pieces:
        rank = model.graph.vertex(sigma.graph_vertex).rank
        words = list(fg_ball(word_radius, rank))
        wordset = set(words)
        for w in words:
            p = glued.piece_point(sigma, w)
            adjacency.setdefault(p, [])
            for a in range(1, rank + 1):
                for sgn in (a, -a):
                    if not w or w[-1] != -sgn:
                        nxt = w + (sgn,)
                        if nxt in wordset:
                            add_edge(p, glued.piece_point(sigma, nxt))
        # rungs to every link this window sees
        for w in words:
            for ref, s in model.lines_through(sigma, w):
                link = model.line_neighbor(ref)
                plane = model.plane_of_line(ref)
                r = glued.rung_param(plane, s)
                if abs(r) <= fiber_radius:
                    add_edge(glued.piece_point(sigma, w), glued.binding_point(link, r))
    # binding line edges
    links = sorted({p.site for p in adjacency if p.kind == "binding"}, key=lambda t: t.key())
    for link in links:
        for r in range(-fiber_radius, fiber_radius):
            add_edge(glued.binding_point(link, r), glued.binding_point(link, r + 1))
    return GluedWindow(glued, adjacency)


def four_point_delta(ds: dict) -> float:
    """Gromov 4-point delta from the six pairwise distances."""
    (xy, zw), (xz, yw), (xw, yz) = ds["xy_zw"], ds["xz_yw"], ds["xw_yz"]
    sums = sorted([xy + zw, xz + yw, xw + yz])
    return (sums[2] - sums[1]) / 2


def sample_four_point_delta(
    glued: GluedSpace,
    points: list[GluedPoint],
    rng: random.Random,
    samples: int,
) -> float:
    worst = 0.0
    for _ in range(samples):
        xs = [points[rng.randrange(len(points))] for _ in range(4)]
        d = lambda i, j: glued.distance(xs[i], xs[j])
        sums = sorted([d(0, 1) + d(2, 3), d(0, 2) + d(1, 3), d(0, 3) + d(1, 2)])
        worst = max(worst, (sums[2] - sums[1]) / 2)
    return worst
