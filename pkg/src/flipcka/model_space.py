"""The discrete model space: tree-times-fiber pieces glued along flipped planes.

A point lives in a piece (a Bass-Serre tree vertex), with a Cayley-tree vertex
ybar and an integer fiber h.  Points on a gluing plane have one representation
per adjacent piece; the canonical one sits on the piece with the smaller tree
key.  Distances are exact: within a piece the L1 product metric, across pieces
a corridor dynamic program over plane crossings whose states are plane
coordinates (correct because detours off the corridor project back without
gaining length).  A literal breadth-first window graph is kept alongside as
the independent ground-truth oracle.
"""

from __future__ import annotations

import collections
from dataclasses import dataclass
from typing import Iterable, Optional, Union

from .admissible import AdmissibleGraph, EdgeStep, PlaneCoord, flip_transfer
from .bass_serre import TreeVertex, base_vertex, edge_between, neighbor, tree_geodesic
from .freegroup import (
    Axis,
    Bridge,
    Word,
    bridge as axis_bridge,
    concat,
    geodesic_vertices,
    inverse,
    project_to_axis,
    shortlex_min_coset,
    word_distance,
)


class WrongPieceError(ValueError):
    """piece_distance asked for points without a common piece."""


class BudgetError(RuntimeError):
    """A materialization exceeded its node budget."""


@dataclass(frozen=True, eq=False)
class XPoint:
    piece: TreeVertex
    ybar: Word
    h: int

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, XPoint):
            return NotImplemented
        return self.ybar == other.ybar and self.h == other.h and self.piece == other.piece

    def __hash__(self):
        h = self.__dict__.get("_hash")
        if h is None:
            h = hash((self.piece, self.ybar, self.h))
            object.__setattr__(self, "_hash", h)
        return h

    def serialize(self, space: "ModelSpace") -> str:
        alphabet = space.graph.vertex(self.piece.graph_vertex).alphabet
        from .freegroup import format_word

        return f"{self.piece.serialize()} | {format_word(self.ybar, alphabet)} | {self.h}"


@dataclass(frozen=True)
class LineRef:
    """A boundary line of one piece: the coset line of an edge word."""

    piece: TreeVertex
    step: EdgeStep
    coset_word: Word


@dataclass(frozen=True)
class PlaneRef:
    """One gluing plane seen from both sides of a tree edge."""

    near: LineRef
    far: LineRef

    @property
    def edge_id(self) -> str:
        return self.near.step[0]

    @property
    def near_side(self) -> int:
        return self.near.step[1]


@dataclass(frozen=True)
class Strip:
    """Bridge-times-fiber strip between two boundary objects in one piece."""

    piece: TreeVertex
    source: tuple
    bridge: Bridge


class ModelSpace:
    """Geometry context over one admissible instance; all caches append-only."""

    def __init__(self, graph: AdmissibleGraph, base: str | None = None):
        from .admissible import require_valid

        require_valid(graph)
        self.graph = graph
        self.base = base_vertex(graph, base)
        self._axis_cache: dict = {}
        self._neighbor_cache: dict = {}
        self._canon_cache: dict = {}
        self._reps_cache: dict = {}
        self._plane_cache: dict = {}

    # -- lines and planes -------------------------------------------------

    def line_axis(self, ref: LineRef) -> Axis:
        key = (ref.piece.graph_vertex, ref.step, ref.coset_word)
        ax = self._axis_cache.get(key)
        if ax is None:
            root = self.graph.word_at_source(ref.step)
            ax = Axis.through(ref.coset_word, root)
            self._axis_cache[key] = ax
        return ax

    def line_neighbor(self, ref: LineRef) -> TreeVertex:
        key = (ref.piece, ref.step, ref.coset_word)
        nb = self._neighbor_cache.get(key)
        if nb is None:
            nb = neighbor(ref.piece, ref.step, ref.coset_word)
            self._neighbor_cache[key] = nb
        return nb

    def lines_through(self, piece: TreeVertex, ybar: Word) -> list[tuple[LineRef, int]]:
        """All boundary lines of the piece containing ybar, with its parameter."""
        out = []
        for step in self.graph.steps_at(piece.graph_vertex):
            b = self.graph.word_at_source(step)
            seen = set()
            for i in range(len(b)):
                u = shortlex_min_coset(concat(ybar, inverse(b[:i])), b)
                if u in seen:
                    continue
                seen.add(u)
                ref = LineRef(piece, step, u)
                param = self.line_axis(ref).param_of(ybar)
                assert param is not None, "constructed coset line must contain the vertex"
                out.append((ref, param))
        return out

    def plane_between(self, sigma: TreeVertex, tau: TreeVertex) -> PlaneRef:
        """The plane of the tree edge (sigma, tau), seen with sigma as near side."""
        (u_near, s_near), (u_far, s_far) = edge_between(sigma, tau)
        return PlaneRef(LineRef(sigma, s_near, u_near), LineRef(tau, s_far, u_far))

    def plane_of_line(self, ref: LineRef) -> PlaneRef:
        cached = self._plane_cache.get(ref)
        if cached is None:
            tau = self.line_neighbor(ref)
            cached = self.plane_between(ref.piece, tau)
            self._plane_cache[ref] = cached
        return cached

    def cross_plane(self, plane: PlaneRef, s: int, t: int) -> tuple[int, int]:
        """Near-side plane coordinates (s, t) to far-side (s', t')."""
        q = flip_transfer(self.graph, PlaneCoord(plane.edge_id, plane.near_side, s, t))
        return q.s, q.t

    def near_s_for_far_t(self, plane: PlaneRef, t_far: int) -> int:
        """The near s-parameter the flip couples to a given far fiber."""
        e = self.graph.edge(plane.edge_id)
        (off_s, off_t), (sg_s, sg_t) = e.offsets, e.signs
        if plane.near_side == 0:
            # far t' = sg_s * s + off_s
            return sg_s * (t_far - off_s)
        # far (side 0) t = sg_t * (s - off_t) for near (side 1) s
        return sg_t * t_far + off_t

    def near_t_for_far_s(self, plane: PlaneRef, s_far: int) -> int:
        """The near t-parameter the flip couples to a given far line position."""
        return self._solve_plane_coords(plane, 0, s_far)[1]

    def plane_point(self, plane: PlaneRef, s: int, t: int, canonical: bool = True) -> XPoint:
        """The model point with near-side plane coordinates (s, t)."""
        near_axis = self.line_axis(plane.near)
        p = XPoint(plane.near.piece, near_axis.vertex(s), t)
        return self.canonical(p) if canonical else p

    # -- canonical representations -----------------------------------------

    def representations(self, x: XPoint) -> list[XPoint]:
        """All piece coordinates of the underlying point (plane avatars included)."""
        cached = self._reps_cache.get(x)
        if cached is not None:
            return cached
        seen = {x: None}
        queue = [x]
        while queue:
            p = queue.pop()
            for ref, s in self.lines_through(p.piece, p.ybar):
                plane = self.plane_of_line(ref)
                s2, t2 = self.cross_plane(plane, s, p.h)
                far_axis = self.line_axis(plane.far)
                q = XPoint(plane.far.piece, far_axis.vertex(s2), t2)
                if q not in seen:
                    seen[q] = None
                    queue.append(q)
        reps = sorted(seen, key=lambda p: (p.piece.key(), p.ybar, p.h))
        for r in reps:
            self._reps_cache[r] = reps
        return reps

    def canonical(self, x: XPoint) -> XPoint:
        c = self._canon_cache.get(x)
        if c is None:
            c = self.representations(x)[0]
            self._canon_cache[x] = c
        return c

    def point(self, piece: TreeVertex, ybar: Word, h: int) -> XPoint:
        return self.canonical(XPoint(piece, ybar, h))

    def rho(self, x: XPoint) -> TreeVertex:
        """Indexed map: the piece the canonical representation lives in."""
        return self.canonical(x).piece

    def coords_in(self, x: XPoint, piece: TreeVertex) -> Optional[XPoint]:
        for rep in self.representations(x):
            if rep.piece == piece:
                return rep
        return None

    # -- strips and corners --------------------------------------------------

    def strip(self, line_a: LineRef, line_b: LineRef) -> Strip:
        if line_a.piece != line_b.piece:
            raise WrongPieceError("strip needs two lines in one piece")
        br = axis_bridge(self.line_axis(line_a), self.line_axis(line_b))
        return Strip(line_a.piece, ("lines", line_a, line_b), br)

    def strip_from_point(self, x: XPoint, line: LineRef) -> Strip:
        if x.piece != line.piece:
            raise WrongPieceError("point and line live in different pieces")
        point, param = project_to_axis(x.ybar, self.line_axis(line))
        br = Bridge(x.ybar, point, 0, param, word_distance(x.ybar, point), None)
        return Strip(x.piece, ("point", x.ybar, line), br)

    def corner_point(
        self,
        prev: Union[XPoint, PlaneRef],
        here: PlaneRef,
        nxt: Union[XPoint, PlaneRef],
        canonical: bool = True,
    ) -> XPoint:
        """Intersection of the incoming and outgoing strips on this plane.

        The incoming strip fixes the near-side line parameter, the outgoing
        strip the far-side one; the flip couples them into a single point.
        """
        s_near = self._incoming_param(prev, here)
        s_far = self._outgoing_param(here, nxt)
        s, t = self._solve_plane_coords(here, s_near, s_far)
        return self.plane_point(here, s, t, canonical=canonical)

    def _incoming_param(self, prev: Union[XPoint, PlaneRef], here: PlaneRef) -> int:
        near_axis = self.line_axis(here.near)
        if isinstance(prev, XPoint):
            rep = self.coords_in(prev, here.near.piece)
            if rep is None:
                raise WrongPieceError("endpoint has no coordinates in the corridor piece")
            _, param = project_to_axis(rep.ybar, near_axis)
            return param
        br = axis_bridge(self.line_axis(prev.far), near_axis)
        return br.param_b

    def _outgoing_param(self, here: PlaneRef, nxt: Union[XPoint, PlaneRef]) -> int:
        far_axis = self.line_axis(here.far)
        if isinstance(nxt, XPoint):
            rep = self.coords_in(nxt, here.far.piece)
            if rep is None:
                raise WrongPieceError("endpoint has no coordinates in the corridor piece")
            _, param = project_to_axis(rep.ybar, far_axis)
            return param
        br = axis_bridge(far_axis, self.line_axis(nxt.near))
        return br.param_a

    def _solve_plane_coords(self, plane: PlaneRef, s_near: int, s_far: int) -> tuple[int, int]:
        """Near-side (s, t) with given near s-parameter and far s'-parameter."""
        e = self.graph.edge(plane.edge_id)
        (off_s, off_t), (sg_s, sg_t) = e.offsets, e.signs
        if plane.near_side == 0:
            # far s' = sg_t * t + off_t
            t = sg_t * (s_far - off_t)
        else:
            # far (side 0) s = sg_s * (t - off_s) for near (side 1) t
            t = sg_s * s_far + off_s
        return s_near, t

    # -- distances -------------------------------------------------------------

    def piece_distance(self, x: XPoint, y: XPoint) -> int:
        """L1 product metric inside a shared piece."""
        if x.piece == y.piece:
            return word_distance(x.ybar, y.ybar) + abs(x.h - y.h)
        for rx in self.representations(x):
            ry = self.coords_in(y, rx.piece)
            if ry is not None:
                return word_distance(rx.ybar, ry.ybar) + abs(rx.h - ry.h)
        raise WrongPieceError("points do not share a piece")

    def corridor(self, x: XPoint, y: XPoint) -> list[PlaneRef]:
        cx, cy = self.canonical(x), self.canonical(y)
        pieces = tree_geodesic(cx.piece, cy.piece)
        return [self.plane_between(pieces[i], pieces[i + 1]) for i in range(len(pieces) - 1)]

    def oracle_distance(self, x: XPoint, y: XPoint, radius: int = 512) -> Optional[int]:
        """Exact distance via the corridor dynamic program.

        Plane-crossing states are windowed to the span of the relevant
        parameters; `radius` caps that span, returning None (unreachable
        within the window) when exceeded, so results are monotone in radius.
        """
        cx, cy = self.canonical(x), self.canonical(y)
        if cx == cy:
            return 0
        try:
            return self.piece_distance(cx, cy)
        except WrongPieceError:
            pass
        dp = _CorridorDP(self, cx, cy)
        if dp.span() > 2 * radius:
            return None
        return dp.distance()

    def geodesic(self, x: XPoint, y: XPoint) -> list[XPoint]:
        """One exact geodesic, as unit-step points (canonical)."""
        cx, cy = self.canonical(x), self.canonical(y)
        for cand in self.representations(cx):
            ry = self.coords_in(cy, cand.piece)
            if ry is not None:
                return [self.canonical(p) for p in _leg_points(cand, ry)]
        dp = _CorridorDP(self, cx, cy)
        dp.distance()
        return dp.extract_geodesic()

    # -- materialized windows -----------------------------------------------

    def unit_neighbors(self, x: XPoint) -> list[XPoint]:
        out = {}
        for rep in self.representations(x):
            rank = self.graph.vertex(rep.piece.graph_vertex).rank
            for a in range(1, rank + 1):
                for sgn in (a, -a):
                    if not rep.ybar or rep.ybar[-1] != -sgn:
                        out[self.point(rep.piece, rep.ybar + (sgn,), rep.h)] = None
                    else:
                        out[self.point(rep.piece, rep.ybar[:-1], rep.h)] = None
            out[self.point(rep.piece, rep.ybar, rep.h + 1)] = None
            out[self.point(rep.piece, rep.ybar, rep.h - 1)] = None
        out.pop(self.canonical(x), None)
        return list(out)


def _leg_points(a: XPoint, b: XPoint) -> list[XPoint]:
    """L1 staircase inside one piece: tree move first, then fiber move."""
    assert a.piece == b.piece
    pts = [XPoint(a.piece, w, a.h) for w in geodesic_vertices(a.ybar, b.ybar)]
    step = 1 if b.h >= a.h else -1
    pts.extend(XPoint(a.piece, b.ybar, h) for h in range(a.h + step, b.h + step, step))
    return pts


@dataclass
class BallWindow:
    """Materialized unit-edge window of the model space around a center."""

    space: ModelSpace
    center: XPoint
    radius: int
    dist: dict
    adjacency: dict

    def distance(self, x: XPoint, y: XPoint) -> Optional[int]:
        cx, cy = self.space.canonical(x), self.space.canonical(y)
        if cx not in self.adjacency or cy not in self.adjacency:
            return None
        seen = {cx: 0}
        q = collections.deque([cx])
        while q:
            p = q.popleft()
            if p == cy:
                return seen[p]
            for n in self.adjacency[p]:
                if n in self.adjacency and n not in seen:
                    seen[n] = seen[p] + 1
                    q.append(n)
        return None

    def points(self) -> list[XPoint]:
        return list(self.adjacency)

    def edge_rows(self) -> list[tuple[str, str]]:
        rows = []
        for p, nbrs in self.adjacency.items():
            ps = p.serialize(self.space)
            for n in nbrs:
                if n in self.adjacency:
                    ns = n.serialize(self.space)
                    if ps < ns:
                        rows.append((ps, ns))
        return sorted(rows)


def materialize_ball(space: ModelSpace, center: XPoint, radius: int, max_nodes: int = 200000) -> BallWindow:
    c = space.canonical(center)
    dist = {c: 0}
    adjacency: dict[XPoint, list[XPoint]] = {}
    q = collections.deque([c])
    while q:
        p = q.popleft()
        nbrs = space.unit_neighbors(p)
        adjacency[p] = nbrs
        if dist[p] == radius:
            continue
        for n in nbrs:
            if n not in dist:
                if len(dist) >= max_nodes:
                    raise BudgetError(f"ball exceeded {max_nodes} nodes")
                dist[n] = dist[p] + 1
                q.append(n)
    for p in list(dist):
        adjacency.setdefault(p, space.unit_neighbors(p))
    return BallWindow(space, c, radius, dist, adjacency)


# --- the corridor dynamic program ---------------------------------------------


def _l1_transform(vals: dict[int, float], targets: Iterable[int]) -> dict[int, float]:
    """out[t] = min_v vals[v] + |v - t| via two monotone sweeps."""
    ts = sorted(set(targets) | set(vals))
    INF = float("inf")
    best = {t: vals.get(t, INF) for t in ts}
    run = INF
    prev = None
    for t in ts:
        run = run if prev is None else run + (t - prev)
        run = min(run, best[t])
        best[t] = run
        prev = t
    run = INF
    prev = None
    for t in reversed(ts):
        run = run if prev is None else run + (prev - t)
        run = min(run, best[t])
        best[t] = run
        prev = t
    return best


class _CorridorDP:
    """Exact shortest path through the corridor of planes between two points."""

    def __init__(self, space: ModelSpace, x: XPoint, y: XPoint):
        self.space = space
        self.x, self.y = x, y
        self.planes = space.corridor(x, y)
        assert self.planes, "corridor DP needs at least one plane"
        self._prepare()

    def _prepare(self):
        sp = self.space
        n = len(self.planes)
        # endpoint projections
        ax_first = sp.line_axis(self.planes[0].near)
        px_pt, self.p_x = project_to_axis(self.x.ybar, ax_first)
        self.e_x = word_distance(self.x.ybar, px_pt)
        ax_last = sp.line_axis(self.planes[-1].far)
        py_pt, self.p_y = project_to_axis(self.y.ybar, ax_last)
        self.e_y = word_distance(self.y.ybar, py_pt)
        # bridges between consecutive planes (in the piece between them)
        self.bridges = []
        for j in range(n - 1):
            self.bridges.append(
                axis_bridge(sp.line_axis(self.planes[j].far), sp.line_axis(self.planes[j + 1].near))
            )
        # candidate parameter pools per plane, near-side coordinates
        S = [set() for _ in range(n)]
        T = [set() for _ in range(n)]
        S[0].add(self.p_x)
        T[0].add(self.x.h)
        for j, br in enumerate(self.bridges):
            # feet on the far line of plane j couple to near-t of plane j via the flip
            far_params = {br.param_a}
            near_params = {br.param_b}
            if br.overlap is not None:
                (alo, ahi), (blo, bhi) = br.overlap
                far_params |= {alo, ahi}
                near_params |= {blo, bhi}
            for fp in far_params:
                T[j].add(self._near_t_for_far_s(self.planes[j], fp))
            S[j + 1] |= near_params
        # endpoint on the last plane couples backwards through the flip
        T[-1].add(self._near_t_for_far_s(self.planes[-1], self.p_y))
        S[-1].add(self._near_s_for_far_t(self.planes[-1], self.y.h))
        # fiber continuity: far-t of plane j equals piece fiber equals near-t of plane j+1
        for j in range(n - 1):
            for s in list(S[j]):
                _, t_far = self.space.cross_plane(self.planes[j], s, 0)
                T[j + 1].add(t_far)
            # and propagate endpoint fibers forward
            T[j + 1] |= {self._far_t_for_near_s(self.planes[j], s) for s in S[j]}
        for j in range(n - 2, -1, -1):
            for t in list(T[j + 1]):
                S[j].add(self._near_s_for_far_t(self.planes[j], t))
        # fiber pool: include both endpoint fibers everywhere (cheap, safe)
        for j in range(n):
            T[j].add(self.x.h)
            S[j].add(self.p_x)
        self.S_windows = [self._window(s) for s in S]
        self.T_windows = [self._window(t) for t in T]

    def _near_t_for_far_s(self, plane: PlaneRef, s_far: int) -> int:
        return self.space.near_t_for_far_s(plane, s_far)

    def _far_t_for_near_s(self, plane: PlaneRef, s_near: int) -> int:
        return self.space.cross_plane(plane, s_near, 0)[1]

    def _near_s_for_far_t(self, plane: PlaneRef, t_far: int) -> int:
        return self.space.near_s_for_far_t(plane, t_far)

    @staticmethod
    def _window(vals: set[int], pad: int = 2) -> range:
        lo, hi = min(vals), max(vals)
        return range(lo - pad, hi + pad + 1)

    def span(self) -> int:
        return max(
            max(abs(w.start), abs(w.stop)) for w in (*self.S_windows, *self.T_windows)
        )

    def distance(self) -> int:
        self.F: list[dict] = []
        n = len(self.planes)
        F = {
            (s, t): self.e_x + abs(s - self.p_x) + abs(self.x.h - t)
            for s in self.S_windows[0]
            for t in self.T_windows[0]
        }
        self.F.append(F)
        for j in range(1, n):
            F = self._advance(j, F)
            self.F.append(F)
        best = None
        for (s, t), c in F.items():
            s2, t2 = self.space.cross_plane(self.planes[-1], s, t)
            val = c + abs(s2 - self.p_y) + self.e_y + abs(t2 - self.y.h)
            best = val if best is None else min(best, val)
        self._distance = int(best)
        return self._distance

    def _advance(self, j: int, F: dict) -> dict:
        """Cross plane j-1, travel piece between, arrive at plane j states."""
        plane_prev, plane_next = self.planes[j - 1], self.planes[j]
        br = self.bridges[j - 1]
        # far-side coordinates of plane j-1
        far: dict[tuple[int, int], float] = {}
        for (s, t), c in F.items():
            key = self.space.cross_plane(plane_prev, s, t)
            if c < far.get(key, float("inf")):
                far[key] = c
        u_vals = sorted({u for (u, v) in far})
        v_vals = sorted({v for (u, v) in far})
        S_next, T_next = self.S_windows[j], self.T_windows[j]
        INF = float("inf")
        # tree part: G[(s_next, v)] = min_u far[(u, v)] + treecost(u, s_next)
        G: dict[tuple[int, int], float] = {}
        for v in v_vals:
            row = {u: far.get((u, v), INF) for u in u_vals}
            if br.overlap is None:
                a, w, b = br.param_a, br.width, br.param_b
                m = min((row[u] + abs(u - a) for u in row), default=INF)
                for s in S_next:
                    G[(s, v)] = m + w + abs(s - b)
            else:
                (alo, ahi), (blo, bhi) = br.overlap
                fa = self.space.line_axis(plane_prev.far)
                fb = self.space.line_axis(plane_next.near)
                sgn = 1 if fb.param_of(fa.vertex(alo)) == blo else -1
                tr = _l1_transform(row, range(alo, ahi + 1))
                diag = {}
                for k in range(ahi - alo + 1):
                    bparam = blo + k if sgn == 1 else bhi - k
                    diag[bparam] = min(diag.get(bparam, INF), tr[alo + k])
                tr2 = _l1_transform(diag, S_next)
                for s in S_next:
                    G[(s, v)] = tr2[s]
        # fiber part: F_next[(s, t)] = min_v G[(s, v)] + |v - t|
        out: dict[tuple[int, int], float] = {}
        for s in S_next:
            col = {v: G[(s, v)] for v in v_vals}
            tr = _l1_transform(col, T_next)
            for t in T_next:
                out[(s, t)] = tr[t]
        return out

    def extract_geodesic(self) -> list:
        """Materialize one optimal path as canonical unit-step points."""
        n = len(self.planes)
        # choose optimal state at the last plane
        best = None
        for (s, t), c in self.F[-1].items():
            s2, t2 = self.space.cross_plane(self.planes[-1], s, t)
            val = c + abs(s2 - self.p_y) + self.e_y + abs(t2 - self.y.h)
            if best is None or val < best[0]:
                best = (val, s, t)
        states = [None] * n
        states[-1] = (best[1], best[2])
        for j in range(n - 1, 0, -1):
            states[j - 1] = self._argmin_prev(j, states[j])
        # stitch legs
        sp = self.space
        pts: list[XPoint] = []
        cur = sp.coords_in(self.x, self.planes[0].near.piece)
        for j, (s, t) in enumerate(states):
            target = XPoint(
                self.planes[j].near.piece, sp.line_axis(self.planes[j].near).vertex(s), t
            )
            pts.extend(_leg_points(cur, target))
            pts.pop()  # avoid duplicating the junction
            s2, t2 = sp.cross_plane(self.planes[j], s, t)
            cur = XPoint(self.planes[j].far.piece, sp.line_axis(self.planes[j].far).vertex(s2), t2)
        end = sp.coords_in(self.y, self.planes[-1].far.piece)
        pts.extend(_leg_points(cur, end))
        out = [sp.canonical(p) for p in pts]
        # collapse canonical duplicates created at plane junctions
        dedup = [out[0]]
        for p in out[1:]:
            if p != dedup[-1]:
                dedup.append(p)
        return dedup

    def _argmin_prev(self, j: int, state_next: tuple[int, int]) -> tuple[int, int]:
        s_next, t_next = state_next
        plane_prev = self.planes[j - 1]
        br = self.bridges[j - 1]
        fa = self.space.line_axis(plane_prev.far)
        fb = self.space.line_axis(self.planes[j].near)
        best = None
        for (s, t), c in self.F[j - 1].items():
            u, v = self.space.cross_plane(plane_prev, s, t)
            from .freegroup import line_distance

            cost = c + line_distance(fa, u, fb, s_next, br) + abs(v - t_next)
            if best is None or cost < best[0]:
                best = (cost, s, t)
        return (best[1], best[2])
