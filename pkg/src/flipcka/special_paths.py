"""Special paths: per-piece geodesic legs through strip corner points.

A special path between x and y concatenates L1 geodesics through one corner
per plane of the tree geodesic between their pieces.  The legs are realized
as fixed-shape staircases (tree move first, then fiber), making every path a
canonical object closed under taking subpaths between corners.  Templates
flatten the same corridor to walls (planes) and strips only, with orthogonal
gluing lines, and carry their own exact distance.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional, Sequence, Union

from .freegroup import project_to_axis, word_distance
from .model_space import (
    ModelSpace,
    PlaneRef,
    LineRef,
    WrongPieceError,
    XPoint,
    _leg_points,
)


@dataclass(frozen=True)
class SpecialPath:
    x: XPoint
    y: XPoint
    corners: tuple[XPoint, ...]
    legs: tuple[tuple[XPoint, XPoint], ...]  # same-piece coordinate pairs
    length: int

    def points(self, space: ModelSpace) -> list[XPoint]:
        """Materialize the staircase as canonical unit-step points."""
        out: list[XPoint] = []
        for a, b in self.legs:
            pts = [space.canonical(p) for p in _leg_points(a, b)]
            if out:
                pts = pts[1:]
            out.extend(pts)
        dedup = [out[0]]
        for p in out[1:]:
            if p != dedup[-1]:
                dedup.append(p)
        return dedup


def special_path(space: ModelSpace, x: XPoint, y: XPoint) -> SpecialPath:
    cx, cy = space.canonical(x), space.canonical(y)
    for rep in space.representations(cx):
        other = space.coords_in(cy, rep.piece)
        if other is not None:
            length = word_distance(rep.ybar, other.ybar) + abs(rep.h - other.h)
            return SpecialPath(cx, cy, (), ((rep, other),), length)
    planes = space.corridor(cx, cy)
    waypoints: list[Union[XPoint, PlaneRef]] = [cx, *planes, cy]
    corners: list[XPoint] = []
    for i, plane in enumerate(planes):
        corners.append(space.corner_point(waypoints[i], plane, waypoints[i + 2]))
    legs: list[tuple[XPoint, XPoint]] = []
    total = 0
    stops = [cx, *corners, cy]
    for j in range(len(stops) - 1):
        piece = planes[j].near.piece if j < len(planes) else planes[-1].far.piece
        a = space.coords_in(stops[j], piece)
        b = space.coords_in(stops[j + 1], piece)
        if a is None or b is None:
            raise WrongPieceError("corner landed outside its corridor piece")
        legs.append((a, b))
        total += word_distance(a.ybar, b.ybar) + abs(a.h - b.h)
    return SpecialPath(cx, cy, tuple(corners), tuple(legs), total)


def horizontal_slide(space: ModelSpace, x: XPoint, line: LineRef) -> XPoint:
    """Minimizing horizontal slide onto a boundary line: fiber is preserved."""
    rep = space.coords_in(x, line.piece)
    if rep is None:
        raise WrongPieceError("point has no coordinates in the line's piece")
    point, _ = project_to_axis(rep.ybar, space.line_axis(line))
    return space.point(line.piece, point, rep.h)


def path_point_distance(space: ModelSpace, p: XPoint, path: SpecialPath) -> int:
    """min distance from p to the materialized path (exact, leg by leg)."""
    best: Optional[int] = None
    for q in path.points(space):
        d = space.oracle_distance(p, q)
        if d is not None and (best is None or d < best):
            best = d
            if best == 0:
                break
    assert best is not None
    return best


# --- quasi-geodesicity fitting -------------------------------------------------


@dataclass
class QGFitRow:
    pair_id: int
    oracle: int
    special: int

    @property
    def ratio(self) -> float:
        return self.special / self.oracle if self.oracle else 1.0


@dataclass
class QGFit:
    rows: list[QGFitRow]
    excluded: int

    @property
    def mu_mult(self) -> float:
        return max((r.ratio for r in self.rows), default=1.0)

    @property
    def mu_add(self) -> int:
        return max((r.special - r.oracle for r in self.rows), default=0)

    def histogram(self, bins: int = 10) -> list[tuple[float, int]]:
        if not self.rows:
            return []
        lo, hi = 1.0, max(self.mu_mult, 1.0 + 1e-9)
        width = (hi - lo) / bins
        counts = [0] * bins
        for r in self.rows:
            idx = min(bins - 1, int((r.ratio - lo) / width)) if width else 0
            counts[idx] += 1
        return [(lo + i * width, c) for i, c in enumerate(counts)]


def qg_fit(
    space: ModelSpace,
    pairs: Sequence[tuple[XPoint, XPoint]],
    radius: int = 512,
) -> QGFit:
    """Least constants with special length <= mu * oracle + mu over the sample."""
    rows: list[QGFitRow] = []
    excluded = 0
    for i, (x, y) in enumerate(pairs):
        d = space.oracle_distance(x, y, radius=radius)
        if d is None:
            excluded += 1
            continue
        sp = special_path(space, x, y)
        rows.append(QGFitRow(i, d, sp.length))
    return QGFit(rows, excluded)


# --- templates ------------------------------------------------------------------


@dataclass
class TemplateWall:
    plane: PlaneRef
    in_s: Optional[int]  # incoming gluing line {s = in_s}, near coords
    out_t: Optional[int]  # outgoing gluing line {t = out_t}, near coords

    @property
    def corner(self) -> Optional[tuple[int, int]]:
        if self.in_s is None or self.out_t is None:
            return None
        return (self.in_s, self.out_t)


@dataclass
class Template:
    space: ModelSpace
    walls: list[TemplateWall]
    widths: list[int]  # promoted strip widths, one per consecutive wall pair

    def wall_count(self) -> int:
        return len(self.walls)


class TemplateError(ValueError):
    pass


def build_template(space: ModelSpace, planes: Sequence[PlaneRef]) -> Template:
    """Walls from the corridor planes; zero-width bridges promoted to 1."""
    if len(planes) < 2:
        raise TemplateError("a template needs at least two walls")
    from .freegroup import bridge as axis_bridge

    walls = [TemplateWall(p, None, None) for p in planes]
    widths = []
    for j in range(len(planes) - 1):
        br = axis_bridge(space.line_axis(planes[j].far), space.line_axis(planes[j + 1].near))
        widths.append(max(1, br.width))
        # outgoing line of wall j: far-side {s' = foot}; near coords {t = const}
        walls[j].out_t = space.near_t_for_far_s(planes[j], br.param_a)
        # incoming line of wall j+1: near-side {s = foot}
        walls[j + 1].in_s = br.param_b
    return Template(space, walls, widths)


def _strip_param_of_wall_s(space: ModelSpace, plane: PlaneRef, s: int) -> int:
    """Fiber coordinate of the outgoing piece for a wall point at s."""
    return space.cross_plane(plane, s, 0)[1]


def _wall_s_of_strip_param(space: ModelSpace, plane: PlaneRef, r: int) -> int:
    return space.near_s_for_far_t(plane, r)


def wall_step_cost(
    tpl: Template, j: int, p: tuple[int, int], q: tuple[int, int]
) -> int:
    """Exact template distance from wall j point p to wall j+1 point q.

    Closed form: travel to the outgoing line, cross the strip, enter on the
    incoming line; the L1 minimizations collapse.
    """
    space = tpl.space
    w = tpl.widths[j]
    t_out = tpl.walls[j].out_t
    s_in = tpl.walls[j + 1].in_s
    r_p = _strip_param_of_wall_s(space, tpl.walls[j].plane, p[0])
    return abs(p[1] - t_out) + w + abs(q[0] - s_in) + abs(r_p - q[1])


def template_distance(tpl: Template, i: int, p: tuple[int, int], j: int, q: tuple[int, int]) -> int:
    """Exact L1 shortest path in the template between wall points."""
    if i > j:
        i, j, p, q = j, i, q, p
    if i == j:
        return abs(p[0] - q[0]) + abs(p[1] - q[1])
    space = tpl.space
    # Cost to reach wall k at (s, t) splits as A(s) + B(t), where each factor
    # is stored as breakpoints: f(s) = min_v dict[v] + |s - v| (1-Lipschitz).
    A = {p[0]: 0}
    B = {p[1]: 0}
    for k in range(i, j):
        t_out = tpl.walls[k].out_t
        s_in = tpl.walls[k + 1].in_s
        w = tpl.widths[k]
        beta = min(B[t] + abs(t - t_out) for t in B)
        plane = tpl.walls[k].plane
        # the strip parameterization is a +-1 affine map, an isometry of Z,
        # so the s-cost becomes the next wall's fiber cost by reindexing
        new_B = {_strip_param_of_wall_s(space, plane, s): c for s, c in A.items()}
        A = {s_in: beta + w}
        B = new_B
    return int(
        min(A[s] + abs(q[0] - s) for s in A) + min(B[r] + abs(q[1] - r) for r in B)
    )


def template_special_path_length(tpl: Template, p: tuple[int, int], q: tuple[int, int]) -> int:
    """Length of the corner-to-corner special path from wall 0 to the last wall."""
    total = 0
    cur = p
    for j in range(len(tpl.walls) - 1):
        nxt = tpl.walls[j + 1].corner
        if nxt is None:
            nxt = q
        total += wall_step_cost(tpl, j, cur, nxt)
        cur = nxt
    return total


def template_point_in_space(tpl: Template, wall: int, s: int, t: int) -> XPoint:
    """The model-space point a template wall coordinate represents."""
    return tpl.space.plane_point(tpl.walls[wall].plane, s, t)


@dataclass
class TemplateComparisonRow:
    wall_a: int
    wall_b: int
    template_d: int
    oracle_d: int


def template_comparison(
    tpl: Template, rng: random.Random, samples: int, spread: int = 6, radius: int = 512
) -> list[TemplateComparisonRow]:
    """Sample wall points and compare template vs model-space distances."""
    rows = []
    n = tpl.wall_count()
    for _ in range(samples):
        ia = rng.randrange(n)
        ib = rng.randrange(n)
        pa = (rng.randint(-spread, spread), rng.randint(-spread, spread))
        pb = (rng.randint(-spread, spread), rng.randint(-spread, spread))
        xa = template_point_in_space(tpl, ia, *pa)
        xb = template_point_in_space(tpl, ib, *pb)
        d = tpl.space.oracle_distance(xa, xb, radius=radius)
        if d is None:
            continue
        rows.append(TemplateComparisonRow(ia, ib, template_distance(tpl, ia, pa, ib, pb), d))
    return rows
