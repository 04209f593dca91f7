"""Flip admissible graph-of-groups instances: declaration, validation, gluing data.

An instance is a finite graph whose vertices carry free-group ranks (the
hyperbolic factor of F_k x Z) and whose edges carry one cyclically reduced
primitive word per endpoint plus the flip identification of the shared plane.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .freegroup import (
    CyclicWord,
    FreeGroup,
    Word,
    WordError,
    independent,
    is_cyclically_reduced,
    parse_word,
    primitive_root,
)


class ConfigError(ValueError):
    """Instance file violates the schema; carries a line number."""

    def __init__(self, line_no: int | None, message: str):
        self.line_no = line_no
        prefix = f"line {line_no}: " if line_no is not None else ""
        super().__init__(prefix + message)


@dataclass(frozen=True)
class VertexData:
    id: str
    rank: int
    alphabet: str

    @property
    def group(self) -> FreeGroup:
        return FreeGroup(self.rank, self.alphabet)


@dataclass(frozen=True)
class EdgeData:
    id: str
    ends: tuple[str, str]
    words: tuple[Word, Word]
    offsets: tuple[int, int] = (0, 0)
    signs: tuple[int, int] = (1, 1)


# A directed edge: (edge id, direction); direction 0 runs ends[0] -> ends[1].
EdgeStep = tuple[str, int]


def step_reverse(step: EdgeStep) -> EdgeStep:
    return (step[0], 1 - step[1])


@dataclass(frozen=True, eq=False)
class AdmissibleGraph:
    vertices: tuple[VertexData, ...]
    edges: tuple[EdgeData, ...]

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, AdmissibleGraph):
            return NotImplemented
        return (self.vertices, self.edges) == (other.vertices, other.edges)

    def __hash__(self):
        h = self.__dict__.get("_hash")
        if h is None:
            h = hash((self.vertices, self.edges))
            object.__setattr__(self, "_hash", h)
        return h

    def __post_init__(self):
        ids = [v.id for v in self.vertices]
        if len(set(ids)) != len(ids):
            raise ConfigError(None, "duplicate vertex ids")
        eids = [e.id for e in self.edges]
        if len(set(eids)) != len(eids):
            raise ConfigError(None, "duplicate edge ids")
        known = set(ids)
        for e in self.edges:
            for v in e.ends:
                if v not in known:
                    raise ConfigError(None, f"edge {e.id} references unknown vertex {v}")

    def vertex(self, vid: str) -> VertexData:
        for v in self.vertices:
            if v.id == vid:
                return v
        raise KeyError(vid)

    def edge(self, eid: str) -> EdgeData:
        for e in self.edges:
            if e.id == eid:
                return e
        raise KeyError(eid)

    def group(self, vid: str) -> FreeGroup:
        return self.vertex(vid).group

    def steps_at(self, vid: str) -> list[EdgeStep]:
        """Directed edges leaving the graph vertex vid, in declaration order."""
        out = []
        for e in self.edges:
            if e.ends[0] == vid:
                out.append((e.id, 0))
            if e.ends[1] == vid:
                out.append((e.id, 1))
        return out

    def step_source(self, step: EdgeStep) -> str:
        e = self.edge(step[0])
        return e.ends[step[1]]

    def step_target(self, step: EdgeStep) -> str:
        e = self.edge(step[0])
        return e.ends[1 - step[1]]

    def word_at_source(self, step: EdgeStep) -> Word:
        e = self.edge(step[0])
        return e.words[step[1]]

    def word_at_target(self, step: EdgeStep) -> Word:
        e = self.edge(step[0])
        return e.words[1 - step[1]]

    def edge_root(self, step: EdgeStep) -> CyclicWord:
        """Primitive cyclic class of the edge word at the step's source."""
        return primitive_root(self.word_at_source(step))[0]


@dataclass(frozen=True)
class PlaneCoord:
    """Integer coordinates on the plane of an edge, seen from one side.

    s runs along the boundary line of the hyperbolic factor, t along the
    fiber.  The flip to the other side swaps the two roles.
    """

    edge: str
    side: int  # 0 = ends[0] of the edge, 1 = ends[1]
    s: int
    t: int


def flip_transfer(graph: AdmissibleGraph, p: PlaneCoord) -> PlaneCoord:
    """Carry a plane coordinate to the opposite side of its edge.

    The declared rule applies signs/offsets componentwise, then swaps:
    (s, t) -> (sg_t * t + off_t, sg_s * s + off_s).  Transfer twice is the
    identity, and each transfer is an L1 isometry of the integer plane.
    """
    e = graph.edge(p.edge)
    (off_s, off_t), (sg_s, sg_t) = e.offsets, e.signs
    if p.side == 0:
        return PlaneCoord(p.edge, 1, sg_t * p.t + off_t, sg_s * p.s + off_s)
    return PlaneCoord(p.edge, 0, sg_s * (p.t - off_s), sg_t * (p.s - off_t))


def edge_group_transfer(graph: AdmissibleGraph, step: EdgeStep, m: int, n: int) -> tuple[int, int]:
    """Carry an edge-group element across `step`.

    On the source side the element is (b^m, n) in <b_e> x Z; on the target
    side the factors swap, with the declared signs.  Offsets act on plane
    coordinates only (affine data never enters the group identification).
    """
    e = graph.edge(step[0])
    sg_s, sg_t = e.signs
    if step[1] == 0:
        return (sg_t * n, sg_s * m)
    return (sg_s * n, sg_t * m)


@dataclass(frozen=True)
class Violation:
    kind: str
    where: str
    detail: str


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def lines(self) -> list[str]:
        out = [f"{v.kind} at {v.where}: {v.detail}" for v in self.violations]
        out.extend(f"note: {n}" for n in self.notes)
        return out


def _conjugate_to_own_inverse(cyc: CyclicWord) -> bool:
    inv = cyc.inverse_class()
    doubled = inv.root + inv.root
    return any(doubled[i : i + len(cyc.root)] == cyc.root for i in range(len(inv.root)))


def validate_admissible(graph: AdmissibleGraph) -> ValidationReport:
    """Check the flip admissibility conditions that are not forced by the schema.

    Reports, per vertex, every failing edge word (non-primitive, not
    cyclically reduced) and every dependent pair of edge words.  Vertex ranks
    below 2 and an empty edge list are reported as structural violations.
    """
    rep = ValidationReport()
    if not graph.edges:
        rep.violations.append(Violation("no-edges", "graph", "an admissible graph needs at least one edge"))
    for v in graph.vertices:
        if v.rank < 2:
            rep.violations.append(
                Violation("non-elementary", v.id, f"rank {v.rank} < 2: vertex factor must be non-elementary")
            )
    for v in graph.vertices:
        incident: list[tuple[EdgeStep, Word]] = []
        for step in graph.steps_at(v.id):
            incident.append((step, graph.word_at_source(step)))
        classes: list[tuple[EdgeStep, Optional[CyclicWord]]] = []
        for step, w in incident:
            label = f"{v.id}/{step[0]}"
            if not w:
                rep.violations.append(Violation("trivial-word", label, "edge word is the identity"))
                classes.append((step, None))
                continue
            if not is_cyclically_reduced(w):
                rep.violations.append(
                    Violation("not-cyclically-reduced", label, f"edge word {w} has cancelling ends")
                )
            cyc, _ = primitive_root(w)
            if cyc.power > 1:
                rep.violations.append(
                    Violation("not-primitive", label, f"edge word is a proper power (root^{cyc.power})")
                )
                classes.append((step, None))
                continue
            if _conjugate_to_own_inverse(cyc):
                rep.notes.append(
                    f"{label}: edge word is conjugate to its inverse; its line has a reversing symmetry"
                )
            classes.append((step, cyc))
        for i in range(len(classes)):
            for j in range(i + 1, len(classes)):
                (si, ci), (sj, cj) = classes[i], classes[j]
                if ci is None or cj is None:
                    continue
                if not independent(ci, cj):
                    rep.violations.append(
                        Violation(
                            "dependent-pair",
                            v.id,
                            f"edge words of {si[0]} and {sj[0]} have conjugate powers",
                        )
                    )
    rep.notes.append(
        "edge groups are exactly Z(G_v) x Z(G_w) in the flip model, so the "
        "finite-index condition on edge subgroups holds automatically"
    )
    return rep


def require_valid(graph: AdmissibleGraph) -> None:
    rep = validate_admissible(graph)
    if not rep.ok:
        raise ConfigError(None, "invalid instance: " + "; ".join(rep.lines()))


# --- instance file format -----------------------------------------------------
#
#   vertex <id> rank=<k> [alphabet=<letters>]
#   edge <id> ends=<v>,<w> words=<word_v>,<word_w> [offsets=<i>,<j>] [signs=<+|->,<+|->]
#
# Words use the ASCII convention: lowercase = generator, uppercase = inverse,
# in the declaring vertex's alphabet (default abc...).  '#' starts a comment.


def _parse_kv(tokens: list[str], line_no: int) -> dict[str, str]:
    out = {}
    for tok in tokens:
        if "=" not in tok:
            raise ConfigError(line_no, f"expected key=value, got {tok!r}")
        k, _, val = tok.partition("=")
        if k in out:
            raise ConfigError(line_no, f"duplicate key {k!r}")
        out[k] = val
    return out


def _parse_pair(text: str, line_no: int, what: str) -> tuple[str, str]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ConfigError(line_no, f"{what} needs exactly two comma-separated values")
    return parts[0], parts[1]


def parse_instance_text(text: str) -> AdmissibleGraph:
    vertices: list[VertexData] = []
    edge_rows: list[tuple[int, dict[str, str], str]] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        kind, rest = tokens[0], tokens[1:]
        if kind == "vertex":
            if len(rest) < 2:
                raise ConfigError(line_no, "vertex needs an id and rank=<k>")
            vid = rest[0]
            kv = _parse_kv(rest[1:], line_no)
            unknown = set(kv) - {"rank", "alphabet"}
            if unknown:
                raise ConfigError(line_no, f"unknown vertex keys {sorted(unknown)}")
            if "rank" not in kv:
                raise ConfigError(line_no, "vertex is missing rank=<k>")
            try:
                rank = int(kv["rank"])
            except ValueError:
                raise ConfigError(line_no, f"rank must be an integer, got {kv['rank']!r}")
            alphabet = kv.get("alphabet", "abcdefghijklmnopqrstuvwxyz")
            if len(set(alphabet)) != len(alphabet) or not alphabet.islower():
                raise ConfigError(line_no, "alphabet must be distinct lowercase letters")
            if rank < 1 or rank > len(alphabet):
                raise ConfigError(line_no, f"rank {rank} incompatible with alphabet {alphabet!r}")
            vertices.append(VertexData(vid, rank, alphabet))
        elif kind == "edge":
            if len(rest) < 3:
                raise ConfigError(line_no, "edge needs an id, ends=..., words=...")
            eid = rest[0]
            kv = _parse_kv(rest[1:], line_no)
            unknown = set(kv) - {"ends", "words", "offsets", "signs"}
            if unknown:
                raise ConfigError(line_no, f"unknown edge keys {sorted(unknown)}")
            for req in ("ends", "words"):
                if req not in kv:
                    raise ConfigError(line_no, f"edge is missing {req}=...")
            edge_rows.append((line_no, kv, eid))
        else:
            raise ConfigError(line_no, f"unknown directive {kind!r}")

    by_id = {v.id: v for v in vertices}
    edges: list[EdgeData] = []
    for line_no, kv, eid in edge_rows:
        v0, v1 = _parse_pair(kv["ends"], line_no, "ends")
        for v in (v0, v1):
            if v not in by_id:
                raise ConfigError(line_no, f"edge references unknown vertex {v!r}")
        t0, t1 = _parse_pair(kv["words"], line_no, "words")
        try:
            w0 = parse_word(t0, by_id[v0].rank, by_id[v0].alphabet)
            w1 = parse_word(t1, by_id[v1].rank, by_id[v1].alphabet)
        except WordError as exc:
            raise ConfigError(line_no, str(exc))
        offsets = (0, 0)
        if "offsets" in kv:
            o0, o1 = _parse_pair(kv["offsets"], line_no, "offsets")
            try:
                offsets = (int(o0), int(o1))
            except ValueError:
                raise ConfigError(line_no, "offsets must be integers")
        signs = (1, 1)
        if "signs" in kv:
            s0, s1 = _parse_pair(kv["signs"], line_no, "signs")
            table = {"+": 1, "-": -1, "+1": 1, "-1": -1}
            if s0 not in table or s1 not in table:
                raise ConfigError(line_no, "signs must be + or -")
            signs = (table[s0], table[s1])
        edges.append(EdgeData(eid, (v0, v1), (w0, w1), offsets, signs))

    if not vertices:
        raise ConfigError(None, "instance declares no vertices")
    return AdmissibleGraph(tuple(vertices), tuple(edges))


def load_instance(path: str | Path) -> AdmissibleGraph:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(str(p))
    return parse_instance_text(p.read_text())


def builtin_instance(name: str) -> AdmissibleGraph:
    """Reference instances used throughout the test suites."""
    if name == "e1":
        return parse_instance_text(
            """
            vertex u rank=2 alphabet=ab
            vertex w rank=2 alphabet=cd
            edge e1 ends=u,w words=a,c
            """
        )
    if name == "path3":
        return parse_instance_text(
            """
            vertex u rank=2 alphabet=ab
            vertex w rank=2 alphabet=cd
            vertex x rank=2 alphabet=ef
            edge e1 ends=u,w words=a,c
            edge e2 ends=w,x words=d,e
            """
        )
    raise KeyError(name)
