"""Exact word combinatorics in free groups and their Cayley trees.

Words are tuples of nonzero ints: +i is the i-th generator, -i its inverse
(1-based, rank <= 26).  The ASCII form uses lowercase for generators and
uppercase for inverses ("aBa" = a * b^-1 * a).  Everything here is immutable
and pure; the Cayley tree of F_k is never materialized, all metric questions
are answered by word arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Optional

Word = tuple[int, ...]

EPSILON: Word = ()

ALPHABET = "abcdefghijklmnopqrstuvwxyz"


class WordError(ValueError):
    """Malformed letters or words outside the declared alphabet."""


def check_letters(raw: Iterable[int], rank: int) -> None:
    for a in raw:
        if a == 0 or abs(a) > rank:
            raise WordError(f"letter {a} out of range for rank {rank}")


def reduce_word(raw: Iterable[int], rank: int | None = None) -> Word:
    """Freely reduce a letter sequence (stack cancellation)."""
    out: list[int] = []
    for a in raw:
        if a == 0 or (rank is not None and abs(a) > rank):
            raise WordError(f"letter {a} out of range for rank {rank}")
        if out and out[-1] == -a:
            out.pop()
        else:
            out.append(a)
    return tuple(out)


def inverse(w: Word) -> Word:
    return tuple(-a for a in reversed(w))


def concat(*words: Word) -> Word:
    """Product of already-reduced words, reduced."""
    out: list[int] = []
    for w in words:
        for a in w:
            if out and out[-1] == -a:
                out.pop()
            else:
                out.append(a)
    return tuple(out)


def parse_word(text: str, rank: int, alphabet: str = ALPHABET) -> Word:
    letters = []
    for ch in text.strip():
        if ch in " \t.*1":  # "1" prints the identity
            continue
        low = ch.lower()
        idx = alphabet.find(low)
        if idx < 0 or idx >= rank:
            raise WordError(f"character {ch!r} not in rank-{rank} alphabet {alphabet[:rank]!r}")
        letters.append(-(idx + 1) if ch.isupper() else idx + 1)
    return reduce_word(letters)


def format_word(w: Word, alphabet: str = ALPHABET) -> str:
    if not w:
        return "1"
    return "".join(alphabet[a - 1] if a > 0 else alphabet[-a - 1].upper() for a in w)


def letter_key(a: int) -> int:
    # a < A < b < B < ...
    return 2 * abs(a) + (0 if a > 0 else 1)


def shortlex_key(w: Word) -> tuple:
    return (len(w), bytes(2 * a if a > 0 else -2 * a + 1 for a in w))


def shortlex_min(words: Iterable[Word]) -> Word:
    return min(words, key=shortlex_key)


def is_reduced(w: Word) -> bool:
    return all(w[i] != -w[i + 1] for i in range(len(w) - 1))


def common_prefix_len(u: Word, v: Word) -> int:
    n = min(len(u), len(v))
    for i in range(n):
        if u[i] != v[i]:
            return i
    return n


def word_distance(x: Word, y: Word) -> int:
    """Graph distance in the Cayley tree: |x^-1 y|."""
    return len(concat(inverse(x), y))


def geodesic_vertices(x: Word, y: Word) -> list[Word]:
    """All vertices on the tree geodesic from x to y, in order."""
    q = concat(inverse(x), y)
    return [concat(x, q[:i]) for i in range(len(q) + 1)]


def median(x: Word, y: Word, z: Word) -> Word:
    """The unique vertex on all three pairwise geodesics."""
    u = concat(inverse(x), y)
    v = concat(inverse(x), z)
    return concat(x, u[: common_prefix_len(u, v)])


def cyclic_reduce(w: Word) -> tuple[Word, Word]:
    """Return (core, conjugator) with w = conjugator * core * conjugator^-1."""
    w = tuple(w)
    i, j = 0, len(w)
    while j - i >= 2 and w[i] == -w[j - 1]:
        i += 1
        j -= 1
    return w[i:j], w[:i]


def is_cyclically_reduced(w: Word) -> bool:
    return len(w) <= 1 or w[0] != -w[-1]


def word_power(root: Word, m: int) -> Word:
    """root^m as a word; exact repetition when root is cyclically reduced."""
    if m >= 0:
        return root * m
    return inverse(root) * (-m)


def power_of(w: Word, root: Word) -> Optional[int]:
    """m with w == root^m as reduced words, or None."""
    if not w:
        return 0
    n, k = len(w), len(root)
    if k == 0 or n % k:
        return None
    m = n // k
    if w == root * m:
        return m
    if w == inverse(root) * m:
        return -m
    return None


class NoRootError(ValueError):
    """Primitive root of the empty word requested."""


@dataclass(frozen=True)
class CyclicWord:
    """Conjugacy class datum: a primitive cyclically reduced root and a power."""

    root: Word
    power: int = 1

    def __post_init__(self):
        if not self.root:
            raise NoRootError("empty root")
        if not is_cyclically_reduced(self.root):
            raise WordError(f"root {self.root} is not cyclically reduced")
        if self.power < 1:
            raise WordError("power must be positive")
        if _smallest_period(self.root) != len(self.root):
            raise WordError(f"root {self.root} is a proper power")

    @property
    def length(self) -> int:
        return len(self.root)

    def word(self) -> Word:
        return self.root * self.power

    def rotations(self) -> list[Word]:
        r = self.root
        return [r[i:] + r[:i] for i in range(len(r))]

    def inverse_class(self) -> "CyclicWord":
        core, _ = cyclic_reduce(inverse(self.root))
        return CyclicWord(core, self.power)


def _smallest_period(w: Word) -> int:
    n = len(w)
    for p in range(1, n + 1):
        if n % p == 0 and w == w[:p] * (n // p):
            return p
    return n


def primitive_root(w: Word) -> tuple[CyclicWord, Word]:
    """Primitive root of a nonempty word.

    Returns (cyclic word, conjugator): w is conjugate to root^power by the
    conjugator, which records the cyclic-reduction prefix.
    """
    if not w:
        raise NoRootError("the identity has no primitive root")
    core, conj = cyclic_reduce(w)
    p = _smallest_period(core)
    return CyclicWord(core[:p], len(core) // p), conj


def independent(u: CyclicWord, v: CyclicWord) -> bool:
    """No conjugate powers: roots are not rotations of each other or of inverses.

    Doubled-string rotation test; exact for primitive elements of a free group.
    """
    if len(u.root) != len(v.root):
        return True
    doubled = v.root + v.root
    inv_doubled = v.inverse_class().root * 2
    for i in range(len(v.root)):
        if doubled[i : i + len(u.root)] == u.root:
            return False
        if inv_doubled[i : i + len(u.root)] == u.root:
            return False
    return True


from functools import lru_cache


@lru_cache(maxsize=None)
def shortlex_min_coset(u: Word, root: Word) -> Word:
    """Shortlex-least element of the coset u<root> (root cyclically reduced)."""
    if not root:
        raise WordError("trivial root has no coset structure")
    span = 2 * (len(u) // len(root)) + 2
    best = None
    best_key = None
    for m in range(-span, span + 1):
        cand = concat(u, word_power(root, m))
        key = shortlex_key(cand)
        if best_key is None or key < best_key:
            best, best_key = cand, key
    return best


@dataclass(frozen=True)
class Axis:
    """A loxodromic axis in the Cayley tree, canonically parameterized.

    `base` is the vertex of the line closest to the identity (equivalently the
    shortlex-least element of base*<word>), parameter 0; parameters increase in
    the root direction.  `qg_certificate` is (1, 0) for honest axes and only
    exceeds it for concatenation quasi-lines.
    """

    word: CyclicWord
    base: Word = EPSILON
    orientation: int = 1
    qg_certificate: tuple[Fraction, Fraction] = (Fraction(1), Fraction(0))

    @classmethod
    def of_element(cls, g: Word) -> "Axis":
        """Canonical axis of a nontrivial group element."""
        cyc, conj = primitive_root(g)
        return cls(word=cyc, base=conj)

    @classmethod
    def through(cls, base: Word, root: Word) -> "Axis":
        """Canonical axis of base * root * base^-1."""
        return cls.of_element(concat(base, root, inverse(base)))

    @property
    def period(self) -> int:
        return self.word.length

    def vertex(self, t: int) -> Word:
        q, s = divmod(t, self.period)
        return concat(self.base, word_power(self.word.root, q), self.word.root[:s])

    def segment(self, lo: int, hi: int) -> list[Word]:
        return [self.vertex(t) for t in range(lo, hi + 1)]

    def reversed(self) -> "Axis":
        return Axis.of_element(concat(self.base, inverse(self.word.word()), inverse(self.base)))

    def param_of(self, x: Word) -> Optional[int]:
        """Parameter of x on the line, or None if x is off the line."""
        y = concat(inverse(self.base), x)
        if not y:
            return 0
        r = self.word.root
        ri = inverse(r)
        if _matches_periodic(y, r):
            return len(y)
        if _matches_periodic(y, ri):
            return -len(y)
        return None

    def line_key(self) -> tuple:
        """Key identifying the underlying unoriented line."""
        rev = self.reversed()
        return min((self.base, self.word.root), (rev.base, rev.word.root))


def _matches_periodic(y: Word, r: Word) -> bool:
    return all(y[i] == r[i % len(r)] for i in range(len(y)))


def _prefix_match_len(y: Word, r: Word) -> int:
    i = 0
    while i < len(y) and y[i] == r[i % len(r)]:
        i += 1
    return i


def project_to_axis(x: Word, axis: Axis) -> tuple[Word, int]:
    """Nearest vertex of the axis to x (unique in a tree) and its parameter."""
    y = concat(inverse(axis.base), x)
    if not y:
        return axis.base, 0
    fwd = _prefix_match_len(y, axis.word.root)
    if fwd:
        return axis.vertex(fwd), fwd
    bwd = _prefix_match_len(y, inverse(axis.word.root))
    if bwd:
        return axis.vertex(-bwd), -bwd
    return axis.base, 0


def dist_to_axis(x: Word, axis: Axis) -> int:
    point, _ = project_to_axis(x, axis)
    return word_distance(x, point)


def d_gamma(axis: Axis, x: Word, y: Word) -> int:
    """Diameter of the two-point projection onto the axis."""
    _, s = project_to_axis(x, axis)
    _, t = project_to_axis(y, axis)
    return abs(s - t)


def projection_interval(target: Axis, other: Axis) -> tuple[int, int]:
    """Parameter interval of the projection of `other` onto `target`.

    The projection parameter of other.vertex(t) is weakly monotone in t and
    stabilizes beyond a Fine-Wilf style threshold, so the interval is spanned
    by the two far samples; stabilization is asserted.
    """
    la, lb = target.period, other.period
    T = len(target.base) + len(other.base) + 4 * (la + lb) + 8
    _, lo = project_to_axis(other.vertex(-T), target)
    _, hi = project_to_axis(other.vertex(T), target)
    _, lo2 = project_to_axis(other.vertex(-T - la - lb - 3), target)
    _, hi2 = project_to_axis(other.vertex(T + la + lb + 3), target)
    if lo2 != lo or hi2 != hi:
        raise WordError("axis projection failed to stabilize (dependent lines?)")
    return (lo, hi) if lo <= hi else (hi, lo)


@dataclass(frozen=True)
class Bridge:
    """Unique shortest connection between two lines in the tree.

    When the lines are disjoint: the bridge is the segment between the two
    feet and width > 0.  When they share vertices: width 0, the bridge is the
    shortlex-least shared vertex, and `overlap` carries the parameter
    intervals of the shared segment on both lines.
    """

    foot_a: Word
    foot_b: Word
    param_a: int
    param_b: int
    width: int
    overlap: Optional[tuple[tuple[int, int], tuple[int, int]]] = None


def bridge(a: Axis, b: Axis) -> Bridge:
    lo_a, hi_a = projection_interval(a, b)
    # Shared-segment test: if the projection interval's vertices lie on b the
    # lines intersect exactly there.
    if b.param_of(a.vertex(lo_a)) is not None:
        lo_b = b.param_of(a.vertex(lo_a))
        hi_b = b.param_of(a.vertex(hi_a))
        assert lo_b is not None and hi_b is not None
        shared = [(a.vertex(t), t) for t in range(lo_a, hi_a + 1)]
        foot, pa = min(shared, key=lambda it: shortlex_key(it[0]))
        pb = b.param_of(foot)
        assert pb is not None
        return Bridge(foot, foot, pa, pb, 0, ((lo_a, hi_a), tuple(sorted((lo_b, hi_b)))))
    lo_b, hi_b = projection_interval(b, a)
    if lo_b != hi_b or lo_a != hi_a:
        raise WordError("disjoint lines must have single-point mutual projections")
    fa, fb = a.vertex(lo_a), b.vertex(lo_b)
    return Bridge(fa, fb, lo_a, lo_b, word_distance(fa, fb), None)


def line_distance(a: Axis, pa: int, b: Axis, pb: int, br: Bridge | None = None) -> int:
    """d(a.vertex(pa), b.vertex(pb)) through the bridge; exact in the tree."""
    if br is None:
        br = bridge(a, b)
    if br.overlap is None:
        return abs(pa - br.param_a) + br.width + abs(pb - br.param_b)
    (alo, ahi), (blo, bhi) = br.overlap
    # Matching parameters along the shared segment; direction from endpoints.
    if ahi == alo:
        return abs(pa - alo) + abs(pb - blo)
    sgn = 1 if b.param_of(a.vertex(ahi)) == bhi and b.param_of(a.vertex(alo)) == blo else -1
    best = None
    for j in range(ahi - alo + 1):
        ta = alo + j
        tb = blo + j if sgn == 1 else bhi - j
        d = abs(pa - ta) + abs(pb - tb)
        best = d if best is None else min(best, d)
    return best


def ball(radius: int, rank: int) -> Iterator[Word]:
    """All reduced words of length <= radius (brute-force oracle helper)."""
    frontier: list[Word] = [EPSILON]
    yield EPSILON
    for _ in range(radius):
        nxt = []
        for w in frontier:
            for a in range(1, rank + 1):
                for s in (a, -a):
                    if not w or w[-1] != -s:
                        v = w + (s,)
                        nxt.append(v)
                        yield v
        frontier = nxt


def sphere(radius: int, rank: int) -> list[Word]:
    return [w for w in ball(radius, rank) if len(w) == radius]


@dataclass
class FreeGroup:
    """Parsing/formatting context for one vertex factor F_k."""

    rank: int
    alphabet: str = ALPHABET

    def __post_init__(self):
        if not (1 <= self.rank <= 26):
            raise WordError(f"rank {self.rank} outside 1..26")
        if len(self.alphabet) < self.rank:
            raise WordError("alphabet shorter than rank")

    def parse(self, text: str) -> Word:
        return parse_word(text, self.rank, self.alphabet)

    def format(self, w: Word) -> str:
        return format_word(w, self.alphabet)

    def generators(self) -> list[Word]:
        return [(i,) for i in range(1, self.rank + 1)]
