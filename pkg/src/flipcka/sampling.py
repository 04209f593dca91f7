"""Seeded samplers shared by the experiment suites.

Every sampler takes an explicit random.Random so runs are reproducible from
one seed recorded in the report.
"""

from __future__ import annotations

import random

from .bass_serre import TreeVertex, enumerate_coset_words, neighbor
from .freegroup import Word
from .model_space import ModelSpace, XPoint


def random_word(rng: random.Random, rank: int, length: int) -> Word:
    out: list[int] = []
    while len(out) < length:
        a = rng.randrange(1, rank + 1)
        s = a if rng.random() < 0.5 else -a
        if out and out[-1] == -s:
            continue
        out.append(s)
    return tuple(out)


def random_piece(
    space: ModelSpace,
    rng: random.Random,
    start: TreeVertex,
    depth: int,
    coset_len: int = 1,
) -> TreeVertex:
    """Random outward walk in the tree; depth counts edges crossed."""
    sigma = start
    for _ in range(depth):
        steps = space.graph.steps_at(sigma.graph_vertex)
        step = steps[rng.randrange(len(steps))]
        words = enumerate_coset_words(space.graph, sigma.graph_vertex, step, coset_len)
        u = words[rng.randrange(len(words))]
        nxt = neighbor(sigma, step, u)
        if nxt == sigma or nxt.depth() <= sigma.depth():
            continue  # walked back toward the base; retry at same depth is fine
        sigma = nxt
    return sigma


def random_point(
    space: ModelSpace,
    rng: random.Random,
    piece: TreeVertex,
    word_len: int,
    fiber: int,
) -> XPoint:
    rank = space.graph.vertex(piece.graph_vertex).rank
    w = random_word(rng, rank, rng.randrange(word_len + 1))
    return space.point(piece, w, rng.randint(-fiber, fiber))


def random_pair(
    space: ModelSpace,
    rng: random.Random,
    start: TreeVertex,
    tree_dist: int,
    word_len: int = 6,
    fiber: int = 6,
) -> tuple[XPoint, XPoint]:
    """A pair of points whose pieces are (about) tree_dist apart."""
    a = random_piece(space, rng, start, rng.randrange(2))
    b = random_piece(space, rng, a, tree_dist)
    return (
        random_point(space, rng, a, word_len, fiber),
        random_point(space, rng, b, word_len, fiber),
    )
