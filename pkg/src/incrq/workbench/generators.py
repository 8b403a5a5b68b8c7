"""Seeded synthetic datasets: integer pairs, four-square points and R-MAT graphs."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

PAIR_MAX = 10000


def pairs(n: int, seed: int, low: int = 0, high: int = PAIR_MAX) -> list[tuple[int, int]]:
    """``n`` pairs of uniform integers in ``[low, high]``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if low > high:
        raise ValueError("low must not exceed high")
    rng = random.Random(seed)
    return [(rng.randint(low, high), rng.randint(low, high)) for _ in range(n)]


SQUARE_RANGES = ((2.0, 4.0), (6.0, 8.0))


def squares(n: int, seed: int) -> list[tuple[float, float]]:
    """Uniform points whose X and Y each fall in ``[2,4]`` or ``[6,8]``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    rng = random.Random(seed)
    out = []
    for _ in range(n):
        lx, hx = SQUARE_RANGES[rng.randrange(2)]
        ly, hy = SQUARE_RANGES[rng.randrange(2)]
        out.append((rng.uniform(lx, hx), rng.uniform(ly, hy)))
    return out


@dataclass(frozen=True)
class RmatParams:
    a: float = 0.30
    b: float = 0.25
    c: float = 0.25
    d: float = 0.20

    def validate(self) -> None:
        probs = (self.a, self.b, self.c, self.d)
        if any(p < 0 for p in probs):
            raise ValueError("R-MAT probabilities must be non-negative")
        if not math.isclose(sum(probs), 1.0, abs_tol=1e-9):
            raise ValueError(f"R-MAT probabilities must sum to 1, got {sum(probs)}")


def rmat(
    nodes: int,
    edges: int,
    seed: int,
    params: RmatParams = RmatParams(),
    dedup: bool = False,
) -> list[tuple[int, int]]:
    """Recursive-matrix edge sampling; endpoints outside ``[0, nodes)`` are redrawn.

    Self-loops are kept. With ``dedup`` repeated edges are redrawn as well.
    """
    params.validate()
    if nodes < 1:
        raise ValueError("nodes must be positive")
    if edges < 0:
        raise ValueError("edges must be non-negative")
    if dedup and edges > nodes * nodes:
        raise ValueError("more distinct edges requested than the graph can hold")
    rng = random.Random(seed)
    scale = max(1, math.ceil(math.log2(nodes)))
    cuts = (params.a, params.a + params.b, params.a + params.b + params.c)
    seen: set = set()
    out: list[tuple[int, int]] = []
    while len(out) < edges:
        u = v = 0
        for _ in range(scale):
            r = rng.random()
            u <<= 1
            v <<= 1
            if r < cuts[0]:
                pass
            elif r < cuts[1]:
                v |= 1
            elif r < cuts[2]:
                u |= 1
            else:
                u |= 1
                v |= 1
        if u >= nodes or v >= nodes:
            continue
        if dedup:
            if (u, v) in seen:
                continue
            seen.add((u, v))
        out.append((u, v))
    return out


def graph_increment(first_node: int, new_nodes: int, new_edges: int, seed: int) -> list[tuple[int, int]]:
    """Edges for ``new_nodes`` fresh nodes, each edge from a new node to any node so far."""
    if new_nodes < 1:
        raise ValueError("an increment needs at least one node")
    rng = random.Random(seed)
    total = first_node + new_nodes
    return [(first_node + rng.randrange(new_nodes), rng.randrange(total)) for _ in range(new_edges)]
