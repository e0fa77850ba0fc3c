"""Small shared helpers: seeded RNG streams and a disjoint-set."""

from __future__ import annotations

import hashlib
import random


def derive_rng(seed: int, *tokens) -> random.Random:
    """Deterministic RNG sub-stream for (seed, tokens).

    hash() is salted per process, so stream derivation goes through sha256 of
    the repr. Identical inputs give identical streams on any machine.
    """
    digest = hashlib.sha256(repr((seed,) + tokens).encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


class DisjointSet:
    """Union-find over hashable items, created lazily on first touch."""

    def __init__(self):
        self._parent = {}

    def find(self, item):
        parent = self._parent
        if item not in parent:
            parent[item] = item
            return item
        root = item
        while parent[root] != root:
            root = parent[root]
        while parent[item] != root:
            parent[item], item = root, parent[item]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self._parent[rb] = ra

    def same(self, a, b) -> bool:
        return self.find(a) == self.find(b)
