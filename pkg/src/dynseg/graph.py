"""Adjacency graph over supervoxels and its connected components (blobs).

Two supervoxels are linked when their voxel footprints touch under
26-adjacency or their centroids are closer than the adjacency radius.
Edge weight: w_ij = exp(-dE_lab / sigma_color) * exp(-d / sigma_distance).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from .supervoxel import SuperVoxel


@dataclass
class GraphConfig:
    adjacency_radius: float | None = None  # default 1.5 * seed_resolution
    sigma_color: float = 30.0
    sigma_distance: float | None = None  # default seed_resolution

    def resolve(self, seed_resolution: float) -> "GraphConfig":
        return replace(
            self,
            adjacency_radius=1.5 * seed_resolution if self.adjacency_radius is None else self.adjacency_radius,
            sigma_distance=seed_resolution if self.sigma_distance is None else self.sigma_distance,
        )


@dataclass
class AdjacencyGraph:
    nodes: list[int]
    edges: dict[tuple[int, int], float]  # keyed (i, j) with i < j, weight in (0, 1]
    svs: dict[int, SuperVoxel]
    _adj: dict[int, list[tuple[int, float]]] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if not self._adj:
            adj: dict[int, list[tuple[int, float]]] = {n: [] for n in self.nodes}
            for (i, j), w in self.edges.items():
                adj[i].append((j, w))
                adj[j].append((i, w))
            for n in adj:
                adj[n].sort()
            self._adj = adj

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    def neighbors(self, node: int) -> list[tuple[int, float]]:
        return self._adj[node]

    def weight(self, i: int, j: int) -> float:
        return self.edges[(i, j) if i < j else (j, i)]

    def has_edge(self, i: int, j: int) -> bool:
        return ((i, j) if i < j else (j, i)) in self.edges

    def subgraph(self, node_subset) -> "AdjacencyGraph":
        keep = set(node_subset)
        nodes = sorted(keep)
        edges = {(i, j): w for (i, j), w in self.edges.items() if i in keep and j in keep}
        return AdjacencyGraph(nodes=nodes, edges=edges, svs=self.svs)

    def is_connected(self) -> bool:
        if not self.nodes:
            return True
        seen = {self.nodes[0]}
        stack = [self.nodes[0]]
        while stack:
            n = stack.pop()
            for m, _ in self._adj[n]:
                if m not in seen:
                    seen.add(m)
                    stack.append(m)
        return len(seen) == len(self.nodes)


@dataclass(frozen=True)
class Blob:
    blob_id: int
    member_supervoxels: frozenset[int]

    @property
    def members_sorted(self) -> list[int]:
        return sorted(self.member_supervoxels)


def build_graph(supervoxels: list[SuperVoxel], config: GraphConfig, seed_resolution: float) -> AdjacencyGraph:
    """Link supervoxels by footprint adjacency or centroid proximity."""
    cfg = config.resolve(seed_resolution)
    svs = {sv.sv_id: sv for sv in supervoxels}
    if len(svs) != len(supervoxels):
        raise ValueError("duplicate supervoxel ids")
    nodes = sorted(svs)

    pairs: set[tuple[int, int]] = set()
    owner: dict[tuple[int, int, int], int] = {}
    for sv in supervoxels:
        for k in sv.voxel_keys:
            owner[k] = sv.sv_id
    for sv in supervoxels:
        for (x, y, z) in sv.voxel_keys:
            for dx in (-1, 0, 1):
                for dy in (-1, 0, 1):
                    for dz in (-1, 0, 1):
                        if dx == 0 and dy == 0 and dz == 0:
                            continue
                        other = owner.get((x + dx, y + dy, z + dz))
                        if other is not None and other != sv.sv_id:
                            a, b = (sv.sv_id, other) if sv.sv_id < other else (other, sv.sv_id)
                            pairs.add((a, b))

    if len(nodes) > 1:
        centroids = np.asarray([svs[n].centroid for n in nodes])
        tree = cKDTree(centroids)
        for ai, bi in tree.query_pairs(cfg.adjacency_radius, output_type="ndarray"):
            a, b = nodes[int(ai)], nodes[int(bi)]
            if a > b:
                a, b = b, a
            d = float(np.linalg.norm(svs[a].centroid - svs[b].centroid))
            if d < cfg.adjacency_radius:  # strict inequality
                pairs.add((a, b))

    edges: dict[tuple[int, int], float] = {}
    for a, b in sorted(pairs):
        dc = float(np.linalg.norm(svs[a].mean_color_lab - svs[b].mean_color_lab))
        d = float(np.linalg.norm(svs[a].centroid - svs[b].centroid))
        edges[(a, b)] = math.exp(-dc / cfg.sigma_color) * math.exp(-d / cfg.sigma_distance)
    return AdjacencyGraph(nodes=nodes, edges=edges, svs=svs)


class _UnionFind:
    """Union by size with path compression."""

    def __init__(self, items) -> None:
        self.parent = {i: i for i in items}
        self.size = {i: 1 for i in items}

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]


def connected_components(graph: AdjacencyGraph) -> list[Blob]:
    """Blobs of the graph; ids ordered by each blob's smallest member id."""
    uf = _UnionFind(graph.nodes)
    for (i, j) in graph.edges:
        uf.union(i, j)
    groups: dict[int, list[int]] = {}
    for n in graph.nodes:
        groups.setdefault(uf.find(n), []).append(n)
    ordered = sorted(groups.values(), key=min)
    return [Blob(blob_id=k, member_supervoxels=frozenset(g)) for k, g in enumerate(ordered)]
