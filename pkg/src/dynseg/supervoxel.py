"""Supervoxel clustering: voxelize, seed on a coarse grid, grow by feature distance.

Growth distance between a voxel and a cluster is
    D = sqrt(w_c * (dE_lab / 100)^2 + w_s * (d_spatial / seed_resolution)^2)
and claims propagate only through 26-adjacent occupied voxels, so every
cluster footprint stays connected.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .cloud_io import PointCloudFrame

COLOR_NORM = 100.0  # Lab distance scale in the growth metric

# sRGB (D65) to XYZ, then XYZ to CIELab with the D65 reference white.
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_D65 = np.array([0.95047, 1.0, 1.08883])


def rgb_to_lab(rgb: np.ndarray) -> np.ndarray:
    """Convert 8-bit sRGB rows to CIELab (D65 white)."""
    c = np.asarray(rgb, dtype=np.float64) / 255.0
    lin = np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)
    xyz = lin @ _RGB_TO_XYZ.T / _D65
    eps = (6.0 / 29.0) ** 3
    f = np.where(xyz > eps, np.cbrt(xyz), xyz / (3.0 * (6.0 / 29.0) ** 2) + 4.0 / 29.0)
    lab = np.empty_like(f)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def delta_e(a: np.ndarray, b: np.ndarray) -> float:
    """Euclidean distance in Lab."""
    return float(np.linalg.norm(np.asarray(a, float) - np.asarray(b, float)))


@dataclass
class SupervoxelConfig:
    voxel_resolution: float = 0.008
    seed_resolution: float = 0.08
    weight_color: float = 0.2
    weight_spatial: float = 0.4
    max_iterations: int = 10

    def validate(self) -> None:
        if self.voxel_resolution <= 0 or self.seed_resolution <= 0:
            raise ValueError("resolutions must be positive")
        if self.seed_resolution < self.voxel_resolution:
            raise ValueError("seed_resolution must be >= voxel_resolution")
        if self.weight_color < 0 or self.weight_spatial < 0:
            raise ValueError("weights must be non-negative")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class SuperVoxel:
    sv_id: int
    point_indices: np.ndarray  # sorted indices into the source frame
    voxel_keys: frozenset[tuple[int, int, int]]
    centroid: np.ndarray  # (3,) mean of member point positions
    mean_color_lab: np.ndarray  # (3,) mean of member point Lab colors


def voxelize(frame: PointCloudFrame, resolution: float) -> dict[tuple[int, int, int], np.ndarray]:
    """Map voxel key (floor(p / resolution) per axis) to member point indices."""
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    if frame.num_points == 0:
        return {}
    keys = np.floor(frame.points / resolution).astype(np.int64)
    order = np.lexsort((keys[:, 2], keys[:, 1], keys[:, 0]))
    sorted_keys = keys[order]
    boundaries = np.nonzero(np.any(np.diff(sorted_keys, axis=0) != 0, axis=1))[0] + 1
    groups = np.split(order, boundaries)
    out: dict[tuple[int, int, int], np.ndarray] = {}
    for g in groups:
        k = tuple(int(v) for v in keys[g[0]])
        out[k] = np.sort(g)
    return out


_OFFSETS = [
    (dx, dy, dz)
    for dx in (-1, 0, 1)
    for dy in (-1, 0, 1)
    for dz in (-1, 0, 1)
    if (dx, dy, dz) != (0, 0, 0)
]


def _grow(
    n_vox: int,
    nbrs: list[list[int]],
    vc: list[tuple[float, float, float]],
    vl: list[tuple[float, float, float]],
    seeds: list[tuple[tuple[float, float, float], tuple[float, float, float], int]],
    wc: float,
    ws: float,
    seed_res: float,
) -> list[int]:
    """One watershed pass: claim voxels in order of increasing growth distance."""

    def dist(si: int, v: int) -> float:
        sc, sl, _ = seeds[si]
        c = vc[v]
        l = vl[v]
        ds = math.sqrt((sc[0] - c[0]) ** 2 + (sc[1] - c[1]) ** 2 + (sc[2] - c[2]) ** 2)
        dc = math.sqrt((sl[0] - l[0]) ** 2 + (sl[1] - l[1]) ** 2 + (sl[2] - l[2]) ** 2)
        return math.sqrt(wc * (dc / COLOR_NORM) ** 2 + ws * (ds / seed_res) ** 2)

    claim = [-1] * n_vox
    heap: list[tuple[float, int, int]] = []
    for si, (_, _, origin) in enumerate(seeds):
        heapq.heappush(heap, (dist(si, origin), si, origin))
    n_claimed = 0
    next_orphan = 0
    while n_claimed < n_vox:
        while heap:
            d, si, v = heapq.heappop(heap)
            if claim[v] >= 0:
                continue
            claim[v] = si
            n_claimed += 1
            for w in nbrs[v]:
                if claim[w] < 0:
                    heapq.heappush(heap, (dist(si, w), si, w))
        if n_claimed < n_vox:
            # voxel unreachable from every seed: promote it to its own seed
            while claim[next_orphan] >= 0:
                next_orphan += 1
            v = next_orphan
            seeds.append((vc[v], vl[v], v))
            si = len(seeds) - 1
            heapq.heappush(heap, (dist(si, v), si, v))
    return claim


def cluster_supervoxels(frame: PointCloudFrame, config: SupervoxelConfig) -> list[SuperVoxel]:
    """Partition a frame's points into supervoxels.

    One seed per occupied cell of a grid at seed_resolution, placed at the
    occupied voxel nearest the cell center (ties by lexicographic voxel key),
    then k-means-like growth passes until claims stabilize.
    """
    config.validate()
    if frame.num_points == 0:
        raise ValueError("cannot cluster an empty frame")
    vox = voxelize(frame, config.voxel_resolution)
    keys = list(vox.keys())  # already in lexicographic order
    n_vox = len(keys)
    key_to_idx = {k: i for i, k in enumerate(keys)}
    lab_all = rgb_to_lab(frame.colors)

    vox_centroid = np.empty((n_vox, 3))
    vox_lab = np.empty((n_vox, 3))
    vox_count = np.empty(n_vox, dtype=np.int64)
    for i, k in enumerate(keys):
        idx = vox[k]
        vox_centroid[i] = frame.points[idx].mean(axis=0)
        vox_lab[i] = lab_all[idx].mean(axis=0)
        vox_count[i] = len(idx)

    nbrs: list[list[int]] = []
    for k in keys:
        lst = []
        for off in _OFFSETS:
            j = key_to_idx.get((k[0] + off[0], k[1] + off[1], k[2] + off[2]))
            if j is not None:
                lst.append(j)
        nbrs.append(lst)

    # seed selection on the coarse grid
    cell_keys = np.floor(vox_centroid / config.seed_resolution).astype(np.int64)
    cells: dict[tuple[int, int, int], list[int]] = {}
    for i in range(n_vox):
        cells.setdefault(tuple(int(v) for v in cell_keys[i]), []).append(i)
    seed_voxels: list[int] = []
    for cell in sorted(cells):
        center = (np.asarray(cell, dtype=np.float64) + 0.5) * config.seed_resolution
        members = cells[cell]
        d2 = [float(np.sum((vox_centroid[i] - center) ** 2)) for i in members]
        best = min(zip(d2, (keys[i] for i in members), members))[2]
        seed_voxels.append(best)

    vc = [tuple(map(float, row)) for row in vox_centroid]
    vl = [tuple(map(float, row)) for row in vox_lab]
    seeds = [(vc[v], vl[v], v) for v in seed_voxels]

    def _canonical(labels: list[int]) -> list[int]:
        remap: dict[int, int] = {}
        out = []
        for s in labels:
            if s not in remap:
                remap[s] = len(remap)
            out.append(remap[s])
        return out

    claim: list[int] = []
    prev_claim: list[int] | None = None
    for _ in range(config.max_iterations):
        claim = _grow(n_vox, nbrs, vc, vl, list(seeds), config.weight_color, config.weight_spatial, config.seed_resolution)
        if prev_claim is not None and _canonical(claim) == prev_claim:
            break
        prev_claim = _canonical(claim)
        # re-estimate cluster features; empty seeds drop out here
        members: dict[int, list[int]] = {}
        for v, s in enumerate(claim):
            members.setdefault(s, []).append(v)
        new_seeds = []
        for s in sorted(members):
            vs = members[s]
            w = vox_count[vs].astype(np.float64)
            cen = (vox_centroid[vs] * w[:, None]).sum(axis=0) / w.sum()
            col = (vox_lab[vs] * w[:, None]).sum(axis=0) / w.sum()
            d2 = [float(np.sum((vox_centroid[v] - cen) ** 2)) for v in vs]
            origin = min(zip(d2, (keys[v] for v in vs), vs))[2]
            new_seeds.append((tuple(map(float, cen)), tuple(map(float, col)), origin))
        seeds = new_seeds

    groups: dict[int, list[int]] = {}
    for v, s in enumerate(claim):
        groups.setdefault(s, []).append(v)
    # deterministic ids: order clusters by their smallest member voxel key
    ordered = sorted(groups.values(), key=lambda vs: keys[min(vs)])
    out: list[SuperVoxel] = []
    for sv_id, vs in enumerate(ordered):
        idx = np.sort(np.concatenate([vox[keys[v]] for v in vs]))
        out.append(
            SuperVoxel(
                sv_id=sv_id,
                point_indices=idx,
                voxel_keys=frozenset(keys[v] for v in vs),
                centroid=frame.points[idx].mean(axis=0),
                mean_color_lab=lab_all[idx].mean(axis=0),
            )
        )
    return out


def growth_distance(
    sv_centroid: np.ndarray,
    sv_color_lab: np.ndarray,
    centroid: np.ndarray,
    color_lab: np.ndarray,
    config: SupervoxelConfig,
) -> float:
    """The growth metric D, exposed for direct checks."""
    ds = float(np.linalg.norm(np.asarray(sv_centroid, float) - np.asarray(centroid, float)))
    dc = delta_e(sv_color_lab, color_lab)
    return math.sqrt(
        config.weight_color * (dc / COLOR_NORM) ** 2
        + config.weight_spatial * (ds / config.seed_resolution) ** 2
    )
