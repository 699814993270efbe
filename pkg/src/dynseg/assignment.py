"""Blob-to-segment assignment energy and its two minimizers.

Each previous-frame segment receives one current-blob label or NONE.  The
energy combines appearance change, displacement to the nearest supervoxel of
the chosen blob, a penalty per uncovered blob, and the variance of
displacement vectors within each previous component.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

NONE_LABEL = -1

_MAX_EXHAUSTIVE = 10_000_000


@dataclass
class EnergyParams:
    """Term weights; any term can be switched off by zeroing its weight."""

    alpha: float = 0.01  # appearance, per Lab unit
    beta: float | None = None  # displacement, default 1 / seed_resolution
    gamma: float = 2.0  # per blob left uncovered
    delta: float = 1.0  # displacement variance within a previous component
    rho: float = 1.5  # cost of assigning NONE to a segment

    def resolve(self, seed_resolution: float) -> "EnergyParams":
        return replace(self, beta=1.0 / seed_resolution if self.beta is None else self.beta)


@dataclass
class GAConfig:
    population: int = 50
    generations: int = 150
    tournament_size: int = 3
    crossover_rate: float = 0.7
    mutation_rate: float | None = None  # default 1 / num_segments
    elitism: int = 2
    stagnation_stop: int = 25
    rng_seed: int = 0


@dataclass(frozen=True)
class SegmentFeature:
    centroid: tuple[float, float, float]
    mean_color_lab: tuple[float, float, float]
    parent_component_id: int
    parent_object_id: int


@dataclass
class BlobFeature:
    sv_centroids: np.ndarray  # (K, 3)
    sv_colors_lab: np.ndarray  # (K, 3)

    def __post_init__(self) -> None:
        self.sv_centroids = np.asarray(self.sv_centroids, dtype=np.float64).reshape(-1, 3)
        self.sv_colors_lab = np.asarray(self.sv_colors_lab, dtype=np.float64).reshape(-1, 3)
        if len(self.sv_centroids) == 0:
            raise ValueError("blob must contain at least one supervoxel")
        if len(self.sv_centroids) != len(self.sv_colors_lab):
            raise ValueError("centroid and color counts differ")


@dataclass
class AssignmentProblem:
    segments: list[SegmentFeature]
    blobs: list[BlobFeature]
    params: EnergyParams
    _pre: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if self.params.beta is None:
            raise ValueError("params must be resolved (beta unset)")

    @property
    def num_segments(self) -> int:
        return len(self.segments)

    @property
    def num_blobs(self) -> int:
        return len(self.blobs)


@dataclass
class Assignment:
    labels: np.ndarray  # (M_s,) blob index per segment, NONE_LABEL for none
    energy: float


def _precompute(problem: AssignmentProblem) -> dict:
    if problem._pre:
        return problem._pre
    ms, mb = problem.num_segments, problem.num_blobs
    p = problem.params
    cost = np.empty((ms, mb + 1))
    disp = np.zeros((ms, mb, 3))
    if ms:
        seg_c = np.asarray([s.centroid for s in problem.segments])
        seg_l = np.asarray([s.mean_color_lab for s in problem.segments])
        for b, blob in enumerate(problem.blobs):
            tree = cKDTree(blob.sv_centroids)
            k = min(3, len(blob.sv_centroids))
            d1, i1 = tree.query(seg_c, k=1)
            _, ik = tree.query(seg_c, k=k)
            ik = np.atleast_2d(np.asarray(ik).reshape(ms, k))
            near_color = blob.sv_colors_lab[ik].mean(axis=1)
            appearance = np.linalg.norm(near_color - seg_l, axis=1)
            cost[:, b] = p.alpha * appearance + p.beta * d1
            disp[:, b] = blob.sv_centroids[np.asarray(i1).reshape(ms)] - seg_c
        cost[:, mb] = p.rho
    comp_groups: list[np.ndarray] = []
    by_comp: dict[int, list[int]] = {}
    for s, seg in enumerate(problem.segments):
        by_comp.setdefault(seg.parent_component_id, []).append(s)
    for cid in sorted(by_comp):
        comp_groups.append(np.asarray(by_comp[cid], dtype=np.int64))
    problem._pre = {"cost": cost, "disp": disp, "groups": comp_groups}
    return problem._pre


def _energy_batch(problem: AssignmentProblem, labels: np.ndarray) -> np.ndarray:
    """Energies for a (P, M_s) batch of label vectors."""
    pre = _precompute(problem)
    labels = np.asarray(labels, dtype=np.int64)
    ms, mb = problem.num_segments, problem.num_blobs
    p = problem.params
    pop = labels.shape[0]
    if ms == 0:
        return np.full(pop, p.gamma * mb)
    # NONE_LABEL = -1 indexes the trailing rho column
    data = pre["cost"][np.arange(ms), labels].sum(axis=1)
    if mb:
        covered = (labels[:, :, None] == np.arange(mb)).any(axis=1).sum(axis=1)
    else:
        covered = np.zeros(pop, dtype=np.int64)
    coverage = p.gamma * (mb - covered)
    motion = np.zeros(pop)
    if p.delta != 0.0 and mb:
        for idx in pre["groups"]:
            sub = labels[:, idx]
            mask = sub >= 0
            counts = mask.sum(axis=1)
            vecs = pre["disp"][idx, np.clip(sub, 0, mb - 1)]  # (P, k, 3); masked rows ignored
            vecs = vecs * mask[:, :, None]
            safe = np.maximum(counts, 1)
            mean = vecs.sum(axis=1) / safe[:, None]
            dev = ((vecs - mean[:, None, :]) ** 2).sum(axis=2) * mask
            motion += p.delta * np.where(counts > 0, dev.sum(axis=1) / safe, 0.0)
    return data + coverage + motion


def energy_of(problem: AssignmentProblem, labels) -> float:
    """Energy of one label vector; entries must lie in [-1, num_blobs)."""
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if len(labels) != problem.num_segments:
        raise ValueError(f"label vector length {len(labels)} != {problem.num_segments} segments")
    if problem.num_segments and (labels.min() < NONE_LABEL or labels.max() >= problem.num_blobs):
        raise ValueError("invalid label index")
    return float(_energy_batch(problem, labels[None, :])[0])


def greedy_labels(problem: AssignmentProblem) -> np.ndarray:
    """Per-segment argmin of the data term (NONE when rho is cheapest)."""
    pre = _precompute(problem)
    if problem.num_segments == 0:
        return np.empty(0, dtype=np.int64)
    best = np.argmin(pre["cost"], axis=1)
    best[best == problem.num_blobs] = NONE_LABEL
    return best.astype(np.int64)


def solve_exhaustive(problem: AssignmentProblem) -> Assignment:
    """Exact minimum by enumeration; ties go to the lexicographically smallest vector."""
    ms, mb = problem.num_segments, problem.num_blobs
    if ms == 0:
        return Assignment(labels=np.empty(0, dtype=np.int64), energy=float(problem.params.gamma * mb))
    total = (mb + 1) ** ms
    if total > _MAX_EXHAUSTIVE:
        raise ValueError(f"instance too large for exhaustive search: {(mb + 1)}^{ms} labelings")
    alphabet = np.arange(-1, mb, dtype=np.int64)  # NONE sorts first
    best_e = np.inf
    best_v: np.ndarray | None = None
    chunk = 8192
    buf = np.empty((chunk, ms), dtype=np.int64)
    count = 0
    import itertools

    for combo in itertools.product(alphabet, repeat=ms):
        buf[count] = combo
        count += 1
        if count == chunk:
            e = _energy_batch(problem, buf)
            i = int(np.argmin(e))
            if e[i] < best_e:
                best_e = float(e[i])
                best_v = buf[i].copy()
            count = 0
    if count:
        e = _energy_batch(problem, buf[:count])
        i = int(np.argmin(e))
        if e[i] < best_e:
            best_e = float(e[i])
            best_v = buf[i].copy()
    assert best_v is not None
    return Assignment(labels=best_v, energy=best_e)


def _canonical_blob_order(problem: AssignmentProblem) -> list[int]:
    """Content-derived blob order so the search is invariant to input indexing."""

    def key(b: int):
        f = problem.blobs[b]
        rows = np.concatenate([f.sv_centroids, f.sv_colors_lab], axis=1)
        return tuple(sorted(tuple(r) for r in rows))

    return sorted(range(problem.num_blobs), key=lambda b: (key(b), b))


def _ga_core(problem: AssignmentProblem, config: GAConfig, trace: list | None) -> np.ndarray:
    ms, mb = problem.num_segments, problem.num_blobs
    rng = np.random.Generator(np.random.Philox(key=np.uint64(config.rng_seed)))
    pop_size = config.population
    mut = config.mutation_rate if config.mutation_rate is not None else 1.0 / ms

    pop = np.empty((pop_size, ms), dtype=np.int64)
    pop[0] = greedy_labels(problem)
    if pop_size > 1:
        pop[1:] = rng.integers(NONE_LABEL, mb, size=(pop_size - 1, ms), endpoint=False)

    best_e = np.inf
    best_v = pop[0].copy()
    stagnation = 0
    for gen in range(config.generations):
        energies = _energy_batch(problem, pop)
        i = int(np.argmin(energies))
        if energies[i] < best_e:
            best_e = float(energies[i])
            best_v = pop[i].copy()
            stagnation = 0
        else:
            stagnation += 1
        if trace is not None:
            trace.append((gen, best_e, float(energies.mean())))
        if stagnation >= config.stagnation_stop or gen == config.generations - 1:
            break

        elite = np.argsort(energies, kind="stable")[: config.elitism]
        nxt = np.empty_like(pop)
        nxt[: config.elitism] = pop[elite]

        def tournament() -> int:
            picks = rng.integers(0, pop_size, size=config.tournament_size)
            return int(picks[int(np.argmin(energies[picks]))])

        for c in range(config.elitism, pop_size):
            p1 = pop[tournament()]
            p2 = pop[tournament()]
            if rng.random() < config.crossover_rate:
                mask = rng.random(ms) < 0.5
                child = np.where(mask, p1, p2)
            else:
                child = p1.copy()
            flips = rng.random(ms) < mut
            n_flip = int(flips.sum())
            if n_flip:
                child = child.copy()
                child[flips] = rng.integers(NONE_LABEL, mb, size=n_flip, endpoint=False)
            nxt[c] = child
        pop = nxt
    return best_v


def solve_ga(problem: AssignmentProblem, config: GAConfig, trace: list | None = None) -> Assignment:
    """Genetic search over label vectors; deterministic for a fixed rng_seed."""
    ms, mb = problem.num_segments, problem.num_blobs
    if ms == 0:
        return Assignment(labels=np.empty(0, dtype=np.int64), energy=float(problem.params.gamma * mb))
    order = _canonical_blob_order(problem)
    canon = AssignmentProblem(
        segments=problem.segments,
        blobs=[problem.blobs[b] for b in order],
        params=problem.params,
    )
    labels_canon = _ga_core(canon, config, trace)
    labels = np.asarray([order[v] if v >= 0 else NONE_LABEL for v in labels_canon], dtype=np.int64)
    return Assignment(labels=labels, energy=energy_of(problem, labels))
