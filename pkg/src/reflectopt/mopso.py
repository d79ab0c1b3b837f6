"""Extended multi-objective particle swarm optimizer for reflector placement.

Follows the OMOPSO pattern (Pareto archive, crowding-based leaders, per-update
random inertia/acceleration) extended with a permutation-invariant velocity
update, physically inspired constraint repair after every position update,
and dimension mutations that add or remove reflectors, so placements of
different sizes compete in one swarm.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from .assign import align_leader
from .geom import Grid, RoomModel, build_grid
from .objectives import EvalConfig, evaluate
from .placement import Placement, placement_masks
from .repair import RepairConfig, random_feasible, repair, sample_in_margin

Objectives = tuple[float, float]


def dominates(a: Objectives, b: Objectives) -> bool:
    """Pareto dominance: no worse in both objectives, strictly better in one."""
    return a[0] <= b[0] and a[1] <= b[1] and (a[0] < b[0] or a[1] < b[1])


@dataclass
class SwarmParticle:
    placement: Placement
    velocity: np.ndarray  # (M, 2) m/iteration
    objectives: Objectives
    pbest: Placement
    pbest_objectives: Objectives

    def check_dimensions(self):
        if len(self.velocity) != self.placement.m:
            raise AssertionError("velocity length diverged from placement size")


@dataclass(frozen=True)
class ArchiveEntry:
    placement: Placement
    f1: float
    f2: float
    crowding: float = math.inf

    @property
    def objectives(self) -> Objectives:
        return (self.f1, self.f2)


class ParetoArchive:
    """Bounded set of mutually non-dominated placements with crowding data."""

    def __init__(self, capacity: int = 100):
        if capacity < 2:
            raise ValueError("archive capacity must be at least 2")
        self.capacity = capacity
        self.entries: list[ArchiveEntry] = []
        self._crowding_dirty = True

    def __len__(self) -> int:
        return len(self.entries)

    def update(self, placement: Placement, f1: float, f2: float) -> bool:
        """Insert a candidate; evict entries it dominates. False if rejected."""
        cand = (f1, f2)
        for e in self.entries:
            if dominates(e.objectives, cand):
                return False
        self.entries = [e for e in self.entries if not dominates(cand, e.objectives)]
        self.entries.append(ArchiveEntry(placement=placement, f1=f1, f2=f2))
        self._crowding_dirty = True
        if len(self.entries) > self.capacity:
            self._truncate()
        return True

    def refresh_crowding(self):
        if not self._crowding_dirty:
            return
        crowd = _crowding_distances([e.objectives for e in self.entries])
        self.entries = [replace(e, crowding=c) for e, c in zip(self.entries, crowd)]
        self._crowding_dirty = False

    def _truncate(self):
        while len(self.entries) > self.capacity:
            self._crowding_dirty = True
            self.refresh_crowding()
            objs = np.array([[e.f1, e.f2] for e in self.entries])
            protected = {int(np.argmin(objs[:, 0])), int(np.argmin(objs[:, 1]))}
            order = [i for i in range(len(self.entries)) if i not in protected]
            drop = min(order, key=lambda i: (self.entries[i].crowding, i))
            del self.entries[drop]
        self._crowding_dirty = True

    def best(self, objective: int) -> ArchiveEntry:
        return min(self.entries, key=lambda e: (e.objectives[objective], e.objectives[1 - objective]))

    def select_leader(self, rng: np.random.Generator) -> Placement:
        """Binary tournament on crowding distance (ties broken randomly)."""
        if not self.entries:
            raise ValueError("cannot select a leader from an empty archive")
        self.refresh_crowding()
        i = int(rng.integers(len(self.entries)))
        j = int(rng.integers(len(self.entries)))
        a, b = self.entries[i], self.entries[j]
        if a.crowding > b.crowding:
            return a.placement
        if b.crowding > a.crowding:
            return b.placement
        return a.placement if rng.random() < 0.5 else b.placement


def _crowding_distances(objectives: list[Objectives]) -> list[float]:
    n = len(objectives)
    if n == 0:
        return []
    if n <= 2:
        return [math.inf] * n
    objs = np.asarray(objectives, dtype=float)
    crowd = np.zeros(n)
    for k in range(objs.shape[1]):
        order = np.argsort(objs[:, k], kind="stable")
        vals = objs[order, k]
        span = vals[-1] - vals[0]
        crowd[order[0]] = math.inf
        crowd[order[-1]] = math.inf
        if span > 0:
            gaps = (vals[2:] - vals[:-2]) / span
            for pos in range(1, n - 1):
                if math.isfinite(crowd[order[pos]]):
                    crowd[order[pos]] += gaps[pos - 1]
    return crowd.tolist()


@dataclass(frozen=True)
class PsoConfig:
    """All optimizer knobs, including the shared constraint parameters."""

    swarm_size: int = 500
    iterations: int = 500
    w_range: tuple[float, float] = (0.1, 0.5)
    c1_range: tuple[float, float] = (1.5, 2.0)
    c2_range: tuple[float, float] = (1.5, 2.0)
    p_up: float = 0.05
    p_down: float = 0.05
    m_max: int = 32
    m_init_range: tuple[int, int] = (27, 32)
    n_types: int = 2
    n: int = 4  # fingerprint size
    k_min: int = 4
    d_min: float = 0.5
    archive_capacity: int = 100
    v_max: float | None = None  # None: 2 * room bbox diagonal / iterations
    seed: int = 0
    snapshot_every: int = 10
    sigma_r: float | None = None
    use_sqrt_gdop: bool = False
    repair_gamma: float = 0.2
    repair_step_cap: float = 1.0
    repair_max_iter: int = 200
    restarts: int = 10

    def __post_init__(self):
        for lo, hi in (self.w_range, self.c1_range, self.c2_range):
            if hi < lo:
                raise ValueError("parameter ranges must be non-empty")
        if not (0 <= self.p_up <= 1 and 0 <= self.p_down <= 1 and self.p_up + self.p_down <= 1):
            raise ValueError("mutation probabilities must lie in [0, 1] and sum to <= 1")
        if self.m_init_range[0] < 1 or self.m_init_range[1] > self.m_max:
            raise ValueError("m_init_range must lie within [1, m_max]")
        if self.n_types not in (1, 2):
            raise ValueError("n_types must be 1 or 2")

    def eval_config(self) -> EvalConfig:
        return EvalConfig(
            n=self.n, k_min=self.k_min, d_min=self.d_min, m_max=self.m_max,
            sigma_r=self.sigma_r, use_sqrt_gdop=self.use_sqrt_gdop,
        )

    def repair_config(self) -> RepairConfig:
        return RepairConfig(
            k_min=self.k_min, d_min=self.d_min, gamma=self.repair_gamma,
            step_cap=self.repair_step_cap, max_iter=self.repair_max_iter,
            restarts=self.restarts,
        )

    def resolve_v_max(self, room: RoomModel) -> float:
        if self.v_max is not None:
            return self.v_max
        xmin, ymin, xmax, ymax = room.boundary.bounds
        diag = math.hypot(xmax - xmin, ymax - ymin)
        return 2.0 * diag / max(1, self.iterations)


def velocity_update(
    particle: SwarmParticle,
    leader: Placement,
    config: PsoConfig,
    rng: np.random.Generator,
    v_max: float,
) -> np.ndarray:
    """Inertia + cognitive + social velocity with aligned leader coordinates.

    W, C1, C2 and the scalar random factors r1, r2 are drawn fresh for every
    update; each velocity coordinate is clamped to +-v_max.
    """
    w = rng.uniform(*config.w_range)
    c1 = rng.uniform(*config.c1_range)
    c2 = rng.uniform(*config.c2_range)
    r1 = rng.random()
    r2 = rng.random()
    constrained = config.n_types == 2
    toward_pbest = align_leader(particle.placement, particle.pbest, constrained) - particle.placement.xy
    toward_leader = align_leader(particle.placement, leader, constrained) - particle.placement.xy
    v = w * particle.velocity + c1 * r1 * toward_pbest + c2 * r2 * toward_leader
    return np.clip(v, -v_max, v_max)


def position_update(
    particle: SwarmParticle,
    room: RoomModel,
    grid: Grid,
    repair_cfg: RepairConfig,
    rng: np.random.Generator,
    m_max: int,
) -> Placement:
    """Add the velocity to the placement coordinates, then repair."""
    moved = particle.placement.with_xy(particle.placement.xy + particle.velocity)
    repaired, _, _ = repair(moved, room, grid, repair_cfg, rng, m_max=m_max)
    return repaired


def upmutate(
    particle: SwarmParticle,
    room: RoomModel,
    config: PsoConfig,
    rng: np.random.Generator,
    v_max: float,
) -> SwarmParticle:
    """Append a reflector at a random margin-respecting position.

    The new reflector's type keeps the equal-split rule; its velocity is a
    fresh random vector. A particle already at m_max is returned unchanged.
    """
    pl = particle.placement
    if pl.m >= config.m_max:
        return particle
    pos = sample_in_margin(room, 1, rng)[0]
    if config.n_types == 1:
        new_type = 0
    else:
        c0 = int((pl.types == 0).sum())
        c1 = int((pl.types == 1).sum())
        new_type = 0 if c0 <= c1 else 1
    new_v = rng.uniform(-v_max, v_max, size=2)
    placement = Placement(
        xy=np.vstack([pl.xy, pos[None, :]]),
        types=np.append(pl.types, new_type),
        z=pl.z,
    )
    velocity = np.vstack([particle.velocity, new_v[None, :]])
    return SwarmParticle(
        placement=placement,
        velocity=velocity,
        objectives=particle.objectives,
        pbest=particle.pbest,
        pbest_objectives=particle.pbest_objectives,
    )


def downmutate(
    particle: SwarmParticle,
    room: RoomModel,
    grid: Grid,
    config: PsoConfig,
    rng: np.random.Generator,
) -> SwarmParticle:
    """Remove the most redundant reflector, reverting if repair then fails.

    The reflector removed is the one of the over-represented type closest to
    the centroid of the largest grid region with maximal visible-reflector
    count; removing there avoids creating coverage holes.
    """
    pl = particle.placement
    if pl.m <= config.k_min:
        return particle
    masks = placement_masks(pl, grid, room, strict=False)
    counts = masks.sum(axis=0)
    attain = counts == counts.max()
    raster = grid.rasterize(attain.astype(np.int8), fill=0)
    labels, n_regions = ndimage.label(raster)
    if n_regions == 0:
        return particle
    sizes = ndimage.sum_labels(np.ones_like(labels), labels, index=range(1, n_regions + 1))
    largest = 1 + int(np.argmax(sizes))
    element_labels = labels[grid.ij[:, 1], grid.ij[:, 0]]
    centroid = grid.xy[element_labels == largest].mean(axis=0)

    if config.n_types == 1:
        removal_type = 0
    else:
        c0 = int((pl.types == 0).sum())
        c1 = int((pl.types == 1).sum())
        removal_type = 0 if c0 >= c1 else 1
    candidates = np.flatnonzero(pl.types == removal_type)
    if candidates.size == 0:
        return particle
    d = np.linalg.norm(pl.xy[candidates] - centroid, axis=1)
    remove = int(candidates[np.argmin(d)])

    keep = np.ones(pl.m, dtype=bool)
    keep[remove] = False
    reduced = Placement(xy=pl.xy[keep], types=pl.types[keep], z=pl.z)
    repaired, feasible, _ = repair(reduced, room, grid, config.repair_config(), rng,
                                   m_max=config.m_max)
    if not feasible:
        return particle
    return SwarmParticle(
        placement=repaired,
        velocity=particle.velocity[keep],
        objectives=particle.objectives,
        pbest=particle.pbest,
        pbest_objectives=particle.pbest_objectives,
    )


@dataclass(frozen=True)
class IterationLog:
    iteration: int
    best_f1: float
    best_f2: float
    archive_size: int
    evaluations: int


def run(
    room: RoomModel,
    config: PsoConfig,
    threads: int = 1,
    snapshot_cb=None,
    initial_placements: list[Placement] | None = None,
) -> tuple[ParetoArchive, list[IterationLog]]:
    """Run the optimizer and return the Pareto archive plus per-iteration log.

    Leaders, velocities, repairs and mutations advance serially in particle
    index order; objective evaluations (pure functions) may run on a thread
    pool without affecting results, so a fixed seed gives identical output
    for any thread count. ``initial_placements`` overrides the random
    initialization (used by permutation-invariance checks).
    """
    rng = np.random.default_rng(config.seed)
    grid = build_grid(room)
    eval_cfg = config.eval_config()
    repair_cfg = config.repair_config()
    v_max = config.resolve_v_max(room)

    if initial_placements is None:
        placements = []
        redraws = 3 * (config.m_init_range[1] - config.m_init_range[0] + 1)
        for _ in range(config.swarm_size):
            last_error = None
            for _ in range(redraws):
                m = int(rng.integers(config.m_init_range[0], config.m_init_range[1] + 1))
                try:
                    placements.append(random_feasible(room, m, config.n_types, rng, grid, repair_cfg))
                    break
                except RuntimeError as exc:
                    last_error = exc  # size infeasible for this room; redraw m
            else:
                raise RuntimeError(f"swarm initialization failed: {last_error}")
    else:
        placements = list(initial_placements)

    objectives = _evaluate_all(placements, room, grid, eval_cfg, threads)
    particles = [
        SwarmParticle(
            placement=pl,
            velocity=np.zeros((pl.m, 2)),
            objectives=obj,
            pbest=pl,
            pbest_objectives=obj,
        )
        for pl, obj in zip(placements, objectives)
    ]
    archive = ParetoArchive(capacity=config.archive_capacity)
    for p in particles:
        archive.update(p.placement, *p.objectives)

    evaluations = len(particles)
    log = [_log_entry(0, archive, evaluations)]

    for iteration in range(1, config.iterations + 1):
        # Phase A (serial): leaders, velocities, positions, mutations.
        for p in particles:
            leader = archive.select_leader(rng)
            p.velocity = velocity_update(p, leader, config, rng, v_max)
            p.placement = position_update(p, room, grid, repair_cfg, rng, config.m_max)
            u = rng.random()
            if u < config.p_up:
                mutated = upmutate(p, room, config, rng, v_max)
            elif u < config.p_up + config.p_down:
                mutated = downmutate(p, room, grid, config, rng)
            else:
                mutated = p
            p.placement = mutated.placement
            p.velocity = mutated.velocity
            p.check_dimensions()

        # Phase B (parallelizable): pure objective evaluations.
        objs = _evaluate_all([p.placement for p in particles], room, grid, eval_cfg, threads)
        evaluations += len(particles)

        # Phase C (serial): pbest and archive updates in particle order.
        for p, obj in zip(particles, objs):
            p.objectives = obj
            if dominates(obj, p.pbest_objectives):
                p.pbest, p.pbest_objectives = p.placement, obj
            elif not dominates(p.pbest_objectives, obj):
                if rng.random() < 0.5:
                    p.pbest, p.pbest_objectives = p.placement, obj
            archive.update(p.placement, *obj)

        log.append(_log_entry(iteration, archive, evaluations))
        if snapshot_cb is not None and config.snapshot_every > 0 and iteration % config.snapshot_every == 0:
            snapshot_cb(iteration, archive)

    archive.refresh_crowding()
    return archive, log


def _log_entry(iteration: int, archive: ParetoArchive, evaluations: int) -> IterationLog:
    return IterationLog(
        iteration=iteration,
        best_f1=min(e.f1 for e in archive.entries),
        best_f2=min(e.f2 for e in archive.entries),
        archive_size=len(archive),
        evaluations=evaluations,
    )


def _evaluate_all(
    placements: list[Placement],
    room: RoomModel,
    grid: Grid,
    eval_cfg: EvalConfig,
    threads: int,
) -> list[Objectives]:
    def one(pl: Placement) -> Objectives:
        masks = placement_masks(pl, grid, room, strict=False)
        return evaluate(pl, room, grid, masks, eval_cfg)

    if threads <= 1 or len(placements) <= 1:
        return [one(pl) for pl in placements]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, placements))
