"""Physically inspired constraint repair for reflector placements.

Reflectors closer than the minimum spacing repel each other like magnets of
the same polarity; under-covered grid regions attract reflectors like
centers of gravitation. Together with projection onto the wall-margin
contour these steps turn infeasible placements feasible within a few
iterations, and they double as the particle initializer.

Two coverage-attraction modes exist. ``gravitation_step`` pulls every
reflector toward its nearest violation centroid; experiments show this mass
pull thrashes on tight configurations (settled regions get dragged away),
so the repair loop defaults to a selective variant: each violating region
recruits exactly its missing number of reflectors, preferring redundant
ones whose departure leaves no element under-covered, and a stalled search
relocates the most redundant reflector straight onto the biggest hole.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .geom import Grid, RoomModel, build_grid, project_into_margin
from .placement import Placement, check_constraints, placement_masks, type_assignment

# Relative overshoot past d_min when separating a violating pair, so the
# pair does not land exactly on the constraint boundary and oscillate.
_PUSH_DELTA = 0.05


@dataclass(frozen=True)
class RepairConfig:
    k_min: int = 4
    d_min: float = 0.5
    gamma: float = 0.7  # attraction step factor (fraction of distance)
    step_cap: float = 2.0  # max attraction move per iteration (m)
    max_iter: int = 200
    restarts: int = 10  # random_feasible re-initializations
    pull_mode: str = "deficit"  # "deficit" (selective) or "all" (mass pull)
    stall_limit: int = 12  # iterations without progress before a rescue jump

    def __post_init__(self):
        if self.pull_mode not in ("deficit", "all"):
            raise ValueError("pull_mode must be 'deficit' or 'all'")


def magnet_step(pl: Placement, d_min: float, rng: np.random.Generator | None = None) -> Placement:
    """Push every pair closer than d_min apart, both ends symmetrically.

    Displacements of all violating pairs are accumulated first and applied
    simultaneously, so the result does not depend on pair order. Coincident
    reflectors separate along a random direction (seeded rng required then).
    """
    xy = pl.xy
    m = pl.m
    if m < 2:
        return pl
    diff = xy[:, None, :] - xy[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    moves = np.zeros_like(xy)
    target = d_min * (1.0 + _PUSH_DELTA)
    moved = False
    for i in range(m):
        for j in range(i + 1, m):
            d = dist[i, j]
            if d >= d_min:
                continue
            moved = True
            if d < 1e-12:
                if rng is None:
                    raise ValueError("coincident reflectors need an rng to separate")
                angle = rng.uniform(0.0, 2.0 * np.pi)
                direction = np.array([np.cos(angle), np.sin(angle)])
            else:
                direction = (xy[i] - xy[j]) / d
            push = 0.5 * (target - d)
            moves[i] += push * direction
            moves[j] -= push * direction
    if not moved:
        return pl
    return pl.with_xy(xy + moves)


def _coverage_regions(grid: Grid, masks: np.ndarray, k_min: int):
    """4-connected under-covered regions: (counts, [(member elements, attractor)]).

    The attractor is the region element closest to the region centroid; it
    always lies inside the room, unlike the raw centroid of a concave region.
    """
    counts = masks.sum(axis=0)
    violated = counts < k_min
    if not violated.any():
        return counts, []
    raster = grid.rasterize(violated.astype(np.int8), fill=0)
    labels, n_regions = ndimage.label(raster)  # default structure = 4-connectivity
    element_labels = labels[grid.ij[:, 1], grid.ij[:, 0]]
    regions = []
    for region in range(1, n_regions + 1):
        members = np.flatnonzero(element_labels == region)
        centroid = grid.xy[members].mean(axis=0)
        att = members[np.argmin(np.linalg.norm(grid.xy[members] - centroid, axis=1))]
        regions.append((members, int(att)))
    return counts, regions


def coverage_violation_centroids(grid: Grid, masks: np.ndarray, k_min: int) -> np.ndarray:
    """Centroids of the 4-connected grid regions seeing < k_min reflectors.

    Returns an (n_regions, 2) array, empty when coverage is satisfied.
    """
    _, regions = _coverage_regions(grid, masks, k_min)
    if not regions:
        return np.empty((0, 2))
    return np.asarray([grid.xy[members].mean(axis=0) for members, _ in regions])


def gravitation_step(pl: Placement, centroids: np.ndarray, gamma: float = 0.2,
                     step_cap: float = 1.0) -> Placement:
    """Pull every reflector toward its nearest gravitation center.

    The move is gamma times the distance to that center, capped at step_cap.
    """
    centroids = np.asarray(centroids, float).reshape(-1, 2)
    if len(centroids) == 0:
        raise ValueError("gravitation_step needs at least one centroid")
    diff = centroids[None, :, :] - pl.xy[:, None, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    nearest = np.argmin(dist, axis=1)
    rows = np.arange(pl.m)
    d = dist[rows, nearest]
    step = np.minimum(gamma * d, step_cap)
    with np.errstate(invalid="ignore", divide="ignore"):
        direction = diff[rows, nearest] / d[:, None]
    direction[d < 1e-12] = 0.0
    return pl.with_xy(pl.xy + step[:, None] * direction)


def _coverage_slack(pl: Placement, masks: np.ndarray, counts: np.ndarray, k_min: int) -> np.ndarray:
    """Per reflector: spare coverage of its worst-covered element (inf if none)."""
    slack = np.full(pl.m, np.inf)
    for i in range(pl.m):
        cov = masks[i]
        if cov.any():
            slack[i] = counts[cov].min() - k_min
    return slack


def deficit_gravitation_step(
    pl: Placement,
    grid: Grid,
    masks: np.ndarray,
    k_min: int,
    gamma: float = 0.7,
    step_cap: float = 2.0,
) -> Placement:
    """Selective gravitation: each hole recruits its missing reflectors.

    Every under-covered region pulls exactly (k_min - covered) reflectors
    toward its attractor element, preferring redundant reflectors (slack
    >= 1 on every element they serve), nearest first. Each reflector obeys
    the gravitation law (gamma times distance, capped) and serves at most
    one region per step.
    """
    counts, regions = _coverage_regions(grid, masks, k_min)
    if not regions:
        return pl
    slack = _coverage_slack(pl, masks, counts, k_min)
    xy = pl.xy.copy()
    claimed = np.zeros(pl.m, dtype=bool)
    for _, att in regions:
        c_pt = grid.xy[att]
        covering = masks[:, att]
        deficit = int(k_min - covering.sum())
        cand = np.flatnonzero(~covering & ~claimed)
        if cand.size == 0:
            continue
        d = np.linalg.norm(pl.xy[cand] - c_pt, axis=1)
        redundant = slack[cand] >= 1
        order = np.lexsort((d, ~redundant))  # redundant first, then nearest
        for i in cand[order][:deficit]:
            di = np.linalg.norm(pl.xy[i] - c_pt)
            if di < 1e-12:
                continue
            step = min(gamma * di, step_cap)
            xy[i] += step * (c_pt - pl.xy[i]) / di
            claimed[i] = True
    return pl.with_xy(xy)


def _rescue_jump(pl: Placement, grid: Grid, masks: np.ndarray, k_min: int) -> Placement:
    """Relocate the most redundant reflector onto the biggest hole."""
    counts, regions = _coverage_regions(grid, masks, k_min)
    if not regions:
        return pl
    slack = _coverage_slack(pl, masks, counts, k_min)
    members, att = max(regions, key=lambda r: len(r[0]))
    cand = np.flatnonzero(~masks[:, att])
    if cand.size == 0:
        return pl
    mover = int(cand[np.argmax(slack[cand])])
    xy = pl.xy.copy()
    xy[mover] = grid.xy[att]
    return pl.with_xy(xy)


def repair(
    pl: Placement,
    room: RoomModel,
    grid: Grid,
    config: RepairConfig = RepairConfig(),
    rng: np.random.Generator | None = None,
    m_max: int | None = None,
) -> tuple[Placement, bool, int]:
    """Iterate coverage attraction, magnet and margin projection until feasible.

    Returns (placement, feasible, iterations). An already feasible placement
    is returned unchanged with 0 iterations; otherwise the loop runs until
    the constraints hold or config.max_iter is exhausted.
    """
    m_max = pl.m if m_max is None else m_max
    current = pl
    best_violations = np.inf
    stall = 0
    for iteration in range(config.max_iter):
        masks = placement_masks(current, grid, room, strict=False)
        report = check_constraints(
            current, room, grid, masks, m_max=m_max, k_min=config.k_min, d_min=config.d_min
        )
        if report.feasible:
            return current, True, iteration
        n_violations = (
            len(report.coverage_violations)
            + len(report.spacing_violations)
            + len(report.margin_violations)
        )
        if n_violations < best_violations:
            best_violations = n_violations
            stall = 0
        else:
            stall += 1
        if not report.coverage_ok:
            if config.pull_mode == "deficit":
                if stall >= config.stall_limit:
                    current = _rescue_jump(current, grid, masks, config.k_min)
                    stall = 0
                else:
                    current = deficit_gravitation_step(
                        current, grid, masks, config.k_min, config.gamma, config.step_cap
                    )
            else:
                centroids = coverage_violation_centroids(grid, masks, config.k_min)
                current = gravitation_step(current, centroids, config.gamma, config.step_cap)
        if not report.spacing_ok:
            current = magnet_step(current, config.d_min, rng)
        projected = np.stack([project_into_margin(p, room) for p in current.xy])
        current = current.with_xy(projected)
    masks = placement_masks(current, grid, room, strict=False)
    report = check_constraints(
        current, room, grid, masks, m_max=m_max, k_min=config.k_min, d_min=config.d_min
    )
    return current, report.feasible, config.max_iter


def sample_in_margin(room: RoomModel, n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform points over the wall-margin interior of the room (rejection)."""
    xmin, ymin, xmax, ymax = room.boundary.bounds
    out = np.empty((n, 2))
    filled = 0
    for _ in range(10_000):
        batch = max(4 * (n - filled), 16)
        cand = rng.uniform([xmin, ymin], [xmax, ymax], size=(batch, 2))
        inside = room.boundary.contains_points(cand)
        deep = room.boundary.edge_distances(cand) >= room.wall_margin
        cand = cand[inside & deep]
        take = min(len(cand), n - filled)
        out[filled : filled + take] = cand[:take]
        filled += take
        if filled == n:
            return out
    raise ValueError("margin region too small to sample reflector positions")


def random_feasible(
    room: RoomModel,
    m: int,
    n_types: int,
    rng: np.random.Generator,
    grid: Grid | None = None,
    config: RepairConfig = RepairConfig(),
) -> Placement:
    """Random placement repaired into feasibility, with restarts.

    Raises RuntimeError when no feasible placement is found after
    config.restarts attempts (e.g. m too small for the coverage constraint).
    """
    if grid is None:
        grid = build_grid(room)
    types = type_assignment(m, n_types)
    for _ in range(config.restarts):
        xy = sample_in_margin(room, m, rng)
        pl = Placement(xy=xy, types=types, z=room.z_l)
        repaired, feasible, _ = repair(pl, room, grid, config, rng)
        if feasible:
            return repaired
    raise RuntimeError(f"no feasible placement with {m} reflectors after {config.restarts} restarts")
