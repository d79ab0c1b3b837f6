"""File formats: config files, placements, fronts, maps, logs, reports.

All formats are plain text chosen for diffability. Floats are written with
``repr`` (shortest round-trip form), so write -> read -> write is
byte-identical and seeded runs produce byte-identical files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .amcl import AmclConfig
from .geom import Grid, Polygon, RoomModel
from .harness import ExperimentReport, NoiseConfig, PathConfig
from .mopso import IterationLog, ParetoArchive, PsoConfig
from .objectives import GLOBAL, LOCAL, UNIQUE
from .placement import Placement


class ConfigError(ValueError):
    """Malformed or incomplete configuration input."""


def parse_sections(text: str) -> dict[str, dict]:
    """Parse the key-value / tabular section format.

    Sections start with ``[name]``; lines are either ``key = value`` pairs
    or whitespace-separated numeric rows (collected under ``"rows"``).
    ``#`` starts a comment.
    """
    sections: dict[str, dict] = {}
    current: dict | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip().lower()
            current = sections.setdefault(name, {"rows": []})
            continue
        if current is None:
            raise ConfigError(f"line {lineno}: content before any [section] header")
        if "=" in line:
            key, _, value = line.partition("=")
            current[key.strip().lower()] = value.strip()
        else:
            try:
                current["rows"].append([float(x) for x in line.split()])
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: expected numbers, got {line!r}") from exc
    return sections


def load_config(path) -> dict[str, dict]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_sections(text)


def _get(section: dict, key: str, cast, default=None, required=False):
    if key not in section:
        if required:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return cast(section[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key!r}: {section[key]!r}") from exc


def room_from_config(sections: dict[str, dict]) -> RoomModel:
    """Build the room from the [room] keys and [vertices] rows."""
    if "room" not in sections:
        raise ConfigError("config needs a [room] section")
    if "vertices" not in sections or len(sections["vertices"]["rows"]) < 3:
        raise ConfigError("config needs a [vertices] section with at least 3 rows")
    room_sec = sections["room"]
    verts = np.array(sections["vertices"]["rows"], dtype=float)
    if verts.shape[1] != 2:
        raise ConfigError("[vertices] rows must hold x y pairs")
    area2 = np.sum(verts[:, 0] * np.roll(verts[:, 1], -1) - np.roll(verts[:, 0], -1) * verts[:, 1])
    if area2 < 0:  # accept clockwise input, normalize to counterclockwise
        verts = verts[::-1]
    try:
        boundary = Polygon(verts)
        return RoomModel(
            boundary=boundary,
            grid_size=_get(room_sec, "grid_size", float, required=True),
            z_r=_get(room_sec, "z_r", float, 0.5),
            z_l=_get(room_sec, "z_l", float, 3.0),
            r_res=_get(room_sec, "r_res", float, 0.075),
            cone_half_angle=math.radians(_get(room_sec, "cone_half_angle_deg", float, 45.0)),
            wall_margin=_get(room_sec, "wall_margin", float, 0.5),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def pso_config_from_config(sections: dict[str, dict], **overrides) -> PsoConfig:
    sec = sections.get("pso", {"rows": []})
    kwargs = dict(
        swarm_size=_get(sec, "swarm_size", int, 60),
        iterations=_get(sec, "iterations", int, 60),
        m_max=_get(sec, "m_max", int, 32),
        m_init_range=(
            _get(sec, "m_init_min", int, 27),
            _get(sec, "m_init_max", int, 32),
        ),
        n_types=_get(sec, "n_types", int, 2),
        n=_get(sec, "fingerprint_size", int, 4),
        k_min=_get(sec, "k_min", int, 4),
        d_min=_get(sec, "d_min", float, 0.5),
        p_up=_get(sec, "p_up", float, 0.05),
        p_down=_get(sec, "p_down", float, 0.05),
        archive_capacity=_get(sec, "archive_capacity", int, 100),
        v_max=_get(sec, "v_max", float, None),
        seed=_get(sec, "seed", int, 0),
        snapshot_every=_get(sec, "snapshot_every", int, 10),
    )
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return PsoConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def sim_configs_from_config(
    sections: dict[str, dict], room: RoomModel, seed: int | None = None
) -> tuple[PathConfig, NoiseConfig, AmclConfig, list[int], int]:
    """(path, noise, amcl, seeds, burn_in) from the [sim] and [path] sections."""
    if "path" not in sections or len(sections["path"]["rows"]) < 2:
        raise ConfigError("config needs a [path] section with at least 2 waypoints")
    sec = sections.get("sim", {"rows": []})
    waypoints = tuple((float(x), float(y)) for x, y in sections["path"]["rows"])
    path_cfg = PathConfig(waypoints=waypoints, step=_get(sec, "step", float, 0.2))
    noise_cfg = NoiseConfig(
        sigma_meas=_get(sec, "sigma_meas", float, None),
        sigma_d=_get(sec, "sigma_d", float, 0.02),
        sigma_theta=math.radians(_get(sec, "sigma_theta_deg", float, 5.0)),
    )
    amcl_cfg = AmclConfig(
        n_particles=_get(sec, "n_particles", int, 2000),
        n=_get(sec, "fingerprint_size", int, 4),
        sigma_r=_get(sec, "sigma_r", float, None),
        sigma_d=noise_cfg.sigma_d,
        sigma_theta=noise_cfg.sigma_theta,
    )
    if seed is not None:
        seeds = [seed + i for i in range(_get(sec, "n_seeds", int, 1))]
    else:
        raw = sec.get("seeds", "0")
        seeds = [int(x) for x in str(raw).split()]
    burn_in = _get(sec, "burn_in", int, 20)
    return path_cfg, noise_cfg, amcl_cfg, seeds, burn_in


def format_placement(pl: Placement, n_types: int) -> str:
    lines = [
        f"m = {pl.m}",
        f"n_types = {n_types}",
        f"z_l = {float(pl.z)!r}",
        "# index x y type",
    ]
    for i in range(pl.m):
        lines.append(f"{i} {float(pl.xy[i, 0])!r} {float(pl.xy[i, 1])!r} {int(pl.types[i])}")
    return "\n".join(lines) + "\n"


def write_placement(path, pl: Placement, n_types: int):
    Path(path).write_text(format_placement(pl, n_types))


def load_placement(path) -> tuple[Placement, int]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read placement file {path}: {exc}") from exc
    header: dict[str, str] = {}
    rows = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            key, _, value = line.partition("=")
            header[key.strip().lower()] = value.strip()
        else:
            parts = line.split()
            if len(parts) != 4:
                raise ConfigError(f"placement row needs 'index x y type': {line!r}")
            rows.append(parts)
    try:
        m = int(header["m"])
        n_types = int(header["n_types"])
        z_l = float(header["z_l"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"placement header incomplete: {exc}") from exc
    if len(rows) != m:
        raise ConfigError(f"placement declares m={m} but has {len(rows)} rows")
    order = sorted(range(m), key=lambda k: int(rows[k][0]))
    xy = np.array([[float(rows[k][1]), float(rows[k][2])] for k in order])
    types = np.array([int(rows[k][3]) for k in order])
    try:
        return Placement(xy=xy, types=types, z=z_l), n_types
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def format_front(archive: ParetoArchive) -> str:
    lines = ["placement_id,m,f1,f2"]
    for i, e in enumerate(archive.entries):
        lines.append(f"{i},{e.placement.m},{_num(e.f1)},{_num(e.f2)}")
    return "\n".join(lines) + "\n"


def _num(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    f = float(x)
    return str(int(f)) if f.is_integer() else repr(f)


def write_front(path, archive: ParetoArchive):
    Path(path).write_text(format_front(archive))


def write_log(path, log: list[IterationLog]):
    lines = ["iteration,best_f1,best_f2,archive_size,evaluations"]
    for rec in log:
        lines.append(
            f"{rec.iteration},{_num(rec.best_f1)},{_num(rec.best_f2)},"
            f"{rec.archive_size},{rec.evaluations}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def write_map_csv(path, grid: Grid, values, header="x,y,value"):
    lines = [header]
    vals = np.asarray(values)
    for i in range(len(grid)):
        lines.append(f"{float(grid.xy[i, 0])!r},{float(grid.xy[i, 1])!r},{_num(vals[i])}")
    Path(path).write_text("\n".join(lines) + "\n")


_AMBIGUITY_GRAY = {UNIQUE: 255, LOCAL: 170, GLOBAL: 85}


def write_ambiguity_pgm(path, grid: Grid, classes: np.ndarray):
    """Unique=255, local=170, global=85, outside the room=0."""
    gray = np.zeros(len(grid), dtype=np.uint8)
    for cls, val in _AMBIGUITY_GRAY.items():
        gray[classes == cls] = val
    _write_pgm(path, grid, gray)


def write_value_pgm(path, grid: Grid, values: np.ndarray):
    """Linear 1..255 scaling of finite values (1=min), background 0."""
    vals = np.asarray(values, dtype=float)
    finite = np.isfinite(vals)
    lo = vals[finite].min()
    hi = vals[finite].max()
    span = hi - lo
    gray = np.zeros(len(grid), dtype=np.uint8)
    if span <= 0:
        gray[finite] = 128
    else:
        gray[finite] = (1 + np.round(254 * (vals[finite] - lo) / span)).astype(np.uint8)
    _write_pgm(path, grid, gray)


def _write_pgm(path, grid: Grid, gray: np.ndarray):
    raster = grid.rasterize(gray, fill=np.uint8(0))
    raster = raster[::-1, :]  # north-up: top row = max y
    ny, nx = raster.shape
    header = f"P5\n{nx} {ny}\n255\n".encode("ascii")
    Path(path).write_bytes(header + raster.tobytes())


def write_trace(path, trace):
    lines = ["step,truth_x,truth_y,est_x,est_y,error"]
    for k, (t, e) in enumerate(zip(trace.truth, trace.estimates)):
        lines.append(f"{k},{t.x!r},{t.y!r},{e.x!r},{e.y!r},{float(trace.errors[k])!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_histogram(path, report: ExperimentReport, bin_width: float = 0.05):
    counts, edges = report.error_histogram(bin_width)
    lines = ["bin_lo,bin_hi,count"]
    for c, lo, hi in zip(counts, edges[:-1], edges[1:]):
        lines.append(f"{float(lo)!r},{float(hi)!r},{int(c)}")
    Path(path).write_text("\n".join(lines) + "\n")


def format_report(report: ExperimentReport, label: str) -> str:
    lines = [
        f"tracking report: {label}",
        f"runs = {len(report.traces)}",
        f"burn_in_steps = {report.burn_in}",
        f"steps_per_run = {len(report.traces[0].estimates)}",
        "",
        "seed rmse_full rmse_after_burn_in",
    ]
    for t in report.traces:
        lines.append(f"{t.seed} {t.rmse_full!r} {t.rmse_after_burn_in!r}")
    lines += [
        "",
        f"median_rmse = {report.median_rmse!r}",
        f"p25_rmse = {report.percentile(25)!r}",
        f"p75_rmse = {report.percentile(75)!r}",
    ]
    return "\n".join(lines) + "\n"
