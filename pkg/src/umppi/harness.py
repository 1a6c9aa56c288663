"""Closed-loop episodes, navigation metrics and paired-seed benchmarks."""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
from scipy.integrate import trapezoid

from .controller import Controller, ControllerConfig, Mode, NoFeasibleRollout, warmup
from .dynamics import ControlBounds, RobotState, step
from .world import (
    ROBOT_RADIUS,
    CostmapParams,
    ObstacleMap,
    build_global_costmap,
    build_local_costmap,
    generate_forest,
    is_collision,
)

SUCCESS, COLLISION, LOCAL_MINIMUM = "success", "collision", "local_minimum"

EPISODE_COLUMNS = ("episode", "scheme", "seed", "outcome", "T_c", "d", "v_av", "t_exec_ms", "J_acc", "zeta_acc")
TRAJ_COLUMNS = ("t", "x", "y", "theta", "v", "omega")


@dataclass(frozen=True)
class WorldConfig:
    """Forest parameters, or a saved obstacle map when ``map_path`` is set.

    ``mode`` is ``"known"`` (whole map rasterized once) or ``"unknown"``
    (robot-centred costmap of the obstacles within sensor range, rebuilt
    every control step).
    """

    width: float = 25.0
    height: float = 25.0
    d_min: float = 3.0
    obstacle_radius: float = 0.15
    keep_clear_radius: float = 2.0
    map_path: str | None = None
    mode: str = "known"
    costmap: CostmapParams = field(default_factory=CostmapParams)

    def __post_init__(self):
        if self.mode not in ("known", "unknown"):
            raise ValueError("world mode must be 'known' or 'unknown'")


@dataclass(frozen=True)
class EpisodeConfig:
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    world: WorldConfig = field(default_factory=WorldConfig)
    start: tuple = (0.0, 0.0, 0.0)
    goal: tuple = (25.0, 25.0, 0.0)
    waypoints: tuple = ()
    goal_tol_pos: float = 0.5
    goal_tol_heading: float = 0.35
    time_limit: float = 70.0
    robot_radius: float = ROBOT_RADIUS
    timing: bool = True

    def __post_init__(self):
        if self.time_limit <= 0:
            raise ValueError("time limit must be positive")
        if self.goal_tol_pos <= 0 or self.goal_tol_heading <= 0:
            raise ValueError("goal tolerances must be positive")

    @property
    def goals(self) -> list[np.ndarray]:
        pts = self.waypoints if self.waypoints else (self.goal,)
        return [np.asarray(g, dtype=float) for g in pts]

    def with_scheme(self, mode) -> "EpisodeConfig":
        return replace(self, controller=self.controller.replace(mode=Mode(mode)))


def scenario_preset(scenario: int, scale: str = "desk") -> dict:
    """Forest spacing and speed limit of the three cluttered-forest scenarios.

    ``full`` is the 50 x 50 m layout, ``desk`` halves the extent (goal moved
    accordingly) and keeps spacing and speed.
    """
    d_min, v_max = {1: (1.5, 2.0), 2: (2.0, 3.0), 3: (3.0, 4.0)}[int(scenario)]
    side = {"desk": 25.0, "full": 50.0}[scale]
    return {"width": side, "height": side, "d_min": d_min, "v_max": v_max, "goal": (side, side, 0.0)}


def episode_from_preset(scenario: int, scale: str = "desk", controller: ControllerConfig | None = None, **kw) -> EpisodeConfig:
    p = scenario_preset(scenario, scale)
    ctl = controller or ControllerConfig()
    b = ctl.bounds
    ctl = ctl.replace(bounds=ControlBounds(b.v_min, p["v_max"], b.omega_min, b.omega_max))
    world = WorldConfig(width=p["width"], height=p["height"], d_min=p["d_min"])
    return EpisodeConfig(controller=ctl, world=world, goal=p["goal"], **kw)


@dataclass
class EpisodeLog:
    dt: float
    states: np.ndarray  # (n + 1, 3)
    controls: np.ndarray  # (n, 2)
    t_exec_ms: np.ndarray  # (n,)

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(len(self.states))

    def rows(self) -> list[tuple]:
        n = len(self.controls)
        ctl = np.vstack([self.controls, np.full((1, 2), np.nan)]) if len(self.states) > n else self.controls
        return [(t, *s, *u) for t, s, u in zip(self.times.tolist(), self.states.tolist(), ctl.tolist())]


@dataclass
class Metrics:
    T_c: float
    d: float
    v_av: float
    t_exec_ms: float
    J_acc: float
    zeta_acc: float


@dataclass
class EpisodeResult:
    outcome: str
    log: EpisodeLog
    metrics: Metrics
    n_collisions: int = 0
    note: str = ""


def _reached(state: np.ndarray, goal: np.ndarray, cfg: EpisodeConfig, final: bool) -> bool:
    if np.hypot(*(state[:2] - goal[:2])) > cfg.goal_tol_pos:
        return False
    if not final:
        return True
    dth = math.atan2(math.sin(state[2] - goal[2]), math.cos(state[2] - goal[2]))
    return abs(dth) <= cfg.goal_tol_heading


def load_world(cfg: EpisodeConfig, seed: int) -> ObstacleMap:
    w = cfg.world
    if w.map_path:
        return ObstacleMap.load(w.map_path)
    keep = [cfg.start[:2]] + [g[:2] for g in cfg.goals]
    return generate_forest(
        w.width, w.height, w.d_min, obstacle_radius=w.obstacle_radius, seed=seed,
        keep_clear=keep, keep_clear_radius=w.keep_clear_radius,
    )


def run_episode(cfg: EpisodeConfig, seed: int, obstacles: ObstacleMap | None = None) -> EpisodeResult:
    """Simulate one closed-loop run until goal, collision or timeout.

    The controller seed is ``seed``; the forest is generated from the same
    seed unless ``obstacles`` is given, so schemes sharing a seed see the
    same world.
    """
    obstacles = obstacles if obstacles is not None else load_world(cfg, seed)
    goals = cfg.goals
    ctl = Controller(cfg.controller.replace(seed=seed, cost=cfg.controller.cost.with_goal(goals[0])))
    dt = cfg.controller.dt
    known_map = build_global_costmap(obstacles, cfg.world.costmap) if cfg.world.mode == "known" else None

    state = RobotState(*map(float, cfg.start))
    states, controls, t_exec = [state.as_array()], [], []
    gi = 0
    outcome, note = None, ""
    n_steps = int(math.ceil(cfg.time_limit / dt - 1e-9))
    if is_collision(obstacles, state, cfg.robot_radius):
        outcome = COLLISION
    for _ in range(n_steps + 1):
        if outcome is not None:
            break
        while gi < len(goals) and _reached(states[-1], goals[gi], cfg, final=gi == len(goals) - 1):
            gi += 1
            if gi < len(goals):
                ctl.set_goal(goals[gi])
        if gi == len(goals):
            outcome = SUCCESS
            break
        if len(controls) == n_steps:
            break
        cmap = known_map if known_map is not None else build_local_costmap(obstacles, state, cfg.world.costmap)
        try:
            u, diag = ctl.control_step(state, cmap)
        except NoFeasibleRollout as exc:
            note = f"controller failure: {exc}"
            break
        state = step(state, u, dt)
        states.append(state.as_array())
        controls.append(u.as_array())
        t_exec.append(diag.t_exec_ms if cfg.timing else math.nan)
        if is_collision(obstacles, state, cfg.robot_radius):
            outcome = COLLISION
    if outcome is None:
        outcome = LOCAL_MINIMUM
    log = EpisodeLog(dt, np.array(states), np.array(controls).reshape(-1, 2), np.array(t_exec, dtype=float))
    result = EpisodeResult(outcome, log, compute_metrics(log, cfg, reached=gi), int(outcome == COLLISION), note)
    return result


def task_completion(states: np.ndarray, start, goals, reached: int = 0) -> float:
    """Progress along the goal sequence as a percentage of its planned length.

    Each leg's planned length is the straight line between consecutive
    goals (the first leg starts at ``start``). Completed legs count fully;
    the current leg counts its reduction of distance-to-goal.
    """
    anchors = [np.asarray(start, dtype=float)[:2]] + [np.asarray(g, dtype=float)[:2] for g in goals]
    legs = np.array([np.hypot(*(b - a)) for a, b in zip(anchors[:-1], anchors[1:])])
    total = legs.sum()
    if total == 0.0:
        return 100.0
    if reached >= len(goals):
        return 100.0
    final = np.asarray(states[-1], dtype=float)[:2]
    progress = legs[:reached].sum() + legs[reached] - np.hypot(*(final - anchors[reached + 1]))
    return float(np.clip(100.0 * progress / total, 0.0, 100.0))


def second_derivative(x: np.ndarray, dt: float) -> np.ndarray:
    """Central second difference inside, one-sided second-order stencils at the ends."""
    x = np.asarray(x, dtype=float)
    if len(x) < 4:
        raise ValueError("need at least 4 samples")
    # written on first differences so that constant signals give exact zeros
    f = np.diff(x)
    d = np.empty_like(x)
    d[1:-1] = f[1:] - f[:-1]
    d[0] = 2.0 * (x[0] - x[1]) - 3.0 * (x[1] - x[2]) + (x[2] - x[3])
    d[-1] = 2.0 * (x[-1] - x[-2]) - 3.0 * (x[-2] - x[-3]) + (x[-3] - x[-4])
    return d / dt**2


def cumulative_jerk(x: np.ndarray, dt: float) -> float:
    """``(1/T) * integral of (x'')^2`` with trapezoidal integration; nan below 4 samples."""
    x = np.asarray(x, dtype=float)
    if len(x) < 4:
        return math.nan
    a = second_derivative(x, dt)
    T = dt * (len(x) - 1)
    return float(trapezoid(a * a, dx=dt) / T)


def compute_metrics(log: EpisodeLog, cfg: EpisodeConfig, reached: int = 0) -> Metrics:
    states, u = log.states, log.controls
    d = float(np.sum(np.hypot(*np.diff(states[:, :2], axis=0).T))) if len(states) >= 2 else 0.0
    return Metrics(
        T_c=task_completion(states, cfg.start, cfg.goals, reached),
        d=d,
        v_av=float(u[:, 0].mean()) if len(u) else math.nan,
        t_exec_ms=float(np.mean(log.t_exec_ms)) if len(log.t_exec_ms) else math.nan,
        J_acc=cumulative_jerk(u[:, 0], log.dt),
        zeta_acc=cumulative_jerk(u[:, 1], log.dt),
    )


@dataclass
class EpisodeRecord:
    episode: int
    scheme: str
    seed: int
    outcome: str
    T_c: float
    d: float
    v_av: float
    t_exec_ms: float
    J_acc: float
    zeta_acc: float


@dataclass
class SchemeSummary:
    scheme: str
    n_episodes: int
    S_R: float
    T_c: float
    N_c: int
    R_lm: int
    d_av: float
    d_sd: float
    v_av: float
    v_sd: float
    t_exec_ms: float
    t_exec_sd: float
    J_acc: float
    zeta_acc: float


def _mean_sd(values) -> tuple[float, float]:
    v = np.asarray([x for x in values if np.isfinite(x)], dtype=float)
    if len(v) == 0:
        return math.nan, math.nan
    return float(v.mean()), float(v.std())


def summarize(records: list[EpisodeRecord]) -> list[SchemeSummary]:
    """Per-scheme aggregates; distance, speed and jerk use successful runs only."""
    out = []
    for scheme in dict.fromkeys(r.scheme for r in records):
        rs = [r for r in records if r.scheme == scheme]
        ok = [r for r in rs if r.outcome == SUCCESS]
        d = _mean_sd(r.d for r in ok)
        v = _mean_sd(r.v_av for r in ok)
        t = _mean_sd(r.t_exec_ms for r in rs)
        out.append(
            SchemeSummary(
                scheme=scheme,
                n_episodes=len(rs),
                S_R=100.0 * len(ok) / len(rs),
                T_c=float(np.mean([r.T_c for r in rs])),
                N_c=sum(r.outcome == COLLISION for r in rs),
                R_lm=sum(r.outcome == LOCAL_MINIMUM for r in rs),
                d_av=d[0], d_sd=d[1], v_av=v[0], v_sd=v[1], t_exec_ms=t[0], t_exec_sd=t[1],
                J_acc=_mean_sd(r.J_acc for r in ok)[0],
                zeta_acc=_mean_sd(r.zeta_acc for r in ok)[0],
            )
        )
    return out


def _run_one(args):
    cfg, scheme, seed, episode = args
    res = run_episode(cfg.with_scheme(scheme), seed)
    m = res.metrics
    rec = EpisodeRecord(episode, Mode(scheme).value, seed, res.outcome, m.T_c, m.d, m.v_av, m.t_exec_ms, m.J_acc, m.zeta_acc)
    return rec, res.log


def run_benchmark(cfg: EpisodeConfig, schemes, seeds, out: str | os.PathLike | None = None, workers: int = 1):
    """Run the (seed x scheme) grid with paired worlds and optionally write CSVs.

    Returns ``(summaries, records)``. Output rows are ordered by episode id
    whatever the execution order.
    """
    schemes, seeds = [Mode(s) for s in schemes], [int(s) for s in seeds]
    if not schemes or not seeds:
        raise ValueError("need at least one scheme and one seed")
    jobs = [(cfg, s, seed, i) for i, (seed, s) in enumerate((seed, s) for seed in seeds for s in schemes)]
    if workers > 1:
        with ProcessPoolExecutor(workers, initializer=warmup) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    results.sort(key=lambda r: r[0].episode)
    records = [r[0] for r in results]
    summaries = summarize(records)
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        write_records(out / "episodes.csv", records)
        write_records(out / "summary.csv", summaries)
        for rec, log in results:
            write_trajectory(out / f"ep_{rec.episode}.csv", log)
    return summaries, records


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_records(path, records) -> None:
    """CSV with a header taken from the dataclass fields; floats use ``repr``."""
    records = list(records)
    if not records:
        raise ValueError("nothing to write")
    cols = [f.name for f in fields(records[0])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in records:
            w.writerow([_fmt(getattr(r, c)) for c in cols])


def read_records(path, cls):
    types = {f.name: f.type for f in fields(cls)}
    conv = {"int": int, "float": float, "str": str}
    with open(path, newline="") as fh:
        return [cls(**{k: conv[types[k]](v) for k, v in row.items()}) for row in csv.DictReader(fh)]


def write_trajectory(path, log: EpisodeLog) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJ_COLUMNS)
        for row in log.rows():
            w.writerow([repr(float(v)) for v in row])


def read_trajectory(path) -> np.ndarray:
    """Trajectory rows as a float array with columns ``t, x, y, theta, v, omega``."""
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)

