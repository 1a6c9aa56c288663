"""Flat ``section.key = value`` configuration files.

Lines starting with ``#`` are comments. Vectors are comma separated,
waypoint lists separate poses with ``;`` and seed lists accept ranges
(``0-9``). Unknown or repeated keys are errors.

Example::

    world.scenario = 1
    controller.mode = umppi-sm1
    cost.gamma = 1.0
    bench.seeds = 0-19
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .controller import ControllerConfig, Mode
from .costs import CostParams, default_R
from .harness import EpisodeConfig, WorldConfig, scenario_preset
from .world import CostmapParams


class ConfigError(ValueError):
    pass


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(v) for v in s.replace(",", " ").split())


def _poses(s: str) -> tuple[tuple[float, ...], ...]:
    return tuple(_floats(p) for p in s.split(";") if p.strip())


def _ints(s: str) -> tuple[int, ...]:
    out: list[int] = []
    for part in s.replace(",", " ").split():
        m = re.fullmatch(r"(-?\d+)-(-?\d+)", part)
        if m:
            out.extend(range(int(m[1]), int(m[2]) + 1))
        else:
            out.append(int(part))
    return tuple(out)


def _words(s: str) -> tuple[str, ...]:
    return tuple(s.replace(",", " ").split())


def _bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {s!r}")


def _opt_str(s: str) -> str | None:
    s = s.strip()
    return s or None


KEYS = {
    "controller.N": int,
    "controller.M": int,
    "controller.mode": str,
    "controller.sigma_u": _floats,
    "controller.sigma_0": _floats,
    "controller.dt": float,
    "controller.sg_window": int,
    "controller.sg_order": int,
    "controller.seed": int,
    "controller.sigma_reduction": str,
    "ut.alpha": float,
    "ut.k_sigma": float,
    "ut.beta": float,
    "cost.Q": _floats,
    "cost.R": _floats,
    "cost.gamma": float,
    "cost.w_crash": float,
    "cost.nu": float,
    "cost.lam": float,
    "bounds.v_min": float,
    "bounds.v_max": float,
    "bounds.omega_min": float,
    "bounds.omega_max": float,
    "world.scenario": int,
    "world.scale": str,
    "world.width": float,
    "world.height": float,
    "world.d_min": float,
    "world.obstacle_radius": float,
    "world.keep_clear_radius": float,
    "world.map_path": _opt_str,
    "world.mode": str,
    "costmap.resolution": float,
    "costmap.size": int,
    "costmap.robot_radius": float,
    "costmap.margin": float,
    "costmap.sensor_range": float,
    "episode.start": _floats,
    "episode.goal": _floats,
    "episode.waypoints": _poses,
    "episode.goal_tol_pos": float,
    "episode.goal_tol_heading": float,
    "episode.time_limit": float,
    "episode.robot_radius": float,
    "episode.timing": _bool,
    "bench.seeds": _ints,
    "bench.schemes": _words,
    "bench.workers": int,
}


def parse_config(text: str) -> dict:
    """Typed ``{key: value}`` from config text."""
    values: dict = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'section.key = value'")
        key, val = (p.strip() for p in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {n}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {n}: duplicate key {key!r}")
        try:
            values[key] = KEYS[key](val)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"line {n}: bad value for {key!r}: {exc}") from exc
    return values


def load_config(path) -> dict:
    return parse_config(Path(path).read_text())


def _mat(v, n):
    a = np.asarray(v, dtype=float)
    if a.size == n:
        return np.diag(a)
    if a.size == n * n:
        return a.reshape(n, n)
    raise ConfigError(f"expected {n} or {n * n} numbers, got {a.size}")


def _pick(values: dict, prefix: str, names) -> dict:
    return {n: values[f"{prefix}.{n}"] for n in names if f"{prefix}.{n}" in values}


def build_episode_config(values: dict) -> EpisodeConfig:
    """Episode settings from parsed values on top of the defaults.

    ``world.scenario`` (with ``world.scale``) seeds the forest size, spacing,
    speed limit and goal; explicit keys win over the preset.
    """
    values = dict(values)
    if "world.scenario" in values:
        p = scenario_preset(values["world.scenario"], values.get("world.scale", "desk"))
        for key, pv in (("world.width", p["width"]), ("world.height", p["height"]), ("world.d_min", p["d_min"]),
                        ("bounds.v_max", p["v_max"]), ("episode.goal", p["goal"])):
            values.setdefault(key, pv)
    elif "world.scale" in values:
        raise ConfigError("world.scale needs world.scenario")

    base = ControllerConfig()
    ut = replace(base.ut, **_pick(values, "ut", ("alpha", "k_sigma", "beta")))
    bounds = replace(base.bounds, **_pick(values, "bounds", ("v_min", "v_max", "omega_min", "omega_max")))
    Sigma_u = _mat(values["controller.sigma_u"], 2) if "controller.sigma_u" in values else base.Sigma_u
    cost_kw = _pick(values, "cost", ("gamma", "w_crash", "nu", "lam"))
    if "cost.Q" in values:
        cost_kw["Q"] = _mat(values["cost.Q"], 3)
    if "cost.R" in values:
        cost_kw["R"] = _mat(values["cost.R"], 2)
    else:
        su = np.diag(Sigma_u)
        if np.any(su <= 0):
            raise ConfigError("cost.R is required when Sigma_u has a zero entry")
        cost_kw["R"] = default_R(cost_kw.get("lam", base.cost.lam), su)
    cost = CostParams(**cost_kw)
    ctl_kw = _pick(values, "controller", ("N", "M", "dt", "sg_window", "sg_order", "seed", "sigma_reduction"))
    if "controller.mode" in values:
        ctl_kw["mode"] = Mode(values["controller.mode"])
    if "controller.sigma_0" in values:
        ctl_kw["Sigma_0"] = _mat(values["controller.sigma_0"], 3)
    controller = ControllerConfig(Sigma_u=Sigma_u, ut=ut, cost=cost, bounds=bounds, **ctl_kw)

    costmap = CostmapParams(**_pick(values, "costmap", ("resolution", "size", "robot_radius", "margin", "sensor_range")))
    world = WorldConfig(
        costmap=costmap,
        **_pick(values, "world", ("width", "height", "d_min", "obstacle_radius", "keep_clear_radius", "map_path", "mode")),
    )
    ep_kw = _pick(values, "episode", ("start", "goal", "waypoints", "goal_tol_pos", "goal_tol_heading", "time_limit", "robot_radius", "timing"))
    for k in ("start", "goal"):
        if k in ep_kw and len(ep_kw[k]) != 3:
            raise ConfigError(f"episode.{k} needs x, y, theta")
    if any(len(w) != 3 for w in ep_kw.get("waypoints", ())):
        raise ConfigError("every waypoint needs x, y, theta")
    return EpisodeConfig(controller=controller, world=world, **ep_kw)


@dataclass(frozen=True)
class BenchSettings:
    seeds: tuple[int, ...] = tuple(range(10))
    schemes: tuple[Mode, ...] = (Mode.MPPI, Mode.UMPPI_SM1)
    workers: int = 1


def build_bench_settings(values: dict) -> BenchSettings:
    kw = {}
    if "bench.seeds" in values:
        kw["seeds"] = values["bench.seeds"]
    if "bench.schemes" in values:
        kw["schemes"] = tuple(Mode(s) for s in values["bench.schemes"])
    if "bench.workers" in values:
        kw["workers"] = values["bench.workers"]
    s = BenchSettings(**kw)
    if not s.seeds or not s.schemes or s.workers < 1:
        raise ConfigError("bench needs seeds, schemes and workers >= 1")
    return s
