"""
One forest, two controllers
===========================

Generate a 25 x 25 m Poisson-disk forest, then drive the same robot through
it with plain MPPI and with U-MPPI (sigma-point batches, risk-sensitive
cost). Both share the map and the random seed, so differences come from the
controllers alone. A PGM of the inflated map is written next to the script.

Each episode takes roughly half a minute on one core.
"""

from pathlib import Path

from umppi.controller import Mode
from umppi.harness import episode_from_preset, load_world, run_episode
from umppi.world import build_global_costmap

seed = 3
cfg = episode_from_preset(3, "desk")  # sparse forest, 3 m spacing
world = load_world(cfg, seed)
print(f"{len(world)} trees, goal {cfg.goal}")

out = Path(__file__).with_name("forest_seed3.pgm")
build_global_costmap(world, cfg.world.costmap).to_pgm(out)
print("map written to", out)

for mode in (Mode.MPPI, Mode.UMPPI_SM1):
    res = run_episode(cfg.with_scheme(mode), seed, obstacles=world)
    m = res.metrics
    print(
        f"{mode.value:10s} {res.outcome:13s} T_c={m.T_c:5.1f}% d={m.d:5.2f} m "
        f"v_av={m.v_av:.2f} m/s t_exec={m.t_exec_ms:.0f} ms J_acc={m.J_acc:.2f}"
    )

# the recorded trajectory is a plain array: states (T+1, 3) and controls (T, 2)
print("last pose:", res.log.states[-1])
