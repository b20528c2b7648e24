#!/usr/bin/env python3
"""Tour of the continuous point-maze environments.

Shows the shipped maze presets, the text format, sparse rewards, and the
axis-separable sliding collision model.
"""

import numpy as np

from landmarkrl import maze

print("Available presets:", maze.preset_names())

u15 = maze.preset("u15")
print(f"\nThe default task is a {u15.extent[0]:.0f}x{u15.extent[1]:.0f} U-shaped maze "
      f"(horizon {u15.horizon}, success radius {u15.delta}):\n")
print(maze.maze_to_text(u15))

rng = np.random.default_rng(7)
start, goal = maze.reset(u15, rng)
print(f"reset() sampled start {start} and goal {goal} (free-cell centres)")
print(f"reward at the start: {maze.reward(start, goal, u15.delta)} (sparse: 0 only within delta)")

# A wall in the way: the x-component stops exactly at the wall face while
# the y-component keeps sliding.
s = np.array([4.7, 10.5])  # just left of the central block
a = np.array([1.0, 0.8])
s2 = maze.step(u15, s, a)
print(f"\nslide demo: from {s} with action {a} -> {s2}")
print("  (x stopped at the wall face x=5.0, y advanced the full 0.8)")

# Random walk never tunnels through walls.
s, _ = maze.reset(u15, rng)
ok = True
for _ in range(200):
    s = maze.step(u15, s, rng.uniform(-1, 1, 2))
    ok &= maze.is_free_point(u15, s)
print(f"\n200 random steps, every visited point in free space: {ok}")

# Custom mazes load from a tiny text format.
text = """cell_size=1.0 delta=0.3 horizon=25 max_step=1.0
#######
#.....#
#.###.#
#.....#
#######
"""
ring = maze.load_maze_text(text, name="ring")
print(f"custom maze {ring.name!r}: extent {ring.extent}, "
      f"{len(maze.free_cells(ring))} free cells")
