"""Continuous 2D point mazes with sparse goal-reaching reward.

A maze is an occupancy grid living in continuous coordinates: cell (r, c)
covers [c*cell_size, (c+1)*cell_size) x [r*cell_size, (r+1)*cell_size),
row 0 at the bottom. The outer boundary is always wall, agents are points,
and collisions resolve with an axis-separable slide: the x displacement is
resolved against walls first, then y, each stopping exactly at the wall
face. States and goals are plain float64 arrays of shape (2,).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_BOUNDARY_TOL = 1e-9


@dataclass(frozen=True)
class MazeSpec:
    """Static description of one maze task."""

    name: str
    cells: np.ndarray  # bool (rows, cols), True = wall
    cell_size: float = 1.0
    horizon: int = 50
    delta: float = 0.5
    max_step: float = 1.0
    noise_std: float = 0.0

    @property
    def extent(self):
        """(width, height) in length units."""
        rows, cols = self.cells.shape
        return (cols * self.cell_size, rows * self.cell_size)

    def validate(self):
        if self.delta <= 0:
            raise ValueError("delta must be > 0")
        if self.max_step <= 0:
            raise ValueError("max_step must be > 0")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        cells = self.cells
        if cells.ndim != 2 or cells.shape[0] < 3 or cells.shape[1] < 3:
            raise ValueError("grid must be at least 3x3")
        if not (
            cells[0, :].all()
            and cells[-1, :].all()
            and cells[:, 0].all()
            and cells[:, -1].all()
        ):
            raise ValueError("outer boundary must be wall")
        free = ~cells
        if not free.any():
            raise ValueError("maze has no free cells")
        if not _connected(free):
            raise ValueError("free space is not connected")
        return self


def _connected(free: np.ndarray) -> bool:
    """4-neighbour flood fill covers every free cell."""
    rows, cols = free.shape
    seen = np.zeros_like(free)
    start = tuple(np.argwhere(free)[0])
    stack = [start]
    seen[start] = True
    while stack:
        r, c = stack.pop()
        for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if 0 <= nr < rows and 0 <= nc < cols and free[nr, nc] and not seen[nr, nc]:
                seen[nr, nc] = True
                stack.append((nr, nc))
    return bool((seen == free).all())


# ---- text format -------------------------------------------------------
#
# Header: "cell_size=<float> delta=<float> horizon=<int> max_step=<float>"
# then one line per row, '#' = wall and '.' = free, top row first.
# An optional "noise_std=<float>" header entry is accepted.


def load_maze_text(text: str, name: str = "custom") -> MazeSpec:
    lines = [ln.rstrip("\n") for ln in text.strip().splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty maze text")
    header = {}
    for tok in lines[0].split():
        if "=" not in tok:
            raise ValueError(f"bad header token: {tok!r}")
        key, val = tok.split("=", 1)
        header[key] = val
    for req in ("cell_size", "delta", "horizon", "max_step"):
        if req not in header:
            raise ValueError(f"missing header key: {req}")
    rows = lines[1:]
    width = len(rows[0])
    grid = []
    for ln in rows:
        if len(ln) != width:
            raise ValueError("ragged maze rows")
        if set(ln) - {"#", "."}:
            raise ValueError(f"bad maze characters in {ln!r}")
        grid.append([ch == "#" for ch in ln])
    cells = np.array(grid[::-1], dtype=bool)  # text is top row first
    spec = MazeSpec(
        name=header.get("name", name),
        cells=cells,
        cell_size=float(header["cell_size"]),
        horizon=int(header["horizon"]),
        delta=float(header["delta"]),
        max_step=float(header["max_step"]),
        noise_std=float(header.get("noise_std", 0.0)),
    )
    return spec.validate()


def maze_to_text(spec: MazeSpec) -> str:
    header = (
        f"cell_size={spec.cell_size} delta={spec.delta} "
        f"horizon={spec.horizon} max_step={spec.max_step}"
    )
    if spec.noise_std:
        header += f" noise_std={spec.noise_std}"
    body = [
        "".join("#" if w else "." for w in row) for row in spec.cells[::-1]
    ]
    return "\n".join([header] + body) + "\n"


def load_maze_file(path, name=None) -> MazeSpec:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if name is None:
        import os

        name = os.path.splitext(os.path.basename(str(path)))[0]
    return load_maze_text(text, name=name)


# ---- presets ------------------------------------------------------------

_U15 = ["#" * 15]
_U15 += ["#....#####....#"] * 9
_U15 += ["#.............#"] * 4
_U15 += ["#" * 15]

_L15 = ["#" * 15]
_L15 += ["#....##########"] * 9
_L15 += ["#.............#"] * 4
_L15 += ["#" * 15]

_S15 = ["#" * 15]
_S15 += ["#.............#"] * 3
_S15 += ["##########....#"] * 2
_S15 += ["#.............#"] * 3
_S15 += ["#....##########"] * 2
_S15 += ["#.............#"] * 3
_S15 += ["#" * 15]

_OPEN5 = ["#" * 5] + ["#...#"] * 3 + ["#" * 5]

_PRESETS = {
    # 15x15 U-shaped maze: the default task for the full training runs.
    "u15": ("\n".join(["cell_size=1.0 delta=0.5 horizon=50 max_step=1.0"] + _U15), "u15"),
    "l15": ("\n".join(["cell_size=1.0 delta=0.5 horizon=50 max_step=1.0"] + _L15), "l15"),
    "s15": ("\n".join(["cell_size=1.0 delta=0.5 horizon=60 max_step=1.0"] + _S15), "s15"),
    # small open room, handy for quick experiments and tests
    "open5": ("\n".join(["cell_size=1.0 delta=0.5 horizon=20 max_step=1.0"] + _OPEN5), "open5"),
}


def preset(name: str) -> MazeSpec:
    if name not in _PRESETS:
        raise KeyError(f"unknown maze preset {name!r}; have {sorted(_PRESETS)}")
    text, nm = _PRESETS[name]
    return load_maze_text(text, name=nm)


def preset_names():
    return sorted(_PRESETS)


# ---- geometry helpers ----------------------------------------------------


def free_cells(spec: MazeSpec) -> np.ndarray:
    """(n, 2) array of free (row, col) indices in scan order."""
    return np.argwhere(~spec.cells)


def cell_center(spec: MazeSpec, row: int, col: int) -> np.ndarray:
    cs = spec.cell_size
    return np.array([(col + 0.5) * cs, (row + 0.5) * cs], dtype=float)


def _axis_candidates(coord: float, cell_size: float, n: int):
    """Cell indices a coordinate may belong to; two when exactly on a seam."""
    t = coord / cell_size
    k = int(np.floor(t + _BOUNDARY_TOL))
    if abs(t - k) <= _BOUNDARY_TOL:  # on the seam between k-1 and k
        cands = [k - 1, k]
    else:
        cands = [int(np.floor(t))]
    return [c for c in cands if 0 <= c < n]


def is_free_point(spec: MazeSpec, pos) -> bool:
    """True if the point lies in (or on the face of) a free cell."""
    x, y = float(pos[0]), float(pos[1])
    w, h = spec.extent
    if not (0.0 <= x <= w and 0.0 <= y <= h):
        return False
    rows, cols_n = spec.cells.shape
    for c in _axis_candidates(x, spec.cell_size, cols_n):
        for r in _axis_candidates(y, spec.cell_size, rows):
            if not spec.cells[r, c]:
                return True
    return False


def _open_cols(spec: MazeSpec, y: float):
    """Column occupancy seen by a point at height y: open iff any of the
    candidate rows is free there."""
    rows, cols_n = spec.cells.shape
    cands = _axis_candidates(y, spec.cell_size, rows)
    open_ = np.zeros(cols_n, dtype=bool)
    for r in cands:
        open_ |= ~spec.cells[r, :]
    return open_

def _open_rows(spec: MazeSpec, x: float):
    rows, cols_n = spec.cells.shape
    cands = _axis_candidates(x, spec.cell_size, cols_n)
    open_ = np.zeros(rows, dtype=bool)
    for c in cands:
        open_ |= ~spec.cells[:, c]
    return open_


def _slide(coord: float, delta: float, open_cells: np.ndarray, cell_size: float) -> float:
    """Move coord by delta along one axis, stopping exactly at the first
    closed-cell face. open_cells[i] says whether cell i is traversable."""
    if delta == 0.0:
        return coord
    n = len(open_cells)
    t = coord / cell_size
    k = round(t)
    on_seam = abs(t - k) <= _BOUNDARY_TOL
    if on_seam:
        coord = k * cell_size  # snap away accumulated float error
    target = coord + delta
    if delta > 0.0:
        cur = k if on_seam else int(np.floor(t))
        if on_seam and (cur >= n or not open_cells[cur]):
            return coord  # pressed against a wall face
        while True:
            right = (cur + 1) * cell_size
            if target <= right:
                return target
            if cur + 1 >= n or not open_cells[cur + 1]:
                return right
            cur += 1
    else:
        cur = (k - 1) if on_seam else int(np.floor(t))
        if on_seam and (cur < 0 or not open_cells[cur]):
            return coord
        while True:
            left = cur * cell_size
            if target >= left:
                return target
            if cur - 1 < 0 or not open_cells[cur - 1]:
                return left
            cur -= 1


# ---- the four environment operations -------------------------------------


def reset(spec: MazeSpec, rng) -> tuple[np.ndarray, np.ndarray]:
    """Sample a start state and a target goal, uniformly over free cells
    (cell centers). ``rng`` is an integer seed or a numpy Generator;
    results are deterministic given the seed. Start is drawn first."""
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    cells = free_cells(spec)
    si = int(rng.integers(len(cells)))
    gi = int(rng.integers(len(cells)))
    start = cell_center(spec, *cells[si])
    goal = cell_center(spec, *cells[gi])
    return start, goal


def step(spec: MazeSpec, s, a, rng=None) -> np.ndarray:
    """One transition: clamp the action per axis to +-max_step, add optional
    Gaussian position noise, then slide x first and y second."""
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ValueError("action must be finite")
    d = np.clip(a, -spec.max_step, spec.max_step)
    if spec.noise_std > 0.0:
        if rng is None:
            raise ValueError("noise_std > 0 requires an rng")
        d = d + rng.normal(0.0, spec.noise_std, size=2)
    x, y = float(s[0]), float(s[1])
    x_new = _slide(x, float(d[0]), _open_cols(spec, y), spec.cell_size)
    y_new = _slide(y, float(d[1]), _open_rows(spec, x_new), spec.cell_size)
    return np.array([x_new, y_new], dtype=float)


def reward(s_next, g, delta: float) -> float:
    """Sparse reward: 0 within delta of the goal (inclusive), else -1."""
    d = float(np.linalg.norm(goal_map(s_next) - np.asarray(g, dtype=float)))
    return 0.0 if d <= delta else -1.0


def goal_map(s) -> np.ndarray:
    """Goal-space projection: the (x, y) position itself for these mazes."""
    return np.asarray(s, dtype=float)[:2].copy()


def is_success(s, g, delta: float) -> bool:
    return reward(s, g, delta) == 0.0
