"""Shared test oracles: finite differences, grid geodesics, micro-step
collision checks. Everything here is deliberately independent of the
library's own computation paths."""

import numpy as np


def finite_diff_param_grads(scalar_fn, net, h=1e-5):
    """Central finite differences of scalar_fn() w.r.t. every net parameter.

    Returns grads in the same flat order as net.parameters().
    """
    grads = []
    for p in net.parameters():
        g = np.zeros_like(p)
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = scalar_fn()
            flat[i] = orig - h
            fm = scalar_fn()
            flat[i] = orig
            gflat[i] = (fp - fm) / (2.0 * h)
        grads.append(g)
    return grads


def finite_diff_input_grad(scalar_fn_of_x, x, h=1e-5):
    x = np.array(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        orig = x.flat[i]
        x.flat[i] = orig + h
        fp = scalar_fn_of_x(x)
        x.flat[i] = orig - h
        fm = scalar_fn_of_x(x)
        x.flat[i] = orig
        g.flat[i] = (fp - fm) / (2.0 * h)
    return g


def assert_close_rel(analytic, numeric, rel=1e-4, context=""):
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    err = np.abs(analytic - numeric) / denom
    worst = float(err.max()) if err.size else 0.0
    assert worst <= rel, f"{context}: max rel err {worst:.3e} > {rel}"


def grid_geodesic_steps(cells, start_rc, goal_rc):
    """BFS shortest path length in cells between two free cells
    (4-neighbour moves); None if unreachable. cells: True = wall."""
    from collections import deque

    rows, cols = cells.shape
    dist = {tuple(start_rc): 0}
    q = deque([tuple(start_rc)])
    goal = tuple(goal_rc)
    while q:
        r, c = q.popleft()
        if (r, c) == goal:
            return dist[(r, c)]
        for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if 0 <= nr < rows and 0 <= nc < cols and not cells[nr, nc]:
                if (nr, nc) not in dist:
                    dist[(nr, nc)] = dist[(r, c)] + 1
                    q.append((nr, nc))
    return None


def grid_geodesic_path(cells, start_rc, goal_rc):
    """BFS cell path from start to goal inclusive; None if unreachable."""
    from collections import deque

    rows, cols = cells.shape
    prev = {tuple(start_rc): None}
    q = deque([tuple(start_rc)])
    goal = tuple(goal_rc)
    while q:
        node = q.popleft()
        if node == goal:
            path = []
            while node is not None:
                path.append(node)
                node = prev[node]
            return path[::-1]
        r, c = node
        for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if 0 <= nr < rows and 0 <= nc < cols and not cells[nr, nc]:
                if (nr, nc) not in prev:
                    prev[(nr, nc)] = node
                    q.append((nr, nc))
    return None


def strictly_inside_wall(spec, x, y, tol=1e-7):
    """Independent occupancy check: True only when (x, y) is in the open
    interior of a wall cell (points on seams do not count)."""
    cs = spec.cell_size
    rows, cols = spec.cells.shape
    w, h = spec.extent
    if x <= tol or y <= tol or x >= w - tol or y >= h - tol:
        return not (0.0 < x < w and 0.0 < y < h) or _strict_cell_wall(
            spec, x, y, tol
        )
    return _strict_cell_wall(spec, x, y, tol)


def _strict_cell_wall(spec, x, y, tol):
    cs = spec.cell_size
    tx, ty = x / cs, y / cs
    # on a seam -> not strictly inside any cell
    if abs(tx - round(tx)) <= tol / cs or abs(ty - round(ty)) <= tol / cs:
        return False
    c = int(np.floor(tx))
    r = int(np.floor(ty))
    rows, cols = spec.cells.shape
    if not (0 <= r < rows and 0 <= c < cols):
        return True
    return bool(spec.cells[r, c])


class TableDistance:
    """Planning-test distance stub keyed by (from.x, to.x) integer ids."""

    def __init__(self, table):
        self.table = table

    def __call__(self, states, goals):
        return np.array(
            [self.table[(int(round(s[0])), int(round(g[0])))] for s, g in zip(states, goals)]
        )


def random_planning_problem(rng, n_nodes, clip=3.0, hi=6.0):
    """Random clipped digraph planning problem plus an independently
    assembled full matrix for brute-force checking. Node ids: 0..n-1
    landmarks, 100 = current state, 200 = goal."""
    from landmarkrl.graph import LandmarkGraph

    ids = list(range(n_nodes))
    table = {}
    for a in ids + [100]:
        for b in ids + [200]:
            table[(a, b)] = float(rng.uniform(0.1, hi))
    goals = np.array([[float(i), 0.0] for i in ids])
    w = np.array([[table[(i, j)] for j in ids] for i in ids])
    w[w > clip] = np.inf
    np.fill_diagonal(w, 0.0)
    g = LandmarkGraph(states=goals.copy(), goals=goals, weights=w, clip_threshold=clip)

    full = np.full((n_nodes + 2, n_nodes + 2), np.inf)
    full[:n_nodes, :n_nodes] = w
    for j in ids:
        v = table[(100, j)]
        full[n_nodes, j] = v if v <= clip else np.inf
        v = table[(j, 200)]
        full[j, n_nodes + 1] = v if v <= clip else np.inf
    v = table[(100, 200)]
    full[n_nodes, n_nodes + 1] = v if v <= clip else np.inf
    np.fill_diagonal(full, 0.0)
    return g, TableDistance(table), full


def brute_force_min_cost(full, src, snk):
    """Exhaustive minimum simple-path cost over finite edges (DFS)."""
    n = len(full)
    best = [np.inf]

    def dfs(node, cost, visited):
        if cost >= best[0]:
            return
        if node == snk:
            best[0] = cost
            return
        for v in range(n):
            if v != node and v not in visited and np.isfinite(full[node, v]):
                dfs(v, cost + full[node, v], visited | {v})

    dfs(src, 0.0, frozenset([src]))
    return best[0]


def micro_step_move(spec, pos, disp, h=1e-4):
    """Axis-separable slide by brute-force micro-stepping: advance x in
    increments of h until blocked or done, then y. Independent oracle for
    the environment's analytic slide (accurate to about h)."""
    x, y = float(pos[0]), float(pos[1])
    for axis, d in ((0, float(disp[0])), (1, float(disp[1]))):
        remaining = abs(d)
        sign = 1.0 if d >= 0 else -1.0
        while remaining > 0:
            inc = min(h, remaining)
            nx = x + sign * inc if axis == 0 else x
            ny = y + sign * inc if axis == 1 else y
            if strictly_inside_wall(spec, nx, ny):
                break
            x, y = nx, ny
            remaining -= inc
    return np.array([x, y])
