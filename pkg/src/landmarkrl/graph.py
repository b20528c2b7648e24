"""Landmark graphs over visited states and shortest-path subgoal planning.

Graph construction: sample a fixed-size pool of states from the replay
buffer, spread landmarks over it with farthest point sampling in goal
space, then weight every ordered landmark pair with a value-derived
distance estimate max(0, -Q(s, pi(s, l), l)). Edges whose estimate exceeds
the clipping threshold are cut (the estimate is only trusted locally).

Planning: append the current state (out-edges only) and the target goal
(in-edges only) to the graph and return a minimum-cost subgoal path,
either with Dijkstra (exact, the default) or with a smoothed soft
value-iteration backup followed by greedy successor extraction.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .maze import goal_map


class NoPathError(Exception):
    """Every route from the current state to the goal is cut."""


@dataclass
class Landmark:
    state: np.ndarray
    goal: np.ndarray


@dataclass
class LandmarkGraph:
    states: np.ndarray  # (n, sd) representative visited states
    goals: np.ndarray  # (n, gd) their goal-space projections
    weights: np.ndarray  # (n, n) directed estimates, +inf where cut, 0 diagonal
    clip_threshold: float

    @property
    def n_nodes(self):
        return len(self.goals)

    def landmarks(self):
        return [Landmark(s.copy(), g.copy()) for s, g in zip(self.states, self.goals)]


@dataclass
class Path:
    nodes: np.ndarray  # (N, gd): phi(current state), subgoals..., target goal
    total_cost: float

    def __len__(self):
        return len(self.nodes)


# ---- construction ---------------------------------------------------------


def sample_pool(buf, pool_size: int, rng) -> np.ndarray:
    """pool_size states drawn uniformly with replacement from the buffer."""
    return buf.sample_states(pool_size, rng)


def fps(points: np.ndarray, budget: int, rng, first: int | None = None) -> np.ndarray:
    """Farthest point sampling over goal-space points (n, d).

    The first pick is uniform at random (or ``first`` when given); each
    subsequent pick maximizes the distance to the selected set. Stops early
    once every distinct point is selected, i.e. after
    min(budget, #distinct points) picks.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or len(points) == 0:
        raise ValueError("pool must be a non-empty (n, d) array")
    if budget < 1:
        raise ValueError("budget must be >= 1")
    n = len(points)
    start = int(rng.integers(n)) if first is None else int(first)
    chosen = [start]
    dist = np.linalg.norm(points - points[start], axis=1)
    while len(chosen) < budget:
        far = int(np.argmax(dist))
        if dist[far] <= 0.0:  # every distinct point already selected
            break
        chosen.append(far)
        dist = np.minimum(dist, np.linalg.norm(points - points[far], axis=1))
    return np.asarray(chosen, dtype=np.int64)


def _distance_fn(agent):
    """Accept an ActorCritic-like object or a bare callable(states, goals)."""
    if callable(agent) and not hasattr(agent, "distance_to"):
        return agent
    return agent.distance_to


def estimate_distance(agent, from_state, to_goal) -> float:
    """Value-derived distance estimate max(0, -Q(s, pi(s, g), g))."""
    fn = _distance_fn(agent)
    out = fn(np.asarray(from_state, float)[None, :], np.asarray(to_goal, float)[None, :])
    return float(out[0])


def build_graph(agent, buf, budget: int, pool_size: int, clip_threshold: float, rng) -> LandmarkGraph:
    """FPS landmarks + dense directed value-estimated edges, clipped."""
    pool = sample_pool(buf, pool_size, rng)
    if len(pool) == 0:
        raise ValueError("empty pool; increase pool_size")
    pool_goals = np.stack([goal_map(s) for s in pool])
    idx = fps(pool_goals, budget, rng)
    states = pool[idx]
    goals = pool_goals[idx]
    n = len(idx)
    fn = _distance_fn(agent)
    from_states = np.repeat(states, n, axis=0)
    to_goals = np.tile(goals, (n, 1))
    w = fn(from_states, to_goals).reshape(n, n).astype(float)
    w[w > clip_threshold] = np.inf
    np.fill_diagonal(w, 0.0)
    return LandmarkGraph(states=states, goals=goals, weights=w, clip_threshold=clip_threshold)


# ---- shortest paths --------------------------------------------------------


def _reverse_dijkstra(weights: np.ndarray, sink: int):
    """Costs-to-sink and forward successor pointers on a directed matrix.

    Successors come from the relaxation itself, so the successor chain is
    acyclic even in the presence of zero-weight edges.
    """
    n = len(weights)
    dist = np.full(n, np.inf)
    succ = np.full(n, -1, dtype=np.int64)
    dist[sink] = 0.0
    heap = [(0.0, sink)]
    done = np.zeros(n, dtype=bool)
    while heap:
        d, v = heapq.heappop(heap)
        if done[v]:
            continue
        done[v] = True
        # relax all u with an edge u -> v
        col = weights[:, v]
        for u in np.nonzero(np.isfinite(col))[0]:
            if done[u]:
                continue
            alt = d + col[u]
            if alt < dist[u]:
                dist[u] = alt
                succ[u] = v
                heapq.heappush(heap, (alt, u))
    return dist, succ


def _soft_values(weights: np.ndarray, sink: int, iterations: int, temperature: float):
    """Smoothed Bellman backup toward the sink:

        D(u) <- -T * log sum_v exp(-(w(u, v) + D(v)) / T)

    starting from D = +inf except D(sink) = 0, which stays pinned.
    """
    n = len(weights)
    d = np.full(n, np.inf)
    d[sink] = 0.0
    for _ in range(iterations):
        total = weights + d[None, :]
        finite = np.isfinite(total)
        new = np.full(n, np.inf)
        rows = np.nonzero(finite.any(axis=1))[0]
        for u in rows:
            vals = total[u, finite[u]]
            m = vals.min()
            new[u] = m - temperature * np.log(
                np.sum(np.exp(-(vals - m) / temperature))
            )
        new[sink] = 0.0
        d = new
    return d


def _greedy_successors(weights: np.ndarray, values: np.ndarray, source: int, sink: int):
    """Follow argmin_v w(u, v) + D(v) from source to sink; visited-guarded."""
    n = len(weights)
    node = source
    order = [source]
    visited = {source}
    while node != sink:
        cand = weights[node] + values
        cand[list(visited)] = np.inf
        nxt = int(np.argmin(cand))
        if not np.isfinite(cand[nxt]):
            return None
        order.append(nxt)
        visited.add(nxt)
        node = nxt
        if len(order) > n:
            return None
    return order


def _expanded_system(graph: LandmarkGraph, agent, s, g):
    """Append phi(s) (source, out-edges only) and g (sink, in-edges only)."""
    fn = _distance_fn(agent)
    n = graph.n_nodes
    s = np.asarray(s, dtype=float)
    g = np.asarray(g, dtype=float)
    w_from = fn(np.repeat(s[None, :], n, axis=0), graph.goals).astype(float)
    w_to = fn(graph.states, np.repeat(g[None, :], n, axis=0)).astype(float)
    direct = fn(s[None, :], g[None, :]).astype(float)[0]
    clip = graph.clip_threshold
    w_from[w_from > clip] = np.inf
    w_to[w_to > clip] = np.inf
    if direct > clip:
        direct = np.inf
    full = np.full((n + 2, n + 2), np.inf)
    full[:n, :n] = graph.weights
    src, snk = n, n + 1
    full[src, :n] = w_from
    full[:n, snk] = w_to
    full[src, snk] = direct
    np.fill_diagonal(full, 0.0)
    nodes = np.concatenate([graph.goals, goal_map(s)[None, :], g[None, :]], axis=0)
    return full, nodes, src, snk


def _path_cost(weights: np.ndarray, order) -> float:
    return float(sum(weights[a, b] for a, b in zip(order[:-1], order[1:])))


def plan(
    graph: LandmarkGraph,
    agent,
    s,
    g,
    method: str = "dijkstra",
    soft_iterations: int = 20,
    soft_temperature: float = 0.9,
) -> Path:
    """Minimum-cost subgoal path from the current state to the goal.

    Raises NoPathError when the goal is unreachable in the clipped graph;
    callers fall back to conditioning on the goal directly.
    """
    full, nodes, src, snk = _expanded_system(graph, agent, s, g)
    if method == "dijkstra":
        dist, succ = _reverse_dijkstra(full, snk)
        if not np.isfinite(dist[src]):
            raise NoPathError("goal unreachable from state in clipped graph")
        order = [src]
        while order[-1] != snk:
            order.append(int(succ[order[-1]]))
    elif method == "soft_vi":
        values = _soft_values(full, snk, soft_iterations, soft_temperature)
        if not np.isfinite(values[src]) and not np.isfinite(
            np.min(full[src] + values)
        ):
            raise NoPathError("goal unreachable from state in clipped graph")
        order = _greedy_successors(full, values, src, snk)
        if order is None:  # smoothed values gave no usable chain; fall back
            dist, succ = _reverse_dijkstra(full, snk)
            if not np.isfinite(dist[src]):
                raise NoPathError("goal unreachable from state in clipped graph")
            order = [src]
            while order[-1] != snk:
                order.append(int(succ[order[-1]]))
    else:
        raise ValueError(f"unknown plan method {method!r}")
    return Path(nodes=nodes[order].copy(), total_cost=_path_cost(full, order))


class EpisodePlanner:
    """Per-episode cache for per-step replanning against a fixed goal.

    The landmark graph and the goal-side edges are fixed for the episode, so
    costs-to-goal and successor pointers are computed once; each step only
    estimates fresh out-edges from the current state. Produces the same
    paths as ``plan`` on the same graph.
    """

    def __init__(self, graph: LandmarkGraph, agent, g, method="dijkstra", soft_iterations=20, soft_temperature=0.9):
        self.graph = graph
        self.agent = agent
        self.g = np.asarray(g, dtype=float)
        self.method = method
        fn = _distance_fn(agent)
        n = graph.n_nodes
        w_to = fn(graph.states, np.repeat(self.g[None, :], n, axis=0)).astype(float)
        w_to[w_to > graph.clip_threshold] = np.inf
        # landmark block plus sink column; sink has index n
        full = np.full((n + 1, n + 1), np.inf)
        full[:n, :n] = graph.weights
        full[:n, n] = w_to
        np.fill_diagonal(full, 0.0)
        self._full = full
        if method == "dijkstra":
            self._dist, self._succ = _reverse_dijkstra(full, n)
        elif method == "soft_vi":
            self._dist = _soft_values(full, n, soft_iterations, soft_temperature)
            self._succ = None
            self._soft_iterations = soft_iterations
            self._soft_temperature = soft_temperature
        else:
            raise ValueError(f"unknown plan method {method!r}")

    def plan_from(self, s) -> Path:
        fn = _distance_fn(self.agent)
        graph = self.graph
        n = graph.n_nodes
        s = np.asarray(s, dtype=float)
        # out-edges to every landmark plus the direct hop, one batched call
        out = fn(
            np.repeat(s[None, :], n + 1, axis=0),
            np.concatenate([graph.goals, self.g[None, :]], axis=0),
        ).astype(float)
        w_from = out[:n]
        w_from[w_from > graph.clip_threshold] = np.inf
        direct = float(out[n])
        if direct > graph.clip_threshold:
            direct = np.inf
        first_costs = np.append(w_from + self._dist[:n], direct)
        best = int(np.argmin(first_costs))
        if not np.isfinite(first_costs[best]):
            raise NoPathError("goal unreachable from state in clipped graph")
        if best == n:  # direct hop to the goal
            order = [n]
        elif self._succ is not None:
            order = [best]
            while order[-1] != n:
                order.append(int(self._succ[order[-1]]))
        else:
            order = _greedy_successors(self._full, self._dist, best, n)
            if order is None:
                dist, succ = _reverse_dijkstra(self._full, n)
                order = [best]
                while order[-1] != n:
                    order.append(int(succ[order[-1]]))
        nodes = [goal_map(s)]
        nodes.extend(graph.goals[i] for i in order if i != n)
        nodes.append(self.g.copy())
        cost = first_costs[best] if best == n else w_from[best] + self._path_tail_cost(order)
        return Path(nodes=np.stack(nodes), total_cost=float(cost))

    def _path_tail_cost(self, order) -> float:
        return _path_cost(self._full, order)
