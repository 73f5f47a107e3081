"""Kinodynamic RRT* planners.

Modes
-----
kino
    Samples only the position block and steers with the PFF controller,
    which picks the remaining final state (Kino-RRT*).
baseline
    Samples the full state and steers with the fixed-final-state controller
    (kinodynamic RRT*).
kino_delayed, baseline_delayed
    Grow with a heuristic arrival time (distance / ``v_des``) and re-optimise
    every edge's arrival time after each ``delayed_update_period`` insertions.

Rewiring always uses the fixed-final-state controller, since the rewired
node's full state is already in the tree.
"""

from dataclasses import dataclass
import itertools
import math
import time

import numpy as np

from .errors import InvalidInputError, InvalidScenarioError
from .steering import (
    FIXED_STATE,
    PFF,
    PFF_PENALTY,
    Trajectory,
    eval_trajectory,
    heuristic_arrival_time,
    steer_batch_raw,
)
from .world import collision_free_trajectory, collision_point, in_goal, sample_full, sample_pff

__all__ = [
    "MODES",
    "PlannerConfig",
    "TreeNode",
    "Tree",
    "GridIndex",
    "ConvergencePoint",
    "Planner",
    "nearest",
    "near",
    "shrink",
    "choose_parent",
    "rewire",
    "plan",
    "delayed_time_update",
    "best_solution",
    "tree_violations",
]

MODES = ("kino", "baseline", "kino_delayed", "baseline_delayed")
LOG_EVERY = 100


@dataclass(frozen=True)
class PlannerConfig:
    """Planner parameters; ``t_bounds=None`` means ``(0.05, 4 max(l, r) + 1)``."""

    iterations: int = 1000
    max_segment_length: float = 5.0
    neighbor_radius: float = 6.0
    v_des: float = 1.5
    delayed_update_period: int = 500
    collision_delta: float = 0.05
    t_bounds: tuple = None
    seed: int = 0
    mode: str = "kino"

    def __post_init__(self):
        if self.iterations < 0:
            raise InvalidInputError("iterations must be >= 0")
        if not self.max_segment_length > 0:
            raise InvalidInputError("max_segment_length must be positive")
        if not self.neighbor_radius > 0:
            raise InvalidInputError("neighbor_radius must be positive")
        if not self.v_des > 0:
            raise InvalidInputError("v_des must be positive")
        if self.delayed_update_period < 0:
            raise InvalidInputError("delayed_update_period must be >= 0")
        if not self.collision_delta > 0:
            raise InvalidInputError("collision_delta must be positive")
        if self.mode not in MODES:
            raise InvalidInputError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.t_bounds is not None:
            lo, hi = self.t_bounds
            if not 0 < lo < hi:
                raise InvalidInputError("t_bounds must satisfy 0 < t_min < t_max")
            object.__setattr__(self, "t_bounds", (float(lo), float(hi)))

    @property
    def resolved_t_bounds(self):
        if self.t_bounds is not None:
            return self.t_bounds
        return 0.05, 4.0 * max(self.max_segment_length, self.neighbor_radius) + 1.0

    @property
    def delayed(self):
        return self.mode.endswith("_delayed")

    @property
    def pff(self):
        return self.mode.startswith("kino")


@dataclass(frozen=True)
class TreeNode:
    """Read-only view of one tree vertex."""

    id: int
    state: np.ndarray
    parent: int
    edge: object
    cost_to_come: float


class GridIndex:
    """Uniform-grid spatial hash over the position block.

    Queries return ids in increasing order; nearest-neighbour ties go to the
    lowest id.
    """

    def __init__(self, dim, cell):
        self.dim = dim
        self.cell = float(cell)
        self._cells = {}
        self._pos = np.empty((64, dim))
        self._n = 0
        self._lo = None
        self._hi = None

    def __len__(self):
        return self._n

    def _key(self, p):
        return tuple(int(math.floor(v / self.cell)) for v in p)

    def insert(self, p):
        p = np.asarray(p, dtype=float)
        if self._n == self._pos.shape[0]:
            self._pos = np.concatenate([self._pos, np.empty_like(self._pos)])
        self._pos[self._n] = p
        key = self._key(p)
        self._cells.setdefault(key, []).append(self._n)
        if self._lo is None:
            self._lo = list(key)
            self._hi = list(key)
        else:
            self._lo = [min(a, b) for a, b in zip(self._lo, key)]
            self._hi = [max(a, b) for a, b in zip(self._hi, key)]
        self._n += 1
        return self._n - 1

    @property
    def positions(self):
        return self._pos[: self._n]

    def near(self, z, r):
        z = np.asarray(z, dtype=float)
        lo = self._key(z - r)
        hi = self._key(z + r)
        ids = []
        for key in itertools.product(*(range(a, b + 1) for a, b in zip(lo, hi))):
            bucket = self._cells.get(key)
            if bucket:
                ids.extend(bucket)
        if not ids:
            return []
        ids = np.array(sorted(ids))
        d2 = ((self._pos[ids] - z) ** 2).sum(axis=1)
        return ids[d2 <= r * r].tolist()

    def nearest(self, z):
        if self._n == 0:
            raise InvalidInputError("nearest() on an empty index")
        z = np.asarray(z, dtype=float)
        center = self._key(z)
        best_id, best_d2 = -1, math.inf
        max_ring = max(max(abs(c - lo), abs(c - hi))
                       for c, lo, hi in zip(center, self._lo, self._hi))
        for ring in range(max_ring + 1):
            if (2 * ring + 1) ** self.dim > 4 * self._n:
                # sparse points far from the query: scanning them all is cheaper
                d2 = ((self.positions - z) ** 2).sum(axis=1)
                return int(np.flatnonzero(d2 == d2.min())[0])
            ids = []
            for key in _ring_cells(center, ring):
                bucket = self._cells.get(key)
                if bucket:
                    ids.extend(bucket)
            if ids:
                ids = np.array(ids)
                d2 = ((self._pos[ids] - z) ** 2).sum(axis=1)
                k = np.flatnonzero(d2 == d2.min())
                cand = int(ids[k].min())
                dmin = float(d2[k[0]])
                if dmin < best_d2 or (dmin == best_d2 and cand < best_id):
                    best_id, best_d2 = cand, dmin
            # every point in ring + 1 is at least ring * cell away
            if best_id >= 0 and math.sqrt(best_d2) <= ring * self.cell:
                break
        return best_id


def _ring_cells(center, ring):
    if ring == 0:
        yield tuple(center)
        return
    for offset in itertools.product(range(-ring, ring + 1), repeat=len(center)):
        if max(abs(o) for o in offset) == ring:
            yield tuple(c + o for c, o in zip(center, offset))


class Tree:
    """RRT* tree: node states, parent pointers, incoming edges, cost-to-come."""

    def __init__(self, root_state, n1, cell=1.0):
        root_state = np.array(root_state, dtype=float)
        self.n1 = n1
        self.states = [root_state]
        self.parent = [-1]
        self.edge = [None]
        self.cost = [0.0]
        self.children = [[]]
        self.index = GridIndex(n1, cell)
        self.index.insert(root_state[:n1])

    def __len__(self):
        return len(self.states)

    def node(self, i):
        return TreeNode(i, self.states[i], self.parent[i], self.edge[i], self.cost[i])

    def position(self, i):
        return self.states[i][: self.n1]

    def add(self, state, parent, edge):
        i = len(self.states)
        self.states.append(np.array(state, dtype=float))
        self.parent.append(parent)
        self.edge.append(edge)
        self.cost.append(self.cost[parent] + edge.cost)
        self.children.append([])
        self.children[parent].append(i)
        self.index.insert(self.states[i][: self.n1])
        return i

    def is_ancestor(self, a, b):
        """True if ``a`` lies on the root path of ``b`` (or equals it)."""
        while b >= 0:
            if b == a:
                return True
            b = self.parent[b]
        return False

    def reparent(self, i, new_parent, edge):
        old = self.parent[i]
        self.children[old].remove(i)
        self.children[new_parent].append(i)
        self.parent[i] = new_parent
        self.edge[i] = edge
        self.propagate_cost(i)

    def propagate_cost(self, i):
        """Recompute cost-to-come for ``i`` and all of its descendants."""
        stack = [i]
        cost = self.cost
        while stack:
            j = stack.pop()
            cost[j] = cost[self.parent[j]] + self.edge[j].cost
            stack.extend(self.children[j])

    def recompute_costs(self):
        for child in self.children[0]:
            self.propagate_cost(child)

    def path(self, i):
        out = []
        while i >= 0:
            out.append(i)
            i = self.parent[i]
        return out[::-1]


@dataclass(frozen=True)
class ConvergencePoint:
    iteration: int
    nodes: int
    elapsed_s: float
    best_cost: float  # math.inf before the first solution


# -- primitive procedures --------------------------------------------------------

def nearest(tree, z):
    """Tree node whose position block is closest to ``z`` (ties: lowest id)."""
    return tree.index.nearest(np.asarray(z, dtype=float)[: tree.n1])


def near(tree, z, r):
    """Ids of nodes whose position lies within Euclidean distance ``r`` of ``z``."""
    if not r > 0:
        raise InvalidInputError("r must be positive")
    return tree.index.near(np.asarray(z, dtype=float)[: tree.n1], r)


def shrink(x_near, z_rand, max_len):
    """Clip ``z_rand`` to lie at most ``max_len`` from ``x_near`` along their segment."""
    if not max_len > 0:
        raise InvalidInputError("max_len must be positive")
    x_near = np.asarray(x_near, dtype=float)
    z_rand = np.asarray(z_rand, dtype=float)
    step = z_rand - x_near
    dist = float(np.linalg.norm(step))
    if dist <= max_len:
        return z_rand.copy()
    return x_near + step * (max_len / dist)


class Planner:
    """One planner instance; owns its tree, random stream and convergence log."""

    def __init__(self, system, env, cfg, start, penalty=None, sampler=None,
                 clock=time.perf_counter):
        start = np.array(start, dtype=float).reshape(-1)
        if start.shape != (system.n,):
            raise InvalidScenarioError(f"start must have length {system.n}")
        if env.dim != system.n1:
            raise InvalidScenarioError(
                f"environment has {env.dim} position axes but the system samples {system.n1}")
        if not collision_point(env, start):
            raise InvalidScenarioError("start state is in collision")
        if penalty is not None and penalty.S.shape != (system.n2, system.n2):
            raise InvalidScenarioError("terminal penalty does not match the free block")
        self.system = system
        self.env = env
        self.cfg = cfg
        self.penalty = penalty
        self.rng = np.random.default_rng(cfg.seed)
        self.sampler = sampler
        self.clock = clock
        self.tree = Tree(start, system.n1, cell=cfg.neighbor_radius)
        self.t_bounds = cfg.resolved_t_bounds
        self.goal_nodes = []
        self.best_cost = math.inf
        self.first_solution = None
        self.log = []
        self.iteration = 0
        self._inserted_since_update = 0
        if in_goal(env, start):
            self.goal_nodes.append(0)
            self.best_cost = 0.0
            self.first_solution = 0.0

    # -- steering -------------------------------------------------------------
    def _times(self, XA, TARGETS):
        n1 = self.system.n1
        XA = np.atleast_2d(XA)
        TARGETS = np.atleast_2d(TARGETS)
        d = np.linalg.norm(TARGETS[:, :n1] - XA[:, :n1], axis=1)
        return np.maximum(d / self.cfg.v_des, 1e-3)

    def steer_to_sample(self, XA, target):
        """SteerPFF (kino modes) or Steer (baseline modes) from rows of ``XA``."""
        if self.cfg.pff:
            variant = PFF if self.penalty is None else PFF_PENALTY
        else:
            variant = FIXED_STATE
        return self._steer(variant, XA, np.atleast_2d(target))

    def steer_full(self, xa, TARGETS):
        """Steer (fixed final state) from ``xa`` to each row of ``TARGETS``."""
        return self._steer(FIXED_STATE, np.atleast_2d(xa), TARGETS)

    def _steer(self, variant, XA, TARGETS):
        if self.cfg.delayed:
            return steer_batch_raw(self.system, self.penalty, variant, XA, TARGETS,
                                   tf=self._times(XA, TARGETS))
        return steer_batch_raw(self.system, self.penalty, variant, XA, TARGETS,
                               t_bounds=self.t_bounds)

    def collision_free(self, sol):
        return collision_free_trajectory(self.env, Trajectory(sol), self.cfg.collision_delta)

    # -- main loop --------------------------------------------------------------
    def sample(self):
        if self.sampler is not None:
            return np.asarray(self.sampler(self.rng), dtype=float)
        if self.cfg.pff:
            return sample_pff(self.env, self.rng)
        return sample_full(self.env, self.rng)

    def step(self):
        """One iteration of the tree-growth loop; returns the new node id or None."""
        tree = self.tree
        n1 = self.system.n1
        x_rand = self.sample()
        i_nearest = nearest(tree, x_rand[:n1])
        z_new = shrink(tree.position(i_nearest), x_rand[:n1], self.cfg.max_segment_length)
        if not collision_point(self.env, z_new):
            return None
        target = z_new if self.cfg.pff else np.concatenate([z_new, x_rand[n1:]])
        sol = self.steer_to_sample(tree.states[i_nearest], target).solution(0)
        if sol is None or not self.collision_free(sol):
            return None
        X_near = near(tree, z_new, self.cfg.neighbor_radius)
        i_min, sol = choose_parent(self, X_near, i_nearest, target, sol)
        x_new = np.concatenate([z_new, sol.x_end[n1:]])
        i_new = tree.add(x_new, i_min, sol)
        rewire(self, X_near, i_new, i_min)
        if in_goal(self.env, x_new):
            self.goal_nodes.append(i_new)
        if self.cfg.delayed and self.cfg.delayed_update_period:
            self._inserted_since_update += 1
            if self._inserted_since_update >= self.cfg.delayed_update_period:
                delayed_time_update(self)
                self._inserted_since_update = 0
        return i_new

    def current_best(self):
        if not self.goal_nodes:
            return math.inf
        cost = self.tree.cost
        return min(cost[i] for i in self.goal_nodes)

    def run(self, iterations=None, callback=None, on_record=None):
        """Run ``iterations`` (default ``cfg.iterations``) steps, logging progress.

        ``callback(planner)`` fires every 100 iterations and at the end;
        ``on_record(point)`` receives each convergence point as it is logged.
        """
        total = self.cfg.iterations if iterations is None else iterations
        clock = self.clock
        t0 = clock()
        paused = 0.0  # time spent in callbacks, excluded from elapsed_s
        elapsed_before = self.log[-1].elapsed_s if self.log else 0.0
        for k in range(1, total + 1):
            self.iteration += 1
            self.step()
            best = min(self.best_cost, self.current_best())
            improved = best < self.best_cost
            if improved:
                if self.best_cost == math.inf:
                    self.first_solution = best
                self.best_cost = best
            last = k == total
            checkpoint = self.iteration % LOG_EVERY == 0 or last
            if improved or checkpoint:
                now = clock()
                point = ConvergencePoint(self.iteration, len(self.tree),
                                         elapsed_before + now - t0 - paused, self.best_cost)
                self.log.append(point)
                if on_record is not None:
                    on_record(point)
                if callback is not None and checkpoint:
                    callback(self)
                paused += clock() - now
        return self.tree, self.log


def choose_parent(planner, X_near, i_nearest, target, sol_nearest):
    """Cheapest collision-free parent for the new sample among ``X_near``.

    Candidates are visited in id order; a candidate is collision-checked only
    when its total cost beats the current minimum. Segment solves are done in
    one batch, skipping nodes whose cost-to-come alone already exceeds the
    nearest-node total (segment costs are positive).
    """
    tree = planner.tree
    c_min = tree.cost[i_nearest] + sol_nearest.cost
    best, best_sol = i_nearest, sol_nearest
    cands = [j for j in X_near if j != i_nearest and tree.cost[j] < c_min]
    if not cands:
        return best, best_sol
    batch = planner.steer_to_sample(np.array([tree.states[j] for j in cands]), target)
    for k, j in enumerate(cands):
        c = tree.cost[j] + batch.cost[k]  # NaN for degenerate rows fails the test
        if c < c_min:
            sol = batch.solution(k)
            if planner.collision_free(sol):
                best, best_sol, c_min = j, sol, c
    return best, best_sol


def rewire(planner, X_near, i_new, i_min):
    """Reparent near nodes through ``i_new`` when that lowers their cost-to-come."""
    tree = planner.tree
    c_new = tree.cost[i_new]
    cands = [j for j in X_near if j != i_min and j != i_new and c_new < tree.cost[j]]
    if not cands:
        return 0
    batch = planner.steer_full(tree.states[i_new], np.array([tree.states[j] for j in cands]))
    swaps = 0
    for k, j in enumerate(cands):
        if c_new + batch.cost[k] < tree.cost[j] and not tree.is_ancestor(j, i_new):
            sol = batch.solution(k)
            if planner.collision_free(sol):
                tree.reparent(j, i_new, sol)
                swaps += 1
    return swaps


def delayed_time_update(planner):
    """Re-optimise the arrival time of every heuristic-time edge.

    Each such edge is re-solved as a fixed-final-state, free-final-time
    problem between its existing endpoints; the new edge replaces the old one
    only if it is cheaper and collision-free. Endpoints never move.
    """
    tree = planner.tree
    ids = [i for i in range(1, len(tree)) if not tree.edge[i].free_time]
    if not ids:
        return 0
    XA = np.array([tree.states[tree.parent[i]] for i in ids])
    XB = np.array([tree.states[i] for i in ids])
    batch = steer_batch_raw(planner.system, None, FIXED_STATE, XA, XB,
                            t_bounds=planner.t_bounds)
    replaced = 0
    for k, i in enumerate(ids):
        if not batch.cost[k] < tree.edge[i].cost:
            continue
        sol = batch.solution(k)
        if planner.collision_free(sol):
            tree.edge[i] = sol
            replaced += 1
    tree.recompute_costs()
    return replaced


def plan(system, env, cfg, start, penalty=None, sampler=None, callback=None,
         clock=time.perf_counter):
    """Grow a tree for ``cfg.iterations`` iterations.

    Returns ``(tree, log)`` where ``log`` is a list of :class:`ConvergencePoint`.
    """
    planner = Planner(system, env, cfg, start, penalty=penalty, sampler=sampler, clock=clock)
    return planner.run(callback=callback)


def best_solution(tree, env):
    """Cheapest goal-reaching node as ``(edge chain, cost)``, or None."""
    best = None
    for i in range(len(tree)):
        if in_goal(env, tree.states[i]) and (best is None or tree.cost[i] < tree.cost[best]):
            best = i
    if best is None:
        return None
    chain = [tree.edge[j] for j in tree.path(best)[1:]]
    return chain, tree.cost[best]


def tree_violations(tree, cost_tol=1e-9, boundary_tol=1e-7, evaluate=False, env=None,
                    delta=None, checked=None):
    """List structural invariant violations of a tree (empty when consistent).

    Checks reachability/acyclicity, the cost-to-come recursion and that every
    edge starts at its parent's state and ends at its node's state. With
    ``evaluate`` the edge trajectories themselves are evaluated at both ends;
    with ``env`` they are also collision-checked. ``checked`` (a dict) caches
    edges already verified; it holds a reference to each edge so ids are not
    reused while cached.
    """
    problems = []
    n = len(tree)
    if tree.parent[0] != -1 or tree.cost[0] != 0.0:
        problems.append("root must have no parent and zero cost")
    seen = {0}
    order = [0]
    for i in order:
        for ch in tree.children[i]:
            if ch in seen:
                problems.append(f"node {ch} reached twice")
                continue
            if tree.parent[ch] != i:
                problems.append(f"node {ch} listed under {i} but parent is {tree.parent[ch]}")
            seen.add(ch)
            order.append(ch)
    if len(seen) != n:
        problems.append(f"{n - len(seen)} nodes unreachable from the root")
    for i in range(1, n):
        p = tree.parent[i]
        e = tree.edge[i]
        expected = tree.cost[p] + e.cost
        if abs(tree.cost[i] - expected) > cost_tol * max(1.0, abs(expected)):
            problems.append(f"node {i}: cost_to_come {tree.cost[i]!r} != {expected!r}")
        if np.abs(e.x_end - tree.states[i]).max() > boundary_tol:
            problems.append(f"node {i}: edge end differs from node state")
        if np.abs(e.x_start - tree.states[p]).max() > boundary_tol:
            problems.append(f"node {i}: edge start differs from parent state")
        if checked is not None and checked.get(id(e)) is e:
            continue
        if evaluate:
            x0, _ = eval_trajectory(e, 0.0)
            x1, _ = eval_trajectory(e, e.tf)
            scale = max(1.0, float(np.abs(tree.states[i]).max()))
            if np.abs(x0 - tree.states[p]).max() > boundary_tol * scale:
                problems.append(f"node {i}: trajectory start misses parent state")
            if np.abs(x1 - tree.states[i]).max() > boundary_tol * scale:
                err = np.abs(x1 - tree.states[i]).max()
                problems.append(f"node {i}: trajectory end misses node state by {err:.2e}")
        if env is not None and not collision_free_trajectory(env, Trajectory(e), delta):
            problems.append(f"node {i}: edge in collision")
        if checked is not None:
            checked[id(e)] = e
    return problems
