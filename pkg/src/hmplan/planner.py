"""Search space, volumetric cost model and IDA* process planning."""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .access import AM, SM, Tool
from .actions import (AM_KINDS, KINDS, SM_KINDS, ActionOutcome, ConvergenceError,
                      ActionContractError, apply_action, change_counts)
from .gridkit import Orientation, VoxelGrid, digest

log = logging.getLogger(__name__)


def _default_rotations() -> tuple[int, ...]:
    rx, ry, rz = (Orientation.about(a, 1) for a in "xyz")
    seq = [
        Orientation.identity(),
        rx, rx.inverse(),
        ry, ry.inverse(),
        rz @ rx,
        rz @ ry,
    ]
    return tuple(r.index for r in seq)


# identity, +x90, -x90, +y90, -y90, z90*x90, z90*y90
DEFAULT_ROTATIONS = _default_rotations()

REL_TOL = 1e-9


@dataclass(frozen=True)
class PlannerConfig:
    c_am: float = 1.0
    c_sm: float = 0.1
    w: float = 1.0
    delta: float = 0.01
    rotations: tuple[int, ...] = DEFAULT_ROTATIONS
    am_tools: tuple[Tool, ...] = ()
    sm_tools: tuple[Tool, ...] = ()
    max_depth: int = 12
    max_rounds: int = 1000
    max_expansions: int | None = None
    sm_iteration_cap: int = 100
    uc_full_queries: bool = False
    of_shadow_corrected: bool = True
    workers: int = 1

    def __post_init__(self):
        if not self.c_am > 0:
            raise ValueError(f"c_am must be positive, got {self.c_am}")
        if self.c_sm < 0:
            raise ValueError(f"c_sm must be non-negative, got {self.c_sm}")
        if self.w < 0:
            raise ValueError(f"w must be non-negative, got {self.w}")
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        rots = tuple(int(r) for r in self.rotations)
        if not rots or any(not 0 <= r < 24 for r in rots):
            raise ValueError(f"rotations must be cardinal indices in [0, 24), got {rots}")
        object.__setattr__(self, "rotations", rots)
        object.__setattr__(self, "am_tools", tuple(self.am_tools))
        object.__setattr__(self, "sm_tools", tuple(self.sm_tools))
        for t in self.am_tools:
            if t.kind != AM:
                raise ValueError(f"{t.name!r} is not an AM tool")
        for t in self.sm_tools:
            if t.kind != SM:
                raise ValueError(f"{t.name!r} is not an SM tool")
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")

    @property
    def lam(self) -> float:
        return self.c_sm / self.c_am

    def echo(self) -> dict:
        return {
            "c_am": self.c_am, "c_sm": self.c_sm, "lambda": self.lam, "w": self.w,
            "delta": self.delta, "rotations": list(self.rotations),
            "am_tools": [t.name for t in self.am_tools], "sm_tools": [t.name for t in self.sm_tools],
            "max_depth": self.max_depth, "sm_iteration_cap": self.sm_iteration_cap,
            "uc_full_queries": self.uc_full_queries, "of_shadow_corrected": self.of_shadow_corrected,
        }


# -- cost model ----------------------------------------------------------------


def _deficit_excess(state: VoxelGrid, target: VoxelGrid) -> tuple[int, int]:
    state.check_compatible(target)
    return (int(np.count_nonzero(target.occ & ~state.occ)),
            int(np.count_nonzero(state.occ & ~target.occ)))


def heuristic_cost(state: VoxelGrid, target: VoxelGrid, cfg: PlannerConfig) -> float:
    """Volume lower bound on the remaining cost: deficit at AM price plus excess at SM price."""
    deficit, excess = _deficit_excess(state, target)
    return state.spacing ** 3 * (cfg.c_am * deficit + cfg.c_sm * excess)


def transition_cost(prev: VoxelGrid, nxt: VoxelGrid, cfg: PlannerConfig) -> float:
    added, removed = _deficit_excess(prev, nxt)
    return prev.spacing ** 3 * (cfg.c_am * added + cfg.c_sm * removed)


@dataclass(frozen=True)
class DeltaCost:
    volumes: tuple[float, float, float, float]
    delta_f: float


def delta_cost_decomposition(prev: VoxelGrid, nxt: VoxelGrid, target: VoxelGrid,
                             cfg: PlannerConfig) -> DeltaCost:
    """S1..S4 volumes of a transition and the resulting change of f_w.

    S1/S2 are deposits inside/outside the target, S3/S4 removals
    inside/outside it.
    """
    s1, s2, s3, s4 = (c * prev.spacing ** 3 for c in change_counts(prev, nxt, target))
    w = cfg.w
    df = (cfg.c_am * (s2 + (1 + w) * s3 - w * s1)
          + cfg.c_sm * (s3 + (1 + w) * s2 - w * s4))
    return DeltaCost((s1, s2, s3, s4), df)


def relative_error_counts(deficit: int, excess: int, target_count: int) -> Fraction:
    if target_count <= 0:
        raise ValueError("goal test needs a non-empty target")
    return Fraction(deficit + excess, target_count)


def relative_error(state: VoxelGrid, target: VoxelGrid) -> Fraction:
    deficit, excess = _deficit_excess(state, target)
    return relative_error_counts(deficit, excess, target.count)


def _delta_fraction(delta: float) -> Fraction:
    return Fraction(repr(float(delta)))


def is_goal(state: VoxelGrid, target: VoxelGrid, delta: float) -> bool:
    """Symmetric-difference volume relative to the target volume is below ``delta``."""
    return relative_error(state, target) < _delta_fraction(delta)


# -- search nodes --------------------------------------------------------------


@dataclass(eq=False)
class PlanNode:
    state: VoxelGrid
    parent: "PlanNode | None"
    action: ActionOutcome | None
    deposited: int
    removed: int
    deficit: int
    excess: int
    depth: int
    g: float
    h: float
    f_w: float
    key: tuple = ()

    @classmethod
    def make(cls, state, parent, action, deposited, removed, target, cfg, key=()):
        deficit, excess = _deficit_excess(state, target)
        unit = state.spacing ** 3
        g = unit * (cfg.c_am * deposited + cfg.c_sm * removed)
        h = unit * (cfg.c_am * deficit + cfg.c_sm * excess)
        depth = 0 if parent is None else parent.depth + 1
        return cls(state, parent, action, deposited, removed, deficit, excess, depth,
                   g, h, g + (1 + cfg.w) * h, key)

    def path(self) -> list["PlanNode"]:
        out, n = [], self
        while n is not None:
            out.append(n)
            n = n.parent
        return out[::-1]

    def error(self, target_count: int) -> Fraction:
        return relative_error_counts(self.deficit, self.excess, target_count)


@dataclass
class ProcessPlan:
    found: bool
    nodes: list[PlanNode]
    target_count: int
    lower_bound: float
    expansions: int = 0
    rounds: int = 0
    wall_time: float = 0.0
    reason: str = ""
    pruned: list[str] = field(default_factory=list)

    @property
    def actions(self) -> list[ActionOutcome]:
        return [n.action for n in self.nodes[1:]]

    @property
    def kinds(self) -> list[str]:
        return [a.kind for a in self.actions]

    @property
    def states(self) -> list[VoxelGrid]:
        return [n.state for n in self.nodes]

    @property
    def final(self) -> PlanNode:
        return self.nodes[-1]

    @property
    def total_cost(self) -> float:
        return self.final.g

    @property
    def objective(self) -> float:
        """f_w at the final node: the quantity the search minimizes."""
        return self.final.f_w

    @property
    def final_error(self) -> Fraction:
        return self.final.error(self.target_count)

    @property
    def waste_ratio(self) -> float:
        if self.lower_bound == 0:
            return 0.0
        return (self.total_cost - self.lower_bound) / self.lower_bound

    def report(self, cfg: PlannerConfig, snapshots: Sequence[str] | None = None) -> dict:
        steps = []
        for i, node in enumerate(self.nodes[1:], start=1):
            a = node.action
            steps.append({
                "kind": a.kind, "rotation": a.orientation.index, "tool": a.tool,
                "S": list(a.delta_volumes), "iterations": a.iterations,
                "g": node.g, "h": node.h, "f_w": node.f_w,
                "snapshot": None if snapshots is None else snapshots[i],
            })
        return {
            "config": cfg.echo(),
            "status": "found" if self.found else "unmanufacturable",
            "reason": self.reason,
            "initial_snapshot": None if snapshots is None else snapshots[0],
            "steps": steps,
            "totals": {
                "cost": self.total_cost, "lower_bound": self.lower_bound,
                "waste_ratio": self.waste_ratio, "final_relative_error": float(self.final_error),
                "node_expansions": self.expansions, "deepening_rounds": self.rounds,
                "wall_time": self.wall_time,
            },
        }


# -- search --------------------------------------------------------------------


class Planner:
    """Holds the target, config and a per-state cache of evaluated children."""

    def __init__(self, target: VoxelGrid, cfg: PlannerConfig):
        if target.count == 0:
            raise ValueError("target is empty")
        self.target = target
        self.cfg = cfg
        self.expansions = 0
        self.pruned: list[str] = []
        self.bounds: list[float] = []
        self._cache: dict[bytes, list[tuple[tuple, ActionOutcome]]] = {}

    def root(self, state: VoxelGrid) -> PlanNode:
        self.target.check_compatible(state)
        return PlanNode.make(state, None, None, 0, 0, self.target, self.cfg)

    def is_goal(self, node: PlanNode) -> bool:
        return node.error(self.target.count) < _delta_fraction(self.cfg.delta)

    def _jobs(self, state: VoxelGrid) -> list[tuple[tuple, str, Tool, Orientation]]:
        t = self.target.occ
        if not np.any(state.occ & ~t):
            kinds = AM_KINDS
        elif not np.any(t & ~state.occ):
            kinds = SM_KINDS
        else:
            kinds = KINDS
        jobs = []
        for ri, r in enumerate(self.cfg.rotations):
            for kind in kinds:
                tools = self.cfg.am_tools if kind in AM_KINDS else self.cfg.sm_tools
                for ti, tool in enumerate(tools):
                    jobs.append(((ri, KINDS.index(kind), ti), kind, tool, Orientation(r)))
        return jobs

    def _run(self, state, job):
        key, kind, tool, R = job
        try:
            out = apply_action(kind, self.target, state, tool, R,
                               cap=self.cfg.sm_iteration_cap,
                               full_queries=self.cfg.uc_full_queries,
                               shadow_corrected=self.cfg.of_shadow_corrected)
        except (ConvergenceError, ActionContractError, ValueError) as exc:
            return key, None, f"{kind}/R{R.index}/{tool.name}: {exc}"
        return key, out, None

    def outcomes(self, state: VoxelGrid) -> list[tuple[tuple, ActionOutcome]]:
        h = digest(state)
        cached = self._cache.get(h)
        if cached is not None:
            return cached
        jobs = self._jobs(state)
        if self.cfg.workers > 1:
            with ThreadPoolExecutor(self.cfg.workers) as ex:
                results = list(ex.map(lambda j: self._run(state, j), jobs))
        else:
            results = [self._run(state, j) for j in jobs]
        kept = []
        for key, out, err in results:
            if err is not None:
                log.info("pruned child %s", err)
                self.pruned.append(err)
            elif out.output == state:
                continue
            else:
                kept.append((key, out))
        self._cache[h] = kept
        return kept

    def expand(self, node: PlanNode) -> list[PlanNode]:
        self.expansions += 1
        children = []
        for key, out in self.outcomes(node.state):
            s1, s2, s3, s4 = out.changes
            children.append(PlanNode.make(out.output, node, out, node.deposited + s1 + s2,
                                          node.removed + s3 + s4, self.target, self.cfg, key))
        children.sort(key=lambda c: (c.f_w, c.key))
        return children

    def search(self, initial: VoxelGrid) -> ProcessPlan:
        start = time.perf_counter()
        cfg = self.cfg
        root = self.root(initial)
        tc = self.target.count
        best = [root]

        def better(n: PlanNode) -> bool:
            b = best[0]
            return (n.error(tc), n.g) < (b.error(tc), b.g)

        def plan(node, found, reason, rounds):
            return ProcessPlan(found, node.path(), tc, root.h, self.expansions, rounds,
                               time.perf_counter() - start, reason, list(self.pruned))

        if self.is_goal(root):
            return plan(root, True, "", 0)

        limit_hit = [False]

        def dfs(node: PlanNode, bound: float, on_path: set) -> tuple[PlanNode | None, float]:
            if node.f_w > bound + REL_TOL * max(1.0, abs(bound)):
                return None, node.f_w
            if better(node):
                best[0] = node
            if self.is_goal(node):
                return node, node.f_w
            if node.depth >= cfg.max_depth:
                return None, math.inf
            if cfg.max_expansions is not None and self.expansions >= cfg.max_expansions:
                limit_hit[0] = True
                return None, math.inf
            smallest = math.inf
            for child in self.expand(node):
                h = digest(child.state)
                if h in on_path:
                    continue
                on_path.add(h)
                found, t = dfs(child, bound, on_path)
                on_path.discard(h)
                if found is not None:
                    return found, t
                smallest = min(smallest, t)
            return None, smallest

        bound = root.f_w
        rounds = 0
        while True:
            rounds += 1
            self.bounds.append(bound)
            found, nxt = dfs(root, bound, {digest(root.state)})
            if found is not None:
                return plan(found, True, "", rounds)
            if limit_hit[0]:
                return plan(best[0], False, "expansion limit reached", rounds)
            if math.isinf(nxt):
                return plan(best[0], False, "no expandable nodes within depth limit", rounds)
            if rounds >= cfg.max_rounds:
                return plan(best[0], False, "deepening round limit reached", rounds)
            assert nxt > bound
            log.debug("IDA* round %d: bound %.6g -> %.6g", rounds, bound, nxt)
            bound = nxt


def expand_children(node: PlanNode, target: VoxelGrid, cfg: PlannerConfig) -> list[PlanNode]:
    return Planner(target, cfg).expand(node)


def ida_star(initial: VoxelGrid, target: VoxelGrid, cfg: PlannerConfig) -> ProcessPlan:
    return Planner(target, cfg).search(initial)


__all__ = ["DEFAULT_ROTATIONS", "PlannerConfig", "PlanNode", "ProcessPlan", "DeltaCost",
           "Planner", "heuristic_cost", "transition_cost", "delta_cost_decomposition",
           "relative_error", "relative_error_counts", "is_goal", "expand_children", "ida_star"]
