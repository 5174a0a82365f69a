"""Manufacturing actions: over-cut, under-cut, under-fill and over-fill.

SM actions solve a self-referencing set equation by fixed-point iteration,
with the obstacle started at ``input & target``. AM actions use the input
state as the obstacle and need no iteration.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .access import AM, SM, Tool, accessible_region, inaccessible_region
from .collateral import _OverlapField, collateral_region
from .gridkit import Orientation, VoxelGrid
from .support import BuildFrame, max_self_supported, min_self_supported

log = logging.getLogger(__name__)

OC, UC, UF, OF = "OC", "UC", "UF", "OF"
KINDS = (OC, UC, UF, OF)
SM_KINDS = (OC, UC)
AM_KINDS = (UF, OF)

ITERATION_CAP = 100


class ConvergenceError(RuntimeError):
    def __init__(self, kind: str, iterations: int, last_change: float):
        self.kind, self.iterations, self.last_change = kind, iterations, last_change
        super().__init__(f"{kind} did not converge in {iterations} iterations; "
                         f"last iterate changed by volume {last_change:g}")


class ActionContractError(RuntimeError):
    pass


def change_counts(prev: VoxelGrid, nxt: VoxelGrid, target: VoxelGrid) -> tuple[int, int, int, int]:
    """Voxel counts of S1..S4: deposited in/out of target, removed in/out of target."""
    added = nxt.occ & ~prev.occ
    removed = prev.occ & ~nxt.occ
    t = target.occ
    return (int(np.count_nonzero(added & t)), int(np.count_nonzero(added & ~t)),
            int(np.count_nonzero(removed & t)), int(np.count_nonzero(removed & ~t)))


@dataclass(frozen=True, eq=False)
class ActionOutcome:
    kind: str
    orientation: Orientation
    tool: str
    output: VoxelGrid
    changes: tuple[int, int, int, int]
    iterations: int = 0
    converged: bool = True
    residual_deficit: int = 0
    history: tuple[int, ...] = field(default=(), repr=False)

    @property
    def delta_volumes(self) -> tuple[float, float, float, float]:
        v = self.output.spacing ** 3
        return tuple(c * v for c in self.changes)  # type: ignore[return-value]


def _require(tool: Tool, kind: str, action: str):
    if tool.kind != kind:
        raise ValueError(f"{action} needs an {kind.upper()} tool, got {tool.name!r} ({tool.kind})")


def _check(cond: bool, msg: str):
    if not cond:
        raise ActionContractError(msg)


def over_cut(target: VoxelGrid, input: VoxelGrid, tool: Tool, R: Orientation,
             cap: int = ITERATION_CAP) -> ActionOutcome:
    """Remove as much excess as the tool can reach without cutting into the target.

    Iterates O <- input - A(O) from O = input & target; the obstacle grows
    monotonically until it stops changing.
    """
    _require(tool, SM, "over_cut")
    target.check_compatible(input)
    obstacle = input & target
    history = [obstacle.count]
    for it in range(1, cap + 1):
        nxt = input - accessible_region(obstacle, tool, R)
        history.append(nxt.count)
        if nxt == obstacle:
            break
        last_change = np.count_nonzero(nxt.occ ^ obstacle.occ) * input.spacing ** 3
        obstacle = nxt
    else:
        raise ConvergenceError(OC, cap, last_change)
    out = obstacle
    _check(out.issubset(input), "OC output is not contained in its input")
    _check((input - out).isdisjoint(target), "OC removed target material")
    return ActionOutcome(OC, R, tool.name, out, change_counts(input, out, target),
                         iterations=it, history=tuple(history))


def under_cut(target: VoxelGrid, input: VoxelGrid, tool: Tool, R: Orientation,
              cap: int = ITERATION_CAP, full_queries: bool = False) -> ActionOutcome:
    """Remove all excess plus the minimal-collision collateral that makes it reachable.

    Iterates O <- O - C(O) from O = input & target. Queries are the
    inaccessible excess voxels unless ``full_queries`` asks for every
    inaccessible voxel.
    """
    _require(tool, SM, "under_cut")
    target.check_compatible(input)
    excess = input - target
    obstacle = input & target
    field_cache = _OverlapField(target, tool, R)
    history = [obstacle.count]
    for it in range(1, cap + 1):
        queries = inaccessible_region(obstacle, tool, R)
        if not full_queries:
            queries = queries & excess
        damage = collateral_region(obstacle, target, tool, R, queries=queries, field=field_cache)
        nxt = obstacle - damage
        history.append(nxt.count)
        if nxt == obstacle:
            break
        last_change = np.count_nonzero(nxt.occ ^ obstacle.occ) * input.spacing ** 3
        obstacle = nxt
    else:
        raise ConvergenceError(UC, cap, last_change)
    out = obstacle
    _check(out.issubset(target), "UC output is not contained in the target")
    _check(out.issubset(input), "UC output is not contained in its input")
    return ActionOutcome(UC, R, tool.name, out, change_counts(input, out, target),
                         iterations=it, history=tuple(history))


def supported_accessible(input: VoxelGrid, tool: Tool, frame: BuildFrame) -> VoxelGrid:
    """Largest self-supporting part of the AM-accessible region, resting on the input's shadow."""
    _require(tool, AM, "supported_accessible")
    shadow = min_self_supported(input, frame)
    acc = accessible_region(input, tool, frame.orientation)
    return max_self_supported(shadow | acc, frame) - shadow


def _am_outcome(kind, target, input, out, tool, frame) -> ActionOutcome:
    _check(input.issubset(out), f"{kind} output does not contain its input")
    residual = int(np.count_nonzero(target.occ & ~out.occ))
    return ActionOutcome(kind, frame.orientation, tool.name, out,
                         change_counts(input, out, target), residual_deficit=residual)


def under_fill(target: VoxelGrid, input: VoxelGrid, tool: Tool,
               frame: BuildFrame) -> ActionOutcome:
    """Deposit the largest reachable, self-supporting part of the deficit; nothing outside the target."""
    target.check_compatible(input)
    shadow = min_self_supported(input, frame)
    reachable = target & supported_accessible(input, tool, frame)
    deposit = max_self_supported(reachable | shadow, frame) - shadow
    out = input | deposit
    _check((out - input).issubset(target), "UF deposited outside the target")
    return _am_outcome(UF, target, input, out, tool, frame)


def over_fill(target: VoxelGrid, input: VoxelGrid, tool: Tool, frame: BuildFrame,
              shadow_corrected: bool = True) -> ActionOutcome:
    """Deposit all reachable deficit plus the sacrificial columns that support it.

    With ``shadow_corrected`` (the default) support is not grown into the
    region already shadowed by the input; without it the plain shadow-fill of
    the reachable deficit is deposited.
    """
    target.check_compatible(input)
    reachable = target & supported_accessible(input, tool, frame)
    if shadow_corrected:
        shadow = min_self_supported(input, frame)
        deposit = min_self_supported(reachable | shadow, frame) - shadow
    else:
        deposit = min_self_supported(reachable, frame)
    out = input | deposit
    return _am_outcome(OF, target, input, out, tool, frame)


def apply_action(kind: str, target: VoxelGrid, state: VoxelGrid, tool: Tool, R: Orientation,
                 **options) -> ActionOutcome:
    """Dispatch one action by kind name."""
    if kind == OC:
        return over_cut(target, state, tool, R, cap=options.get("cap", ITERATION_CAP))
    if kind == UC:
        return under_cut(target, state, tool, R, cap=options.get("cap", ITERATION_CAP),
                         full_queries=options.get("full_queries", False))
    frame = BuildFrame(R)
    if kind == UF:
        return under_fill(target, state, tool, frame)
    if kind == OF:
        return over_fill(target, state, tool, frame,
                         shadow_corrected=options.get("shadow_corrected", True))
    raise ValueError(f"unknown action kind {kind!r}")


__all__ = ["OC", "UC", "UF", "OF", "KINDS", "SM_KINDS", "AM_KINDS", "ConvergenceError",
           "ActionContractError", "ActionOutcome", "change_counts", "over_cut", "under_cut",
           "supported_accessible", "under_fill", "over_fill", "apply_action"]
