"""Job description, work-domain preparation and the plan runner used by the CLI."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .access import Tool
from .gridkit import GridMismatchError, VoxelGrid
from .io import GridFormatError, ToolFileError, load_tool, read_grid, write_grid
from .mesh import MeshError, read_mesh, voxelize
from .planner import DEFAULT_ROTATIONS, Planner, PlannerConfig, ProcessPlan

log = logging.getLogger(__name__)

EXIT_FOUND, EXIT_INPUT_ERROR, EXIT_UNMANUFACTURABLE = 0, 1, 2
MESH_SUFFIXES = (".stl",)
TIMING_FIELDS = ("wall_time",)


class JobError(ValueError):
    """Bad job input; maps to exit status 1."""


@dataclass
class JobSpec:
    target: str
    out: str
    initial: str = "empty"
    am_tools: list[str] = field(default_factory=list)
    sm_tools: list[str] = field(default_factory=list)
    resolution: int | None = None
    c_am: float = 1.0
    c_sm: float = 0.1
    w: float = 1.0
    delta: float = 0.01
    rotations: tuple[int, ...] = DEFAULT_ROTATIONS
    max_depth: int = 12
    max_expansions: int | None = None
    workers: int = 1
    dump_states: bool = False

    def __post_init__(self):
        if not self.target:
            raise JobError("a target source is required")
        if self.target.lower().endswith(MESH_SUFFIXES) and not self.resolution:
            raise JobError(f"target {self.target} is a mesh: --resolution is required")
        if not self.am_tools and not self.sm_tools:
            raise JobError("at least one AM or SM tool is required")


def parse_rotations(text: str) -> tuple[int, ...]:
    if text in ("default", ""):
        return DEFAULT_ROTATIONS
    if text == "all":
        return tuple(range(24))
    try:
        rots = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise JobError(f"rotations must be 'default', 'all' or comma-separated indices, got {text!r}") from None
    if any(not 0 <= r < 24 for r in rots):
        raise JobError(f"rotation indices must be in [0, 24), got {text!r}")
    return rots


def load_target(source: str, resolution: int | None = None) -> VoxelGrid:
    path = Path(source)
    if not path.is_file():
        raise FileNotFoundError(f"target file not found: {path}")
    if path.suffix.lower() in MESH_SUFFIXES:
        return voxelize(read_mesh(path), resolution)
    return read_grid(path)


def _crop(grid: VoxelGrid) -> VoxelGrid:
    idx = np.argwhere(grid.occ)
    if len(idx) == 0:
        raise JobError("target grid is empty")
    lo, hi = idx.min(axis=0), idx.max(axis=0) + 1
    occ = grid.occ[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]
    origin = tuple(o + l * grid.spacing for o, l in zip(grid.origin, lo))
    return VoxelGrid(occ, grid.spacing, origin)


def stock_margin(tools: list[Tool]) -> int:
    """Largest active-part extent among the SM tools, in voxels."""
    m = 0
    for t in tools:
        ext = np.ptp(t.active_offsets(), axis=0) + 1
        m = max(m, int(ext.max()))
    return m


def prepare_domain(target: VoxelGrid, sm_tools: list[Tool]) -> tuple[VoxelGrid, VoxelGrid]:
    """Place the target in a cubic work domain and build the default stock.

    The target rests on the z = 0 layer, centered in x and y. The stock is the
    target's bounding box grown by one SM tool extent sideways and upwards; the
    cube is just big enough to hold it.
    """
    part = _crop(target)
    m = stock_margin(sm_tools)
    dims = np.asarray(part.dims)
    stock_dims = dims + np.array([2 * m, 2 * m, m])
    n = int(stock_dims.max())
    lo = [(n - dims[0]) // 2, (n - dims[1]) // 2, 0]
    occ = np.zeros((n, n, n), dtype=bool)
    occ[lo[0]:lo[0] + dims[0], lo[1]:lo[1] + dims[1], :dims[2]] = part.occ
    origin = tuple(o - l * part.spacing for o, l in zip(part.origin, lo))
    placed = VoxelGrid(occ, part.spacing, origin)
    slo = [lo[0] - m, lo[1] - m, 0]
    stock = np.zeros_like(occ)
    stock[max(slo[0], 0):lo[0] + dims[0] + m, max(slo[1], 0):lo[1] + dims[1] + m,
          :dims[2] + m] = True
    return placed, placed.like(stock)


def load_job_inputs(job: JobSpec):
    """Read and validate every input before any planning starts."""
    am = [load_tool(p) for p in job.am_tools]
    sm = [load_tool(p) for p in job.sm_tools]
    for t in am:
        if t.kind != "am":
            raise JobError(f"{t.name!r} was given as an AM tool but is kind {t.kind!r}")
    for t in sm:
        if t.kind != "sm":
            raise JobError(f"{t.name!r} was given as an SM tool but is kind {t.kind!r}")
    target = load_target(job.target, job.resolution)
    for t in am + sm:
        if t.passive.spacing != target.spacing:
            raise JobError(f"tool {t.name!r} spacing {t.passive.spacing} differs from the target's "
                           f"{target.spacing}")
    if job.initial in ("empty", "stock:auto"):
        target, stock = prepare_domain(target, sm)
        initial = stock if job.initial == "stock:auto" else target.like(np.zeros(target.dims, bool))
    else:
        path = Path(job.initial)
        if not path.is_file():
            raise FileNotFoundError(f"initial state file not found: {path}")
        initial = read_grid(path)
        target.check_compatible(initial)
    cfg = PlannerConfig(c_am=job.c_am, c_sm=job.c_sm, w=job.w, delta=job.delta,
                        rotations=job.rotations, am_tools=tuple(am), sm_tools=tuple(sm),
                        max_depth=job.max_depth, max_expansions=job.max_expansions,
                        workers=job.workers)
    return target, initial, cfg


def _summary(plan: ProcessPlan, cfg: PlannerConfig, snapshots: list[str]) -> str:
    lines = [f"status: {'plan found' if plan.found else 'unmanufacturable within limits'}"]
    if plan.reason:
        lines.append(f"reason: {plan.reason}")
    lines.append(f"lambda = {cfg.lam:g}, w = {cfg.w:g}, delta = {cfg.delta:g}")
    lines.append(f"target voxels: {plan.target_count}")
    lines.append("")
    lines.append(f"{'step':>4}  {'kind':<4} {'rot':>3}  {'tool':<16} {'deposited':>10} "
                 f"{'removed':>10} {'g':>12} {'f_w':>12}  snapshot")
    for i, node in enumerate(plan.nodes[1:], start=1):
        a = node.action
        s1, s2, s3, s4 = a.changes
        lines.append(f"{i:>4}  {a.kind:<4} {a.orientation.index:>3}  {a.tool:<16} {s1 + s2:>10} "
                     f"{s3 + s4:>10} {node.g:>12.6g} {node.f_w:>12.6g}  {snapshots[i]}")
    lines.append("")
    lines.append(f"cost: {plan.total_cost:.6g}  lower bound: {plan.lower_bound:.6g}")
    lines.append(f"waste: {100 * plan.waste_ratio:.2f} %")
    lines.append(f"final error: {100 * float(plan.final_error):.4f} % "
                 f"(deficit {plan.final.deficit}, excess {plan.final.excess} voxels)")
    lines.append(f"expansions: {plan.expansions}, deepening rounds: {plan.rounds}, "
                 f"wall time: {plan.wall_time:.2f} s")
    return "\n".join(lines) + "\n"


def write_plan(plan: ProcessPlan, cfg: PlannerConfig, target: VoxelGrid, out: Path,
               dump_states: bool = False) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    snapshots = []
    for i, state in enumerate(plan.states):
        name = f"state_{i:03d}.hmvx"
        write_grid(state, out / name)
        snapshots.append(name)
    write_grid(target, out / "target.hmvx")
    if dump_states:
        for i, state in enumerate(plan.states):
            write_grid(target - state, out / f"deficit_{i:03d}.hmvx")
            write_grid(state - target, out / f"excess_{i:03d}.hmvx")
    report = plan.report(cfg, snapshots)
    report["target_snapshot"] = "target.hmvx"
    (out / "plan.json").write_text(json.dumps(report, indent=2) + "\n")
    (out / "summary.txt").write_text(_summary(plan, cfg, snapshots))
    return report


def run_plan(job: JobSpec) -> int:
    """Plan a job and write its artifacts; returns the process exit status."""
    try:
        target, initial, cfg = load_job_inputs(job)
    except (FileNotFoundError, GridFormatError, ToolFileError, MeshError, GridMismatchError,
            JobError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT_ERROR
    plan = Planner(target, cfg).search(initial)
    write_plan(plan, cfg, target, Path(job.out), job.dump_states)
    log.info("%s after %d expansions", "plan found" if plan.found else plan.reason, plan.expansions)
    return EXIT_FOUND if plan.found else EXIT_UNMANUFACTURABLE


def strip_timing(report: dict) -> dict:
    """Copy of a plan report without wall-clock fields, for determinism checks."""
    out = json.loads(json.dumps(report))
    for k in TIMING_FIELDS:
        out["totals"].pop(k, None)
    return out


__all__ = ["JobSpec", "JobError", "EXIT_FOUND", "EXIT_INPUT_ERROR", "EXIT_UNMANUFACTURABLE",
           "parse_rotations", "load_target", "prepare_domain", "stock_margin", "load_job_inputs",
           "write_plan", "run_plan", "strip_timing"]
