"""Command line: ``hmplan voxelize | plan | inspect``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .io import GridFormatError, ToolFileError, load_tool, read_grid, write_grid
from .job import EXIT_INPUT_ERROR, JobError, JobSpec, parse_rotations, run_plan
from .mesh import MeshError, read_mesh, voxelize


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hmplan", description="Hybrid additive/subtractive process planner.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    vx = sub.add_parser("voxelize", help="voxelize a triangle mesh into an HMVX grid")
    vx.add_argument("--target", required=True, help="mesh file (ASCII or binary STL)")
    vx.add_argument("--resolution", type=int, required=True, help="voxels along the longest edge")
    vx.add_argument("--out", required=True, help="output HMVX path")

    pl = sub.add_parser("plan", help="search for a process plan")
    pl.add_argument("--target", required=True, help="target part: HMVX grid or STL mesh")
    pl.add_argument("--initial", default="empty", help="HMVX path, 'empty' or 'stock:auto'")
    pl.add_argument("--am-tool", action="append", default=[], help="AM tool JSON (repeatable)")
    pl.add_argument("--sm-tool", action="append", default=[], help="SM tool JSON (repeatable)")
    pl.add_argument("-w", type=float, default=1.0, help="heuristic weight (0 = optimal search)")
    pl.add_argument("--lambda", dest="lam", type=float, default=0.1,
                    help="cost ratio c_SM / c_AM, with c_AM = 1")
    pl.add_argument("--delta", type=float, default=0.01, help="relative error accepted as done")
    pl.add_argument("--resolution", type=int, help="voxelization resolution for mesh targets")
    pl.add_argument("--rotations", default="default",
                    help="'default' (7), 'all' (24) or comma-separated orientation indices")
    pl.add_argument("--max-depth", type=int, default=12)
    pl.add_argument("--max-expansions", type=int, default=None)
    pl.add_argument("--workers", type=int, default=1, help="threads for child evaluation")
    pl.add_argument("--out", required=True, help="output directory")
    pl.add_argument("--dump-states", action="store_true",
                    help="also write per-step deficit and excess grids")
    pl.add_argument("--seed-free", action="store_true",
                    help="accepted for compatibility; planning uses no randomness")

    ins = sub.add_parser("inspect", help="describe an HMVX grid, tool JSON or plan directory")
    ins.add_argument("path")
    return p


def _inspect(path: Path) -> dict:
    if path.is_dir():
        report = json.loads((path / "plan.json").read_text())
        return {"status": report["status"], "steps": [s["kind"] for s in report["steps"]],
                "totals": report["totals"]}
    if path.suffix == ".json":
        t = load_tool(path)
        return {"name": t.name, "kind": t.kind, "passive_voxels": t.passive.count,
                "active_voxels": len(t.active_offsets()), "sharp_points": len(t.sharp_points),
                "spacing": t.passive.spacing}
    g = read_grid(path)
    info = {"dims": list(g.dims), "spacing": g.spacing, "origin": list(g.origin),
            "pivot": list(g.pivot), "voxels": g.count}
    if g.count:
        idx = np.argwhere(g.occ)
        info["bbox"] = [idx.min(axis=0).tolist(), (idx.max(axis=0) + 1).tolist()]
    return info


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "voxelize":
            grid = voxelize(read_mesh(args.target), args.resolution)
            write_grid(grid, args.out)
            print(f"{args.out}: {grid.dims} voxels of {grid.spacing:g}, {grid.count} occupied")
            return 0
        if args.command == "inspect":
            print(json.dumps(_inspect(Path(args.path)), indent=2))
            return 0
        job = JobSpec(target=args.target, out=args.out, initial=args.initial,
                      am_tools=args.am_tool, sm_tools=args.sm_tool, resolution=args.resolution,
                      c_am=1.0, c_sm=args.lam, w=args.w, delta=args.delta,
                      rotations=parse_rotations(args.rotations), max_depth=args.max_depth,
                      max_expansions=args.max_expansions, workers=args.workers,
                      dump_states=args.dump_states)
    except (FileNotFoundError, GridFormatError, ToolFileError, MeshError, JobError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    status = run_plan(job)
    if status == EXIT_INPUT_ERROR:
        print("error: invalid job input (see log above)", file=sys.stderr)
    else:
        print((Path(args.out) / "summary.txt").read_text(), end="")
    return status


if __name__ == "__main__":
    sys.exit(main())
