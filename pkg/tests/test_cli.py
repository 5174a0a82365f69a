import json
import subprocess
import sys

import pytest

from hmplan.actions import apply_action
from hmplan.cli import main
from hmplan.gridkit import Orientation
from hmplan.io import load_tool, read_grid, write_grid
from hmplan.job import JobError, JobSpec, prepare_domain, strip_timing
from hmplan.mesh import box_mesh, write_mesh
from hmplan.planner import PlannerConfig
from hmplan.shapes import end_mill, staircase


def _plan(ws, out, *extra):
    return main(["plan", "--out", str(ws / out), *map(str, extra)])


def test_grounded_block_single_uf(workspace):
    ws = workspace
    assert _plan(ws, "o", "--target", ws / "block.hmvx", "--am-tool", ws / "nozzle.json") == 0
    rep = json.loads((ws / "o" / "plan.json").read_text())
    assert [s["kind"] for s in rep["steps"]] == ["UF"]
    assert rep["totals"]["final_relative_error"] == 0


def test_stock_with_sm_only_gives_oc_plan(workspace):
    ws = workspace
    code = _plan(ws, "o", "--target", ws / "stairs.hmvx", "--initial", "stock:auto",
                 "--sm-tool", ws / "mill.json", "-w", 1, "--lambda", 0.1)
    assert code == 0
    rep = json.loads((ws / "o" / "plan.json").read_text())
    kinds = [s["kind"] for s in rep["steps"]]
    assert kinds and set(kinds) == {"OC"}
    summary = (ws / "o" / "summary.txt").read_text()
    assert "waste" in summary and "final error" in summary and "wall time" in summary


def test_unmanufacturable_exit_2(workspace):
    ws = workspace
    write_grid(staircase(), ws / "float.hmvx")
    code = _plan(ws, "o", "--target", ws / "float.hmvx", "--initial", "stock:auto",
                 "--sm-tool", ws / "mill.json", "--max-depth", 2)
    assert code == 2
    rep = json.loads((ws / "o" / "plan.json").read_text())
    assert rep["status"] == "unmanufacturable" and rep["reason"]


def test_missing_tool_exit_1_names_path(workspace, capsys, caplog):
    ws = workspace
    code = _plan(ws, "o", "--target", ws / "block.hmvx", "--am-tool", ws / "nope.json")
    assert code == 1
    assert "nope.json" in caplog.text + capsys.readouterr().err
    assert not (ws / "o").exists()


def test_bad_inputs_exit_1(workspace, capsys):
    ws = workspace
    (ws / "junk.hmvx").write_bytes(b"JUNKJUNK")
    assert _plan(ws, "o", "--target", ws / "junk.hmvx", "--am-tool", ws / "nozzle.json") == 1
    assert _plan(ws, "o", "--target", ws / "block.hmvx") == 1
    assert _plan(ws, "o", "--target", ws / "block.hmvx", "--am-tool", ws / "nozzle.json",
                 "--rotations", "0,99") == 1
    assert _plan(ws, "o", "--target", ws / "block.hmvx", "--am-tool", ws / "mill.json") == 1
    write_mesh(box_mesh(), ws / "cube.stl")
    assert _plan(ws, "o", "--target", ws / "cube.stl", "--am-tool", ws / "nozzle.json") == 1


def test_snapshot_chain_replays(workspace):
    ws = workspace
    assert _plan(ws, "o", "--target", ws / "bracket.hmvx", "--am-tool", ws / "nozzle.json",
                 "--sm-tool", ws / "mill.json", "--lambda", 0.1, "--max-depth", 6) == 0
    out = ws / "o"
    rep = json.loads((out / "plan.json").read_text())
    tools = {t.name: t for t in (load_tool(ws / "nozzle.json"), load_tool(ws / "mill.json"))}
    target = read_grid(out / rep["target_snapshot"])
    state = read_grid(out / rep["initial_snapshot"])
    assert len(rep["steps"]) >= 2
    for step in rep["steps"]:
        nxt = apply_action(step["kind"], target, state, tools[step["tool"]],
                           Orientation(step["rotation"]))
        snap = read_grid(out / step["snapshot"])
        assert nxt.output == snap
        state = snap


def test_voxelize_and_inspect(workspace, capsys):
    ws = workspace
    write_mesh(box_mesh((0, 0, 0), (2, 1, 1)), ws / "bar.stl")
    assert main(["voxelize", "--target", str(ws / "bar.stl"), "--resolution", "8",
                 "--out", str(ws / "bar.hmvx")]) == 0
    g = read_grid(ws / "bar.hmvx")
    assert g.dims == (8, 4, 4) and g.count == 128
    capsys.readouterr()
    assert main(["inspect", str(ws / "bar.hmvx")]) == 0
    assert json.loads(capsys.readouterr().out)["voxels"] == 128
    assert main(["inspect", str(ws / "mill.json")]) == 0
    assert json.loads(capsys.readouterr().out)["kind"] == "sm"
    assert main(["inspect", str(ws / "missing.hmvx")]) == 1


def test_mesh_target_plan(workspace):
    ws = workspace
    write_mesh(box_mesh((0, 0, 0), (2, 2, 1)), ws / "slab.stl")
    code = _plan(ws, "o", "--target", ws / "slab.stl", "--resolution", 6,
                 "--am-tool", ws / "nozzle.json", "--dump-states", "--seed-free")
    # spacing of the voxelized mesh (1/3) differs from the tools' unit spacing
    assert code == 1
    write_mesh(box_mesh((0, 0, 0), (6, 6, 3)), ws / "slab.stl")
    code = _plan(ws, "o", "--target", ws / "slab.stl", "--resolution", 6,
                 "--am-tool", ws / "nozzle.json", "--dump-states")
    assert code == 0
    assert (ws / "o" / "deficit_000.hmvx").exists() and (ws / "o" / "excess_001.hmvx").exists()


def test_prepare_domain_rests_on_floor_and_stock_contains_target():
    t = staircase()
    placed, stock = prepare_domain(t, [end_mill(3, 3, 8)])
    assert placed.count == t.count
    assert placed.occ[:, :, 0].any()
    assert placed.issubset(stock)
    assert len(set(placed.dims)) == 1


def test_jobspec_validation():
    with pytest.raises(JobError):
        JobSpec(target="part.stl", out="o", am_tools=["a.json"])
    with pytest.raises(JobError):
        JobSpec(target="part.hmvx", out="o")


def test_two_runs_are_identical(workspace):
    ws = workspace
    args = ["--target", ws / "bracket.hmvx", "--am-tool", ws / "nozzle.json",
            "--sm-tool", ws / "mill.json", "--max-depth", 6]
    assert _plan(ws, "a", *args) == _plan(ws, "b", *args) == 0
    ra = json.loads((ws / "a" / "plan.json").read_text())
    rb = json.loads((ws / "b" / "plan.json").read_text())
    assert strip_timing(ra) == strip_timing(rb)
    for name in sorted(p.name for p in (ws / "a").glob("*.hmvx")):
        assert (ws / "a" / name).read_bytes() == (ws / "b" / name).read_bytes()


def test_console_script_runs():
    r = subprocess.run([sys.executable, "-m", "hmplan.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "voxelize" in r.stdout and "inspect" in r.stdout
