import json

import pytest

from sepcon.cli import main


def _write(path, obj):
    path.write_text(json.dumps(obj), encoding="utf-8")
    return str(path)


@pytest.fixture
def sign_plan(tmp_path):
    spec = _write(
        tmp_path / "build.json",
        {
            "command": "build",
            "seed": 3,
            "build": {
                "kind": "diagonal",
                "tower": {"rank": 1, "family": {"kind": "gallery", "name": "sign"}},
                "n": 2,
            },
            "cutoffs": {"tower_depth": 14},
            "out": str(tmp_path / "plan.json"),
        },
    )
    assert main(["build", "--spec", spec]) == 0
    return tmp_path / "plan.json", spec


def test_build_writes_plan_with_meta(sign_plan, capsys):
    plan_path, _ = sign_plan
    payload = json.loads(plan_path.read_text())
    assert payload["meta"]["seed"] == 3
    assert len(payload["meta"]["spec_sha256"]) == 64
    assert payload["sepfn"]["plan"]["kind"] == "base_blend"
    radii = payload["sepfn"]["plan"]["schedule"]["radii"]
    assert radii[0] == 0.25  # sign schedule hand value


def test_eval_points_csv(sign_plan, tmp_path, capsys):
    plan_path, _ = sign_plan
    spec = _write(
        tmp_path / "eval.json",
        {
            "command": "eval",
            "seed": 3,
            "eval": {
                "plan": str(plan_path),
                "points": [[0.5, 0.3], [9.0, 0.0]],
                "schedule": {"cutoffs": [64]},
            },
            "out": str(tmp_path / "vals.csv"),
        },
    )
    assert main(["eval", "--spec", spec]) == 0
    lines = (tmp_path / "vals.csv").read_text().strip().split("\n")
    assert lines[0].startswith("# ")
    assert lines[1] == "x1,x2,value,err_bound,cauchy,depth_exhausted,status"
    first = lines[2].split(",")
    assert abs(float(first[2]) - 0.65) < 1e-12
    # out-of-domain row flagged, run continues
    assert lines[3].endswith("outside-domain")


def test_eval_grid_row_major(sign_plan, tmp_path):
    plan_path, _ = sign_plan
    spec = _write(
        tmp_path / "grid.json",
        {
            "command": "eval",
            "eval": {
                "plan": str(plan_path),
                "grid": {"counts": [3, 3]},
                "schedule": {"cutoffs": [32]},
            },
            "out": str(tmp_path / "grid.csv"),
        },
    )
    assert main(["eval", "--spec", spec]) == 0
    lines = (tmp_path / "grid.csv").read_text().strip().split("\n")
    assert len(lines) == 2 + 9
    # row-major: x1 varies slowest
    xs = [line.split(",")[0] for line in lines[2:]]
    assert xs == ["-1.0"] * 3 + ["0.0"] * 3 + ["1.0"] * 3
    # diagonal corner value is the tower limit
    row = lines[2].split(",")
    assert float(row[2]) == -1.0


def test_verify_pass_and_exit_codes(sign_plan, tmp_path):
    plan_path, _ = sign_plan
    spec = _write(
        tmp_path / "verify.json",
        {
            "command": "verify",
            "seed": 5,
            "verify": {
                "plan": str(plan_path),
                "suites": ["diagonal-agreement", "joint-oscillation"],
                "schedule": {"cutoffs": [64]},
            },
            "out": str(tmp_path / "report.json"),
        },
    )
    assert main(["verify", "--spec", spec]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["passed"]
    assert report["suites"]["joint-oscillation"]["verdict"] == "stalled"


def test_verify_mismatched_tower_fails(sign_plan, tmp_path):
    plan_path, _ = sign_plan
    spec = _write(
        tmp_path / "bad.json",
        {
            "command": "verify",
            "verify": {
                "plan": str(plan_path),
                "suites": ["diagonal-agreement"],
                "tower": {"rank": 1, "family": {"kind": "gallery", "name": "point-indicator"}},
                "schedule": {"cutoffs": [64]},
            },
            "out": str(tmp_path / "report.json"),
        },
    )
    assert main(["verify", "--spec", spec]) == 1


def test_input_error_exit_code(tmp_path):
    bad = tmp_path / "nope.json"
    bad.write_text("{not json", encoding="utf-8")
    assert main(["build", "--spec", str(bad)]) == 2
    missing_section = _write(tmp_path / "m.json", {"command": "build"})
    assert main(["build", "--spec", missing_section]) == 2


def test_byte_identical_reruns(sign_plan, tmp_path):
    plan_path, build_spec = sign_plan
    first = plan_path.read_bytes()
    assert main(["build", "--spec", build_spec]) == 0
    assert plan_path.read_bytes() == first


def test_gallery_listing(capsys):
    assert main(["gallery"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert {r["name"] for r in rows} == {
        "sign", "point-indicator", "step", "two-limit-indicator",
    }
    ranks = {r["name"]: r["rank"] for r in rows}
    assert ranks["two-limit-indicator"] == 2


def test_schema_prints_node_names(capsys):
    assert main(["schema"]) == 0
    out = capsys.readouterr().out
    schema = json.loads(out)
    assert "dist_to" in schema["expression"]["op"]
    assert "base_blend" in schema["sepfn_plan"]["plan"]["kind"]


def test_build_restriction_job(tmp_path, capsys):
    t = {"op": "coord", "coord": 0}
    cube = {"op": "mul", "args": [t, t, t]}
    pm = {"kind": "euclidean-box", "lo": [0.0], "hi": [1.0]}
    problem = {
        "factors": [pm, pm],
        "set": {
            "n": 2,
            "param_domain": {"lo": [0.0], "hi": [1.0]},
            "maps": [
                {"components": [{"model": pm, "expr": t}]},
                {"components": [{"model": pm, "expr": cube}]},
            ],
        },
        "g": {"rank": 1, "family": {"kind": "gallery", "name": "step"}},
        "mode": "theorem2",
        "cutoffs": {"s_cut": 4, "depth": 8, "grid": 33, "check_cutoff": 64},
    }
    spec = _write(
        tmp_path / "restr.json",
        {
            "command": "build",
            "seed": 1,
            "build": {"kind": "restriction", "problem": problem},
            "out": str(tmp_path / "rplan.json"),
        },
    )
    assert main(["build", "--spec", spec]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["report"]["within_tolerance"]
    payload = json.loads((tmp_path / "rplan.json").read_text())
    assert payload["sepfn"]["plan"]["kind"] == "pullback"
