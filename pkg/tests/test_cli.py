import csv
import json
import math

import numpy as np
import pytest
from PIL import Image

from rsorecon import __version__
from rsorecon.cli import main
from rsorecon.hill import OrbitParams, Trajectory, inclined_bounded_ic
from rsorecon.mesh import box, concatenate, save_obj, save_ply, uv_sphere


@pytest.fixture(autouse=True)
def in_tmp(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def tree(root):
    return sorted(str(p.relative_to(root)) for p in root.rglob("*"))


def outputs_bytes(manifest_path):
    doc = json.loads(open(manifest_path).read())
    return {p: open(p, "rb").read() for p in doc["outputs"]}


# -- gen-orbit --------------------------------------------------------------

def test_gen_orbit_first_row_is_inclined_state(in_tmp):
    assert main(["gen-orbit", "--x0", "40", "--inclined", "--duration", "period", "--out", "o/t.csv"]) == 0
    traj = Trajectory.from_csv("o/t.csv")
    n = OrbitParams().mean_motion
    assert np.array_equal(traj.states[0], inclined_bounded_ic(40.0, n).as_array())
    assert traj.times[-1] == pytest.approx(OrbitParams().period, rel=1e-15)
    doc = json.load(open("o/t.manifest.json"))
    assert doc["command"] == "gen-orbit" and doc["tool_version"] == __version__
    assert doc["config"]["geometry"] == "inclined"
    assert doc["wall_clock_s"] >= 0


def test_gen_orbit_zero_offset():
    assert main(["gen-orbit", "--x0", "0", "--out", "z.csv"]) == 0
    assert np.all(Trajectory.from_csv("z.csv").states == 0)


def test_gen_orbit_planar_ratio():
    assert main(["gen-orbit", "--planar", "--x0", "40", "--out", "p.csv"]) == 0
    s = Trajectory.from_csv("p.csv").states
    assert abs(np.abs(s[:, 1]).max() / np.abs(s[:, 0]).max() - 2) < 1e-6


def test_gen_orbit_rk4_matches_closed_form():
    assert main(["gen-orbit", "--integrator", "rk4", "--dt", "1", "--out", "r.csv"]) == 0
    assert main(["gen-orbit", "--dt", "1", "--out", "c.csv"]) == 0
    a, b = Trajectory.from_csv("r.csv"), Trajectory.from_csv("c.csv")
    assert np.abs(a.positions - b.positions).max() < 1e-3


@pytest.mark.parametrize("argv", [
    ["gen-orbit", "--dt", "-1"],
    ["gen-orbit", "--duration", "soon"],
    ["gen-orbit", "--x0", "nan"],
    ["gen-orbit", "--planar", "--inclined"],
    ["gen-orbit", "--altitude-km", "0"],
    ["gen-dataset", "--frames", "1"],
    ["gen-dataset", "--tumble-axis", "0,0,0"],
    ["gen-dataset", "--tumble-rate-deg-s", "-2"],
    ["eval-mesh", "--ref", "x.obj"],
    ["eval-images", "--gt", "g"],
    ["no-such-command"],
    [],
])
def test_usage_errors_exit_2(argv, capsys):
    assert main(argv) == 2
    assert "usage" in capsys.readouterr().err


# -- gen-dataset ------------------------------------------------------------

def test_gen_dataset_tumble_track(in_tmp):
    assert main(["gen-dataset", "--frames", "21", "--tumble-rate-deg-s", "3", "--tumble-axis", "z",
                 "--out-dir", "ds"]) == 0
    assert tree(in_tmp) == ["ds", "ds/ground_truth.csv", "ds/manifest.json", "ds/transforms.json"]
    rows = list(csv.DictReader(open("ds/ground_truth.csv")))
    for r in rows:
        half = math.radians(3.0) * float(r["t"]) / 2
        q = np.array([float(r[k]) for k in ("rso_qw", "rso_qx", "rso_qy", "rso_qz")])
        assert np.abs(q - [math.cos(half), 0, 0, math.sin(half)]).max() < 1e-12
    doc = json.load(open("ds/transforms.json"))
    assert len(doc["frames"]) == 21


def test_gen_dataset_static_scene():
    assert main(["gen-dataset", "--frames", "5", "--tumble-rate-deg-s", "0", "--out-dir", "s"]) == 0
    for r in csv.DictReader(open("s/ground_truth.csv")):
        assert [float(r[k]) for k in ("rso_qw", "rso_qx", "rso_qy", "rso_qz")] == [1, 0, 0, 0]


def test_gen_dataset_deterministic():
    args = ["gen-dataset", "--frames", "30", "--seed", "5", "--fov-deg", "50", "--width", "640"]
    assert main(args + ["--out-dir", "a"]) == 0
    assert main(args + ["--out-dir", "b"]) == 0
    for name in ("transforms.json", "ground_truth.csv"):
        assert open(f"a/{name}", "rb").read() == open(f"b/{name}", "rb").read()
    assert json.load(open("a/manifest.json"))["seed"] == 5


def test_gen_dataset_config_file_and_overrides():
    with open("c.toml", "w") as fh:
        fh.write('frame_count = 9\ntumble_axis = "x"\nhorizontal_fov_deg = 30\n')
    assert main(["gen-dataset", "--config", "c.toml", "--fov-deg", "45", "--out-dir", "d"]) == 0
    doc = json.load(open("d/transforms.json"))
    assert len(doc["frames"]) == 9
    assert doc["camera_angle_x"] == pytest.approx(math.radians(45))


def test_gen_dataset_bad_config_key(capsys):
    with open("c.toml", "w") as fh:
        fh.write("frame_count = 9\nframe_rate = 30\n")
    assert main(["gen-dataset", "--config", "c.toml", "--out-dir", "d"]) == 1
    assert "frame_rate" in capsys.readouterr().err


def test_gen_dataset_default_seed_recorded():
    assert main(["gen-dataset", "--frames", "3", "--out-dir", "d"]) == 0
    assert json.load(open("d/manifest.json"))["seed"] == 0


# -- eval-mesh --------------------------------------------------------------

@pytest.fixture
def meshes(in_tmp):
    body = uv_sphere(1.0, 24, 48)
    part = box((0.25, 0.25, 0.25), center=(2.0, 0, 0))
    save_ply(concatenate(body, part), "ref.ply", binary=True)
    save_obj(body, "recon.obj")
    return part.area / (body.area + part.area)


def test_eval_mesh_identical(meshes):
    assert main(["eval-mesh", "--recon", "ref.ply", "--ref", "ref.ply", "--samples", "3000",
                 "--fit", "gaussian", "--out-dir", "e"]) == 0
    doc = json.load(open("e/report.json"))
    for key in ("recon->ref", "ref->recon"):
        st = doc[key]["stats"]
        assert abs(st["min"]) < 1e-9 and abs(st["max"]) < 1e-9
    assert doc["coverage"]["flagged_fraction"] == 0.0


def test_eval_mesh_missing_component(meshes, in_tmp):
    assert main(["eval-mesh", "--recon", "recon.obj", "--ref", "ref.ply", "--samples", "20000",
                 "--fit", "both", "--out-dir", "e"]) == 0
    doc = json.load(open("e/report.json"))
    assert doc["coverage"]["flagged_fraction"] == pytest.approx(meshes, rel=0.2)
    assert abs(doc["recon->ref"]["stats"]["mean"]) < 1e-9
    assert set(doc["recon->ref"]["fits"]) == {"gaussian", "weibull"}
    assert {"mu", "sigma"} <= set(doc["recon->ref"]["fits"]["gaussian"])
    assert {"shape", "scale"} <= set(doc["ref->recon"]["fits"]["weibull"])
    assert tree(in_tmp / "e") == ["heatmap_recon_to_ref.ply", "heatmap_ref_to_recon.ply",
                                  "histogram_recon_to_ref.csv", "histogram_ref_to_recon.csv",
                                  "manifest.json", "report.json"]


def test_eval_mesh_one_direction_and_options(meshes):
    assert main(["eval-mesh", "--recon", "recon.obj", "--ref", "ref.ply", "--samples", "2000",
                 "--no-both-directions", "--normalize-by-diagonal", "--dump-distances",
                 "--missing-threshold", "0.05", "--out-dir", "e"]) == 0
    doc = json.load(open("e/report.json"))
    assert "ref->recon" not in doc
    assert doc["recon->ref"]["normalized_by"] > 0
    assert len(open("e/distances_recon_to_ref.csv").read().splitlines()) == 2001


def test_eval_mesh_umeyama_alignment(meshes):
    rng = np.random.default_rng(0)
    src = rng.normal(size=(8, 3))
    dst = 2.0 * src + [1.0, 0.0, 0.0]
    np.savetxt("corr.csv", np.hstack([src, dst]), delimiter=",")
    assert main(["eval-mesh", "--recon", "recon.obj", "--ref", "ref.ply", "--samples", "500",
                 "--align", "umeyama:corr.csv", "--out-dir", "e"]) == 0
    al = json.load(open("e/report.json"))["alignment"]
    assert al["scale"] == pytest.approx(2.0) and al["translation"][0] == pytest.approx(1.0)


def test_eval_mesh_icp_alignment(meshes):
    assert main(["eval-mesh", "--recon", "recon.obj", "--ref", "ref.ply", "--samples", "1000",
                 "--align", "icp", "--out-dir", "e"]) == 0
    assert json.load(open("e/report.json"))["alignment"]["scale"] == 1.0


def test_eval_mesh_bad_align_is_usage_error(meshes):
    assert main(["eval-mesh", "--recon", "recon.obj", "--ref", "ref.ply", "--align", "magic"]) == 2


def test_eval_mesh_parse_error_exit_1(meshes, capsys):
    with open("bad.obj", "w") as fh:
        fh.write("v 0 0 0\nv 1 0 oops\n")
    assert main(["eval-mesh", "--recon", "bad.obj", "--ref", "ref.ply", "--out-dir", "e"]) == 1
    assert "bad.obj:2" in capsys.readouterr().err


def test_eval_mesh_missing_file_exit_1(meshes):
    assert main(["eval-mesh", "--recon", "nope.obj", "--ref", "ref.ply", "--out-dir", "e"]) == 1


# -- eval-images ------------------------------------------------------------

def make_images(root, names, shape=(24, 24), seed=0):
    root.mkdir(exist_ok=True)
    rng = np.random.default_rng(seed)
    for n in names:
        Image.fromarray(rng.integers(0, 256, shape, dtype=np.uint8)).save(root / n)


def test_eval_images_identical(in_tmp):
    make_images(in_tmp / "r", ["b.png", "a.png"])
    make_images(in_tmp / "g", ["b.png", "a.png"])
    assert main(["eval-images", "--rendered", "r", "--gt", "g", "--out", "m/metrics.csv"]) == 0
    rows = list(csv.reader(open("m/metrics.csv")))
    assert [r[0] for r in rows[1:]] == ["a.png", "b.png", "MEAN"]
    assert all(r[2] == "1.0" for r in rows[1:])
    assert tree(in_tmp / "m") == ["metrics.csv", "metrics.manifest.json"]


def test_eval_images_partial_failure(in_tmp, capsys):
    make_images(in_tmp / "r", ["a.png", "b.png"])
    make_images(in_tmp / "g", ["a.png"])
    make_images(in_tmp / "g", ["b.png"], shape=(30, 24))
    assert main(["eval-images", "--rendered", "r", "--gt", "g", "--out", "m.csv"]) == 0
    assert "1 failure" in capsys.readouterr().out
    summary = json.load(open("m.manifest.json"))["config"]
    assert [f["filename"] for f in summary["failures"]] == ["b.png"]


def test_eval_images_empty_match_exit_1(in_tmp):
    make_images(in_tmp / "r", ["a.png"])
    make_images(in_tmp / "g", ["b.png"])
    assert main(["eval-images", "--rendered", "r", "--gt", "g", "--out", "m.csv"]) == 1


def test_eval_images_order_independent_of_workers(in_tmp):
    names = [f"{c}.png" for c in "qwertyuiop"]
    make_images(in_tmp / "r", names, seed=1)
    make_images(in_tmp / "g", names, seed=2)
    assert main(["eval-images", "--rendered", "r", "--gt", "g", "--out", "a.csv"]) == 0
    assert main(["eval-images", "--rendered", "r", "--gt", "g", "--out", "b.csv", "--workers", "4"]) == 0
    assert open("a.csv").read() == open("b.csv").read()


# -- manifests --------------------------------------------------------------

@pytest.mark.parametrize("argv, manifest", [
    (["gen-orbit", "--planar", "--dt", "5", "--out", "o/t.csv"], "o/t.manifest.json"),
    (["gen-dataset", "--frames", "12", "--seed", "3", "--out-dir", "ds"], "ds/manifest.json"),
    (["eval-mesh", "--recon", "recon.obj", "--ref", "ref.ply", "--samples", "1500", "--fit", "both",
      "--out-dir", "em"], "em/manifest.json"),
])
def test_replay_reproduces_outputs(argv, manifest, meshes):
    assert main(argv) == 0
    before = outputs_bytes(manifest)
    assert before
    assert main(["replay", manifest]) == 0
    assert outputs_bytes(manifest) == before


def test_replay_eval_images(in_tmp):
    make_images(in_tmp / "r", ["a.png", "b.png"], seed=3)
    make_images(in_tmp / "g", ["a.png", "b.png"], seed=4)
    assert main(["eval-images", "--rendered", "r", "--gt", "g", "--out", "m.csv"]) == 0
    before = outputs_bytes("m.manifest.json")
    assert main(["replay", "m.manifest.json"]) == 0
    assert outputs_bytes("m.manifest.json") == before


def test_replay_missing_manifest_exit_1():
    assert main(["replay", "nope.json"]) == 1
