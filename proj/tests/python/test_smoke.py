import numpy as np
import pytest

import vascuscan as vs


def test_ball_isosurface_is_a_sphere():
    vol = vs.make_ball((32, 32, 32), (15.5, 15.5, 15.5), 10.0)
    mesh = vs.extract_mesh(vol, smooth=False)
    assert mesh.euler_characteristic == 2
    r = np.linalg.norm(mesh.vertices - 15.5, axis=1)
    assert np.abs(r - 10.0).max() <= np.sqrt(3.0)


def test_phantom_mesh_has_both_labels():
    ph = vs.phantom("A", seed=3, blobs=1)
    mesh = ph["mesh"]
    assert ph["volume"].ndim == 3
    assert len(ph["blobs"]) == 1
    assert set(np.unique(mesh.labels)) == {0, 1}


def test_geodesic_knn_starts_at_seed_and_is_sorted():
    mesh = vs.phantom("A", seed=4)["mesh"]
    ids, dist = vs.geodesic_knn(mesh, 7, 50)
    assert ids[0] == 7 and dist[0] == 0.0
    assert np.all(np.diff(dist) >= 0)


def test_prediction_covers_every_vertex_and_is_deterministic(tmp_path):
    mesh = vs.phantom("A", seed=5)["mesh"]
    model = vs.Model.init("miniature", seed=1)
    heat, count = vs.predict(mesh, model, seed=2, cloud_size=512)
    assert heat.shape == (len(mesh),)
    assert count.min() >= 1
    assert np.all((heat >= 0) & (heat <= 1))
    model.save(str(tmp_path / "m"))
    again, _ = vs.predict(mesh, vs.load_checkpoint(str(tmp_path / "m")), seed=2, cloud_size=512)
    assert np.array_equal(heat, again)


def test_detection_and_froc_on_ground_truth_heat():
    mesh = vs.phantom("A", seed=6, blobs=2)["mesh"]
    perfect = mesh.labels.astype(float)
    curve = vs.froc([mesh], [perfect])
    assert [p["fp"] for p in curve["points"]] == [0] * len(vs.default_thresholds())
    assert curve["points"][0]["sensitivity"] == 1.0
    assert len(vs.detect(mesh, perfect, 0.5)) == curve["points"][0]["tp"]


def test_schedule():
    assert vs.effective_lr(0) == 0.001
    assert vs.effective_lr(99) == 0.0000625


def test_errors_carry_codes(tmp_path):
    with pytest.raises(vs.VascuscanError, match="file_not_found"):
        vs.load_ply(str(tmp_path / "missing.ply"))
    with pytest.raises(vs.VascuscanError):
        vs.Mesh(np.zeros((3, 3)), np.array([[0, 1, 5]]))


def test_mesh_round_trip(tmp_path):
    mesh = vs.Mesh(np.eye(3), np.array([[0, 1, 2]]))
    mesh.labels = np.array([0, 1, 0], dtype=np.uint8)
    vs.save_ply(mesh, str(tmp_path / "t.ply"))
    back = vs.load_ply(str(tmp_path / "t.ply"))
    assert np.array_equal(back.vertices, mesh.vertices)
    assert np.array_equal(back.labels, mesh.labels)
