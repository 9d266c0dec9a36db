"""HTTP/WebSocket design service: endpoints, binary mesh frames, events."""

import json
import struct

import numpy as np
import pytest
from fastapi.testclient import TestClient

from garmentfit.cloth import SimParams
from garmentfit.mesh import SurfaceLocator, save_obj
from garmentfit.primitives import bend_about_joint, capped_cylinder
from garmentfit.project import Project
from garmentfit.service import create_app

R = 0.045


def ring_clicks(mesh, x, n=3):
    th = np.linspace(0, 2 * np.pi, n, endpoint=False)
    pts = np.stack([np.full(n, x), R * np.cos(th), R * np.sin(th)], axis=1)
    d = np.linalg.norm(mesh.vertices[None, :, :] - pts[:, None, :], axis=2)
    return [int(i) for i in d.argmin(axis=1)]


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("svc")
    arm = capped_cylinder(radius=R, length=0.3, n_around=24, n_along=16)
    bent = bend_about_joint(arm, joint_x=0.0, angle=np.pi / 3,
                            axis=(0, 0, 1), ramp=0.12)
    save_obj(arm, root / "straight.obj")
    save_obj(bent, root / "bent.obj")
    manifest = {"poses": [{"name": "straight", "obj": "straight.obj"},
                          {"name": "bent", "obj": "bent.obj"}],
                "steps_per_transition": 5}
    (root / "poses.json").write_text(json.dumps(manifest))
    return root, arm


@pytest.fixture()
def client(workdir):
    root, _ = workdir
    project = Project(pose_manifest="poses.json",
                      params=SimParams(gravity=(0.0, 0.0, 0.0)),
                      schedule=[0, 1],
                      runner={"settle_budget": 8, "sweeps": 1,
                              "reps_per_entry": 1})
    app = create_app(project, root=root)
    with TestClient(app) as c:
        yield c


def build_garment(client, arm):
    for x in (-0.13, 0.13):
        r = client.post("/tool/boundary",
                        json={"vertices": ring_clicks(arm, x)})
        assert r.status_code == 200, r.text
    seed_pt = np.array([[0.0, R, 0.0]])
    faces, _, _ = SurfaceLocator(arm).closest(seed_pt)
    r = client.post("/tool/region",
                    json={"seed": int(faces[0]), "target_edge": 0.02})
    assert r.status_code == 200, r.text
    return r.json()


class TestPosesAndTools:
    def test_poses_listing(self, client):
        r = client.get("/poses")
        assert r.status_code == 200
        doc = r.json()
        assert doc["names"] == ["straight", "bent"]
        assert doc["active"] == 0
        assert doc["steps_per_transition"] == 5

    def test_set_active_pose(self, client):
        r = client.post("/poses/active", json={"index": 1})
        assert r.json()["active"] == 1
        assert client.get("/poses").json()["active"] == 1
        # invalid index rejected
        assert client.post("/poses/active",
                           json={"index": 9}).status_code == 422

    def test_tool_log_recorded(self, client, workdir):
        _, arm = workdir
        out = build_garment(client, arm)
        assert out["ok"] and out["n_vertices"] > 50
        log = client.get("/project").json()["commands"]
        assert [c["tool"] for c in log] == ["boundary", "boundary", "region"]
        assert out["log_index"] == 2

    def test_unknown_tool_rejected(self, client):
        r = client.post("/tool/bogus", json={})
        assert r.status_code == 422
        assert "unknown tool" in r.json()["detail"]

    def test_tool_requiring_garment(self, client):
        r = client.post("/tool/offset", json={"distance": 0.01})
        assert r.status_code == 422


class TestMeshEndpoints:
    def parse(self, raw):
        nv, nf = struct.unpack_from("<II", raw, 0)
        off = 8
        pos = np.frombuffer(raw, dtype="<f4", count=3 * nv,
                            offset=off).reshape(nv, 3)
        off += 12 * nv
        idx = np.frombuffer(raw, dtype="<u4", count=3 * nf,
                            offset=off).reshape(nf, 3)
        assert len(raw) == off + 12 * nf
        return pos, idx

    def test_body_mesh_binary(self, client, workdir):
        _, arm = workdir
        r = client.get("/mesh/body")
        assert r.status_code == 200
        assert r.headers["content-type"] == "application/octet-stream"
        pos, idx = self.parse(r.content)
        assert pos.shape == (arm.n_vertices, 3)
        assert np.abs(pos - arm.vertices).max() < 1e-6
        assert np.array_equal(idx, arm.triangles.astype("<u4"))

    def test_garment_meshes(self, client, workdir):
        _, arm = workdir
        assert client.get("/mesh/rest").status_code == 404
        build_garment(client, arm)
        pos_r, idx_r = self.parse(client.get("/mesh/rest").content)
        pos_s, idx_s = self.parse(client.get("/mesh/sim").content)
        assert np.array_equal(idx_r, idx_s)
        assert np.array_equal(pos_r, pos_s)
        assert client.get("/mesh/bogus").status_code == 404


class TestSimAndAdapt:
    def test_sim_start_produces_frames(self, client, workdir):
        _, arm = workdir
        build_garment(client, arm)
        assert client.post("/sim/start").json()["running"] is True
        import time
        for _ in range(100):
            frame = client.get("/sim/frame").json()
            if frame.get("garment") and frame.get("max_stretch"):
                break
            time.sleep(0.05)
        assert frame["garment"] is True
        assert len(frame["positions"]) > 50
        assert frame["max_stretch"] > 0
        assert client.post("/sim/pause").json()["running"] is False

    def test_sim_reset_restores_rest(self, client, workdir):
        _, arm = workdir
        build_garment(client, arm)
        client.post("/sim/start")
        import time
        time.sleep(0.3)
        client.post("/sim/reset")
        pos_r, _ = TestMeshEndpoints().parse(client.get("/mesh/rest").content)
        pos_s, _ = TestMeshEndpoints().parse(client.get("/mesh/sim").content)
        assert np.array_equal(pos_r, pos_s)

    def test_adapt_run_reports(self, client, workdir):
        _, arm = workdir
        build_garment(client, arm)
        client.post("/tool/offset", json={"distance": 0.005})
        r = client.post("/adapt/run")
        assert r.status_code == 200, r.text
        doc = r.json()
        assert doc["passes"] > 0
        assert isinstance(doc["report"], list)
        assert doc["report"][0]["pass_index"] == 0
        # displayed frame reflects the adapted garment
        frame = client.get("/sim/frame").json()
        assert frame["pass_index"] == doc["passes"] - 1

    def test_adapt_requires_garment(self, client):
        assert client.post("/adapt/run").status_code == 422


class TestEvents:
    def test_websocket_streams_frames(self, client, workdir):
        _, arm = workdir
        build_garment(client, arm)
        with client.websocket_connect("/events") as ws:
            first = ws.receive_json()
            assert first["type"] == "frame"
            client.post("/sim/start")
            seen = ws.receive_json()
            assert seen["type"] in ("frame", "adapt_pass")
            client.post("/sim/pause")

    def test_websocket_sees_adapt_events(self, client, workdir):
        _, arm = workdir
        build_garment(client, arm)
        client.post("/tool/offset", json={"distance": 0.005})
        with client.websocket_connect("/events") as ws:
            ws.receive_json()  # initial frame
            import threading
            done = {}

            def go():
                done["resp"] = client.post("/adapt/run")

            th = threading.Thread(target=go)
            th.start()
            types = set()
            for _ in range(200):
                rec = ws.receive_json()
                types.add(rec["type"])
                if rec["type"] == "adapt_done":
                    break
            th.join(timeout=60)
            assert "adapt_pass" in types
            assert "adapt_done" in types
            assert done["resp"].status_code == 200


class TestProjectRoundTrip:
    def test_post_project_replays(self, client, workdir):
        _, arm = workdir
        build_garment(client, arm)
        doc = client.get("/project").json()
        # wipe and restore via POST
        r = client.post("/project", json={"pose_manifest":
                                          doc["pose_manifest"],
                                          "commands": doc["commands"],
                                          "params": doc["params"],
                                          "schedule": doc["schedule"],
                                          "runner": doc["runner"]})
        assert r.json()["ok"] is True
        pos_a, _ = TestMeshEndpoints().parse(client.get("/mesh/rest").content)
        r2 = client.post("/project", json={"pose_manifest":
                                           doc["pose_manifest"],
                                           "commands": doc["commands"]})
        pos_b, _ = TestMeshEndpoints().parse(client.get("/mesh/rest").content)
        assert np.array_equal(pos_a, pos_b)

    def test_bad_commands_rejected(self, client):
        r = client.post("/project", json={"commands": [{"tool": "nope"}]})
        assert r.status_code == 422
