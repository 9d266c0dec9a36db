"""HTTP/WebSocket service for interactive garment design.

All mutations funnel through a single-writer command queue: one worker
thread owns the design session, simulation state, and adaptation loop;
HTTP handlers enqueue closures and await their results. Frame snapshots
are immutable dicts republished per simulation step and per adaptation
pass, so any number of readers and WebSocket subscribers can observe the
engine without locking it.
"""

import asyncio
import queue
from contextlib import asynccontextmanager
import struct
import threading
import warnings
from concurrent.futures import Future
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Response, WebSocket
from fastapi.responses import JSONResponse
from websockets.exceptions import ConnectionClosed

from .adapt import principal_stretches, run_adaptation
from .cloth import ClothModel, SimState, step
from .poses import make_schedule
from .project import (Project, ProjectError, apply_command, open_session,
                      replay_commands, validate_commands)
from .sdf import build_sdf


def _snapshot(session, state=None, pass_stats=None, pass_index=-1):
    """Build an immutable frame snapshot of the current engine state."""
    g = session.garment
    if g is None:
        return {"type": "frame", "garment": False, "pass_index": pass_index}
    positions = state.positions if state is not None else g.sim_mesh.vertices
    pose = None
    if state is not None and state.pose is not None:
        pose = {"a": int(state.pose[0]), "b": int(state.pose[1]),
                "t": float(state.pose[2])}
    if pose is None:
        pose = {"a": session.active_pose, "b": session.active_pose, "t": 0.0}
    stretch = principal_stretches(g.rest_mesh, positions)[:, 0]
    return {
        "type": "frame",
        "garment": True,
        "positions": np.asarray(positions).round(9).tolist(),
        "rest_positions": g.rest_mesh.vertices.round(9).tolist(),
        "stretch": stretch.round(9).tolist(),
        "max_stretch": float(stretch.max()),
        "pose": pose,
        "pass_index": pass_index,
        "pass_stats": pass_stats,
    }


class Engine:
    """Single-writer owner of all mutable design and simulation state."""

    def __init__(self, project, root="."):
        self.project = project
        self.root = Path(root)
        self.session = open_session(project, root=root)
        replay_commands(self.session, project.commands)
        self._queue = queue.Queue()
        self._running = False
        self._adapting = False
        self._stop = False
        self._model = None
        self._state = None
        self._sdf_cache = {}
        self.frame = _snapshot(self.session)
        self.last_pass = None
        self._subscribers = set()  # (asyncio loop, asyncio.Queue)
        self._thread = threading.Thread(target=self._loop, daemon=True)
        self._thread.start()

    # -- command plumbing ------------------------------------------------

    def submit(self, fn):
        """Run fn on the worker thread; return its result (re-raising)."""
        fut = Future()
        self._queue.put((fn, fut))
        return fut.result()

    def close(self):
        self._stop = True
        self._queue.put((lambda: None, Future()))
        self._thread.join(timeout=5)

    def _loop(self):
        while not self._stop:
            try:
                fn, fut = self._queue.get(
                    timeout=0.002 if self._running else 0.2)
            except queue.Empty:
                if self._running:
                    self._sim_steps(4)
                continue
            try:
                fut.set_result(fn())
            except BaseException as exc:  # propagate to the caller
                fut.set_exception(exc)

    # -- broadcast -------------------------------------------------------

    def publish(self, record):
        for loop, q in list(self._subscribers):
            try:
                loop.call_soon_threadsafe(q.put_nowait, record)
            except RuntimeError:
                self._subscribers.discard((loop, q))

    def subscribe(self):
        pair = (asyncio.get_running_loop(), asyncio.Queue(maxsize=256))
        self._subscribers.add(pair)
        return pair

    def unsubscribe(self, pair):
        self._subscribers.discard(pair)

    # -- simulation (worker thread only) ---------------------------------

    def _body_sdf(self):
        i = self.session.active_pose
        if i not in self._sdf_cache:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                self._sdf_cache[i] = build_sdf(self.session.avatar,
                                               resolution=32)
        return self.session.avatar, self._sdf_cache[i]

    def _ensure_sim(self):
        g = self.session.garment
        if g is None:
            raise ProjectError("no garment to simulate")
        if self._model is None or self._state is None:
            self._model = ClothModel(g.rest_mesh)
            self._state = SimState(g.sim_mesh.vertices.copy(),
                                   g.velocities.copy())
        body, sdf = self._body_sdf()
        self._state.body = body
        self._state.sdf = sdf
        self._state.pose = (self.session.active_pose,
                            self.session.active_pose, 0.0)

    def _sim_steps(self, n):
        self._ensure_sim()
        g = self.session.garment
        for _ in range(n):
            self._state = step(self._state, g, self.project.params,
                               self._model)
        self.session.garment = g.with_sim_positions(self._state.positions,
                                                    self._state.velocities)
        self.frame = _snapshot(self.session, self._state,
                               pass_index=self._pass_index())
        self.publish(self.frame)

    def _pass_index(self):
        return -1 if self.last_pass is None else self.last_pass["pass_index"]

    def invalidate_sim(self):
        """Forget cached simulation structures after a garment edit."""
        self._model = None
        self._state = None
        self.frame = _snapshot(self.session)

    def run_adaptation_job(self):
        if self.session.garment is None:
            raise ProjectError("no garment to adapt")
        self._running = False
        self._adapting = True
        try:
            schedule = make_schedule(self.session.poses,
                                     self.project.schedule)
            runner = self.project.runner

            def on_pass(rec, garment, state):
                self.last_pass = dict(rec)
                self.frame = _snapshot(self.session, state, pass_stats=rec,
                                       pass_index=rec["pass_index"])
                self.publish({"type": "adapt_pass", **rec})
                self.publish(self.frame)

            garment, report = run_adaptation(
                self.session, schedule, self.project.params,
                sdf_resolution=int(runner.get("sdf_resolution", 32)),
                settle_budget=int(runner.get("settle_budget", 200)),
                sweeps=int(runner.get("sweeps", 1)),
                reps_per_entry=int(runner.get("reps_per_entry", 1)),
                rest_velocity=float(runner.get("rest_velocity", 0.05)),
                on_pass=on_pass)
            self._model = None
            self._state = None
            self.frame = _snapshot(self.session,
                                   pass_index=self._pass_index())
            done = {"type": "adapt_done", "converged": report.converged,
                    "passes": len(report),
                    "max_stretch": self.frame.get("max_stretch")}
            self.publish(done)
            return {"converged": report.converged, "passes": len(report),
                    "report": list(report)}
        finally:
            self._adapting = False


def create_app(project, root="."):
    """Build the FastAPI app serving one design project."""
    engine = Engine(project, root=root)

    @asynccontextmanager
    async def lifespan(app):
        try:
            yield
        finally:
            engine.close()

    app = FastAPI(title="garmentfit", lifespan=lifespan)
    app.state.engine = engine

    def run(fn):
        try:
            return engine.submit(fn)
        except (ProjectError, ValueError, KeyError, IndexError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.get("/poses")
    def poses():
        s = engine.session
        return {"names": list(s.poses.names), "count": len(s.poses),
                "active": s.active_pose,
                "steps_per_transition": s.poses.steps_per_transition}

    @app.post("/poses/active")
    def set_active(body: dict):
        if "index" not in body:
            raise HTTPException(status_code=422, detail="missing index")
        rec = {"tool": "pose_active", "index": int(body["index"])}

        def do():
            apply_command(engine.session, rec)
            engine.project.commands.append(rec)
            return {"active": engine.session.active_pose}

        return run(do)

    @app.post("/tool/{name}")
    def tool(name: str, body: dict):
        rec = {"tool": name, **body}
        try:
            validate_commands([rec])
        except ProjectError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

        def do():
            if engine._adapting:
                raise ProjectError("adaptation in progress")
            apply_command(engine.session, rec)
            engine.project.commands.append(rec)
            engine.invalidate_sim()
            out = {"ok": True, "log_index": len(engine.project.commands) - 1}
            if name == "boundary":
                out["boundary_id"] = len(engine.session.boundaries) - 1
            g = engine.session.garment
            if g is not None:
                out["n_vertices"] = g.rest_mesh.n_vertices
                out["n_faces"] = g.rest_mesh.n_faces
            return out

        return run(do)

    @app.post("/sim/start")
    def sim_start():
        def do():
            engine._ensure_sim()
            engine._running = True
            return {"running": True}

        return run(do)

    @app.post("/sim/pause")
    def sim_pause():
        def do():
            engine._running = False
            return {"running": False}

        return run(do)

    @app.post("/sim/reset")
    def sim_reset():
        def do():
            engine._running = False
            g = engine.session.garment
            if g is not None:
                engine.session.garment = g.with_sim_positions(
                    g.rest_mesh.vertices.copy(),
                    np.zeros_like(g.velocities))
            engine.invalidate_sim()
            return {"running": False}

        return run(do)

    @app.post("/adapt/run")
    def adapt_run():
        if engine._adapting:
            raise HTTPException(status_code=409,
                                detail="adaptation already running")
        return run(engine.run_adaptation_job)

    @app.get("/sim/frame")
    def sim_frame():
        return JSONResponse(engine.frame)

    @app.get("/project")
    def get_project():
        return engine.project.to_dict()

    @app.post("/project")
    def set_project(body: dict):
        def do():
            commands = body.get("commands", [])
            validate_commands(commands)
            new = Project(
                pose_manifest=body.get("pose_manifest",
                                       engine.project.pose_manifest),
                commands=commands,
                params=type(engine.project.params).from_dict(
                    body.get("params", {})),
                schedule=list(body.get("schedule", engine.project.schedule)),
                runner=dict(body.get("runner", engine.project.runner)),
                export=dict(body.get("export", engine.project.export)))
            session = open_session(new, root=engine.root)
            replay_commands(session, new.commands)
            engine.project = new
            engine.session = session
            engine._sdf_cache = {}
            engine.invalidate_sim()
            return {"ok": True}

        return run(do)

    def _mesh_bytes(mesh):
        nv, nf = mesh.n_vertices, mesh.n_faces
        head = struct.pack("<II", nv, nf)
        pos = np.ascontiguousarray(mesh.vertices,
                                   dtype="<f4").tobytes()
        idx = np.ascontiguousarray(mesh.triangles,
                                   dtype="<u4").tobytes()
        return head + pos + idx

    @app.get("/mesh/{which}")
    def mesh(which: str):
        s = engine.session
        if which == "body":
            m = s.avatar
        elif s.garment is None:
            raise HTTPException(status_code=404, detail="no garment")
        elif which == "rest":
            m = s.garment.rest_mesh
        elif which == "sim":
            m = s.garment.sim_mesh
        else:
            raise HTTPException(status_code=404,
                                detail=f"unknown mesh {which!r}")
        return Response(content=_mesh_bytes(m),
                        media_type="application/octet-stream")

    @app.websocket("/events")
    async def events(ws: WebSocket):
        await ws.accept()
        pair = engine.subscribe()
        _, q = pair
        try:
            await ws.send_json(engine.frame)
            while True:
                rec = await q.get()
                await ws.send_json(rec)
        except (ConnectionClosed, RuntimeError):
            pass
        finally:
            engine.unsubscribe(pair)

    return app
