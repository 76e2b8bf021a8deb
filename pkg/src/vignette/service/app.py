"""The HTTP surface: authoring endpoints plus live viewing sessions.

Routes live under /api/v1/. Every error body is the same envelope:

    {"code": "STAGE_VIOLATION", "message": "...", "details": {...}}

Authoring state is an ExtractionSession per vignette, persisted to the
file store after every successful mutation, so a restart reloads drafts
exactly where they were. Viewing sessions each own a ticker thread; a
condition variable per session drives the long-poll `get_state`.
"""

from __future__ import annotations

import os
import threading
import time
from contextlib import contextmanager
from datetime import datetime, timezone
from pathlib import Path

from fastapi import Body, FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from vignette.build.catalog import load_catalog
from vignette.build.layouts import load_layouts
from vignette.core.serialize import spec_to_jsonable
from vignette.extract.pipeline import CharacterCapExceeded, ExtractionFailed, NoNarratorError
from vignette.extract.session import (
    DraftInvalidError,
    ExtractionSession,
    StageError,
    StoryError,
)
from vignette.llm.gateway import Gateway, GatewayTransportError
from vignette.llm.providers import ENV_URL, HttpProvider, ScriptedMockProvider
from vignette.plan.planner import PlannerMode
from vignette.runtime import Engine, RuntimeConfig, ViewerCommand
from vignette.runtime import world as w
from vignette.service.store import FileStore

__all__ = ["ApiError", "SessionRunner", "create_app", "default_gateway"]

ENV_STORE_DIR = "VIGNETTE_STORE_DIR"
ENV_MOCK_SCRIPT = "VIGNETTE_MOCK_SCRIPT"
ENV_TICK_MS = "VIGNETTE_TICK_MS"

_COMMAND_KINDS = ("move", "interact", "chat", "wait")


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, details: dict | None = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.details = details or {}


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def default_gateway() -> Gateway:
    """Live provider when VIGNETTE_LLM_URL is set, otherwise the mock.

    The mock optionally loads a script from VIGNETTE_MOCK_SCRIPT, which
    is how canned walkthroughs run without a model.
    """
    if os.environ.get(ENV_URL):
        return Gateway(HttpProvider())
    script = os.environ.get(ENV_MOCK_SCRIPT)
    if script:
        return Gateway(ScriptedMockProvider.from_file(script))
    return Gateway(ScriptedMockProvider())


@contextmanager
def _domain_errors():
    """Translate pipeline/session exceptions into the error envelope."""
    try:
        yield
    except ApiError:
        raise
    except StoryError as exc:
        raise ApiError(400, exc.code, str(exc)) from exc
    except CharacterCapExceeded as exc:
        raise ApiError(
            422,
            "CHAR_CAP_EXCEEDED",
            str(exc),
            {"detected": [c.name for c in exc.detected], "cap": exc.cap},
        ) from exc
    except NoNarratorError as exc:
        raise ApiError(422, "NO_NARRATOR", str(exc)) from exc
    except StageError as exc:
        raise ApiError(
            409,
            "STAGE_VIOLATION",
            str(exc),
            {"current": exc.current, "allowed": list(exc.allowed)},
        ) from exc
    except DraftInvalidError as exc:
        raise ApiError(
            422,
            "DRAFT_INVALID",
            str(exc),
            {
                "violations": [
                    {"code": v.code, "path": v.path, "message": v.message}
                    for v in exc.report
                ]
            },
        ) from exc
    except LookupError as exc:
        raise ApiError(404, "NOT_FOUND", str(exc)) from exc
    except (ExtractionFailed, GatewayTransportError) as exc:
        raise ApiError(502, "PROVIDER_FAILED", str(exc)) from exc
    except ValueError as exc:
        raise ApiError(422, "VALIDATION", str(exc)) from exc


def _parse_command(payload: dict, at_tick: int) -> ViewerCommand:
    kind = payload.get("kind")
    if kind not in _COMMAND_KINDS:
        raise ApiError(422, "BAD_COMMAND", f"unknown command kind {kind!r}")
    try:
        cmd = ViewerCommand(
            at_tick=at_tick,
            kind=kind,
            direction=payload.get("direction"),
            object_id=payload.get("object_id"),
            npc_id=payload.get("npc_id"),
            text=payload.get("text"),
            ticks=int(payload.get("ticks", 1)),
        )
    except (TypeError, ValueError) as exc:
        raise ApiError(422, "BAD_COMMAND", str(exc)) from exc
    if kind == "move" and cmd.direction not in ("N", "S", "E", "W"):
        raise ApiError(422, "BAD_COMMAND", f"bad direction {cmd.direction!r}")
    if kind == "interact" and not cmd.object_id:
        raise ApiError(422, "BAD_COMMAND", "interact needs object_id")
    if kind == "chat" and (not cmd.npc_id or cmd.text is None):
        raise ApiError(422, "BAD_COMMAND", "chat needs npc_id and text")
    return cmd


class SessionRunner:
    """Owns one engine and its ticker thread; all access goes through cond."""

    def __init__(
        self,
        session_id: str,
        vignette_id: str,
        engine: Engine,
        store: FileStore,
        tick_ms: int,
    ):
        self.session_id = session_id
        self.vignette_id = vignette_id
        self.engine = engine
        self.store = store
        self.tick_ms = tick_ms
        self.cond = threading.Condition()
        self._stop = False
        self._persist_seq = 0
        self._thread = threading.Thread(
            target=self._loop, name=f"session-{session_id}", daemon=True
        )

    def start(self) -> None:
        self.store.save_session_meta(
            self.session_id,
            {
                "session_id": self.session_id,
                "vignette_id": self.vignette_id,
                "mode": self.engine.mode.value,
                "status": "running",
                "created_at": _now(),
            },
        )
        self._thread.start()

    def _loop(self) -> None:
        interval = self.tick_ms / 1000.0
        while True:
            with self.cond:
                if self._stop or self.engine.world.status != "running":
                    self.cond.notify_all()
                    break
                if self.engine.world.tick >= self.engine.config.max_ticks:
                    # never tick unbounded: a stalled story ends like an
                    # abandoned one instead of spinning the thread forever
                    self.engine.world.status = "ended"
                    self.engine.log.append(
                        self.engine.world.tick,
                        "world",
                        w.REC_RUN_ENDED,
                        {"ticks": self.engine.world.tick, "reason": "tick_cap"},
                    )
                    self.cond.notify_all()
                    break
                self.engine.step()
                self.cond.notify_all()
            self._persist_new()
            if interval > 0:
                time.sleep(interval)
        self._persist_new()
        self.store.save_session_meta(
            self.session_id,
            {
                "session_id": self.session_id,
                "vignette_id": self.vignette_id,
                "mode": self.engine.mode.value,
                "status": "ended",
                "ended_tick": self.engine.world.tick,
                "created_at": _now(),
            },
        )

    def _persist_new(self) -> None:
        # only the ticker thread advances _persist_seq; no lock needed
        records = self.engine.log.records[self._persist_seq :]
        if records:
            self.store.append_session_records(
                self.session_id, [r.to_jsonable() for r in records]
            )
            self._persist_seq += len(records)

    def post(self, payload: dict) -> dict:
        with self.cond:
            if self.engine.world.status != "running":
                raise ApiError(410, "SESSION_ENDED", "session already ended")
            cmd = _parse_command(payload, at_tick=self.engine.world.tick + 1)
            self.engine.post_command(cmd)
            return {"accepted_at_tick": cmd.at_tick, "tick": self.engine.world.tick}

    def _delta(self, since_tick: int) -> dict:
        world = self.engine.world
        records = [
            r.to_jsonable() for r in self.engine.log.records if r.tick > since_tick
        ]
        return {
            "session_id": self.session_id,
            "since_tick": since_tick,
            "tick": world.tick,
            "status": world.status,
            "records": records,
            "state": world.to_jsonable(),
        }

    def get_state(self, since_tick: int, timeout_s: float) -> dict:
        def news() -> bool:
            if self.engine.world.status != "running":
                return True
            records = self.engine.log.records
            return bool(records) and records[-1].tick > since_tick

        with self.cond:
            self.cond.wait_for(news, timeout=timeout_s)
            return self._delta(since_tick)

    def stop(self) -> None:
        """End the session server-side (viewer switched back to authoring)."""
        with self.cond:
            if self.engine.world.status == "running":
                self.engine.world.status = "ended"
                self.engine.log.append(
                    self.engine.world.tick,
                    "world",
                    w.REC_RUN_ENDED,
                    {"ticks": self.engine.world.tick, "reason": "abandoned"},
                )
            self._stop = True
            self.cond.notify_all()
        self._thread.join(timeout=5.0)


def create_app(
    *,
    store_dir: str | Path | None = None,
    gateway: Gateway | None = None,
    runtime_config: RuntimeConfig | None = None,
    tick_ms: int | None = None,
) -> FastAPI:
    """Build the service; every argument has an env-var fallback."""
    store = FileStore(store_dir or os.environ.get(ENV_STORE_DIR, "vignette_store"))
    gateway = gateway or default_gateway()
    runtime_config = runtime_config or RuntimeConfig()
    if tick_ms is None:
        tick_ms = int(os.environ.get(ENV_TICK_MS, runtime_config.ms_per_tick))

    app = FastAPI(title="vignette service", docs_url=None, redoc_url=None)
    assets = load_catalog()
    layouts = load_layouts()
    sessions: dict[str, ExtractionSession] = {}
    runners: dict[str, SessionRunner] = {}
    registry_lock = threading.Lock()
    vignette_locks: dict[str, threading.Lock] = {}

    def lock_for(vignette_id: str) -> threading.Lock:
        with registry_lock:
            return vignette_locks.setdefault(vignette_id, threading.Lock())

    @app.exception_handler(ApiError)
    async def _api_error(_request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status,
            content={"code": exc.code, "message": exc.message, "details": exc.details},
        )

    @app.exception_handler(RequestValidationError)
    async def _body_error(_request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=422,
            content={
                "code": "BAD_REQUEST",
                "message": "request body failed validation",
                "details": {"errors": exc.errors()},
            },
        )

    # ----- authoring helpers --------------------------------------------------

    def _persist(vignette_id: str, session: ExtractionSession) -> None:
        existing = store.load_vignette(vignette_id)
        created = existing["created_at"] if existing else _now()
        store.save_vignette(
            vignette_id,
            {
                "id": vignette_id,
                "created_at": created,
                "updated_at": _now(),
                "doc": session.to_jsonable(),
            },
        )

    def _get_session(vignette_id: str) -> ExtractionSession:
        with registry_lock:
            cached = sessions.get(vignette_id)
        if cached is not None:
            return cached
        doc = store.load_vignette(vignette_id)
        if doc is None:
            raise ApiError(404, "NOT_FOUND", f"no vignette {vignette_id!r}")
        session = ExtractionSession.from_jsonable(
            doc["doc"], gateway, assets=assets, layouts=layouts
        )
        with registry_lock:
            return sessions.setdefault(vignette_id, session)

    def _draft_view(vignette_id: str, session: ExtractionSession) -> dict:
        spec_doc = spec_to_jsonable(session.draft_spec())
        return {
            "id": vignette_id,
            "stage": session.stage,
            "title": session.title,
            "story_text": session.story_text,
            "warnings": list(session.warnings),
            "layout_id": session.layout.layout_id if session.layout else None,
            "room_labels": dict(session.room_labels),
            "characters": spec_doc["characters"],
            "environment": spec_doc["environment"] if session.environment else None,
            "key_events": spec_doc["key_events"],
            "needs_object": list(session.needs_object),
            "placement_failures": [
                {
                    "object_id": f.object_id,
                    "name": f.name,
                    "code": f.code,
                    "reason": f.reason,
                }
                for f in session.placement_failures
            ],
        }

    # ----- authoring endpoints ---------------------------------------------------

    @app.post("/api/v1/vignettes", status_code=201)
    def create_vignette(payload: dict = Body(...)):
        story = payload.get("story_text") or ""
        with _domain_errors():
            session = ExtractionSession(
                story,
                gateway,
                assets=assets,
                layouts=layouts,
                seed=int(payload.get("seed", 0)),
                title=payload.get("title"),
            )
            session.begin(keep_characters=payload.get("keep_characters"))
        vignette_id = store.new_id("vig")
        with registry_lock:
            sessions[vignette_id] = session
        _persist(vignette_id, session)
        return _draft_view(vignette_id, session)

    @app.get("/api/v1/vignettes")
    def list_vignettes():
        return {"vignettes": store.list_vignette_ids()}

    @app.get("/api/v1/vignettes/{vignette_id}")
    def get_vignette(vignette_id: str):
        return _draft_view(vignette_id, _get_session(vignette_id))

    @app.post("/api/v1/vignettes/{vignette_id}/confirm_rooms")
    def confirm_rooms(vignette_id: str, payload: dict = Body(default={})):
        session = _get_session(vignette_id)
        with lock_for(vignette_id), _domain_errors():
            session.confirm_rooms(payload.get("labels"))
            _persist(vignette_id, session)
        return _draft_view(vignette_id, session)

    @app.post("/api/v1/vignettes/{vignette_id}/environment")
    def update_environment(vignette_id: str, payload: dict = Body(...)):
        session = _get_session(vignette_id)
        op = payload.get("op")
        with lock_for(vignette_id), _domain_errors():
            if op == "add":
                session.add_object(
                    str(payload.get("name", "")), str(payload.get("room_id", ""))
                )
            elif op == "move":
                position = payload.get("position") or ()
                if len(position) != 2:
                    raise ApiError(422, "BAD_REQUEST", "move needs position [x, y]")
                session.move_object(
                    str(payload.get("object_id", "")),
                    (int(position[0]), int(position[1])),
                    facing=payload.get("facing"),
                )
            elif op == "remove":
                session.remove_object(str(payload.get("object_id", "")))
            else:
                raise ApiError(422, "BAD_REQUEST", f"unknown environment op {op!r}")
            _persist(vignette_id, session)
        return _draft_view(vignette_id, session)

    @app.post("/api/v1/vignettes/{vignette_id}/confirm_objects")
    def confirm_objects(vignette_id: str):
        session = _get_session(vignette_id)
        with lock_for(vignette_id), _domain_errors():
            session.confirm_objects()
            _persist(vignette_id, session)
        return _draft_view(vignette_id, session)

    @app.post("/api/v1/vignettes/{vignette_id}/characters/{character_id}")
    def update_character(vignette_id: str, character_id: str, payload: dict = Body(...)):
        session = _get_session(vignette_id)
        with lock_for(vignette_id), _domain_errors():
            session.update_character(character_id, **payload)
            _persist(vignette_id, session)
        return _draft_view(vignette_id, session)

    @app.post("/api/v1/vignettes/{vignette_id}/characters/{character_id}/chat")
    def character_chat(vignette_id: str, character_id: str, payload: dict = Body(...)):
        session = _get_session(vignette_id)
        message = str(payload.get("message", ""))
        with lock_for(vignette_id), _domain_errors():
            reply = session.simulate_chat(character_id, message)
            session.record_chat(character_id, message, reply)
            _persist(vignette_id, session)
        return {"reply": reply}

    @app.post("/api/v1/vignettes/{vignette_id}/characters/{character_id}/suggest")
    def character_suggest(vignette_id: str, character_id: str):
        session = _get_session(vignette_id)
        with lock_for(vignette_id), _domain_errors():
            suggestions = session.suggest_persona(character_id)
        return {"suggestions": suggestions}

    @app.post("/api/v1/vignettes/{vignette_id}/confirm_characters")
    def confirm_characters(vignette_id: str):
        session = _get_session(vignette_id)
        with lock_for(vignette_id), _domain_errors():
            session.confirm_characters()
            _persist(vignette_id, session)
        return _draft_view(vignette_id, session)

    @app.post("/api/v1/vignettes/{vignette_id}/events")
    def update_events(vignette_id: str, payload: dict = Body(...)):
        session = _get_session(vignette_id)
        with lock_for(vignette_id), _domain_errors():
            if "events" in payload:
                raw = payload["events"]
                events = [
                    [
                        (
                            str(t.get("character_id", "")),
                            str(t.get("action", "")),
                            str(t.get("object_id", "")),
                        )
                        for t in group
                    ]
                    for group in raw
                ]
                session.set_events(events)
            elif payload.get("op") == "add_activity":
                session.add_activity(
                    int(payload.get("event_index", -1)),
                    str(payload.get("character_id", "")),
                    str(payload.get("action", "")),
                    object_id=str(payload.get("object_id", "")),
                )
            elif payload.get("op") == "bind":
                session.bind_object(
                    int(payload.get("event_index", -1)),
                    str(payload.get("character_id", "")),
                    str(payload.get("object_id", "")),
                )
            else:
                raise ApiError(422, "BAD_REQUEST", "expected events list or an op")
            _persist(vignette_id, session)
        return _draft_view(vignette_id, session)

    @app.post("/api/v1/vignettes/{vignette_id}/confirm_events")
    def confirm_events(vignette_id: str):
        session = _get_session(vignette_id)
        with lock_for(vignette_id), _domain_errors():
            spec = session.confirm_events()
            _persist(vignette_id, session)
        view = _draft_view(vignette_id, session)
        view["spec"] = spec_to_jsonable(spec)
        return view

    # ----- viewing sessions ---------------------------------------------------

    def _get_runner(session_id: str) -> SessionRunner:
        with registry_lock:
            runner = runners.get(session_id)
        if runner is None:
            raise ApiError(404, "NOT_FOUND", f"no session {session_id!r}")
        return runner

    @app.post("/api/v1/sessions", status_code=201)
    def create_session(payload: dict = Body(...)):
        vignette_id = str(payload.get("vignette_id", ""))
        session = _get_session(vignette_id)
        if session.stage != "complete":
            raise ApiError(
                409,
                "EXTRACTION_INCOMPLETE",
                f"vignette is at stage {session.stage!r}; finish authoring first",
            )
        try:
            mode = PlannerMode(str(payload.get("mode", "cd")).lower())
        except ValueError as exc:
            raise ApiError(422, "BAD_REQUEST", f"unknown mode {payload.get('mode')!r}") from exc
        with _domain_errors():
            engine = Engine(
                session.spec(),
                gateway,
                mode=mode,
                config=runtime_config,
                seed=int(payload.get("seed", 0)),
            )
        session_id = store.new_id("session")
        runner = SessionRunner(session_id, vignette_id, engine, store, tick_ms)
        with registry_lock:
            runners[session_id] = runner
        runner.start()
        return {
            "session_id": session_id,
            "vignette_id": vignette_id,
            "mode": mode.value,
            "caption": session.story_text,
            "tick": engine.world.tick,
            "state": engine.world.to_jsonable(),
        }

    @app.post("/api/v1/sessions/{session_id}/commands")
    def post_command(session_id: str, payload: dict = Body(...)):
        return _get_runner(session_id).post(payload)

    @app.get("/api/v1/sessions/{session_id}/state")
    def get_state(
        session_id: str,
        since_tick: int = Query(default=-1),
        timeout_ms: int = Query(default=25_000, ge=0, le=60_000),
    ):
        return _get_runner(session_id).get_state(since_tick, timeout_ms / 1000.0)

    @app.delete("/api/v1/sessions/{session_id}")
    def end_session(session_id: str):
        runner = _get_runner(session_id)
        runner.stop()
        return {"session_id": session_id, "status": runner.engine.world.status}

    @app.get("/api/v1/health")
    def health():
        return {"status": "ok", "vignettes": len(store.list_vignette_ids())}

    return app
