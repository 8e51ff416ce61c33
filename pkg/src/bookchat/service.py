"""HTTP + WebSocket service: question banks, live chat sessions, surveys.

Sessions are event-sourced: every user event is fsynced to the session's
append-only log *before* the dialogue engine runs, so a crash between
persist and reply can lose at most the (unsent) reply, never the turn;
recovery replays the log through the deterministic engine and lands on
the identical transcript.  One lock per session serializes advances;
distinct sessions proceed independently.
"""

from __future__ import annotations

import json
import os
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import corpus, evalstats, metaphor, mlcore, qgen
from .dialogue import (
    DialogueEngine,
    EventKind,
    Phase,
    Turn,
    UserEvent,
    event_from_dict,
    event_to_dict,
    load_response_patterns,
    load_utterances,
    transcript_to_jsonl,
)
from .lexicon import Lexicons, load_embeddings, load_norms
from .qgen import QuestionBank, SelectionConfig, bank_from_json, bank_to_json
from .storage import SessionStore, StorageError

CONFIG_ENV_VAR = "MC_CONFIG"


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


@dataclass
class ServiceConfig:
    data_dir: str
    embeddings: str | None = None
    embeddings_format: str = "text"
    norms: str | None = None
    detector: str | None = None
    scorer: str | None = None
    templates: str | None = None
    utterances: str | None = None
    response_patterns: str | None = None
    banks_dir: str | None = None
    detector_threshold: float = 0.5
    score_range: tuple[float, float] = (0.0, 3.0)
    default_budget_seconds: float = 1800.0
    seed: int = 0
    silence_timeout_seconds: float = 0.0
    port: int = 8000
    frontend_dir: str | None = None
    selection: dict = field(default_factory=dict)

    def selection_config(self) -> SelectionConfig:
        return SelectionConfig(**self.selection)


def load_config(path: str | Path) -> ServiceConfig:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    try:
        return ServiceConfig(**data)
    except TypeError as exc:
        raise ValueError(f"bad config {path}: {exc}") from exc


def resolve_config_path(cli_value: str | None) -> str:
    path = cli_value or os.environ.get(CONFIG_ENV_VAR)
    if not path:
        raise ValueError(f"no config given: pass --config or set {CONFIG_ENV_VAR}")
    return path


class _SimulatedCrash(RuntimeError):
    """Raised by the fault-injection hook in durability tests."""


@dataclass
class _LiveSession:
    engine: DialogueEngine
    state: object
    lock: threading.Lock
    last_activity: float


class CompanionService:
    def __init__(self, config: ServiceConfig):
        self.config = config
        self.store = SessionStore(config.data_dir)
        self.lexicons = self._load_lexicons(config)
        self.detector = mlcore.load_model(config.detector) if config.detector else None
        self.scorer = mlcore.load_model(config.scorer) if config.scorer else None
        self.templates = qgen.load_templates(config.templates) if config.templates else qgen.default_templates()
        self.utterances = load_utterances(config.utterances)
        self.patterns = load_response_patterns(config.response_patterns)
        self.banks: dict[str, QuestionBank] = {}
        self._sessions: dict[str, _LiveSession] = {}
        self._registry_lock = threading.Lock()
        self._fail_after_persist = False  # fault injection for durability tests
        self._load_banks()

    # -- loading ------------------------------------------------------------

    @staticmethod
    def _load_lexicons(config: ServiceConfig) -> Lexicons | None:
        if not (config.embeddings and config.norms):
            return None
        return Lexicons(
            embeddings=load_embeddings(config.embeddings, format=config.embeddings_format),
            norms=load_norms(config.norms),
        )

    def _load_banks(self) -> None:
        if self.config.banks_dir:
            for path in sorted(Path(self.config.banks_dir).glob("*.json")):
                if path.name.endswith(".status.json"):
                    continue
                bank = bank_from_json(path.read_text(encoding="utf-8"))
                self.banks[path.stem] = bank
        for bank_id in self.store.list_bank_ids():
            text = self.store.load_bank_json(bank_id)
            if text:
                self.banks[bank_id] = bank_from_json(text)

    def _resolve_bank(self, doc_id: str) -> tuple[str, QuestionBank]:
        if doc_id in self.banks:
            return doc_id, self.banks[doc_id]
        matches = [(bid, b) for bid, b in self.banks.items() if b.doc_id == doc_id]
        if not matches:
            raise ApiError(404, "unknown_doc", f"no question bank for {doc_id!r}")
        return matches[-1]

    # -- sessions -----------------------------------------------------------

    def _engine_for(self, bank: QuestionBank) -> DialogueEngine:
        return DialogueEngine(
            bank,
            utterances=self.utterances,
            patterns=self.patterns,
            embeddings=self.lexicons.embeddings if self.lexicons else None,
        )

    def _live(self, session_id: str) -> _LiveSession:
        with self._registry_lock:
            live = self._sessions.get(session_id)
            if live is not None:
                return live
            if not self.store.session_exists(session_id):
                raise ApiError(404, "unknown_session", f"no session {session_id!r}")
            meta = self.store.session_meta(session_id)
            bank = self.banks.get(meta["bank_id"])
            if bank is None:
                raise ApiError(500, "missing_bank", f"bank {meta['bank_id']!r} vanished")
            engine = self._engine_for(bank)
            events = [event_from_dict(e) for e in self.store.events(session_id)]
            state = engine.replay(
                events,
                budget_seconds=meta["budget_seconds"],
                seed=meta["seed"],
                session_id=session_id,
            )
            live = _LiveSession(engine=engine, state=state, lock=threading.Lock(), last_activity=time.time())
            self._sessions[session_id] = live
            return live

    def create_session(self, doc_id: str, budget_seconds: float | None = None) -> dict:
        bank_id, bank = self._resolve_bank(doc_id)
        budget = float(budget_seconds if budget_seconds is not None else self.config.default_budget_seconds)
        if budget < 0:
            raise ApiError(400, "validation", "budget_seconds must be >= 0")
        session_id = f"s-{uuid.uuid4().hex[:12]}"
        meta = {
            "bank_id": bank_id,
            "doc_id": bank.doc_id,
            "budget_seconds": budget,
            "seed": self.config.seed,
            "created_at": time.time(),
        }
        self.store.create_session(session_id, meta)
        engine = self._engine_for(bank)
        state = engine.new_session(budget_seconds=budget, seed=self.config.seed, session_id=session_id)
        with self._registry_lock:
            self._sessions[session_id] = _LiveSession(
                engine=engine, state=state, lock=threading.Lock(), last_activity=time.time()
            )
        return self.session_record(session_id)

    def session_record(self, session_id: str) -> dict:
        live = self._live(session_id)
        meta = self.store.session_meta(session_id)
        state = live.state
        return {
            "session_id": session_id,
            "doc_id": meta["doc_id"],
            "bank_id": meta["bank_id"],
            "created_at": meta["created_at"],
            "budget_seconds": meta["budget_seconds"],
            "status": "ENDED" if state.phase is Phase.ENDED else "ACTIVE",
            "phase": state.phase.value,
            "turn_count": len(state.turns),
            "has_survey": self.store.survey_for(session_id) is not None,
        }

    def post_event(self, session_id: str, kind: str, text: str | None) -> dict:
        try:
            event_kind = EventKind(kind)
        except ValueError:
            raise ApiError(400, "validation", f"unknown event kind {kind!r}") from None
        live = self._live(session_id)
        with live.lock:
            if live.state.phase is Phase.ENDED:
                raise ApiError(409, "session_ended", f"session {session_id} has ended")
            try:
                event = UserEvent(kind=event_kind, text=text, at=time.time())
            except ValueError as exc:
                raise ApiError(400, "validation", str(exc)) from None
            # write-ahead: persist before applying so an ack'd turn survives a crash
            self.store.append_event(session_id, event_to_dict(event))
            if self._fail_after_persist:
                raise _SimulatedCrash("injected crash between persist and reply")
            before = len(live.state.turns)
            live.state, utterances = live.engine.advance(live.state, event)
            live.last_activity = time.time()
            new_turns = live.state.turns[before:]
            return {
                "utterances": utterances,
                "turns": [self._turn_dict(t) for t in new_turns],
                "phase": live.state.phase.value,
            }

    @staticmethod
    def _turn_dict(turn: Turn) -> dict:
        return {"speaker": turn.speaker, "text": turn.text, "at": turn.at, "question_id": turn.question_id}

    def transcript(self, session_id: str) -> dict:
        live = self._live(session_id)
        with live.lock:
            return {
                "session_id": session_id,
                "phase": live.state.phase.value,
                "turns": [self._turn_dict(t) for t in live.state.turns],
            }

    def transcript_jsonl(self, session_id: str) -> str:
        live = self._live(session_id)
        with live.lock:
            return transcript_to_jsonl(live.engine.transcript(live.state))

    def list_sessions(self) -> list[dict]:
        return [self.session_record(row["session_id"]) for row in self.store.list_sessions()]

    # -- surveys ------------------------------------------------------------

    def submit_survey(self, session_id: str, participant_id: str, session_number: int,
                      ratings: dict[str, int]) -> dict:
        live = self._live(session_id)
        if live.state.phase is not Phase.ENDED:
            raise ApiError(409, "session_active", "survey opens once the session has ended")
        try:
            response = evalstats.SurveyResponse(
                session_id=session_id,
                participant_id=participant_id,
                session_number=session_number,
                ratings=ratings,
            )
        except ValueError as exc:
            raise ApiError(400, "validation", str(exc)) from None
        payload = evalstats.response_to_dict(response)
        existing = self.store.survey_for(session_id)
        if existing is not None:
            if existing == payload:
                return existing  # idempotent resubmission
            raise ApiError(409, "survey_conflict", "a different survey is already stored for this session")
        self.store.append_survey(payload)
        return payload

    def summary(self) -> dict:
        responses = [evalstats.response_from_dict(row) for row in self.store.surveys()]
        stats = evalstats.summarize_survey(responses)
        return {
            "rows": evalstats.stats_to_dicts(stats),
            "tsv": evalstats.render_tsv(stats),
            "table": evalstats.render_table(stats),
            "statements": dict(evalstats.STATEMENTS),
        }

    # -- banks ---------------------------------------------------------------

    def create_bank(self, text: str, doc_id: str | None, title: str | None,
                    session_seconds: float | None, seed: int | None) -> dict:
        if not text or not text.strip():
            raise ApiError(400, "validation", "uploaded text is empty")
        if not (self.detector and self.scorer and self.lexicons):
            raise ApiError(503, "config", "bank building needs detector/scorer models and lexicons configured")
        bank_id = f"bank-{uuid.uuid4().hex[:12]}"
        self.store.save_bank_status(bank_id, {"status": "building"})
        args = (bank_id, text, doc_id or bank_id, title or doc_id or bank_id,
                session_seconds, seed)
        thread = threading.Thread(target=self._build_bank_job, args=args, daemon=True)
        thread.start()
        return {"bank_id": bank_id, "status": "building"}

    def _build_bank_job(self, bank_id, text, doc_id, title, session_seconds, seed):
        try:
            doc = corpus.ingest(text, doc_id=doc_id, title=title)
            bank = qgen.build_question_bank(
                doc,
                self.detector,
                self.scorer,
                self.lexicons,
                cfg=self.config.selection_config(),
                session_seconds=session_seconds if session_seconds is not None else self.config.default_budget_seconds,
                seed=seed if seed is not None else self.config.seed,
                detector_threshold=self.config.detector_threshold,
                score_range=metaphor.ScoreRange(*self.config.score_range),
                templates=self.templates,
            )
            self.store.save_bank(bank_id, bank_to_json(bank))
            with self._registry_lock:
                self.banks[bank_id] = bank
            self.store.save_bank_status(
                bank_id, {"status": "ready", "doc_id": bank.doc_id, "questions": len(bank.questions)}
            )
        except Exception as exc:  # surfaced through the status endpoint
            self.store.save_bank_status(bank_id, {"status": "failed", "error": str(exc)})

    def bank_info(self, bank_id: str) -> dict:
        status = self.store.bank_status(bank_id)
        if status is None:
            if bank_id in self.banks:
                bank = self.banks[bank_id]
                return {"bank_id": bank_id, "status": "ready", "doc_id": bank.doc_id,
                        "title": bank.title, "questions": len(bank.questions)}
            raise ApiError(404, "unknown_bank", f"no bank {bank_id!r}")
        info = {"bank_id": bank_id, **status}
        if status.get("status") == "ready" and bank_id in self.banks:
            bank = self.banks[bank_id]
            info.update({"doc_id": bank.doc_id, "title": bank.title, "questions": len(bank.questions)})
        return info

    def list_banks(self) -> list[dict]:
        return [self.bank_info(bank_id) for bank_id in sorted(self.banks)]

    # -- silence timer --------------------------------------------------------

    def start_silence_timer(self) -> threading.Thread | None:
        timeout = self.config.silence_timeout_seconds
        if timeout <= 0:
            return None

        def loop():
            while True:
                time.sleep(1.0)
                now = time.time()
                with self._registry_lock:
                    items = list(self._sessions.items())
                for session_id, live in items:
                    if live.state.phase in (Phase.ENDED, Phase.GREETING):
                        continue
                    if now - live.last_activity > timeout:
                        try:
                            self.post_event(session_id, EventKind.SILENCE_TIMEOUT.value, None)
                        except ApiError:
                            pass

        thread = threading.Thread(target=loop, daemon=True)
        thread.start()
        return thread


# ---------------------------------------------------------------------------
# FastAPI wiring

class CreateSessionBody(BaseModel):
    doc_id: str
    budget_seconds: float | None = None


class EventBody(BaseModel):
    event: str = "UTTERANCE"
    text: str | None = None


class SurveyBody(BaseModel):
    participant_id: str
    session_number: int
    ratings: dict[str, int]


class BankBody(BaseModel):
    text: str
    doc_id: str | None = None
    title: str | None = None
    session_seconds: float | None = None
    seed: int | None = None


def create_app(service: CompanionService) -> FastAPI:
    app = FastAPI(title="bookchat", version="0.1.0")

    @app.exception_handler(ApiError)
    async def api_error_handler(_: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content={"code": exc.code, "message": exc.message})

    @app.exception_handler(StorageError)
    async def storage_error_handler(_: Request, exc: StorageError):
        return JSONResponse(status_code=500, content={"code": "storage", "message": str(exc)})

    @app.post("/banks")
    def post_bank(body: BankBody):
        return service.create_bank(body.text, body.doc_id, body.title, body.session_seconds, body.seed)

    @app.get("/banks")
    def get_banks():
        return service.list_banks()

    @app.get("/banks/{bank_id}")
    def get_bank(bank_id: str):
        return service.bank_info(bank_id)

    @app.post("/sessions")
    def post_session(body: CreateSessionBody):
        return service.create_session(body.doc_id, body.budget_seconds)

    @app.get("/sessions")
    def get_sessions():
        return service.list_sessions()

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return service.session_record(session_id)

    @app.post("/sessions/{session_id}/utterances")
    def post_utterance(session_id: str, body: EventBody):
        return service.post_event(session_id, body.event, body.text)

    @app.get("/sessions/{session_id}/transcript")
    def get_transcript(session_id: str):
        return service.transcript(session_id)

    @app.post("/sessions/{session_id}/survey")
    def post_survey(session_id: str, body: SurveyBody):
        return service.submit_survey(session_id, body.participant_id, body.session_number, body.ratings)

    @app.get("/surveys/summary")
    def get_summary():
        return service.summary()

    @app.get("/surveys/statements")
    def get_statements():
        return {"statements": dict(evalstats.STATEMENTS)}

    @app.websocket("/sessions/{session_id}/stream")
    async def stream(websocket: WebSocket, session_id: str):
        import asyncio

        await websocket.accept()
        try:
            live = service._live(session_id)
        except ApiError as exc:
            await websocket.send_json({"type": "error", "code": exc.code, "message": exc.message})
            await websocket.close()
            return
        sent = 0
        try:
            while True:
                with live.lock:
                    turns = live.state.turns
                    phase = live.state.phase
                while sent < len(turns):
                    await websocket.send_json({"type": "turn", "turn": service._turn_dict(turns[sent])})
                    sent += 1
                if phase is Phase.ENDED:
                    await websocket.send_json({"type": "ended"})
                    break
                await asyncio.sleep(0.05)
        except WebSocketDisconnect:
            return
        await websocket.close()

    if service.config.frontend_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=service.config.frontend_dir, html=True), name="frontend")

    return app


def serve(config: ServiceConfig) -> None:
    import uvicorn

    service = CompanionService(config)
    service.start_silence_timer()
    app = create_app(service)
    uvicorn.run(app, host="127.0.0.1", port=config.port, log_level="warning")
