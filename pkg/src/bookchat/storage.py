"""Durable session storage: append-only JSON-lines event logs plus a small
index, written with flush+fsync before any acknowledgment.

Only user events are persisted; agent turns are recomputed by replaying
the log through the deterministic dialogue engine, so the log plus the
session seed fully determine the transcript.  A trailing partial line
(torn write from a crash) is tolerated on read; corruption anywhere else
raises.
"""

from __future__ import annotations

import json
import os
from pathlib import Path


class StorageError(RuntimeError):
    pass


def _append_line(path: Path, payload: dict) -> None:
    line = json.dumps(payload, ensure_ascii=False)
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(line + "\n")
        fh.flush()
        os.fsync(fh.fileno())


def _read_jsonl(path: Path) -> list[dict]:
    if not path.exists():
        return []
    lines = path.read_text(encoding="utf-8").split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    out = []
    for i, line in enumerate(lines):
        try:
            out.append(json.loads(line))
        except json.JSONDecodeError:
            if i == len(lines) - 1:
                break  # torn tail write; everything acknowledged is intact
            raise StorageError(f"{path}:{i + 1}: corrupt log line") from None
    return out


class SessionStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.sessions_dir = self.root / "sessions"
        self.banks_dir = self.root / "banks"
        self.sessions_dir.mkdir(parents=True, exist_ok=True)
        self.banks_dir.mkdir(parents=True, exist_ok=True)
        self.index_path = self.root / "sessions" / "index.jsonl"
        self.surveys_path = self.root / "surveys.jsonl"

    # -- sessions -----------------------------------------------------------

    def _events_path(self, session_id: str) -> Path:
        return self.sessions_dir / f"{session_id}.events.jsonl"

    def _meta_path(self, session_id: str) -> Path:
        return self.sessions_dir / f"{session_id}.meta.json"

    def create_session(self, session_id: str, meta: dict) -> None:
        meta_path = self._meta_path(session_id)
        if meta_path.exists():
            raise StorageError(f"session {session_id} already exists")
        meta_path.write_text(json.dumps(meta, ensure_ascii=False, indent=1), encoding="utf-8")
        self._events_path(session_id).touch()
        _append_line(self.index_path, {"session_id": session_id, **meta})

    def session_exists(self, session_id: str) -> bool:
        return self._meta_path(session_id).exists()

    def session_meta(self, session_id: str) -> dict:
        path = self._meta_path(session_id)
        if not path.exists():
            raise StorageError(f"unknown session {session_id}")
        return json.loads(path.read_text(encoding="utf-8"))

    def append_event(self, session_id: str, event: dict) -> None:
        """Write-ahead persistence: callers must append the event (and let
        this fsync) before applying it or replying."""
        if not self.session_exists(session_id):
            raise StorageError(f"unknown session {session_id}")
        _append_line(self._events_path(session_id), event)

    def events(self, session_id: str) -> list[dict]:
        return _read_jsonl(self._events_path(session_id))

    def list_sessions(self) -> list[dict]:
        return _read_jsonl(self.index_path)

    # -- surveys ------------------------------------------------------------

    def append_survey(self, payload: dict) -> None:
        _append_line(self.surveys_path, payload)

    def surveys(self) -> list[dict]:
        return _read_jsonl(self.surveys_path)

    def survey_for(self, session_id: str) -> dict | None:
        for row in self.surveys():
            if row.get("session_id") == session_id:
                return row
        return None

    # -- banks --------------------------------------------------------------

    def save_bank(self, bank_id: str, bank_json: str) -> None:
        (self.banks_dir / f"{bank_id}.json").write_text(bank_json, encoding="utf-8")

    def save_bank_status(self, bank_id: str, status: dict) -> None:
        (self.banks_dir / f"{bank_id}.status.json").write_text(
            json.dumps(status, ensure_ascii=False), encoding="utf-8"
        )

    def bank_status(self, bank_id: str) -> dict | None:
        path = self.banks_dir / f"{bank_id}.status.json"
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def load_bank_json(self, bank_id: str) -> str | None:
        path = self.banks_dir / f"{bank_id}.json"
        if not path.exists():
            return None
        return path.read_text(encoding="utf-8")

    def list_bank_ids(self) -> list[str]:
        return sorted(p.stem for p in self.banks_dir.glob("*.json") if not p.name.endswith(".status.json"))
