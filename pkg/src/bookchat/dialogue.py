"""Budgeted, turn-based discussion sessions over a question bank.

The engine is a finite state machine driven purely by typed user events,
so a session is a deterministic function of (bank, seed, event log) and a
persisted log can always be replayed into an identical transcript.  The
caller owns the clock: silence is delivered as SILENCE_TIMEOUT events and
timestamps ride in on the events themselves.

Flow: greet, ask, listen.  Substantive answers earn an acknowledgment and
the next question; short answers get one follow-up; "don't know" gets a
supportive reframe; repeats are restated verbatim.  Each question consumes
a fixed slice of the session budget, and when the budget or the bank runs
out the agent says goodbye and invites the reader to the survey.
"""

from __future__ import annotations

import functools
import json
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources
from pathlib import Path

from .corpus import CONTENT_POS, ConfigError, Tagger, pos_tag, tokenize
from .lexicon import EmbeddingTable
from .metaphor import ScoredPair
from .qgen import QtAQuestion, QuestionBank, SelectionConfig, select_next


class Phase(str, Enum):
    GREETING = "GREETING"
    ASKING = "ASKING"
    AWAITING_RESPONSE = "AWAITING_RESPONSE"
    FOLLOW_UP_AWAIT = "FOLLOW_UP_AWAIT"
    CLOSING = "CLOSING"
    ENDED = "ENDED"


class EventKind(str, Enum):
    SESSION_START = "SESSION_START"
    UTTERANCE = "UTTERANCE"
    SILENCE_TIMEOUT = "SILENCE_TIMEOUT"
    QUIT = "QUIT"


class ResponseKind(str, Enum):
    SUBSTANTIVE = "SUBSTANTIVE"
    SHORT = "SHORT"
    DONT_KNOW = "DONT_KNOW"
    REPEAT_REQUEST = "REPEAT_REQUEST"


class SessionEnded(RuntimeError):
    """advance() was called on an ENDED session."""


@dataclass(frozen=True, slots=True)
class UserEvent:
    kind: EventKind
    text: str | None = None
    at: float = 0.0

    def __post_init__(self):
        if self.kind is EventKind.UTTERANCE and not (self.text or "").strip():
            raise ValueError("UTTERANCE events need non-empty text")


@dataclass(frozen=True, slots=True)
class Turn:
    speaker: str  # "AGENT" | "USER"
    text: str
    at: float
    question_id: str | None = None


@dataclass(frozen=True)
class SessionTranscript:
    session_id: str
    turns: tuple[Turn, ...]


@dataclass
class DialogueState:
    session_id: str
    phase: Phase
    budget_seconds: float
    remaining_seconds: float
    seed: int
    started_at: float = 0.0
    asked: tuple[str, ...] = ()
    history: tuple[ScoredPair, ...] = ()
    current_question: QtAQuestion | None = None
    followups_used_for_current: int = 0
    reprompted_for_current: bool = False
    rotation: tuple[tuple[str, int], ...] = ()  # per-category utterance counters
    turns: tuple[Turn, ...] = ()


# ---------------------------------------------------------------------------
# Data files

def _default_path(name: str) -> Path:
    return Path(str(resources.files("bookchat").joinpath("data", name)))


def load_utterances(path: str | Path | None = None) -> dict[str, tuple[str, ...]]:
    p = Path(path) if path else _default_path("utterances.tsv")
    if not p.exists():
        raise ConfigError(f"utterance bank not found: {p}")
    banks: dict[str, list[str]] = {}
    for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ConfigError(f"{p}:{lineno}: expected 'category<TAB>text'")
        banks.setdefault(parts[0], []).append(parts[1])
    required = {"greeting", "ack", "followup", "reframe", "reprompt", "farewell", "survey_invite"}
    missing = required - set(banks)
    if missing:
        raise ConfigError(f"{p}: utterance bank missing categories {sorted(missing)}")
    return {k: tuple(v) for k, v in banks.items()}


def load_response_patterns(path: str | Path | None = None) -> dict[str, tuple[str, ...]]:
    p = Path(path) if path else _default_path("response_patterns.tsv")
    if not p.exists():
        raise ConfigError(f"response pattern file not found: {p}")
    patterns: dict[str, list[str]] = {"repeat": [], "dont_know": []}
    for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2 or parts[0] not in patterns:
            raise ConfigError(f"{p}:{lineno}: expected 'repeat|dont_know<TAB>pattern'")
        patterns[parts[0]].append(parts[1].lower())
    return {k: tuple(v) for k, v in patterns.items()}


# ---------------------------------------------------------------------------
# Response classification

@functools.lru_cache(maxsize=2)
def _default_patterns() -> dict[str, tuple[str, ...]]:
    return load_response_patterns()


def classify_response(
    text: str,
    patterns: dict[str, tuple[str, ...]] | None = None,
    tagger: Tagger | None = None,
    short_threshold: int = 4,
) -> ResponseKind:
    """Pattern match for repeats and don't-knows, then a content-token count:
    fewer than `short_threshold` content words is SHORT, else SUBSTANTIVE."""
    pats = patterns if patterns is not None else _default_patterns()
    lowered = text.lower()
    if any(p in lowered for p in pats["repeat"]):
        return ResponseKind.REPEAT_REQUEST
    if any(p in lowered for p in pats["dont_know"]):
        return ResponseKind.DONT_KNOW
    tagged = pos_tag(tokenize(text), tagger)
    content = sum(1 for t in tagged if t.pos in CONTENT_POS)
    return ResponseKind.SHORT if content < short_threshold else ResponseKind.SUBSTANTIVE


# ---------------------------------------------------------------------------
# Engine

class DialogueEngine:
    """Holds the immutable session context (bank, utterance banks, optional
    embeddings for similarity-aware selection); states are plain values."""

    def __init__(
        self,
        bank: QuestionBank,
        utterances: dict[str, tuple[str, ...]] | None = None,
        patterns: dict[str, tuple[str, ...]] | None = None,
        embeddings: EmbeddingTable | None = None,
        tagger: Tagger | None = None,
    ):
        self.bank = bank
        self.utterances = utterances if utterances is not None else load_utterances()
        self.patterns = patterns if patterns is not None else _default_patterns()
        self.embeddings = embeddings
        self.tagger = tagger
        self.cfg: SelectionConfig = bank.config

    # -- helpers ----------------------------------------------------------

    def _pick(self, state: DialogueState, category: str) -> tuple[DialogueState, str]:
        bank = self.utterances[category]
        counts = dict(state.rotation)
        idx = (state.seed + counts.get(category, 0)) % len(bank)
        counts[category] = counts.get(category, 0) + 1
        new_state = replace(state, rotation=tuple(sorted(counts.items())))
        return new_state, bank[idx]

    def _say(self, state: DialogueState, out: list[Turn], category: str, at: float,
             question: QtAQuestion | None = None) -> DialogueState:
        state, text = self._pick(state, category)
        if question is not None and "{question}" in text:
            text = text.replace("{question}", question.text)
        turn = Turn(speaker="AGENT", text=text, at=at,
                    question_id=question.question_id if question else None)
        out.append(turn)
        return replace(state, turns=state.turns + (turn,))

    def _say_verbatim(self, state: DialogueState, out: list[Turn], text: str, at: float,
                      question_id: str | None = None) -> DialogueState:
        turn = Turn(speaker="AGENT", text=text, at=at, question_id=question_id)
        out.append(turn)
        return replace(state, turns=state.turns + (turn,))

    def _remaining_questions(self, state: DialogueState) -> list[QtAQuestion]:
        return [q for q in self.bank.questions if q.question_id not in state.asked]

    def _ask_next(self, state: DialogueState, out: list[Turn], at: float) -> DialogueState:
        remaining = self._remaining_questions(state)
        pool = sorted((q.pair for q in remaining),
                      key=lambda sp: (sp.pair.sentence_index, sp.pair.w1_token))
        sel = select_next(list(pool), list(state.history), state.remaining_seconds,
                          self.cfg, self.embeddings)
        if sel is None:
            return self._close(state, out, at)
        question = next(q for q in remaining if q.pair.pair.key() == sel.pair.key())
        state = self._say_verbatim(state, out, question.text, at, question_id=question.question_id)
        return replace(
            state,
            phase=Phase.AWAITING_RESPONSE,
            asked=state.asked + (question.question_id,),
            history=state.history + (sel,),
            current_question=question,
            followups_used_for_current=0,
            reprompted_for_current=False,
            remaining_seconds=state.remaining_seconds - self.cfg.seconds_per_question,
        )

    def _close(self, state: DialogueState, out: list[Turn], at: float) -> DialogueState:
        # CLOSING is transient: farewell and survey invitation are emitted
        # immediately and the session lands in ENDED.
        state = replace(state, phase=Phase.CLOSING)
        state = self._say(state, out, "farewell", at)
        state = self._say(state, out, "survey_invite", at)
        return replace(state, phase=Phase.ENDED, current_question=None)

    # -- public API ---------------------------------------------------------

    def new_session(self, budget_seconds: float = 1800.0, seed: int = 0,
                    session_id: str = "session-0") -> DialogueState:
        return DialogueState(
            session_id=session_id,
            phase=Phase.GREETING,
            budget_seconds=float(budget_seconds),
            remaining_seconds=float(budget_seconds),
            seed=seed,
        )

    def advance(self, state: DialogueState, event: UserEvent) -> tuple[DialogueState, list[str]]:
        """Apply one event; returns the successor state and the agent
        utterances emitted.  Raises SessionEnded on an ENDED session."""
        if state.phase is Phase.ENDED:
            raise SessionEnded(f"session {state.session_id} has ended")
        out: list[Turn] = []
        at = event.at

        if event.kind is EventKind.QUIT:
            state = self._close(state, out, at)

        elif event.kind is EventKind.SESSION_START:
            if state.phase is Phase.GREETING:
                state = replace(state, started_at=at)
                state = self._say(state, out, "greeting", at)
                state = self._ask_next(state, out, at)
            # mid-session SESSION_START is a no-op

        elif event.kind is EventKind.UTTERANCE:
            if state.phase is not Phase.GREETING:
                # pre-greeting chatter is not part of the transcript, which
                # always opens with the agent's greeting
                turn = Turn(speaker="USER", text=event.text or "", at=at,
                            question_id=state.current_question.question_id if state.current_question else None)
                state = replace(state, turns=state.turns + (turn,))
            if state.phase is Phase.AWAITING_RESPONSE:
                kind = classify_response(event.text or "", self.patterns, self.tagger)
                if kind is ResponseKind.REPEAT_REQUEST:
                    state = self._say_verbatim(state, out, state.current_question.text, at,
                                               question_id=state.current_question.question_id)
                elif kind is ResponseKind.DONT_KNOW:
                    state = self._say(state, out, "reframe", at, question=state.current_question)
                    state = replace(state, phase=Phase.FOLLOW_UP_AWAIT,
                                    followups_used_for_current=state.followups_used_for_current + 1)
                elif kind is ResponseKind.SHORT:
                    state = self._say(state, out, "followup", at, question=state.current_question)
                    state = replace(state, phase=Phase.FOLLOW_UP_AWAIT,
                                    followups_used_for_current=state.followups_used_for_current + 1)
                else:  # SUBSTANTIVE
                    state = self._say(state, out, "ack", at)
                    state = self._ask_next(state, out, at)
            elif state.phase is Phase.FOLLOW_UP_AWAIT:
                state = self._say(state, out, "ack", at)
                state = self._ask_next(state, out, at)
            # an utterance before SESSION_START is recorded but not answered

        elif event.kind is EventKind.SILENCE_TIMEOUT:
            if state.phase is Phase.GREETING:
                # treat prolonged silence as the reader settling in: start
                state = replace(state, started_at=at)
                state = self._say(state, out, "greeting", at)
                state = self._ask_next(state, out, at)
            elif state.phase in (Phase.AWAITING_RESPONSE, Phase.FOLLOW_UP_AWAIT):
                if not state.reprompted_for_current:
                    state = self._say(state, out, "reprompt", at, question=state.current_question)
                    state = replace(state, reprompted_for_current=True)
                else:
                    state = self._ask_next(state, out, at)

        return state, [t.text for t in out]

    def transcript(self, state: DialogueState) -> SessionTranscript:
        return SessionTranscript(session_id=state.session_id, turns=state.turns)

    def replay(self, events: list[UserEvent], budget_seconds: float = 1800.0,
               seed: int = 0, session_id: str = "session-0") -> DialogueState:
        """Rebuild a session state by applying a persisted event log."""
        state = self.new_session(budget_seconds=budget_seconds, seed=seed, session_id=session_id)
        for event in events:
            if state.phase is Phase.ENDED:
                break
            state, _ = self.advance(state, event)
        return state


# ---------------------------------------------------------------------------
# Transcript serialization (JSON lines, one turn per line)

def transcript_to_jsonl(transcript: SessionTranscript) -> str:
    lines = [json.dumps({"session_id": transcript.session_id})]
    for t in transcript.turns:
        lines.append(json.dumps(
            {"speaker": t.speaker, "text": t.text, "at": t.at, "question_id": t.question_id},
            ensure_ascii=False,
        ))
    return "\n".join(lines) + "\n"


def transcript_from_jsonl(text: str) -> SessionTranscript:
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise ValueError("empty transcript")
    header = json.loads(lines[0])
    turns = tuple(
        Turn(speaker=d["speaker"], text=d["text"], at=d["at"], question_id=d.get("question_id"))
        for d in map(json.loads, lines[1:])
    )
    return SessionTranscript(session_id=header["session_id"], turns=turns)


def event_to_dict(event: UserEvent) -> dict:
    return {"kind": event.kind.value, "text": event.text, "at": event.at}


def event_from_dict(data: dict) -> UserEvent:
    return UserEvent(kind=EventKind(data["kind"]), text=data.get("text"), at=data.get("at", 0.0))
