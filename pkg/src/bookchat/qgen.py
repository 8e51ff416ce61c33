"""Question selection and generation.

Selection balances four signals under a time budget: prefer novel pairs,
avoid pairs similar to ones already discussed, avoid sentences similar to
ones already discussed, and never start a question the remaining budget
cannot cover.  The combination is a linear utility with chronological
tie-breaking, so selection is deterministic and brute-force checkable.

Questions are instantiated from a template bank (a data file, so a richer
bank can be dropped in) by seeded rotation over the templates compatible
with the pair's pattern.
"""

from __future__ import annotations

import functools
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .corpus import CONTENT_POS, ConfigError, Document, tag_text
from .lexicon import EmbeddingTable, Lexicons, cosine, lookup_embedding
from .metaphor import (
    DEFAULT_SCORE_RANGE,
    Pattern,
    ScoredPair,
    ScoreRange,
    WordPair,
    score_document,
    scored_pair_from_dict,
    scored_pair_to_dict,
)
from . import mlcore


@dataclass(frozen=True)
class SelectionConfig:
    w_novelty: float = 1.0
    w_pair_sim: float = 0.5
    w_sent_sim: float = 0.5
    seconds_per_question: float = 120.0
    min_novelty: float = 0.6

    def __post_init__(self):
        if min(self.w_novelty, self.w_pair_sim, self.w_sent_sim) < 0:
            raise ValueError("selection weights must be >= 0")
        if self.seconds_per_question <= 0:
            raise ValueError("seconds_per_question must be positive")
        if not 0.0 <= self.min_novelty <= 1.0:
            raise ValueError("min_novelty must be in [0, 1]")


@dataclass(frozen=True, slots=True)
class QtAQuestion:
    question_id: str
    text: str
    pair: ScoredPair
    template_id: str
    source_sentence: str


@dataclass(frozen=True)
class QuestionBank:
    doc_id: str
    title: str
    questions: tuple[QtAQuestion, ...]
    config: SelectionConfig
    seed: int
    created_at: str | None = None


# ---------------------------------------------------------------------------
# Similarity helpers

def _pair_vec(sp: ScoredPair, embeddings: EmbeddingTable | None):
    if embeddings is None:
        return None
    vecs = [v for w in (sp.w1, sp.w2) if (v := lookup_embedding(embeddings, w)) is not None]
    if not vecs:
        return None
    return np.mean(vecs, axis=0)


@functools.lru_cache(maxsize=4096)
def _content_surfaces(text: str) -> tuple[str, ...]:
    sent = tag_text(text)
    return tuple(t.surface for t in sent.tokens if t.pos in CONTENT_POS)


def _sentence_vec(text: str, embeddings: EmbeddingTable | None):
    if embeddings is None:
        return None
    vecs = [v for w in _content_surfaces(text) if (v := lookup_embedding(embeddings, w)) is not None]
    if not vecs:
        return None
    return np.mean(vecs, axis=0)


def _max_sim(vec, history_vecs) -> float:
    if vec is None:
        return 0.0
    sims = [cosine(vec, hv) for hv in history_vecs if hv is not None]
    return max(sims) if sims else 0.0


def select_next(
    candidates: list[ScoredPair],
    history: list[ScoredPair],
    remaining_seconds: float,
    cfg: SelectionConfig = SelectionConfig(),
    embeddings: EmbeddingTable | None = None,
) -> ScoredPair | None:
    """Highest-utility eligible candidate, or None when the budget cannot
    cover another question or nothing clears the novelty floor.

    U = w_novelty * novelty - w_pair_sim * maxPairSim - w_sent_sim * maxSentSim,
    similarities being the max cosine against the history's mean pair and
    mean sentence embeddings (0 with empty history or missing vectors).
    Ties break chronologically: earlier sentence, then earlier first token.
    """
    if remaining_seconds < cfg.seconds_per_question:
        return None
    eligible = [c for c in candidates if c.novelty >= cfg.min_novelty]
    if not eligible:
        return None
    hist_pair_vecs = [_pair_vec(h, embeddings) for h in history]
    hist_sent_vecs = [_sentence_vec(h.sentence_text, embeddings) for h in history]
    best = None
    best_key = None
    for cand in eligible:
        pair_sim = _max_sim(_pair_vec(cand, embeddings), hist_pair_vecs)
        sent_sim = _max_sim(_sentence_vec(cand.sentence_text, embeddings), hist_sent_vecs)
        utility = cfg.w_novelty * cand.novelty - cfg.w_pair_sim * pair_sim - cfg.w_sent_sim * sent_sim
        key = (-utility, cand.pair.sentence_index, cand.pair.w1_token)
        if best_key is None or key < best_key:
            best, best_key = cand, key
    return best


# ---------------------------------------------------------------------------
# Templates

@dataclass(frozen=True)
class Template:
    template_id: str
    patterns: frozenset[str] | None  # None = wildcard
    text: str


def load_templates(path: str | Path | None = None) -> tuple[Template, ...]:
    p = Path(path) if path else Path(str(resources.files("bookchat").joinpath("data", "templates.tsv")))
    if not p.exists():
        raise ConfigError(f"template bank not found: {p}")
    templates = []
    for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ConfigError(f"{p}:{lineno}: expected 'id<TAB>patterns<TAB>text'")
        tid, patterns, text = parts
        pat = None if patterns.strip() == "*" else frozenset(s.strip() for s in patterns.split(","))
        templates.append(Template(template_id=tid, patterns=pat, text=text))
    if not templates:
        raise ConfigError(f"{p}: empty template bank")
    return tuple(templates)


@functools.lru_cache(maxsize=1)
def default_templates() -> tuple[Template, ...]:
    return load_templates()


def generate_question(
    pair: ScoredPair,
    seed: int = 0,
    templates: tuple[Template, ...] | None = None,
) -> QtAQuestion:
    """Instantiate a template for the pair.  Template choice is a seeded
    rotation keyed on the pair's position, so banks vary their phrasing
    while staying reproducible."""
    bank = templates if templates is not None else default_templates()
    compatible = [t for t in bank if t.patterns is None or pair.pair.pattern.value in t.patterns]
    if not compatible:
        raise ConfigError(f"no template compatible with pattern {pair.pair.pattern.value}")
    rotation = seed + pair.pair.sentence_index * 7 + pair.pair.w1_token * 3 + pair.pair.w2_token
    chosen = compatible[rotation % len(compatible)]
    text = (
        chosen.text
        .replace("{w1}", pair.w1)
        .replace("{w2}", pair.w2)
        .replace("{sentence}", pair.sentence_text)
    )
    text = text[0].upper() + text[1:] if text else text
    if not text.endswith("?"):
        text = text.rstrip(".!") + "?"
    qid = f"q{pair.pair.sentence_index:04d}-{pair.pair.w1_token:02d}-{pair.pair.w2_token:02d}"
    return QtAQuestion(
        question_id=qid,
        text=text,
        pair=pair,
        template_id=chosen.template_id,
        source_sentence=pair.sentence_text,
    )


# ---------------------------------------------------------------------------
# Bank building

def build_question_bank(
    doc: Document,
    detector: mlcore.Model,
    scorer: mlcore.Model,
    lexicons: Lexicons,
    cfg: SelectionConfig = SelectionConfig(),
    session_seconds: float = 1800.0,
    seed: int = 0,
    detector_threshold: float = 0.5,
    score_range: ScoreRange = DEFAULT_SCORE_RANGE,
    templates: tuple[Template, ...] | None = None,
    created_at: str | None = None,
) -> QuestionBank:
    """Score the document, then repeatedly select under a simulated session
    budget, generating one question per selection."""
    candidates = score_document(doc, detector, scorer, lexicons, detector_threshold, score_range)
    history: list[ScoredPair] = []
    chosen_keys: set[tuple[int, int, int]] = set()
    questions: list[QtAQuestion] = []
    remaining = float(session_seconds)
    while True:
        pool = [c for c in candidates if c.pair.key() not in chosen_keys]
        sel = select_next(pool, history, remaining, cfg, lexicons.embeddings)
        if sel is None:
            break
        questions.append(generate_question(sel, seed=seed, templates=templates))
        history.append(sel)
        chosen_keys.add(sel.pair.key())
        remaining -= cfg.seconds_per_question
    return QuestionBank(
        doc_id=doc.doc_id,
        title=doc.title,
        questions=tuple(questions),
        config=cfg,
        seed=seed,
        created_at=created_at,
    )


# ---------------------------------------------------------------------------
# Serialization

def bank_to_dict(bank: QuestionBank) -> dict:
    return {
        "doc_id": bank.doc_id,
        "title": bank.title,
        "created_at": bank.created_at,
        "seed": bank.seed,
        "config": {
            "w_novelty": bank.config.w_novelty,
            "w_pair_sim": bank.config.w_pair_sim,
            "w_sent_sim": bank.config.w_sent_sim,
            "seconds_per_question": bank.config.seconds_per_question,
            "min_novelty": bank.config.min_novelty,
        },
        "questions": [
            {
                "question_id": q.question_id,
                "text": q.text,
                "template_id": q.template_id,
                "source_sentence": q.source_sentence,
                "pair": scored_pair_to_dict(q.pair),
            }
            for q in bank.questions
        ],
    }


def bank_from_dict(data: dict) -> QuestionBank:
    return QuestionBank(
        doc_id=data["doc_id"],
        title=data.get("title", ""),
        created_at=data.get("created_at"),
        seed=data.get("seed", 0),
        config=SelectionConfig(**data["config"]),
        questions=tuple(
            QtAQuestion(
                question_id=q["question_id"],
                text=q["text"],
                template_id=q["template_id"],
                source_sentence=q["source_sentence"],
                pair=scored_pair_from_dict(q["pair"]),
            )
            for q in data["questions"]
        ),
    )


def bank_to_json(bank: QuestionBank) -> str:
    return json.dumps(bank_to_dict(bank), ensure_ascii=False, indent=2)


def bank_from_json(text: str) -> QuestionBank:
    return bank_from_dict(json.loads(text))
