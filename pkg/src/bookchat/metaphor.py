"""Core pipeline stages: repurpose a pair-scored dataset into sentence
labels, detect metaphor-bearing sentences, extract syntactically related
content-word pairs, and predict a novelty score per pair.

Pair extraction is six shallow patterns over the coarse tag sequence
rather than a dependency parse; the patterns are deterministic and cover
adjective-noun, subject-verb, verb-object, adverb-verb, copula, and
simile constructions.
"""

from __future__ import annotations

import functools
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from . import mlcore
from .corpus import CONTENT_POS, Document, Pos, Sentence, tag_text
from .lexicon import FeatureVector, Lexicons, pair_features, schema_id, sentence_features


class Pattern(str, Enum):
    ADJ_NOUN = "ADJ_NOUN"
    NOUN_VERB = "NOUN_VERB"
    VERB_NOUN = "VERB_NOUN"
    ADV_VERB = "ADV_VERB"
    NOUN_NOUN_COP = "NOUN_NOUN_COP"
    SIMILE = "SIMILE"


COPULAS = frozenset({"is", "are", "was", "were", "be", "been", "am", "seems", "seemed", "being"})
SIMILE_MARKERS = frozenset({"like", "as"})


@dataclass(frozen=True, slots=True)
class WordPair:
    doc_id: str
    sentence_index: int
    w1_token: int
    w2_token: int
    pattern: Pattern

    def key(self) -> tuple[int, int, int]:
        return (self.sentence_index, self.w1_token, self.w2_token)


@dataclass(frozen=True, slots=True)
class ScoredPair:
    pair: WordPair
    novelty: float  # normalized to [0, 1]
    raw_novelty: float
    w1: str
    w2: str
    sentence_text: str


@dataclass(frozen=True, slots=True)
class PairDatasetRecord:
    sentence_text: str
    w1: str
    w2: str
    raw_score: float


@dataclass(frozen=True)
class ScoreRange:
    lo: float = 0.0
    hi: float = 3.0

    def __post_init__(self):
        if self.hi <= self.lo:
            raise ValueError("empty score range")

    def normalize(self, raw: float) -> float:
        return (raw - self.lo) / (self.hi - self.lo)

    def denormalize(self, frac: float) -> float:
        return self.lo + frac * (self.hi - self.lo)

    def midpoint(self) -> float:
        return (self.lo + self.hi) / 2.0


DEFAULT_SCORE_RANGE = ScoreRange()

#: Regression models predict a centered score in [-1, 1]; 0 maps to the
#: midpoint of the raw range, mirroring sigmoid(0) = 0.5 for classifiers.
CENTERED_RANGE = (-1.0, 1.0)


# ---------------------------------------------------------------------------
# Dataset files and repurposing

def read_pair_tsv(path: str | Path) -> list[PairDatasetRecord]:
    """TSV rows: sentence_text<TAB>w1<TAB>w2<TAB>raw_score."""
    records = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise ValueError(f"{path}:{lineno}: expected 4 tab-separated fields, got {len(parts)}")
        try:
            score = float(parts[3])
        except ValueError:
            raise ValueError(f"{path}:{lineno}: bad score {parts[3]!r}") from None
        records.append(PairDatasetRecord(sentence_text=parts[0], w1=parts[1], w2=parts[2], raw_score=score))
    return records


def write_pair_tsv(path: str | Path, records: list[PairDatasetRecord]) -> None:
    lines = [f"{r.sentence_text}\t{r.w1}\t{r.w2}\t{r.raw_score}" for r in records]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def label_sentences(records: list[PairDatasetRecord], tau: float) -> list[tuple[str, int]]:
    """Group records by sentence text (first-appearance order); a sentence is
    positive iff any of its pair scores strictly exceeds tau."""
    best: dict[str, float] = {}
    for rec in records:
        prev = best.get(rec.sentence_text)
        if prev is None or rec.raw_score > prev:
            best[rec.sentence_text] = rec.raw_score
    return [(text, 1 if score > tau else 0) for text, score in best.items()]


# ---------------------------------------------------------------------------
# Sentence-level detector

@functools.lru_cache(maxsize=8192)
def _tag_cached(text: str) -> Sentence:
    return tag_text(text)


def train_detector(
    labeled: list[tuple[str, int]],
    lexicons: Lexicons,
    hyper: mlcore.Hyperparams,
    hidden_dim: int = 0,
) -> mlcore.Model:
    """Binary classifier over sentence features."""
    if not labeled:
        raise mlcore.TrainingError("empty labeled set")
    classes = {label for _, label in labeled}
    if classes != {0, 1}:
        raise mlcore.TrainingError(f"need both classes in training data, got {sorted(classes)}")
    dataset = []
    for text, label in labeled:
        sent = tag_text(text, tagger=lexicons.tagger)
        dataset.append((sentence_features(sent, lexicons.embeddings, lexicons.norms), label))
    dim = lexicons.embeddings.dim
    spec = mlcore.ModelSpec(
        input_dim=dim + 14,
        hidden_dim=hidden_dim,
        output_dim=1,
        task="binary_classification",
        feature_schema_id=schema_id("sent.v1", dim),
    )
    return mlcore.train(spec, dataset, hyper)


def classify_sentence(model: mlcore.Model, sentence: Sentence, lexicons: Lexicons) -> float:
    """Probability that the sentence contains a novel metaphor."""
    fv = sentence_features(sentence, lexicons.embeddings, lexicons.norms)
    return mlcore.forward(model, fv)


# ---------------------------------------------------------------------------
# Pair extraction

def extract_pairs(sentence: Sentence, doc_id: str = "") -> list[WordPair]:
    """All syntactically related content-word pairs, by pattern priority
    ADJ_NOUN < NOUN_VERB < VERB_NOUN < ADV_VERB < NOUN_NOUN_COP < SIMILE;
    a (w1, w2) token index pair is emitted once, first pattern wins."""
    toks = sentence.tokens
    n = len(toks)
    found: dict[tuple[int, int], WordPair] = {}

    def add(i: int, j: int, pattern: Pattern) -> None:
        if i > j:
            i, j = j, i
        if (i, j) not in found:
            found[(i, j)] = WordPair(
                doc_id=doc_id, sentence_index=sentence.index,
                w1_token=i, w2_token=j, pattern=pattern,
            )

    # (a) ADJ followed by a NOUN within 2 tokens, no intervening verb/punct
    for i in range(n):
        if toks[i].pos is not Pos.ADJ:
            continue
        for j in range(i + 1, min(i + 2, n - 1) + 1):
            if toks[j].pos is Pos.NOUN:
                if not any(toks[k].pos in (Pos.VERB, Pos.PUNCT) for k in range(i + 1, j)):
                    add(i, j, Pattern.ADJ_NOUN)
                break
            if toks[j].pos in (Pos.VERB, Pos.PUNCT):
                break

    # (b) nearest NOUN preceding a VERB within 4 tokens (subject-verb proxy)
    for v in range(n):
        if toks[v].pos is not Pos.VERB:
            continue
        for i in range(v - 1, max(v - 4, 0) - 1, -1):
            if toks[i].pos is Pos.NOUN:
                add(i, v, Pattern.NOUN_VERB)
                break

    # (c) VERB followed by NOUN within 3 tokens, skipping DET/ADJ (object proxy)
    for v in range(n):
        if toks[v].pos is not Pos.VERB:
            continue
        for j in range(v + 1, min(v + 3, n - 1) + 1):
            if toks[j].pos is Pos.NOUN:
                add(v, j, Pattern.VERB_NOUN)
                break
            if toks[j].pos not in (Pos.DET, Pos.ADJ):
                break

    # (d) ADV adjacent to a VERB (either order)
    for i in range(n - 1):
        a, b = toks[i].pos, toks[i + 1].pos
        if (a is Pos.ADV and b is Pos.VERB) or (a is Pos.VERB and b is Pos.ADV):
            add(i, i + 1, Pattern.ADV_VERB)

    # (e) NOUN, copula, NOUN (DET/ADJ may intervene after the copula)
    for i in range(n - 2):
        if toks[i].pos is not Pos.NOUN or toks[i + 1].surface.lower() not in COPULAS:
            continue
        for j in range(i + 2, min(i + 5, n - 1) + 1):
            if toks[j].pos is Pos.NOUN:
                add(i, j, Pattern.NOUN_NOUN_COP)
                break
            if toks[j].pos not in (Pos.DET, Pos.ADJ):
                break

    # (f) content word before "like"/"as", paired with first NOUN within 4 after
    for k in range(n):
        if toks[k].surface.lower() not in SIMILE_MARKERS:
            continue
        i = next((p for p in range(k - 1, -1, -1) if toks[p].pos in CONTENT_POS), None)
        if i is None:
            continue
        j = next((q for q in range(k + 1, min(k + 4, n - 1) + 1) if toks[q].pos is Pos.NOUN), None)
        if j is not None:
            add(i, j, Pattern.SIMILE)

    return sorted(found.values(), key=lambda p: (p.w1_token, p.w2_token))


# ---------------------------------------------------------------------------
# Pair novelty scorer

def _pattern_for(sentence: Sentence, w1: str, w2: str) -> Pattern | None:
    """Best-effort pattern recovery for dataset records: find an extracted
    pair whose surfaces (or lemmas) match the record's words."""
    w1l, w2l = w1.lower(), w2.lower()
    for pair in extract_pairs(sentence):
        t1, t2 = sentence.tokens[pair.w1_token], sentence.tokens[pair.w2_token]
        if {t1.surface.lower(), t1.lemma} & {w1l} and {t2.surface.lower(), t2.lemma} & {w2l}:
            return pair.pattern
        if {t1.surface.lower(), t1.lemma} & {w2l} and {t2.surface.lower(), t2.lemma} & {w1l}:
            return pair.pattern
    return None


def train_scorer(
    records: list[PairDatasetRecord],
    lexicons: Lexicons,
    hyper: mlcore.Hyperparams,
    score_range: ScoreRange = DEFAULT_SCORE_RANGE,
    hidden_dim: int = 0,
) -> mlcore.Model:
    """Regression on centered normalized scores (2*normalized - 1), so the
    zero model predicts the range midpoint.  Concatenate record files
    upstream to train on combined datasets."""
    if not records:
        raise mlcore.TrainingError("no pair records")
    dataset = []
    for rec in records:
        sent = tag_text(rec.sentence_text, tagger=lexicons.tagger)
        pattern = _pattern_for(sent, rec.w1, rec.w2)
        fv = pair_features(rec.w1, rec.w2, pattern.value if pattern else None,
                           lexicons.embeddings, lexicons.norms)
        target = 2.0 * score_range.normalize(rec.raw_score) - 1.0
        dataset.append((fv, target))
    dim = lexicons.embeddings.dim
    spec = mlcore.ModelSpec(
        input_dim=2 * dim + 19,
        hidden_dim=hidden_dim,
        output_dim=1,
        task="regression",
        feature_schema_id=schema_id("pair.v1", dim),
        output_range=CENTERED_RANGE,
    )
    return mlcore.train(spec, dataset, hyper)


def score_pair(
    model: mlcore.Model,
    pair: WordPair,
    sentence: Sentence,
    lexicons: Lexicons,
    score_range: ScoreRange = DEFAULT_SCORE_RANGE,
) -> ScoredPair:
    t1, t2 = sentence.tokens[pair.w1_token], sentence.tokens[pair.w2_token]
    fv = pair_features(t1.surface, t2.surface, pair.pattern.value,
                       lexicons.embeddings, lexicons.norms)
    centered = mlcore.forward(model, fv)  # clamped to [-1, 1]
    novelty = (centered + 1.0) / 2.0
    return ScoredPair(
        pair=pair,
        novelty=novelty,
        raw_novelty=score_range.denormalize(novelty),
        w1=t1.surface,
        w2=t2.surface,
        sentence_text=sentence.text,
    )


def score_document(
    doc: Document,
    detector: mlcore.Model,
    scorer: mlcore.Model,
    lexicons: Lexicons,
    detector_threshold: float = 0.5,
    score_range: ScoreRange = DEFAULT_SCORE_RANGE,
) -> list[ScoredPair]:
    """Score every pair in every sentence whose detector probability is at
    least the threshold; chronological output order."""
    out: list[ScoredPair] = []
    for sentence in doc.sentences:
        if classify_sentence(detector, sentence, lexicons) < detector_threshold:
            continue
        for pair in extract_pairs(sentence, doc_id=doc.doc_id):
            out.append(score_pair(scorer, pair, sentence, lexicons, score_range))
    out.sort(key=lambda sp: (sp.pair.sentence_index, sp.pair.w1_token, sp.pair.w2_token))
    return out


# ---------------------------------------------------------------------------
# Scored-pair dumps (JSON lines with provenance)

def scored_pair_to_dict(sp: ScoredPair) -> dict:
    return {
        "doc_id": sp.pair.doc_id,
        "sentence_index": sp.pair.sentence_index,
        "w1_token": sp.pair.w1_token,
        "w2_token": sp.pair.w2_token,
        "pattern": sp.pair.pattern.value,
        "w1": sp.w1,
        "w2": sp.w2,
        "novelty": sp.novelty,
        "raw_novelty": sp.raw_novelty,
        "sentence_text": sp.sentence_text,
    }


def scored_pair_from_dict(data: dict) -> ScoredPair:
    return ScoredPair(
        pair=WordPair(
            doc_id=data["doc_id"],
            sentence_index=data["sentence_index"],
            w1_token=data["w1_token"],
            w2_token=data["w2_token"],
            pattern=Pattern(data["pattern"]),
        ),
        novelty=data["novelty"],
        raw_novelty=data["raw_novelty"],
        w1=data["w1"],
        w2=data["w2"],
        sentence_text=data["sentence_text"],
    )


def write_scored_pairs(path: str | Path, pairs: list[ScoredPair]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sp in pairs:
            fh.write(json.dumps(scored_pair_to_dict(sp), ensure_ascii=False) + "\n")
