"""Word embeddings, psycholinguistic norms, and feature vectors.

Embedding files come in the classic two formats: a text format
(``vocab_count dim`` header, then ``word v1 ... vdim`` per line) and a
binary format (same text header line, then per entry the word bytes, one
0x20 byte, and ``dim`` little-endian float32 values).

Norm tables are CSVs with a mandatory ``# ranges ...`` comment declaring
the raw min:max of each column; values are min-max normalized to [0, 1]
at load time.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .corpus import CONTENT_POS, Sentence, Tagger, default_tagger, lemma_of

NORM_NAMES = ("concreteness", "imageability", "familiarity", "aoa")

#: Fill used for a norm value when a word is not covered by the table.
NORM_FILL = 0.5


class FormatError(ValueError):
    """A lexicon file does not match its declared format."""


@dataclass
class EmbeddingTable:
    dim: int
    entries: dict[str, np.ndarray]
    warning_count: int = 0

    def __post_init__(self):
        if self.dim <= 0:
            raise FormatError("embedding dim must be positive")


@dataclass(frozen=True)
class NormRecord:
    concreteness: float
    imageability: float
    familiarity: float
    aoa: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.concreteness, self.imageability, self.familiarity, self.aoa)


@dataclass
class NormTable:
    entries: dict[str, NormRecord]
    warning_count: int = 0


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    schema_id: str

    def __post_init__(self):
        expected = feature_length(self.schema_id)
        if len(self.values) != expected:
            raise ValueError(f"schema {self.schema_id} expects {expected} values, got {len(self.values)}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature vector contains NaN/Inf")


_LAYOUTS = {
    "sent.v1": lambda dim: dim + 14,
    "pair.v1": lambda dim: 2 * dim + 19,
    "raw": lambda dim: dim,  # untyped vectors, used by standalone models
}


def schema_id(layout: str, dim: int) -> str:
    if layout not in _LAYOUTS:
        raise ValueError(f"unknown feature layout {layout!r}")
    return f"{layout}/{dim}"


def feature_length(schema: str) -> int:
    try:
        layout, dim = schema.rsplit("/", 1)
        return _LAYOUTS[layout](int(dim))
    except (ValueError, KeyError):
        raise ValueError(f"unknown feature schema {schema!r}") from None


# ---------------------------------------------------------------------------
# Embedding loading

def _parse_header(line: str, where: str) -> tuple[int, int]:
    parts = line.split()
    if len(parts) != 2:
        raise FormatError(f"{where}: header must be 'vocab_count dim', got {line!r}")
    try:
        count, dim = int(parts[0]), int(parts[1])
    except ValueError:
        raise FormatError(f"{where}: non-numeric header {line!r}") from None
    if count < 0 or dim <= 0:
        raise FormatError(f"{where}: bad header values {line!r}")
    return count, dim


def _load_embeddings_text(path: str) -> EmbeddingTable:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        count, dim = _parse_header(header, f"{path}:1")
        entries: dict[str, np.ndarray] = {}
        warnings = 0
        lineno = 1
        for line in fh:
            lineno += 1
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(" ")
            if len(parts) != dim + 1:
                raise FormatError(f"{path}:{lineno}: expected {dim} components, got {len(parts) - 1}")
            word = parts[0]
            try:
                vec = np.array([float(x) for x in parts[1:]], dtype=np.float64)
            except ValueError:
                raise FormatError(f"{path}:{lineno}: non-numeric component") from None
            if word in entries:
                warnings += 1
            entries[word] = vec
        if len(entries) + warnings != count:
            raise FormatError(f"{path}: header declares {count} entries, file has {len(entries) + warnings}")
    return EmbeddingTable(dim=dim, entries=entries, warning_count=warnings)


def _load_embeddings_binary(path: str) -> EmbeddingTable:
    with open(path, "rb") as fh:
        data = fh.read()
    nl = data.find(b"\n")
    if nl < 0:
        raise FormatError(f"{path}: missing header line")
    count, dim = _parse_header(data[:nl].decode("utf-8", errors="replace"), f"{path}:0")
    entries: dict[str, np.ndarray] = {}
    warnings = 0
    offset = nl + 1
    vec_bytes = 4 * dim
    for _ in range(count):
        space = data.find(b" ", offset)
        if space < 0:
            raise FormatError(f"{path}: truncated at byte {offset} (missing word separator)")
        word = data[offset:space].decode("utf-8", errors="strict")
        offset = space + 1
        if offset + vec_bytes > len(data):
            raise FormatError(f"{path}: truncated at byte {offset} (incomplete vector)")
        vec = np.array(struct.unpack_from(f"<{dim}f", data, offset), dtype=np.float64)
        offset += vec_bytes
        if word in entries:
            warnings += 1
        entries[word] = vec
    return EmbeddingTable(dim=dim, entries=entries, warning_count=warnings)


def load_embeddings(path: str, format: str = "text") -> EmbeddingTable:
    if format == "text":
        return _load_embeddings_text(path)
    if format == "binary":
        return _load_embeddings_binary(path)
    raise ValueError(f"unknown embedding format {format!r}")


def vector(table: EmbeddingTable, word: str) -> np.ndarray | None:
    """Exact-case lookup, then lowercase, else None."""
    hit = table.entries.get(word)
    if hit is None:
        hit = table.entries.get(word.lower())
    return hit


def lookup_embedding(table: EmbeddingTable, word: str) -> np.ndarray | None:
    """Surface lookup with a lemma fallback; the policy used by all features."""
    hit = vector(table, word)
    if hit is None:
        hit = vector(table, lemma_of(word))
    return hit


def cosine(a, b) -> float:
    """Cosine similarity; 0.0 by convention when either vector is all zero.

    Inputs are pre-scaled by their max-abs component so the dot products
    neither underflow (subnormal components) nor overflow (huge ones).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"cosine: length mismatch {a.shape} vs {b.shape}")
    ma = float(np.max(np.abs(a)))
    mb = float(np.max(np.abs(b)))
    if ma == 0.0 or mb == 0.0:
        return 0.0
    a = a / ma
    b = b / mb
    na = math.sqrt(float(np.dot(a, a)))
    nb = math.sqrt(float(np.dot(b, b)))
    return float(np.dot(a, b)) / (na * nb)


# ---------------------------------------------------------------------------
# Norm loading

def load_norms(path: str) -> NormTable:
    ranges: dict[str, tuple[float, float]] | None = None
    header: list[str] | None = None
    entries: dict[str, NormRecord] = {}
    warnings = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                decl = line.lstrip("#").strip()
                if decl.lower().startswith("ranges"):
                    ranges = _parse_ranges(decl, f"{path}:{lineno}")
                continue
            cells = [c.strip() for c in line.split(",")]
            if header is None:
                header = cells
                if header != ["word", *NORM_NAMES]:
                    raise FormatError(f"{path}:{lineno}: header must be 'word,{','.join(NORM_NAMES)}'")
                if ranges is None:
                    raise FormatError(f"{path}: missing '# ranges ...' declaration before header")
                continue
            if len(cells) != 5:
                raise FormatError(f"{path}:{lineno}: expected 5 columns, got {len(cells)}")
            word = cells[0].lower()
            vals = {}
            for name, cell in zip(NORM_NAMES, cells[1:]):
                try:
                    raw = float(cell)
                except ValueError:
                    raise FormatError(f"{path}:{lineno}: non-numeric {name} value {cell!r}") from None
                lo, hi = ranges[name]
                vals[name] = min(1.0, max(0.0, (raw - lo) / (hi - lo)))
            if word in entries:
                warnings += 1
            entries[word] = NormRecord(**vals)
    if header is None:
        raise FormatError(f"{path}: empty norms file")
    return NormTable(entries=entries, warning_count=warnings)


def _parse_ranges(decl: str, where: str) -> dict[str, tuple[float, float]]:
    # e.g. "ranges concreteness=100:700,imageability=100:700,..."
    body = decl.split(None, 1)
    if len(body) != 2:
        raise FormatError(f"{where}: empty ranges declaration")
    ranges = {}
    for item in body[1].split(","):
        item = item.strip()
        if not item:
            continue
        try:
            name, span = item.split("=")
            lo, hi = span.split(":")
            lo_f, hi_f = float(lo), float(hi)
        except ValueError:
            raise FormatError(f"{where}: bad range item {item!r}") from None
        if hi_f <= lo_f:
            raise FormatError(f"{where}: empty range for {name}")
        ranges[name.strip()] = (lo_f, hi_f)
    missing = [n for n in NORM_NAMES if n not in ranges]
    if missing:
        raise FormatError(f"{where}: ranges missing for {missing}")
    return ranges


def lookup_norms(table: NormTable, word: str) -> NormRecord | None:
    hit = table.entries.get(word.lower())
    if hit is None:
        hit = table.entries.get(lemma_of(word))
    return hit


# ---------------------------------------------------------------------------
# Feature vectors

@dataclass(frozen=True)
class Lexicons:
    """Everything feature computation needs, loaded once and shared."""
    embeddings: EmbeddingTable
    norms: NormTable
    tagger: Tagger = field(default_factory=default_tagger)


def sentence_features(sentence: Sentence, embeddings: EmbeddingTable, norms: NormTable) -> FeatureVector:
    """Layout ``sent.v1``: mean content-word embedding (dim), then per-norm
    mean/max/min over covered content words (12), then embedding and norm
    hit-rates (2)."""
    words = [t.surface for t in sentence.tokens if t.pos in CONTENT_POS]
    dim = embeddings.dim

    vecs = [v for w in words if (v := lookup_embedding(embeddings, w)) is not None]
    mean_vec = np.mean(vecs, axis=0) if vecs else np.zeros(dim)

    records = [r for w in words if (r := lookup_norms(norms, w)) is not None]
    norm_stats: list[float] = []
    for i in range(4):
        col = [r.as_tuple()[i] for r in records]
        if col:
            norm_stats += [float(np.mean(col)), max(col), min(col)]
        else:
            norm_stats += [NORM_FILL, NORM_FILL, NORM_FILL]

    emb_rate = len(vecs) / len(words) if words else 0.0
    norm_rate = len(records) / len(words) if words else 0.0

    values = np.concatenate([mean_vec, norm_stats, [emb_rate, norm_rate]])
    return FeatureVector(values=values, schema_id=schema_id("sent.v1", dim))


#: Fixed one-hot order for pair POS patterns; must match metaphor.Pattern.
PAIR_PATTERNS = ("ADJ_NOUN", "NOUN_VERB", "VERB_NOUN", "ADV_VERB", "NOUN_NOUN_COP", "SIMILE")


def pair_features(
    w1: str,
    w2: str,
    pattern: str | None,
    embeddings: EmbeddingTable,
    norms: NormTable,
) -> FeatureVector:
    """Layout ``pair.v1``: both embeddings (2*dim), cosine (1), both norm
    records (8), absolute norm differences (4), pattern one-hot (6).
    Missing embeddings are zero vectors, missing norms 0.5 fills."""
    dim = embeddings.dim
    v1 = lookup_embedding(embeddings, w1)
    v2 = lookup_embedding(embeddings, w2)
    cos = cosine(v1, v2) if v1 is not None and v2 is not None else 0.0

    r1 = lookup_norms(norms, w1)
    r2 = lookup_norms(norms, w2)
    t1 = r1.as_tuple() if r1 else (NORM_FILL,) * 4
    t2 = r2.as_tuple() if r2 else (NORM_FILL,) * 4
    diffs = [abs(x - y) for x, y in zip(t1, t2)]

    onehot = [1.0 if pattern == name else 0.0 for name in PAIR_PATTERNS]

    values = np.concatenate([
        v1 if v1 is not None else np.zeros(dim),
        v2 if v2 is not None else np.zeros(dim),
        [cos],
        t1,
        t2,
        diffs,
        onehot,
    ])
    return FeatureVector(values=values, schema_id=schema_id("pair.v1", dim))
