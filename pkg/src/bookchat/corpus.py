"""Ingest raw book text into sentence-segmented, POS-tagged documents.

The tagger is deliberately simple: a closed-class function-word lexicon, an
open-class lexicon file, a handful of suffix rules, and a NOUN default.
That is enough to find content words reliably, which is all the downstream
pair extraction needs.  Everything here is deterministic: the same input
always produces the same Document.
"""

from __future__ import annotations

import functools
import hashlib
import json
import re
from dataclasses import dataclass, replace
from enum import Enum
from importlib import resources
from pathlib import Path


class IngestError(ValueError):
    """Raw input cannot be ingested (bad encoding, empty doc_id, ...)."""


class ConfigError(RuntimeError):
    """A required data file (lexicon, abbreviation list) is missing or malformed."""


class Pos(str, Enum):
    NOUN = "NOUN"
    VERB = "VERB"
    ADJ = "ADJ"
    ADV = "ADV"
    PRON = "PRON"
    DET = "DET"
    ADP = "ADP"
    CONJ = "CONJ"
    NUM = "NUM"
    PUNCT = "PUNCT"
    OTHER = "OTHER"


#: Word classes eligible for metaphor pairs.
CONTENT_POS = frozenset({Pos.NOUN, Pos.VERB, Pos.ADJ, Pos.ADV})


@dataclass(frozen=True, slots=True)
class Token:
    surface: str
    lemma: str
    pos: Pos
    char_start: int
    char_end: int


@dataclass(frozen=True, slots=True)
class Sentence:
    index: int
    text: str
    tokens: tuple[Token, ...] = ()


@dataclass(frozen=True, slots=True)
class Document:
    doc_id: str
    title: str
    sentences: tuple[Sentence, ...]
    source_sha256: str


def content_words(sentence: Sentence) -> list[Token]:
    return [t for t in sentence.tokens if t.pos in CONTENT_POS]


# ---------------------------------------------------------------------------
# Gutenberg boilerplate stripping

_START_RE = re.compile(r"^\s*\*{3}\s*START OF.*\*{3}\s*$", re.IGNORECASE)
_END_RE = re.compile(r"^\s*\*{3}\s*END OF.*\*{3}\s*$", re.IGNORECASE)


def strip_gutenberg(raw: str) -> str:
    """Return the body between the ``*** START OF ...***`` and
    ``*** END OF ...***`` marker lines, markers excluded.

    If either marker is missing the text is returned unchanged (modulo
    line-ending normalization, which always happens).
    """
    text = raw.replace("\r\n", "\n").replace("\r", "\n")
    lines = text.split("\n")
    start = next((i for i, line in enumerate(lines) if _START_RE.match(line)), None)
    if start is None:
        return text
    end = next((i for i in range(start + 1, len(lines)) if _END_RE.match(lines[i])), None)
    if end is None:
        return text
    return "\n".join(lines[start + 1 : end])


# ---------------------------------------------------------------------------
# Sentence segmentation

_TERMINALS = ".?!"
_CLOSERS = "\"')]’”"
_OPENERS = "\"'(‘“«"


def _data_path(name: str) -> Path:
    return Path(str(resources.files("bookchat").joinpath("data", name)))


@functools.lru_cache(maxsize=8)
def load_abbreviations(path: str | None = None) -> frozenset[str]:
    """Abbreviation stop-list: one entry per line, ``#`` comments, stored
    lowercase with the trailing dot."""
    p = Path(path) if path else _data_path("abbreviations.txt")
    if not p.exists():
        raise ConfigError(f"abbreviation list not found: {p}")
    entries = set()
    for line in p.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            entries.add(line.lower())
    return frozenset(entries)


def _is_abbreviation(text: str, dot_idx: int, abbrevs: frozenset[str]) -> bool:
    p = dot_idx - 1
    while p >= 0 and text[p].isalpha():
        p -= 1
    word = text[p + 1 : dot_idx]
    if not word:
        return False
    # Single letters guard initials ("J. Smith") and dotted forms ("e.g.").
    if len(word) == 1:
        return True
    return (word + ".").lower() in abbrevs


def _split_paragraph(text: str, abbrevs: frozenset[str]) -> list[str]:
    out = []
    start = 0
    i = 0
    n = len(text)
    while i < n:
        if text[i] not in _TERMINALS:
            i += 1
            continue
        j = i
        while j + 1 < n and text[j + 1] in _TERMINALS:
            j += 1
        k = j
        while k + 1 < n and text[k + 1] in _CLOSERS:
            k += 1
        boundary = False
        if k + 1 < n and text[k + 1] == " " and k + 2 < n:
            nxt = text[k + 2]
            if nxt.isupper() or nxt in _OPENERS:
                # only a lone period can belong to an abbreviation
                if not (text[i] == "." and j == i and _is_abbreviation(text, i, abbrevs)):
                    boundary = True
        if boundary:
            seg = text[start : k + 1].strip()
            if seg:
                out.append(seg)
            start = k + 2
            i = k + 2
        else:
            i = k + 1
    tail = text[start:].strip()
    if tail:
        out.append(tail)
    return out


def segment_sentences(body: str, abbreviations: frozenset[str] | None = None) -> list[Sentence]:
    """Split body text into sentences (tokens left empty).

    Splits on ``.?!`` followed by whitespace and a capital letter or quote,
    with an abbreviation stop-list; a paragraph break always ends a sentence.
    Whitespace inside a paragraph is collapsed to single spaces.
    """
    abbrevs = abbreviations if abbreviations is not None else load_abbreviations()
    texts: list[str] = []
    for para in re.split(r"\n\s*\n", body):
        collapsed = " ".join(para.split())
        if collapsed:
            texts.extend(_split_paragraph(collapsed, abbrevs))
    return [Sentence(index=i, text=t) for i, t in enumerate(texts)]


# ---------------------------------------------------------------------------
# Tokenization

def lemma_of(surface: str) -> str:
    """Lowercase surface with crude s/es/ed/ing stripping (stem >= 3 chars)."""
    w = surface.lower()
    for suf in ("ing", "ed", "es", "s"):
        if suf == "s" and w.endswith("ss"):
            continue
        if w.endswith(suf) and len(w) - len(suf) >= 3:
            return w[: -len(suf)]
    return w


def tokenize(sentence_text: str) -> list[Token]:
    """Whitespace tokenization with leading/trailing punctuation split off
    into their own tokens.  Internal apostrophes and hyphens are preserved.
    Offsets always reconstruct the exact substring.  POS is OTHER.
    """
    tokens: list[Token] = []

    def emit(s: int, e: int) -> None:
        surf = sentence_text[s:e]
        tokens.append(Token(surface=surf, lemma=lemma_of(surf), pos=Pos.OTHER, char_start=s, char_end=e))

    for m in re.finditer(r"\S+", sentence_text):
        base, chunk = m.start(), m.group()
        s, e = 0, len(chunk)
        lead_end = s
        while lead_end < e and not chunk[lead_end].isalnum():
            lead_end += 1
        trail_start = e
        while trail_start > lead_end and not chunk[trail_start - 1].isalnum():
            trail_start -= 1
        for idx in range(s, lead_end):
            emit(base + idx, base + idx + 1)
        if lead_end < trail_start:
            emit(base + lead_end, base + trail_start)
        for idx in range(trail_start, e):
            emit(base + idx, base + idx + 1)
    return tokens


# ---------------------------------------------------------------------------
# POS tagging

_TAG_NAMES = {p.value for p in Pos}
_NUM_RE = re.compile(r"^\d+(?:[.,]\d+)*$")


def _load_lexicon_file(path: Path) -> dict[str, Pos]:
    if not path.exists():
        raise ConfigError(f"lexicon file not found: {path}")
    table: dict[str, Pos] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2 or parts[1] not in _TAG_NAMES:
            raise ConfigError(f"{path}:{lineno}: expected 'word<TAB>TAG', got {line!r}")
        table[parts[0].lower()] = Pos(parts[1])
    return table


@dataclass(frozen=True)
class Tagger:
    closed: dict[str, Pos]
    open: dict[str, Pos]

    @classmethod
    def load(cls, closed_path: str | Path | None = None, open_path: str | Path | None = None) -> "Tagger":
        closed = _load_lexicon_file(Path(closed_path) if closed_path else _data_path("closed_class.tsv"))
        open_ = _load_lexicon_file(Path(open_path) if open_path else _data_path("open_class.tsv"))
        return cls(closed=closed, open=open_)


@functools.lru_cache(maxsize=1)
def default_tagger() -> Tagger:
    return Tagger.load()


def _suffix_tag(word: str) -> Pos | None:
    n = len(word)
    if word.endswith("ly") and n >= 4:
        return Pos.ADV
    if word.endswith("ed") and n >= 4:
        return Pos.VERB
    if word.endswith("ing") and n >= 5:
        return Pos.VERB
    if n >= 5 and (word.endswith("ous") or word.endswith("ful") or word.endswith("ive")):
        return Pos.ADJ
    return None


def pos_tag(tokens: list[Token], tagger: Tagger | None = None) -> list[Token]:
    """Assign the coarse tagset: punctuation/number checks, closed-class
    lexicon, open-class lexicon, suffix rules, then default NOUN."""
    tg = tagger if tagger is not None else default_tagger()
    out: list[Token] = []
    for tok in tokens:
        word = tok.surface.lower()
        if not any(c.isalnum() for c in tok.surface):
            tag = Pos.PUNCT
        elif _NUM_RE.match(tok.surface):
            tag = Pos.NUM
        elif word in tg.closed:
            tag = tg.closed[word]
        elif word in tg.open:
            tag = tg.open[word]
        else:
            tag = _suffix_tag(word) or Pos.NOUN
        out.append(replace(tok, pos=tag))
    return out


def tag_text(text: str, index: int = 0, tagger: Tagger | None = None) -> Sentence:
    """Tokenize and tag a single sentence string."""
    return Sentence(index=index, text=text, tokens=tuple(pos_tag(tokenize(text), tagger)))


# ---------------------------------------------------------------------------
# Ingest + serialization

def ingest(raw: str | bytes, doc_id: str, title: str, tagger: Tagger | None = None) -> Document:
    """Full pipeline: strip boilerplate, segment, tokenize, tag.

    The sha256 of the raw bytes (UTF-8 encoding for str input) is recorded
    so a Document can always be traced back to its source file.
    """
    if not doc_id:
        raise IngestError("doc_id must be non-empty")
    if isinstance(raw, bytes):
        data = raw
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise IngestError(f"input is not valid UTF-8: {exc}") from exc
    else:
        text = raw
        data = raw.encode("utf-8")
    digest = hashlib.sha256(data).hexdigest()
    body = strip_gutenberg(text)
    sentences = []
    for sent in segment_sentences(body):
        tokens = tuple(pos_tag(tokenize(sent.text), tagger))
        sentences.append(Sentence(index=sent.index, text=sent.text, tokens=tokens))
    return Document(doc_id=doc_id, title=title, sentences=tuple(sentences), source_sha256=digest)


def document_to_dict(doc: Document) -> dict:
    return {
        "doc_id": doc.doc_id,
        "title": doc.title,
        "source_sha256": doc.source_sha256,
        "sentences": [
            {
                "index": s.index,
                "text": s.text,
                "tokens": [
                    {
                        "surface": t.surface,
                        "lemma": t.lemma,
                        "pos": t.pos.value,
                        "char_start": t.char_start,
                        "char_end": t.char_end,
                    }
                    for t in s.tokens
                ],
            }
            for s in doc.sentences
        ],
    }


def document_from_dict(data: dict) -> Document:
    sentences = tuple(
        Sentence(
            index=s["index"],
            text=s["text"],
            tokens=tuple(
                Token(
                    surface=t["surface"],
                    lemma=t["lemma"],
                    pos=Pos(t["pos"]),
                    char_start=t["char_start"],
                    char_end=t["char_end"],
                )
                for t in s["tokens"]
            ),
        )
        for s in data["sentences"]
    )
    return Document(
        doc_id=data["doc_id"],
        title=data["title"],
        sentences=sentences,
        source_sha256=data["source_sha256"],
    )


def document_to_json(doc: Document) -> str:
    return json.dumps(document_to_dict(doc), ensure_ascii=False, indent=2)


def document_from_json(text: str) -> Document:
    return document_from_dict(json.loads(text))
