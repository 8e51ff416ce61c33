"""Deterministic synthetic stand-ins for the external resources the real
pipeline would train on: a small embedding table, a psycholinguistic norm
table, and a pair dataset with continuous novelty scores.

The generated world has one load-bearing regularity: every word carries a
"vividness" level (high for storm/fire/moon-type imagery words, low for
household words), embeddings cluster by vividness, norms track it
(concrete, imageable, unfamiliar), and a pair's novelty score grows with
the mean vividness of its two words.  Models trained on this data rank
figurative pairings above household ones for the same reason a model
trained on real novelty ratings would, just at toy scale.
"""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

from . import corpus, metaphor

VIVID_NOUNS = [
    "thunderstorm", "storm", "fire", "flame", "diamond", "winter", "river",
    "ocean", "moon", "star", "shadow", "glass", "stone", "bird", "music",
    "rose", "snow", "ice", "sunlight", "lightning", "honey", "marble",
    "mirror", "bell", "feather", "wave", "ember", "frost", "sea", "jewel",
    "pearl", "crystal", "blossom", "dew", "dusk", "dawn", "twilight",
    "tide", "silk", "smoke", "thunder", "heart", "wing", "lion", "curtain",
    "lantern", "thread", "thundercloud", "grass", "weather", "lid", "bruise",
]

VIVID_VERBS = [
    "frowned", "burned", "danced", "whispered", "melted", "glittered",
    "roared", "sparkled", "drifted", "blazed", "shivered", "sang",
    "flickered", "swirled", "gleamed", "trembled", "glowed", "shone",
    "crashed", "bloomed", "flowed", "floated", "froze", "thundered",
    "stitched", "wept", "stirred",
]

VIVID_ADJS = [
    "golden", "silver", "fierce", "icy", "crimson", "frozen", "wild",
    "brilliant", "stormy", "velvet",
]

MUNDANE_NOUNS = [
    "house", "door", "room", "morning", "evening", "letter", "visit",
    "family", "neighbour", "lady", "sister", "mother", "father", "daughter",
    "friend", "party", "man", "wife", "husband", "table", "chair", "garden",
    "walk", "day", "week", "book", "word", "manner", "fortune", "marriage",
    "dinner", "carriage", "village", "lane", "parlour", "church", "gown",
    "tea", "gate", "field", "town", "hall", "smile", "voice", "eye", "face",
    "news", "mind", "temper", "pride", "wit", "sense", "beauty", "cousin",
    "aunt", "uncle", "post", "cup", "pond", "fence", "breakfast", "habit",
    "library", "supper", "school", "window", "floor", "wall", "year",
    "month", "speech", "guest", "plan", "song", "dance", "ball", "hill",
    "road", "tree", "sky", "laughter", "silence", "patience", "tongue",
    "pianoforte", "candle", "stair", "shawl", "ribbon", "bonnet", "horse",
    "plate", "bread", "colour", "pound", "opinion",
]

MUNDANE_VERBS = [
    "said", "replied", "walked", "sat", "stood", "came", "went", "took",
    "gave", "made", "found", "asked", "answered", "thought", "knew", "felt",
    "saw", "heard", "spoke", "smiled", "laughed", "looked", "seemed",
    "lived", "visited", "wrote", "waited", "talked", "entered", "returned",
    "read", "arrived", "watched", "cried", "treated", "received",
    "preferred", "spent", "sloped", "fell", "brought", "married", "passed",
    "opened", "closed", "called", "carried", "played", "listened", "moved",
    "turned", "kept", "held", "counted", "worked", "obeyed", "declared",
    "reported", "gathered", "stopped", "stepped", "caught", "praised",
    "admired", "traded", "argued", "followed", "refused", "rode", "taught",
    "rolled", "clapped", "rehearsed", "announced", "wondered", "polished",
]

MUNDANE_ADJS = [
    "good", "great", "young", "old", "little", "large", "small", "happy",
    "agreeable", "handsome", "civil", "pleasant", "proper", "rich", "poor",
    "certain", "true", "long", "short", "kind", "dear", "fine", "fair",
    "quiet", "narrow", "new", "clever", "proud", "gentle", "warm", "cold",
    "deep", "soft", "low", "high", "dark", "bright", "sweet", "tall",
    "serious", "sensible", "heavy", "dry", "clear", "tired", "ripe",
    "eldest", "youngest", "pale",
]

ADVERBS = [
    "slowly", "quickly", "softly", "loudly", "gently", "warmly", "coldly",
    "brightly", "fiercely", "quietly", "seldom", "soon", "often", "never",
    "always", "twice", "steadily", "happily", "scarcely", "gravely",
    "comfortably", "early",
]

VIVID_WORDS = frozenset(VIVID_NOUNS + VIVID_VERBS + VIVID_ADJS)
ALL_WORDS = (
    VIVID_NOUNS + VIVID_VERBS + VIVID_ADJS
    + MUNDANE_NOUNS + MUNDANE_VERBS + MUNDANE_ADJS + ADVERBS
)


def _word_unit(word: str, salt: str) -> float:
    """Stable per-word pseudo-random float in [0, 1)."""
    digest = hashlib.sha256(f"{salt}:{word}".encode()).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


def vividness(word: str) -> float:
    """Per-word imagery strength in [0, 1]; high for the vivid vocabulary."""
    base = _word_unit(word, "vividness")
    if word in VIVID_WORDS:
        return 0.75 + 0.25 * base
    return 0.05 + 0.30 * base


# ---------------------------------------------------------------------------
# Embedding fixtures

def build_embedding_vectors(dim: int = 16, seed: int = 7) -> dict[str, np.ndarray]:
    """Two fuzzy clusters: vivid words lean on axis 1, mundane on axis 0.
    Components are multiples of 1/1024 so the float32 binary encoding is
    exact and text/binary loaders agree bit-for-bit."""
    rng = np.random.default_rng(seed)
    out: dict[str, np.ndarray] = {}
    for word in ALL_WORDS:
        vec = rng.integers(-256, 257, size=dim).astype(np.float64) / 1024.0
        anchor = np.zeros(dim)
        anchor[1 if word in VIVID_WORDS else 0] = 1.5
        vec = vec + anchor
        out[word] = np.round(vec * 1024.0) / 1024.0
    return out


def write_embeddings_text(path: str | Path, vectors: dict[str, np.ndarray]) -> None:
    dim = len(next(iter(vectors.values())))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(vectors)} {dim}\n")
        for word, vec in vectors.items():
            comps = " ".join(repr(float(x)) for x in vec)
            fh.write(f"{word} {comps}\n")


def write_embeddings_binary(path: str | Path, vectors: dict[str, np.ndarray]) -> None:
    dim = len(next(iter(vectors.values())))
    with open(path, "wb") as fh:
        fh.write(f"{len(vectors)} {dim}\n".encode("utf-8"))
        for word, vec in vectors.items():
            fh.write(word.encode("utf-8") + b" ")
            fh.write(struct.pack(f"<{dim}f", *vec))


# ---------------------------------------------------------------------------
# Norm fixtures

RAW_LO, RAW_HI = 100.0, 700.0


def _raw(frac: float) -> float:
    return round(RAW_LO + frac * (RAW_HI - RAW_LO), 1)


def write_norms_csv(path: str | Path) -> None:
    """Norms track vividness: vivid words are concrete, imageable,
    unfamiliar, late-acquired; mundane words the reverse."""
    lines = [
        "# ranges concreteness=100:700,imageability=100:700,familiarity=100:700,aoa=100:700",
        "word," + ",".join(("concreteness", "imageability", "familiarity", "aoa")),
    ]
    for word in ALL_WORDS:
        v = vividness(word)
        jitter = _word_unit(word, "norm-jitter") * 0.1
        conc = min(1.0, 0.25 + 0.65 * v + jitter)
        imag = min(1.0, 0.20 + 0.70 * v + jitter)
        famil = max(0.0, 0.95 - 0.60 * v - jitter)
        aoa = min(1.0, 0.15 + 0.55 * v + jitter)
        lines.append(f"{word},{_raw(conc)},{_raw(imag)},{_raw(famil)},{_raw(aoa)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Synthetic pair dataset

_POSITIVE_TEMPLATES = [
    "The {mn} {vv} like a {vn} .",
    "Her {mn} {vv} like {vn} in the {mn2} .",
    "The {mn} was a {vn} .",
    "His {mn} was a {vadj} {vn} .",
    "The {vadj} {vn} {vv} .",
    "Their {mn} {vv} like a {vadj} {vn} .",
]

_NEGATIVE_TEMPLATES = [
    "The {mn} {mv} in the {mn2} .",
    "Her {mn} {mv} the {mn2} .",
    "The {madj} {mn} {mv} .",
    "The {mn} {mv} and the {mn2} {mv2} .",
    "A {madj} {mn} {mv} near the {mn2} .",
]


def generate_pair_records(
    n_sentences: int = 300,
    seed: int = 0,
    score_range: metaphor.ScoreRange = metaphor.DEFAULT_SCORE_RANGE,
    noise: float = 0.08,
    positive_fraction: float = 0.5,
) -> list[metaphor.PairDatasetRecord]:
    """Build sentences from templates, extract their content-word pairs with
    the real extractor, and score each pair by mean vividness plus noise."""
    rng = np.random.default_rng(seed)
    records: list[metaphor.PairDatasetRecord] = []
    seen: set[str] = set()
    tagger = corpus.default_tagger()

    def pick(options: list[str]) -> str:
        return options[int(rng.integers(0, len(options)))]

    made = 0
    while made < n_sentences:
        positive = rng.random() < positive_fraction
        template = pick(_POSITIVE_TEMPLATES if positive else _NEGATIVE_TEMPLATES)
        text = template.format(
            mn=pick(MUNDANE_NOUNS), mn2=pick(MUNDANE_NOUNS),
            mv=pick(MUNDANE_VERBS), mv2=pick(MUNDANE_VERBS),
            madj=pick(MUNDANE_ADJS),
            vn=pick(VIVID_NOUNS), vv=pick(VIVID_VERBS), vadj=pick(VIVID_ADJS),
        )
        text = text[0].upper() + text[1:]
        if text in seen:
            continue
        seen.add(text)
        made += 1
        sent = corpus.tag_text(text, tagger=tagger)
        for pair in metaphor.extract_pairs(sent):
            w1 = sent.tokens[pair.w1_token].surface.lower()
            w2 = sent.tokens[pair.w2_token].surface.lower()
            level = (vividness(w1) + vividness(w2)) / 2.0
            frac = min(1.0, max(0.0, level + float(rng.normal(0.0, noise))))
            raw = score_range.lo + frac * (score_range.hi - score_range.lo)
            records.append(metaphor.PairDatasetRecord(
                sentence_text=text, w1=w1, w2=w2, raw_score=round(raw, 4),
            ))
    return records


def write_fixture_world(directory: str | Path, dim: int = 16, seed: int = 7) -> dict[str, Path]:
    """Write the full fixture set (embeddings text+binary, norms, pair TSV)
    into a directory and return the paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    vectors = build_embedding_vectors(dim=dim, seed=seed)
    paths = {
        "embeddings_text": directory / "embeddings.txt",
        "embeddings_binary": directory / "embeddings.bin",
        "norms": directory / "norms.csv",
        "pairs": directory / "pairs.tsv",
    }
    write_embeddings_text(paths["embeddings_text"], vectors)
    write_embeddings_binary(paths["embeddings_binary"], vectors)
    write_norms_csv(paths["norms"])
    metaphor.write_pair_tsv(paths["pairs"], generate_pair_records(seed=seed))
    return paths
