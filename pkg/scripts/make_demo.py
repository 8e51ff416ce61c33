#!/usr/bin/env python3
"""Build a self-contained demo directory: synthetic lexicons and training
data, trained models, a question bank for the bundled excerpt, and a
service config ready for `bookchat serve --config <dir>/config.json`.
"""

import argparse
import json
import sys
from pathlib import Path

from bookchat import metaphor, mlcore, qgen, synthdata
from bookchat.corpus import ingest
from bookchat.lexicon import Lexicons, load_embeddings, load_norms

REPO = Path(__file__).resolve().parent.parent
DEFAULT_TEXT = REPO / "tests" / "fixtures" / "excerpt.txt"


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out_dir")
    parser.add_argument("--text", default=str(DEFAULT_TEXT), help="book text to build a bank for")
    parser.add_argument("--doc-id", default="fernley")
    parser.add_argument("--title", default="The Ladies of Fernley Park")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--port", type=int, default=8010)
    parser.add_argument("--frontend-dir", default=None, help="static dir to serve at /")
    args = parser.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = synthdata.write_fixture_world(out)
    lexicons = Lexicons(
        embeddings=load_embeddings(str(paths["embeddings_text"])),
        norms=load_norms(str(paths["norms"])),
    )
    records = metaphor.read_pair_tsv(paths["pairs"])
    labeled = metaphor.label_sentences(records, tau=1.5)
    detector = metaphor.train_detector(
        labeled, lexicons,
        mlcore.Hyperparams(learning_rate=0.5, epochs=120, batch_size=16, l2=1e-4, seed=args.seed),
    )
    scorer = metaphor.train_scorer(
        records, lexicons,
        mlcore.Hyperparams(learning_rate=0.05, epochs=300, batch_size=16, l2=1e-5, seed=args.seed),
    )
    mlcore.save_model(detector, out / "detector.json")
    mlcore.save_model(scorer, out / "scorer.json")

    doc = ingest(Path(args.text).read_bytes(), doc_id=args.doc_id, title=args.title)
    bank = qgen.build_question_bank(doc, detector, scorer, lexicons,
                                    session_seconds=1800.0, seed=args.seed)
    banks_dir = out / "banks"
    banks_dir.mkdir(exist_ok=True)
    (banks_dir / f"{args.doc_id}.json").write_text(qgen.bank_to_json(bank), encoding="utf-8")

    config = {
        "data_dir": str(out / "data"),
        "embeddings": str(paths["embeddings_text"]),
        "norms": str(paths["norms"]),
        "detector": str(out / "detector.json"),
        "scorer": str(out / "scorer.json"),
        "banks_dir": str(banks_dir),
        "default_budget_seconds": 1800.0,
        "seed": args.seed,
        "silence_timeout_seconds": 0.0,
        "port": args.port,
    }
    if args.frontend_dir:
        config["frontend_dir"] = str(Path(args.frontend_dir).resolve())
    (out / "config.json").write_text(json.dumps(config, indent=2), encoding="utf-8")

    print(f"demo ready: {len(bank.questions)} questions for {args.doc_id!r}")
    print(f"serve with: bookchat serve --config {out / 'config.json'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
