"""Operator entry points: offline pipeline, training, serving, and a
terminal chat for UI-less testing.

Every subcommand is a thin wrapper over the library; all randomness is
controlled by --seed (default 0) and outputs are byte-stable given the
same inputs and seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import corpus, evalstats, metaphor, mlcore, qgen
from .dialogue import DialogueEngine, EventKind, Phase, UserEvent, transcript_to_jsonl
from .lexicon import Lexicons, load_embeddings, load_norms
from .metaphor import ScoreRange


def _add_lexicon_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--embeddings", required=True, help="embedding table file")
    p.add_argument("--embeddings-format", choices=("text", "binary"), default="text")
    p.add_argument("--norms", required=True, help="psycholinguistic norms CSV")


def _lexicons(args) -> Lexicons:
    return Lexicons(
        embeddings=load_embeddings(args.embeddings, format=args.embeddings_format),
        norms=load_norms(args.norms),
    )


def _write_or_print(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bookchat", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="raw text file -> tagged document JSON")
    p.add_argument("txt")
    p.add_argument("--id", required=True, dest="doc_id")
    p.add_argument("--title", required=True)
    p.add_argument("--out")

    p = sub.add_parser("train-detector", help="train the metaphor-sentence classifier")
    p.add_argument("pairs", nargs="+", help="pair dataset TSV file(s)")
    p.add_argument("--tau", type=float, default=1.5, help="novelty threshold for positive sentences")
    p.add_argument("--out", required=True)
    _add_lexicon_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=120)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--hidden", type=int, default=0)

    p = sub.add_parser("train-scorer", help="train the pair novelty regressor")
    p.add_argument("pairs", nargs="+", help="pair dataset TSV file(s); concatenated")
    p.add_argument("--out", required=True)
    _add_lexicon_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--hidden", type=int, default=0)
    p.add_argument("--range", type=float, nargs=2, default=(0.0, 3.0), metavar=("LO", "HI"))

    p = sub.add_parser("score", help="dump scored pairs for a document")
    p.add_argument("doc", help="document JSON from `ingest`")
    p.add_argument("--detector", required=True)
    p.add_argument("--scorer", required=True)
    _add_lexicon_args(p)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out")

    p = sub.add_parser("bank", help="build a question bank for a document")
    p.add_argument("doc")
    p.add_argument("--detector", required=True)
    p.add_argument("--scorer", required=True)
    _add_lexicon_args(p)
    p.add_argument("--budget", type=float, default=1800.0, help="session seconds")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--min-novelty", type=float, default=0.6)
    p.add_argument("--out", required=True)

    p = sub.add_parser("chat", help="terminal chat over a question bank")
    p.add_argument("bank")
    p.add_argument("--budget", type=float, default=1800.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--transcript-out")

    p = sub.add_parser("survey-summarize", help="summary table for survey responses")
    p.add_argument("responses", help="JSON-lines SurveyResponse file")
    p.add_argument("--out-dir", help="also write TSV, text table, and figures here")

    p = sub.add_parser("serve", help="run the HTTP/WebSocket service")
    p.add_argument("--config", help=f"config JSON (or set {'MC_CONFIG'})")

    return parser


def cmd_ingest(args) -> int:
    raw = Path(args.txt).read_bytes()
    doc = corpus.ingest(raw, doc_id=args.doc_id, title=args.title)
    _write_or_print(corpus.document_to_json(doc) + "\n", args.out)
    return 0


def _read_all_pairs(paths) -> list[metaphor.PairDatasetRecord]:
    records = []
    for path in paths:
        records.extend(metaphor.read_pair_tsv(path))
    return records


def cmd_train_detector(args) -> int:
    records = _read_all_pairs(args.pairs)
    labeled = metaphor.label_sentences(records, tau=args.tau)
    hyper = mlcore.Hyperparams(learning_rate=args.lr, epochs=args.epochs, batch_size=16,
                               l2=1e-4, seed=args.seed)
    model = metaphor.train_detector(labeled, _lexicons(args), hyper, hidden_dim=args.hidden)
    mlcore.save_model(model, args.out)
    print(f"detector trained on {len(labeled)} sentences -> {args.out}")
    return 0


def cmd_train_scorer(args) -> int:
    records = _read_all_pairs(args.pairs)
    hyper = mlcore.Hyperparams(learning_rate=args.lr, epochs=args.epochs, batch_size=16,
                               l2=1e-5, seed=args.seed)
    model = metaphor.train_scorer(records, _lexicons(args), hyper,
                                  score_range=ScoreRange(*args.range), hidden_dim=args.hidden)
    mlcore.save_model(model, args.out)
    print(f"scorer trained on {len(records)} pairs -> {args.out}")
    return 0


def cmd_score(args) -> int:
    doc = corpus.document_from_json(Path(args.doc).read_text(encoding="utf-8"))
    detector = mlcore.load_model(args.detector)
    scorer = mlcore.load_model(args.scorer)
    scored = metaphor.score_document(doc, detector, scorer, _lexicons(args),
                                     detector_threshold=args.threshold)
    lines = "".join(json.dumps(metaphor.scored_pair_to_dict(sp), ensure_ascii=False) + "\n"
                    for sp in scored)
    _write_or_print(lines, args.out)
    return 0


def cmd_bank(args) -> int:
    doc = corpus.document_from_json(Path(args.doc).read_text(encoding="utf-8"))
    detector = mlcore.load_model(args.detector)
    scorer = mlcore.load_model(args.scorer)
    cfg = qgen.SelectionConfig(min_novelty=args.min_novelty)
    bank = qgen.build_question_bank(
        doc, detector, scorer, _lexicons(args),
        cfg=cfg, session_seconds=args.budget, seed=args.seed,
        detector_threshold=args.threshold,
    )
    Path(args.out).write_text(qgen.bank_to_json(bank) + "\n", encoding="utf-8")
    print(f"bank with {len(bank.questions)} questions -> {args.out}")
    return 0


def cmd_chat(args) -> int:
    bank = qgen.bank_from_json(Path(args.bank).read_text(encoding="utf-8"))
    engine = DialogueEngine(bank)
    state = engine.new_session(budget_seconds=args.budget, seed=args.seed, session_id="terminal")
    clock = 0.0  # logical clock keeps transcripts reproducible

    def emit(utterances):
        for text in utterances:
            print(f"Grace: {text}")

    state, out = engine.advance(state, UserEvent(EventKind.SESSION_START, at=clock))
    emit(out)
    while state.phase is not Phase.ENDED:
        try:
            line = input("> ").strip()
        except EOFError:
            line = "/quit"
        clock += 1.0
        if line in ("/quit", "/q"):
            state, out = engine.advance(state, UserEvent(EventKind.QUIT, at=clock))
        elif not line:
            state, out = engine.advance(state, UserEvent(EventKind.SILENCE_TIMEOUT, at=clock))
        else:
            state, out = engine.advance(state, UserEvent(EventKind.UTTERANCE, text=line, at=clock))
        emit(out)
    if args.transcript_out:
        Path(args.transcript_out).write_text(
            transcript_to_jsonl(engine.transcript(state)), encoding="utf-8"
        )
    return 0


def cmd_survey_summarize(args) -> int:
    responses = evalstats.read_responses(args.responses)
    stats = evalstats.summarize_survey(responses)
    table = evalstats.render_table(stats)
    sys.stdout.write(table)
    if args.out_dir:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "summary.tsv").write_text(evalstats.render_tsv(stats), encoding="utf-8")
        (out_dir / "summary.txt").write_text(table, encoding="utf-8")
        figures = evalstats.render_figures(stats, out_dir)
        print(f"wrote {out_dir / 'summary.tsv'}, {out_dir / 'summary.txt'}, "
              + ", ".join(str(p) for p in figures))
    return 0


def cmd_serve(args) -> int:
    from .service import load_config, resolve_config_path, serve

    config = load_config(resolve_config_path(args.config))
    serve(config)
    return 0


_COMMANDS = {
    "ingest": cmd_ingest,
    "train-detector": cmd_train_detector,
    "train-scorer": cmd_train_scorer,
    "score": cmd_score,
    "bank": cmd_bank,
    "chat": cmd_chat,
    "survey-summarize": cmd_survey_summarize,
    "serve": cmd_serve,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except Exception as exc:  # one-line diagnostic, nonzero exit
        print(f"bookchat {args.command}: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
