from pathlib import Path

import pytest

from bookchat import metaphor, mlcore, synthdata
from bookchat.lexicon import Lexicons, load_embeddings, load_norms

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def world_dir(tmp_path_factory) -> Path:
    """Deterministic fixture world: embeddings (text+binary), norms, pairs."""
    directory = tmp_path_factory.mktemp("world")
    synthdata.write_fixture_world(directory)
    return directory


@pytest.fixture(scope="session")
def lexicons(world_dir) -> Lexicons:
    return Lexicons(
        embeddings=load_embeddings(str(world_dir / "embeddings.txt"), format="text"),
        norms=load_norms(str(world_dir / "norms.csv")),
    )


@pytest.fixture(scope="session")
def pair_records(world_dir):
    return metaphor.read_pair_tsv(world_dir / "pairs.tsv")


@pytest.fixture(scope="session")
def detector(pair_records, lexicons) -> mlcore.Model:
    labeled = metaphor.label_sentences(pair_records, tau=1.5)
    hyper = mlcore.Hyperparams(learning_rate=0.5, epochs=120, batch_size=16, l2=1e-4, seed=1)
    return metaphor.train_detector(labeled, lexicons, hyper)


@pytest.fixture(scope="session")
def scorer(pair_records, lexicons) -> mlcore.Model:
    hyper = mlcore.Hyperparams(learning_rate=0.05, epochs=300, batch_size=16, l2=1e-5, seed=2)
    return metaphor.train_scorer(pair_records, lexicons, hyper)


@pytest.fixture(scope="session")
def excerpt_doc():
    from bookchat.corpus import ingest

    raw = (FIXTURES / "excerpt.txt").read_bytes()
    return ingest(raw, doc_id="fernley", title="The Ladies of Fernley Park")


@pytest.fixture(scope="session")
def saved_models(world_dir, detector, scorer):
    det_path = world_dir / "detector.json"
    sco_path = world_dir / "scorer.json"
    mlcore.save_model(detector, det_path)
    mlcore.save_model(scorer, sco_path)
    return {"detector": det_path, "scorer": sco_path}


@pytest.fixture(scope="session")
def bank_dir(world_dir, excerpt_doc, detector, scorer, lexicons):
    from bookchat import qgen

    bank = qgen.build_question_bank(excerpt_doc, detector, scorer, lexicons,
                                    session_seconds=1800.0, seed=0)
    assert bank.questions
    directory = world_dir / "banks"
    directory.mkdir(exist_ok=True)
    (directory / "fernley.json").write_text(qgen.bank_to_json(bank), encoding="utf-8")
    return directory


@pytest.fixture()
def service(tmp_path, world_dir, saved_models, bank_dir):
    from bookchat.service import CompanionService, ServiceConfig

    config = ServiceConfig(
        data_dir=str(tmp_path / "data"),
        embeddings=str(world_dir / "embeddings.txt"),
        norms=str(world_dir / "norms.csv"),
        detector=str(saved_models["detector"]),
        scorer=str(saved_models["scorer"]),
        banks_dir=str(bank_dir),
        default_budget_seconds=1800.0,
        seed=0,
    )
    return CompanionService(config)


@pytest.fixture()
def client(service):
    from fastapi.testclient import TestClient

    from bookchat.service import create_app

    return TestClient(create_app(service), raise_server_exceptions=False)
