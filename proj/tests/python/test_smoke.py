import json
import math
import os
from pathlib import Path

import pytest

import retrorag

FIXTURES = Path(os.environ.get("RETRORAG_FIXTURE_DIR", Path(__file__).resolve().parents[1] / "fixtures"))
COACH_QUESTION = "Who recruited Beckham as the manager of Manchester United?"


def load_docs():
    docs = []
    with open(FIXTURES / "corpus.jsonl") as f:
        for line in f:
            rec = json.loads(line)
            docs.append(retrorag.Document(rec["id"], rec.get("title", ""), rec["text"]))
    return docs


@pytest.fixture(scope="module")
def index():
    return retrorag.CorpusIndex.build(load_docs())


def test_tokenize_and_chunk():
    assert retrorag.tokenize("Hello, World! It's 1986.") == ["hello", "world", "it", "s", "1986"]
    passages = retrorag.chunk_document(retrorag.Document("d", "", "one two three four five"), chunk_size=2)
    assert [p.passage_id for p in passages] == ["d#0", "d#1", "d#2"]
    assert passages[2].text == "five"


def test_retrieve_and_persist(index, tmp_path):
    hits = index.retrieve("Tyne Bridge opened", k=3)
    assert hits[0][0].passage_id == "bridge#0"
    assert all(a[1] >= b[1] for a, b in zip(hits, hits[1:]))
    index.save(str(tmp_path / "idx"))
    loaded = retrorag.CorpusIndex.load(str(tmp_path / "idx"))
    assert loaded.passage_count == index.passage_count
    assert [(p.passage_id, s) for p, s in loaded.retrieve("Tyne Bridge opened", 3)] == [
        (p.passage_id, s) for p, s in hits
    ]


def test_index_errors(tmp_path):
    with pytest.raises(retrorag.RetroragError):
        retrorag.CorpusIndex.load(str(tmp_path / "missing"))


def test_metrics():
    f1, p, r = retrorag.token_f1("Alex Ferguson", "Sir Alex Ferguson")
    assert p == 1.0 and math.isclose(r, 2 / 3) and math.isclose(f1, 0.8)
    assert retrorag.exact_match("the 1986", "1986") == 1
    assert retrorag.normalize_answer("The Alex Ferguson.") == "alex ferguson"


def test_yes_no_share():
    share = retrorag.yes_no_share([("yes", math.log(0.6)), ("no", math.log(0.2))])
    assert math.isclose(share, 0.75, abs_tol=1e-12)
    assert retrorag.yes_no_share([], "no") == 0.0


def test_pipeline_coach_example(index):
    client = retrorag.ScriptedClient(str(FIXTURES / "scripted.jsonl"))
    pipeline = retrorag.Pipeline(index, client, retrorag.RunConfig())
    result = pipeline.run(COACH_QUESTION)
    assert result["status"] == "ok"
    assert result["final_answer"] == "Alex Ferguson"
    assert result["accepted"] and result["rounds_used"] == 2
    events = retrorag.parse_trace(result["trace"])
    assert events[0]["kind"] == "start" and events[-1]["kind"] == "final"
    assert [e["seq"] for e in events] == list(range(len(events)))
    assert client.calls > 0


def test_config_validation():
    config = retrorag.RunConfig()
    config.threshold = 1.5
    with pytest.raises(retrorag.RetroragError):
        config.validate()
    config.threshold = 0.7
    config.mode = "single_shot"
    assert config.mode == "single_shot"


def test_evaluate(index, tmp_path):
    client = retrorag.ScriptedClient(str(FIXTURES / "scripted.jsonl"))
    pipeline = retrorag.Pipeline(index, client)
    report = pipeline.evaluate(str(FIXTURES / "dataset.jsonl"), str(tmp_path / "results.jsonl"), concurrency=2)
    assert report["executed"] == 25
    summary = json.loads(report["summary"])
    assert summary["type"] == "summary"
    assert summary["questions"] + summary["errors"] == 25
