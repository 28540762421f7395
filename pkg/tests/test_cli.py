import csv
import json

import pytest

from app.cli.common import EXIT_INPUT_ERROR, EXIT_OK, EXIT_WARNINGS
from app.main import main
from app.schemas.text import Document
from app.schemas.timing import Stage, TimingLedger
from app.services.formats import write_json
from app.test_data import make_collection, make_triples, write_collection, write_triples


def _qrels_args(files):
    return [f"{key.split('.', 1)[1]}={path}" for key, path in files.items() if key.startswith("qrels.")]


def _read_csv(path):
    with open(path, encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))


@pytest.fixture
def bm25_index(collection_files, tmp_path):
    index_dir = tmp_path / "index"
    code = main(["index", "--corpus", str(collection_files["corpus"]), "--index-dir", str(index_dir),
                 "--output", str(tmp_path / "out")])
    assert code == EXIT_OK
    return index_dir


def test_index_writes_manifest_and_ledger(bm25_index, collection):
    manifest = json.loads((bm25_index / "manifest.json").read_text())
    assert manifest["mode"] == "bm25"
    assert manifest["doc_count"] == len(collection.docs)
    assert {p["lang"] for p in manifest["languages"]} == {"en", "de", "fr"}
    assert (bm25_index / "index.sqlite").exists()
    ledger = TimingLedger.model_validate_json((bm25_index / "ledger.json").read_text())
    assert ledger.doc_count == len(collection.docs)
    assert ledger.total == pytest.approx(sum(ledger.stages.values()), rel=0.01)
    assert ledger.stages[Stage.TEXT_PROCESSING] > 0


def test_search_writes_deterministic_run(bm25_index, collection_files, tmp_path):
    args = ["search", "--topics", str(collection_files["topics"]), "--index-dir", str(bm25_index), "--k", "10"]
    assert main(args + ["--run", str(tmp_path / "a.trec")]) == EXIT_OK
    assert main(args + ["--run", str(tmp_path / "b.trec"), "--threads", "3"]) == EXIT_OK
    first = (tmp_path / "a.trec").read_bytes()
    assert first == (tmp_path / "b.trec").read_bytes()
    lines = first.decode().splitlines()
    per_topic = {}
    for line in lines:
        qid, q0, doc_id, rank, score, tag = line.split()
        assert (q0, tag) == ("Q0", "bm25")
        per_topic[qid] = per_topic.get(qid, 0) + 1
    assert per_topic
    assert max(per_topic.values()) <= 10


def test_search_skips_topics_without_terms(bm25_index, tmp_path):
    topics = tmp_path / "topics.jsonl"
    topics.write_text(
        '{"id": "q1", "lang": "en", "title": "Find documents on shared1 shared2 shared3"}\n'
        '{"id": "q2", "lang": "en", "title": "Find documents on the"}\n',
        encoding="utf-8",
    )
    run = tmp_path / "run.trec"
    assert main(["search", "--topics", str(topics), "--index-dir", str(bm25_index), "--run", str(run)]) == EXIT_OK
    qids = {line.split()[0] for line in run.read_text().splitlines()}
    assert qids == {"q1"}


def test_search_without_index(collection_files, tmp_path):
    code = main(["search", "--topics", str(collection_files["topics"]), "--index-dir", str(tmp_path / "nothing")])
    assert code == EXIT_INPUT_ERROR


def test_corrupt_corpus_line(tmp_path, capsys):
    corpus = tmp_path / "corpus.jsonl"
    lines = [json.dumps({"id": f"d{i}", "lang": "en", "text": "words"}) for i in range(6)]
    corpus.write_text("\n".join(lines + ['{"id": "d6", "lang": ']) + "\n", encoding="utf-8")
    assert main(["index", "--corpus", str(corpus), "--index-dir", str(tmp_path / "idx")]) == EXIT_INPUT_ERROR
    assert f"{corpus}:7:" in capsys.readouterr().err


def test_corpus_with_invalid_utf8(tmp_path, capsys):
    corpus = tmp_path / "corpus.jsonl"
    good = json.dumps({"id": "d0", "lang": "en", "text": "words"}).encode()
    corpus.write_bytes(good + b"\n" + b'{"id": "d1", "lang": "en", "text": "\xff\xfe"}\n')
    assert main(["index", "--corpus", str(corpus), "--index-dir", str(tmp_path / "idx")]) == EXIT_INPUT_ERROR
    assert f"{corpus}:2:" in capsys.readouterr().err


def test_topics_with_invalid_utf8(bm25_index, tmp_path, capsys):
    topics = tmp_path / "topics.jsonl"
    topics.write_bytes(b'{"id": "q1", "lang": "en", "title": "caf\xe9"}\n')
    code = main(["search", "--topics", str(topics), "--index-dir", str(bm25_index), "--run", str(tmp_path / "r.trec")])
    assert code == EXIT_INPUT_ERROR
    assert f"{topics}:1:" in capsys.readouterr().err


def test_empty_corpus(tmp_path):
    corpus = tmp_path / "corpus.jsonl"
    corpus.write_text("", encoding="utf-8")
    index_dir = tmp_path / "idx"
    assert main(["index", "--corpus", str(corpus), "--index-dir", str(index_dir)]) == EXIT_OK
    ledger = TimingLedger.model_validate_json((index_dir / "ledger.json").read_text())
    assert ledger.doc_count == 0
    assert ledger.per_document is None


def test_duplicate_document_ids(tmp_path):
    corpus = tmp_path / "corpus.jsonl"
    doc = Document(id="d1", lang="en", text="x").model_dump_json()
    corpus.write_text(doc + "\n" + doc + "\n", encoding="utf-8")
    assert main(["index", "--corpus", str(corpus), "--index-dir", str(tmp_path / "idx")]) == EXIT_INPUT_ERROR


@pytest.mark.parametrize("mode", ["maxsim", "single-vector"])
def test_dense_index_and_search(collection_files, tmp_path, mode):
    index_dir = tmp_path / "dense"
    assert main(["index", "--corpus", str(collection_files["corpus"]), "--index-dir", str(index_dir),
                 "--mode", mode, "--dim", "16", "--window", "20", "--stride", "10"]) == EXIT_OK
    manifest = json.loads((index_dir / "manifest.json").read_text())
    assert (manifest["mode"], manifest["dim"], manifest["window"]) == (mode, 16, 20)
    assert (index_dir / "store.mlke").exists()
    assert (index_dir / "passages.jsonl").exists()
    run = tmp_path / "dense.trec"
    assert main(["search", "--topics", str(collection_files["topics"]), "--index-dir", str(index_dir),
                 "--k", "5", "--run", str(run), "--run-tag", "toy"]) == EXIT_OK
    lines = run.read_text().splitlines()
    assert len(lines) == 5 * 6
    assert all(line.endswith(" toy") for line in lines)


def _evaluate_args(collection_files, run, out):
    return ["evaluate", "--run", str(run), "--qrels", *_qrels_args(collection_files),
            "--corpus", str(collection_files["corpus"]), "--output", str(out)]


def test_evaluate_bm25_run(bm25_index, collection_files, tmp_path):
    run = tmp_path / "run.trec"
    assert main(["search", "--topics", str(collection_files["topics"]), "--index-dir", str(bm25_index),
                 "--run", str(run)]) == EXIT_OK
    out = tmp_path / "eval"
    code = main(_evaluate_args(collection_files, run, out))
    payload = json.loads((out / "metrics.json").read_text())
    assert code == (EXIT_WARNINGS if payload["warnings"] else EXIT_OK)
    assert 0.0 < payload["aggregate"]["map"] <= 1.0
    rows = _read_csv(out / "metrics.csv")
    assert rows[-1]["qid"] == "all"
    assert float(rows[-1]["ap"]) == pytest.approx(payload["aggregate"]["map"])
    assert {"recall_mlir_rel_en", "recall_mlir_rel_de", "recall_mlir_rel_fr"} <= set(rows[0])


def _oracle_run(collection, path):
    lines = []
    for topic in collection.topics:
        relevant = sorted(
            doc_id for qrels in collection.qrels.values()
            for doc_id, grade in qrels.get(topic.id, {}).items() if grade > 0
        )
        for rank, doc_id in enumerate(relevant, 1):
            lines.append(f"{topic.id} Q0 {doc_id} {rank} {100 - rank} oracle")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def test_evaluate_oracle_run_has_perfect_map(collection, collection_files, tmp_path):
    run = tmp_path / "oracle.trec"
    _oracle_run(collection, run)
    out = tmp_path / "eval"
    main(_evaluate_args(collection_files, run, out))
    payload = json.loads((out / "metrics.json").read_text())
    assert payload["aggregate"]["map"] == 1.0
    assert payload["aggregate"]["r_precision"] == 1.0


def test_evaluate_against_itself(collection, collection_files, tmp_path):
    run = tmp_path / "oracle.trec"
    _oracle_run(collection, run)
    out = tmp_path / "eval"
    main(_evaluate_args(collection_files, run, out) + ["--baseline", str(run), "--bonferroni", "16"])
    payload = json.loads((out / "metrics.json").read_text())
    assert payload["significance"]["bonferroni"] == 16
    for test in payload["significance"]["tests"]:
        assert (test["p"], test["adjusted_p"]) == (1.0, 1.0)
    assert (out / "significance.csv").exists()


def test_evaluate_without_shared_queries(collection_files, tmp_path):
    run = tmp_path / "run.trec"
    run.write_text("zz Q0 en-000000 1 1.0 t\n", encoding="utf-8")
    assert main(_evaluate_args(collection_files, run, tmp_path / "eval")) == EXIT_INPUT_ERROR


def test_evaluate_with_invalid_utf8_qrels(collection_files, tmp_path, capsys):
    run = tmp_path / "run.trec"
    run.write_text("q1 Q0 d1 1 1.000000 t\n", encoding="utf-8")
    qrels = tmp_path / "qrels.en"
    qrels.write_bytes(b"q1 0 d1 1\nq1 0 d\xff 1\n")
    code = main(["evaluate", "--run", str(run), "--qrels", f"en={qrels}",
                 "--corpus", str(collection_files["corpus"]), "--output", str(tmp_path / "eval")])
    assert code == EXIT_INPUT_ERROR
    assert f"{qrels}:2:" in capsys.readouterr().err


def test_evaluate_with_invalid_utf8_run(collection_files, tmp_path, capsys):
    run = tmp_path / "run.trec"
    run.write_bytes(b"q1 Q0 d\xe9 1 1.000000 t\n")
    code = main(_evaluate_args(collection_files, run, tmp_path / "eval"))
    assert code == EXIT_INPUT_ERROR
    assert f"{run}:1:" in capsys.readouterr().err


def test_bias_report(collection, collection_files, tmp_path):
    run = tmp_path / "oracle.trec"
    _oracle_run(collection, run)
    out = tmp_path / "bias"
    args = ["bias-report", "--run", str(run), "--qrels", *_qrels_args(collection_files),
            "--corpus", str(collection_files["corpus"]), "--output", str(out)]
    code = main(args + ["--reference-lang", "en"])
    report = json.loads((out / "bias_report.json").read_text())
    assert code == (EXIT_WARNINGS if report["warnings"] else EXIT_OK)
    assert set(report["languages"]) == {"en", "de", "fr"}
    assert _read_csv(out / "bias_topics.csv")[0].keys() >= {"topic", "lang", "recall_mlir_relevant"}
    assert main(args) == EXIT_INPUT_ERROR


def test_bias_report_empty_run(collection_files, tmp_path):
    run = tmp_path / "empty.trec"
    run.write_text("", encoding="utf-8")
    out = tmp_path / "bias"
    code = main(["bias-report", "--run", str(run), "--qrels", *_qrels_args(collection_files),
                 "--reference-lang", "en", "--output", str(out)])
    assert code == EXIT_WARNINGS
    report = json.loads((out / "bias_report.json").read_text())
    assert report["mean_r_precision"] is None


def test_timing_report(tmp_path):
    paths = []
    for system, seconds in (("itd", 320.0), ("mtt", 50.0)):
        path = tmp_path / f"{system}.json"
        write_json(path, TimingLedger(system=system, stages={Stage.REPRESENTATION: seconds}, doc_count=1000))
        paths.append(str(path))
    out = tmp_path / "timing"
    assert main(["timing-report", "--ledgers", *paths, "--map", "itd=0.46", "mtt=0.45", "--output", str(out)]) == EXIT_OK
    pairs = {(r["system"], r["baseline"]): r for r in _read_csv(out / "timing_pairs.csv")}
    assert float(pairs[("mtt", "itd")]["reduction"]) == pytest.approx(0.844, abs=0.001)
    points = _read_csv(out / "tradeoff_points.csv")
    assert [(p["system"], float(p["map"])) for p in points] == [("itd", 0.46), ("mtt", 0.45)]
    assert json.loads((out / "timing_systems.json").read_text())["systems"][1]["seconds_per_doc"] == 0.05


def test_timing_report_zero_documents(tmp_path):
    path = tmp_path / "empty.json"
    write_json(path, TimingLedger(system="empty", stages={Stage.INDEX_BUILD: 1.0}, doc_count=0))
    out = tmp_path / "timing"
    assert main(["timing-report", "--ledgers", str(path), "--output", str(out)]) == EXIT_WARNINGS
    assert _read_csv(out / "timing_systems.csv")[0]["seconds_per_doc"] == ""


LANGS = ["en", "de", "es", "fr", "it"]


def test_mix_triples(tmp_path):
    paths = write_triples(make_triples(100, LANGS, seed=1), tmp_path / "triples")
    out = tmp_path / "mix"
    args = ["mix-triples", "--triples", *(str(paths[lang]) for lang in LANGS), "--output", str(out)]
    assert main(args + ["--mix-mode", "MTT-M", "--batch-size", "32"]) == EXIT_OK
    combined = (out / "combined.tsv").read_text(encoding="utf-8").splitlines()
    assert len(combined) == 100
    assert all(len(line.split("\t")) == 15 for line in combined)
    first = (out / "schedule.jsonl").read_bytes()
    assert main(args + ["--mix-mode", "MTT-M", "--batch-size", "32"]) == EXIT_OK
    assert (out / "schedule.jsonl").read_bytes() == first
    records = [json.loads(line) for line in first.decode().splitlines()]
    assert len(records) == 500
    assert [r["lang"] for r in records[:5]] == LANGS


def test_mix_triples_et_passes_through(tmp_path):
    paths = write_triples(make_triples(10, ["en"], seed=1), tmp_path / "triples")
    out = tmp_path / "mix"
    assert main(["mix-triples", "--triples", f"en={paths['en']}", "--mix-mode", "ET", "--output", str(out)]) == EXIT_OK
    assert (out / "combined.tsv").read_bytes() == paths["en"].read_bytes()
    assert len((out / "schedule.jsonl").read_text().splitlines()) == 10


def test_mix_triples_misaligned(tmp_path):
    paths = write_triples(make_triples(10, ["en", "de"], seed=1), tmp_path / "triples")
    paths["de"].write_text("".join(paths["de"].read_text().splitlines(keepends=True)[:7]), encoding="utf-8")
    args = ["mix-triples", "--triples", str(paths["en"]), str(paths["de"]), "--output", str(tmp_path / "mix")]
    assert main(args) == EXIT_INPUT_ERROR
    assert not (tmp_path / "mix" / "combined.tsv").exists()


def test_mix_triples_mismatched_queries_write_nothing(tmp_path):
    en = tmp_path / "triples.en.tsv"
    de = tmp_path / "triples.de.tsv"
    en.write_text("q1\tp\tn\nq2\tp\tn\n", encoding="utf-8")
    de.write_text("q1\tp\tn\nother\tp\tn\n", encoding="utf-8")
    out = tmp_path / "mix"
    code = main(["mix-triples", "--triples", str(en), str(de), "--mix-mode", "MTT-M", "--output", str(out)])
    assert code == EXIT_INPUT_ERROR
    assert not (out / "combined.tsv").exists()
    assert not (out / "schedule.jsonl").exists()


@pytest.mark.slow
def test_desk_scale_pipeline_is_deterministic(tmp_path):
    files = write_collection(make_collection(n_docs=5000, n_topics=50, seed=13), tmp_path / "data")
    outputs = {}
    for attempt in ("a", "b"):
        root = tmp_path / attempt
        for mode in ("bm25", "maxsim"):
            index_dir = root / f"index-{mode}"
            run = root / f"{mode}.trec"
            assert main(["index", "--corpus", str(files["corpus"]), "--index-dir", str(index_dir), "--mode", mode]) == EXIT_OK
            assert main(["search", "--topics", str(files["topics"]), "--index-dir", str(index_dir),
                         "--run", str(run)]) == EXIT_OK
            evaluation = root / f"eval-{mode}"
            assert main(["evaluate", "--run", str(run), "--qrels", *_qrels_args(files),
                         "--corpus", str(files["corpus"]), "--output", str(evaluation)]) in (EXIT_OK, EXIT_WARNINGS)
            assert main(["bias-report", "--run", str(run), "--qrels", *_qrels_args(files),
                         "--corpus", str(files["corpus"]), "--reference-lang", "en",
                         "--output", str(root / f"bias-{mode}")]) in (EXIT_OK, EXIT_WARNINGS)
            outputs.setdefault(mode, []).append((
                run.read_bytes(),
                (evaluation / "metrics.csv").read_bytes(),
                (root / f"bias-{mode}" / "bias_report.json").read_bytes(),
                (index_dir / "manifest.json").read_bytes(),
            ))
    for mode, (a, b) in outputs.items():
        assert a == b, mode
