import csv
import json

import numpy as np
import pytest

from linkrank import (
    EntityCatalog,
    LogitTable,
    enumerate_queries,
    load_dataset_dir,
    save_logit_tables,
)
from linkrank.cli import main

from conftest import vocab_for, write_wordnet_dataset


@pytest.fixture
def workspace(tmp_path):
    dataset = write_wordnet_dataset(tmp_path / "wn")
    kg = load_dataset_dir(dataset, style="wordnet")
    vocab = vocab_for(kg)
    vocab_path = tmp_path / "vocab.txt"
    vocab.save(vocab_path)
    return tmp_path, dataset, vocab_path, kg, vocab


def run_cli(*args):
    return main([str(a) for a in args])


class TestPrepare:
    def test_emits_contract_files(self, workspace):
        tmp, dataset, vocab_path, kg, _ = workspace
        out = tmp / "prep"
        assert run_cli("prepare", "--dataset", dataset, "--style", "wordnet",
                       "--vocab", vocab_path, "--split", "test", "--out", out) == 0
        lines = (out / "prompts.jsonl").read_text().splitlines()
        assert len(lines) == 2 * len(kg.test)
        assert (out / "catalog.jsonl").exists()
        assert (out / "vocab.txt").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert len(manifest["queries"]) == 2 * len(kg.test)
        rec = json.loads(lines[0])
        assert set(rec) == {"query_id", "direction", "triple", "token_ids", "mask_start"}

    def test_rerun_byte_identical(self, workspace):
        tmp, dataset, vocab_path, _, _ = workspace
        outs = []
        for name in ("a", "b"):
            out = tmp / name
            assert run_cli("prepare", "--dataset", dataset, "--style", "wordnet",
                           "--vocab", vocab_path, "--out", out) == 0
            outs.append(out)
        for fname in ("prompts.jsonl", "catalog.jsonl", "vocab.txt", "manifest.json"):
            assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()

    def test_train_split_supported(self, workspace):
        tmp, dataset, vocab_path, kg, _ = workspace
        out = tmp / "prep_train"
        assert run_cli("prepare", "--dataset", dataset, "--style", "wordnet",
                       "--vocab", vocab_path, "--split", "train", "--out", out) == 0
        lines = (out / "prompts.jsonl").read_text().splitlines()
        assert len(lines) == 2 * len(kg.train)


class TestSplitUnseen:
    def test_split_then_prepare_unseen(self, workspace):
        tmp, dataset, vocab_path, _, _ = workspace
        resplit = tmp / "resplit"
        assert run_cli("split-unseen", "--dataset", dataset, "--style", "wordnet",
                       "--seed", 5, "--valid-frac", 0.2, "--test-frac", 0.2,
                       "--out", resplit) == 0
        manifest = json.loads((resplit / "unseen.json").read_text())
        assert manifest["seed"] == 5
        assert not set(manifest["valid_entities"]) & set(manifest["test_entities"])

        kg2 = load_dataset_dir(resplit, style="wordnet", unseen=True)
        out = tmp / "prep_unseen"
        assert run_cli("prepare", "--dataset", resplit, "--style", "wordnet",
                       "--vocab", vocab_path, "--split", "test", "--mode", "unseen",
                       "--out", out) == 0
        lines = (out / "prompts.jsonl").read_text().splitlines()
        expected = sum(
            (t.head in kg2.test_entities) + (t.tail in kg2.test_entities)
            for t in kg2.test)
        assert len(lines) == expected

    def test_evaluate_unseen_mode(self, workspace):
        tmp, dataset, vocab_path, _, _ = workspace
        resplit = tmp / "resplit_eval"
        assert run_cli("split-unseen", "--dataset", dataset, "--style", "wordnet",
                       "--seed", 11, "--valid-frac", 0.2, "--test-frac", 0.2,
                       "--out", resplit) == 0
        out = tmp / "eval_unseen"
        assert run_cli("evaluate", "--dataset", resplit, "--style", "wordnet",
                       "--vocab", vocab_path, "--scorer", "constant",
                       "--mode", "unseen", "--split", "test",
                       "--seeds", "0", "--out", out) == 0
        kg2 = load_dataset_dir(resplit, style="wordnet", unseen=True)
        expected = sum(
            (t.head in kg2.test_entities) + (t.tail in kg2.test_entities)
            for t in kg2.test)
        report = json.loads((out / "report.json").read_text())
        assert report["query_count"] == expected

    def test_unseen_mode_requires_manifest(self, workspace):
        tmp, dataset, vocab_path, _, _ = workspace
        code = run_cli("prepare", "--dataset", dataset, "--style", "wordnet",
                       "--vocab", vocab_path, "--mode", "unseen", "--out", tmp / "x")
        assert code == 1


class TestEvaluate:
    def test_with_builtin_scorer(self, workspace):
        tmp, dataset, vocab_path, _, _ = workspace
        out = tmp / "eval"
        assert run_cli("evaluate", "--dataset", dataset, "--style", "wordnet",
                       "--vocab", vocab_path, "--scorer", "constant",
                       "--seeds", "0,1,2", "--out", out) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["seeds"] == [0, 1, 2]
        assert set(report["mean"]) == {"mrr", "mr", "mp@1", "mp@3", "mp@10"}
        for seed in (0, 1, 2):
            with open(out / f"ranks_seed{seed}.csv") as fh:
                rows = list(csv.DictReader(fh))
            assert len(rows) == report["query_count"]
            assert set(rows[0]) == {"query_id", "gold", "rank", "candidate_count"}

    def test_with_tables_file_matches_library(self, workspace, rng):
        tmp, dataset, vocab_path, kg, vocab = workspace
        catalog = EntityCatalog.build(vocab, kg.entities)
        queries = enumerate_queries(kg, split="test")
        tables = [LogitTable(q.query_id,
                             rng.standard_normal((catalog.l_max, vocab.size))
                             .astype(np.float32))
                  for q in queries]
        tables_path = tmp / "test.mlmt"
        save_logit_tables(tables_path, tables, vocab_size=vocab.size,
                          l_max=catalog.l_max)
        out = tmp / "eval_tables"
        assert run_cli("evaluate", "--dataset", dataset, "--style", "wordnet",
                       "--vocab", vocab_path, "--tables", tables_path,
                       "--seeds", "0", "--out", out) == 0
        from linkrank import evaluate_queries
        expected = evaluate_queries(kg, catalog, queries, tables, seeds=[0])
        report = json.loads((out / "report.json").read_text())
        assert report["mean"] == pytest.approx(expected.report.mean)

    def test_mismatched_tables_rejected(self, workspace, rng):
        tmp, dataset, vocab_path, kg, vocab = workspace
        tables_path = tmp / "bad.mlmt"
        save_logit_tables(
            tables_path,
            [LogitTable(1, np.zeros((2, 7), dtype=np.float32))],
            vocab_size=7, l_max=2)
        assert run_cli("evaluate", "--dataset", dataset, "--style", "wordnet",
                       "--vocab", vocab_path, "--tables", tables_path,
                       "--out", tmp / "x") == 1

    def test_topk_dump_layout(self, workspace):
        tmp, dataset, vocab_path, _, _ = workspace
        out = tmp / "eval_dump"
        assert run_cli("evaluate", "--dataset", dataset, "--style", "wordnet",
                       "--vocab", vocab_path, "--scorer", "frequency",
                       "--seeds", "0", "--dump-topk", "3", "--out", out) == 0
        text = (out / "topk.txt").read_text()
        blocks = [b for b in text.split("\n\n") if b.strip()]
        report = json.loads((out / "report.json").read_text())
        assert len(blocks) == report["query_count"]
        first = blocks[0].splitlines()
        assert first[0].startswith("Prompt : <s>")
        assert "Correct answer : " in first[1] and "\t Answer rank " in first[1]
        assert first[2].startswith("Rank 1\t Score ")
        assert first[2].count("<pad>") >= 0  # padded rendering present
        assert len(first) == 2 + 3


class TestScore:
    def test_topk_jsonl(self, workspace):
        tmp, dataset, vocab_path, kg, _ = workspace
        out = tmp / "scores.jsonl"
        assert run_cli("score", "--dataset", dataset, "--style", "wordnet",
                       "--vocab", vocab_path, "--scorer", "frequency",
                       "--topk", "2", "--out", out) == 0
        records = [json.loads(line) for line in out.read_text().splitlines()]
        assert len(records) == 2 * len(kg.test)
        for rec in records:
            assert len(rec["top"]) == 2
            assert {"entity_id", "surface", "score"} <= set(rec["top"][0])
            assert rec["gold_rank"] >= 1


class TestBench:
    def test_writes_csv(self, tmp_path):
        out = tmp_path / "bench.csv"
        assert run_cli("bench", "--entity-counts", "200,400", "--queries", "4",
                       "--l-max", "4", "--vocab-size", "64", "--out", out) == 0
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        assert [int(r["n_entities"]) for r in rows] == [200, 400]
        assert all(float(r["per_entity_ns"]) > 0 for r in rows)

    def test_zero_queries_empty_report(self, tmp_path):
        out = tmp_path / "bench.csv"
        assert run_cli("bench", "--entity-counts", "100", "--queries", "0",
                       "--out", out) == 0
        with open(out) as fh:
            assert list(csv.DictReader(fh)) == []

    def test_doubling_l_max_scales_scoring_cost(self):
        # the kernel is an O(n * l_max) gather; wall-clock ratios are noisy,
        # so only a wide band is asserted
        from linkrank.bench import run_bench

        narrow = run_bench([200_000], n_queries=8, l_max=4, vocab_size=256,
                           seed=1, repeats=5)[0]
        wide = run_bench([200_000], n_queries=8, l_max=16, vocab_size=256,
                         seed=1, repeats=5)[0]
        ratio = wide["per_query_us"] / narrow["per_query_us"]
        assert 1.4 <= ratio <= 40


class TestExitCodes:
    def test_missing_dataset_is_user_error(self, tmp_path):
        assert run_cli("evaluate", "--dataset", tmp_path / "nope",
                       "--vocab", tmp_path / "v.txt", "--scorer", "constant",
                       "--out", tmp_path / "o") == 1

    def test_unknown_flag_is_user_error(self):
        assert run_cli("bench", "--frobnicate") == 1

    def test_missing_subcommand_is_user_error(self):
        assert run_cli() == 1

    def test_help_exits_zero(self):
        assert run_cli("--help") == 0

    def test_internal_error_is_two(self, monkeypatch):
        import linkrank.cli as cli_mod

        def boom(*args, **kwargs):
            raise RuntimeError("kernel panic")

        monkeypatch.setattr(cli_mod, "run_bench", boom)
        assert run_cli("bench", "--entity-counts", "10", "--queries", "1") == 2

    def test_conflicting_table_sources_rejected(self, workspace):
        tmp, dataset, vocab_path, _, _ = workspace
        assert run_cli("evaluate", "--dataset", dataset, "--vocab", vocab_path,
                       "--scorer", "constant", "--tables", "x.mlmt",
                       "--out", tmp / "o") == 1
