"""Command-line pipeline: prepare, split-unseen, score, evaluate, bench.

Exit codes: 0 on success, 1 on user errors (bad arguments, malformed or
missing files), 2 on internal errors.
"""

from __future__ import annotations

import argparse
import json
import shutil
import sys
import traceback
from pathlib import Path

from .bench import format_bench_table, run_bench, write_bench_csv
from .errors import EngineError, UsageError
from .evaluation import EvaluationRun, evaluate_queries, write_ranks_csv
from .kg import SplitSpec, load_dataset_dir, make_unseen_split, save_triples, \
    save_unseen_manifest
from .prompts import build_prompt, enumerate_queries, render_prompt, write_prompts
from .scoring import SCORER_KINDS, builtin_scorer, load_logit_tables, \
    save_table_manifest
from .tokenizer import PAD_MARKER, EntityCatalog, Vocabulary

DEFAULT_MAX_SEQ_LEN = 512


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _add_dataset_args(p: argparse.ArgumentParser, splits=("train", "valid", "test")):
    p.add_argument("--dataset", required=True, help="dataset directory")
    p.add_argument("--style", choices=("wordnet", "freebase", "plain"), default="plain",
                   help="entity/relation cleaning rules")
    p.add_argument("--split", choices=splits, default="test")
    p.add_argument("--mode", choices=("standard", "unseen"), default="standard",
                   help="unseen mode queries only the sampled side of each triple")


def _add_vocab_args(p: argparse.ArgumentParser):
    p.add_argument("--vocab", required=True, help="vocabulary file")
    p.add_argument("--catalog", default=None,
                   help="pre-tokenized entity catalog (JSONL); default tokenizes "
                        "entity surfaces with the built-in tokenizer")


def _add_tables_args(p: argparse.ArgumentParser):
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--tables", default=None, help="MLMT logit-table file")
    group.add_argument("--scorer", choices=SCORER_KINDS, default=None,
                       help="built-in model-free scorer")


def _load_common(args):
    kg = load_dataset_dir(args.dataset, style=args.style,
                          unseen=(args.mode == "unseen"))
    vocab = Vocabulary.load(args.vocab)
    if args.catalog:
        catalog = EntityCatalog.load(args.catalog, vocab)
        if catalog.n != kg.n_entities:
            raise UsageError(f"catalog covers {catalog.n} entities, "
                             f"dataset has {kg.n_entities}")
    else:
        catalog = EntityCatalog.build(vocab, kg.entities)
    return kg, vocab, catalog


def _tables_for(args, kg, vocab, catalog, queries):
    if args.tables:
        return load_logit_tables(args.tables, expected_vocab_size=vocab.size,
                                 expected_l_max=catalog.l_max)
    return builtin_scorer(args.scorer, kg, catalog, vocab.size)(queries)


def cmd_prepare(args) -> None:
    kg, vocab, catalog = _load_common(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    queries = enumerate_queries(kg, split=args.split, mode=args.mode)
    prompts = (build_prompt(kg, catalog, vocab, q, max_seq_len=args.max_seq_len,
                            pad_to_max=args.pad_to_max) for q in queries)
    count = write_prompts(out / "prompts.jsonl", prompts)
    catalog.save(out / "catalog.jsonl")
    vocab.save(out / "vocab.txt")
    save_table_manifest(out / "manifest.json", queries, vocab_size=vocab.size,
                        l_max=catalog.l_max)
    print(f"prepared {count} prompts ({args.split}/{args.mode}, l_max {catalog.l_max}, "
          f"vocab {vocab.size}) in {out}")


def cmd_split_unseen(args) -> None:
    kg = load_dataset_dir(args.dataset, style=args.style)
    spec = SplitSpec(seed=args.seed, valid_fraction=args.valid_frac,
                     test_fraction=args.test_frac)
    split = make_unseen_split(kg, spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in ("entities.tsv", "relations.tsv"):
        shutil.copyfile(Path(args.dataset) / name, out / name)
    for name in ("train", "valid", "test"):
        save_triples(out / f"{name}.tsv", split, split.split(name))
    save_unseen_manifest(out / "unseen.json", split, seed=args.seed)
    print(f"unseen split: train {len(split.train)}, valid {len(split.valid)}, "
          f"test {len(split.test)} triples in {out}")


def cmd_score(args) -> None:
    kg, vocab, catalog = _load_common(args)
    queries = enumerate_queries(kg, split=args.split, mode=args.mode)
    tables = _tables_for(args, kg, vocab, catalog, queries)
    run = evaluate_queries(kg, catalog, queries, tables, seeds=[args.seed],
                           topk=args.topk)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        for entry in run.topk:
            q = entry.query
            fh.write(json.dumps({
                "query_id": q.query_id,
                "direction": q.direction,
                "triple": list(q.triple),
                "gold": q.gold,
                "gold_rank": entry.gold_rank,
                "candidate_count": entry.candidate_count,
                "top": [
                    {"entity_id": eid, "surface": kg.entities[eid].surface,
                     "score": score}
                    for eid, score in zip(entry.entity_ids, entry.entity_scores)
                ],
            }) + "\n")
    print(f"scored {len(run.topk)} queries (top-{args.topk}) into {args.out}")


def _entity_text(vocab, catalog, entity_id: int) -> str:
    pads = PAD_MARKER * (catalog.l_max - int(catalog.lengths[entity_id]))
    return vocab.detokenize(catalog.row(entity_id)) + pads


def _write_topk_dump(path, kg, vocab, catalog, run: EvaluationRun, max_seq_len: int):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for entry in run.topk:
            prompt = build_prompt(kg, catalog, vocab, entry.query,
                                  max_seq_len=max_seq_len)
            fh.write(f"Prompt : {render_prompt(vocab, prompt)}\n")
            fh.write(f"Correct answer : {_entity_text(vocab, catalog, entry.query.gold)} "
                     f"\t Answer rank {entry.gold_rank}\n")
            for pos, (eid, score) in enumerate(
                    zip(entry.entity_ids, entry.entity_scores), start=1):
                fh.write(f"Rank {pos}\t Score {score:.4f}\t : "
                         f"{_entity_text(vocab, catalog, eid)}\n")
            fh.write("\n")


def cmd_evaluate(args) -> None:
    if not args.seeds:
        raise UsageError("--seeds must name at least one seed")
    kg, vocab, catalog = _load_common(args)
    queries = enumerate_queries(kg, split=args.split, mode=args.mode)
    tables = _tables_for(args, kg, vocab, catalog, queries)
    run = evaluate_queries(kg, catalog, queries, tables, seeds=args.seeds,
                           topk=args.dump_topk)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        json.dump(run.report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    for seed in args.seeds:
        write_ranks_csv(out / f"ranks_seed{seed}.csv", run.results[seed])
    if args.dump_topk > 0:
        _write_topk_dump(out / "topk.txt", kg, vocab, catalog, run, args.max_seq_len)
    print(f"evaluated {run.report.query_count} queries over seeds {args.seeds}")
    for name in ("mrr", "mr", "mp@1", "mp@3", "mp@10"):
        print(f"  {name:<6} {run.report.mean[name]:.6f} +- {run.report.std[name]:.6f}")


def cmd_bench(args) -> None:
    rows = run_bench(args.entity_counts, args.queries, l_max=args.l_max,
                     vocab_size=args.vocab_size, seed=args.seed,
                     repeats=args.repeats)
    if args.out:
        write_bench_csv(args.out, rows)
    if rows:
        print(format_bench_table(rows))
    else:
        print("bench: nothing to measure")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="linkrank",
                     description="Rank knowledge-base entities by mean masked-token "
                                 "likelihood and evaluate link prediction.")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("prepare", help="emit prompts, catalog, and vocabulary files")
    _add_dataset_args(p)
    _add_vocab_args(p)
    p.add_argument("--max-seq-len", type=int, default=DEFAULT_MAX_SEQ_LEN)
    p.add_argument("--pad-to-max", action="store_true",
                   help="right-pad every prompt to max-seq-len")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("split-unseen", help="re-split a dataset by sampled entities")
    p.add_argument("--dataset", required=True)
    p.add_argument("--style", choices=("wordnet", "freebase", "plain"), default="plain")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--valid-frac", type=float, default=0.05)
    p.add_argument("--test-frac", type=float, default=0.05)
    p.add_argument("--out", required=True, help="output dataset directory")
    p.set_defaults(func=cmd_split_unseen)

    p = sub.add_parser("score", help="dump top-k entities per query")
    _add_dataset_args(p)
    _add_vocab_args(p)
    _add_tables_args(p)
    p.add_argument("--topk", type=int, default=10)
    p.add_argument("--seed", type=int, default=0, help="tie-break seed")
    p.add_argument("--out", required=True, help="output JSONL file")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("evaluate", help="filtered ranking metrics over seeds")
    _add_dataset_args(p, splits=("valid", "test"))
    _add_vocab_args(p)
    _add_tables_args(p)
    p.add_argument("--seeds", type=_int_list, default=[0],
                   help="comma-separated tie-break seeds")
    p.add_argument("--dump-topk", type=int, default=0,
                   help="also write a ranked top-k text dump")
    p.add_argument("--max-seq-len", type=int, default=DEFAULT_MAX_SEQ_LEN)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bench", help="time the scoring and ranking kernel")
    p.add_argument("--entity-counts", type=_int_list, default=[1000, 10000, 100000])
    p.add_argument("--queries", type=int, default=64)
    p.add_argument("--l-max", type=int, default=8)
    p.add_argument("--vocab-size", type=int, default=1024)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--out", default=None, help="CSV output path")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if getattr(args, "func", None) is None:
        parser.print_help(sys.stderr)
        return 1
    try:
        args.func(args)
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2
    return 0


def entry() -> None:
    sys.exit(main())
