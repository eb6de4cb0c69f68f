"""Command-line interface: mine, train, generate, rerank-train,
calibrate, predict, eval, stats, and dump-embeddings subcommands.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
Outputs embed the resolved config fingerprint so every artifact can be
regenerated from its settings and seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor

from kpforge import __version__
from kpforge.config import RunConfig, build_config, read_config_file, write_config_file
from kpforge.corpus import (
    corpus_stats,
    load_corpus,
    partition_keyphrases,
    tokenize,
)
from kpforge.errors import DataError, KpforgeError, UsageError
from kpforge.stem import stem_phrase


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_common(parser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--jobs", type=int)


def _meta_line(config: RunConfig, command: str) -> str:
    return json.dumps(
        {
            "meta": {
                "command": command,
                "fingerprint": config.fingerprint(),
                "seed": config.seed,
                "version": __version__,
            }
        },
        sort_keys=True,
    )


def _resolve(args, **extra) -> RunConfig:
    overrides = {
        key: value
        for key, value in vars(args).items()
        if key not in ("command", "config", "func", "allow_bad_records", "stage")
        and value is not None
    }
    overrides.update({k: v for k, v in extra.items() if v is not None})
    return build_config(args.config, overrides)


def _load_documents(path, allow_bad_records: bool = False):
    if path is None:
        raise UsageError("missing required --corpus path")
    result = load_corpus(path)
    for error in result.errors:
        print(f"warning: {path}: {error}", file=sys.stderr)
    if result.errors and not allow_bad_records:
        raise DataError(
            f"{path} has {len(result.errors)} malformed record(s); "
            "pass --allow-bad-records to proceed with the valid ones"
        )
    if not result.documents:
        raise DataError(f"{path} contains no valid documents")
    return result.documents


def _require(value, flag: str):
    if value is None:
        raise UsageError(f"missing required {flag}")
    return value


def _chunked(items, n_chunks: int):
    size = max(1, (len(items) + n_chunks - 1) // n_chunks)
    return [items[i : i + size] for i in range(0, len(items), size)]


def _parallel_chunks(fn, items, jobs: int):
    """Run fn over chunks of items, preserving order; fn maps list->list."""
    if jobs <= 1 or len(items) <= 1:
        return fn(items)
    results = []
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        for chunk_result in pool.map(fn, _chunked(items, jobs)):
            results.extend(chunk_result)
    return results


# --------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------


def cmd_stats(args) -> int:
    config = _resolve(args)
    documents = _load_documents(config.corpus, args.allow_bad_records)
    stats = corpus_stats(documents)
    header = f"{'#KP_mean':>10} {'#KP_std':>10} {'|KP|_mean':>10} {'%absent':>10} {'#samples':>10}"
    row = (
        f"{stats.kp_count_mean:>10.2f} {stats.kp_count_std:>10.2f} "
        f"{stats.kp_length_mean:>10.2f} {stats.pct_absent:>10.2f} {stats.n_samples:>10d}"
    )
    print(header)
    print(row)
    if config.output:
        payload = {
            "meta": json.loads(_meta_line(config, "stats"))["meta"],
            "stats": stats.as_dict(),
        }
        with open(config.output, "w", encoding="utf-8") as handle:
            json.dump(payload, handle, sort_keys=True, indent=2)
            handle.write("\n")
    return 0


def _mine_chunk(payload):
    from kpforge.mining import MinerConfig, label_candidates, mine_candidates
    from kpforge.tagging import TagSetTable, tag_tokens

    documents, max_ngram, noun_only, keep_contentless = payload
    table = TagSetTable.nouns_only() if noun_only else TagSetTable.default()
    miner_config = MinerConfig(
        max_ngram=max_ngram, table=table, require_content_tag=not keep_contentless
    )
    lines = []
    for doc in documents:
        tokenized = tokenize(doc)
        tagged = tag_tokens(tokenized.tokens, doc.pre_tags)
        candidates = mine_candidates(tagged, miner_config)
        present, _ = partition_keyphrases(tokenized, doc.keyphrases)
        labeled = label_candidates(candidates, present, doc.id)
        positive_stems = {c.stemmed for c in labeled.positives}
        lines.append(
            {
                "id": doc.id,
                "candidates": [
                    {
                        "start": c.start,
                        "end": c.end,
                        "surface": c.surface,
                        "stemmed": c.stemmed,
                        "is_positive": c.stemmed in positive_stems,
                    }
                    for c in candidates
                ],
                "missed_gold": labeled.missed_gold,
            }
        )
    return lines


def cmd_mine(args) -> int:
    config = _resolve(args)
    documents = _load_documents(config.corpus, args.allow_bad_records)
    output = _require(config.output, "--output")

    def run(docs):
        return _mine_chunk(
            (docs, config.max_ngram, config.noun_only, config.mine_keep_contentless)
        )

    if config.jobs > 1:
        payloads = [
            (chunk, config.max_ngram, config.noun_only, config.mine_keep_contentless)
            for chunk in _chunked(documents, config.jobs)
        ]
        lines = []
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            for result in pool.map(_mine_chunk, payloads):
                lines.extend(result)
    else:
        lines = run(documents)

    with open(output, "w", encoding="utf-8") as handle:
        handle.write(_meta_line(config, "mine") + "\n")
        for line in lines:
            handle.write(json.dumps(line, sort_keys=True) + "\n")
    return 0


def _train_configs(config: RunConfig):
    from kpforge.encoder import EncoderConfig
    from kpforge.extractor import TrainConfig
    from kpforge.mining import MinerConfig
    from kpforge.tagging import TagSetTable

    encoder_config = EncoderConfig(
        embed_dim=config.embed_dim,
        hidden_dim=config.hidden_dim,
        context_mixing=config.context_mixing,
        seed=config.seed,
    )
    table = TagSetTable.nouns_only() if config.noun_only else TagSetTable.default()
    miner_config = MinerConfig(
        max_ngram=config.max_ngram,
        table=table,
        require_content_tag=not config.mine_keep_contentless,
    )
    train_config = TrainConfig(
        temperature=config.temperature,
        contrastive_weight=config.contrastive_weight,
        learning_rate=config.learning_rate,
        warmup_fraction=config.warmup,
        batch_size=config.batch_size,
        epochs=config.epochs,
        patience=config.max_tolerance,
        seed=config.seed,
        max_grad_norm=config.max_grad_norm,
        weight_decay=config.weight_decay,
    )
    return encoder_config, miner_config, train_config


def _write_history(path, history, config: RunConfig, command: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("# " + _meta_line(config, command) + "\n")
        handle.write("step,mle_loss,cl_loss,val_f1m\n")
        for row in history:
            val = "" if row.val_f1m is None else repr(row.val_f1m)
            handle.write(f"{row.step},{row.mle_loss!r},{row.cl_loss!r},{val}\n")


def cmd_train(args) -> int:
    from kpforge.extractor import save_stage1, train_stage1

    config = _resolve(args)
    documents = _load_documents(config.corpus, args.allow_bad_records)
    val_documents = (
        _load_documents(config.val_corpus, args.allow_bad_records)
        if config.val_corpus
        else None
    )
    output = _require(config.output, "--output")
    encoder_config, miner_config, train_config = _train_configs(config)
    model, history = train_stage1(
        documents, encoder_config, miner_config, train_config, val_documents
    )
    save_stage1(output, model, config.fingerprint())
    if config.log:
        _write_history(config.log, history, config, "train")
    final = history[-1] if history else None
    if final is not None:
        print(
            f"trained {len(history)} steps; final mle={final.mle_loss:.4f} "
            f"cl={final.cl_loss:.4f}"
        )
    return 0


def _generate_lines(model, documents, beam_size, max_len):
    from kpforge.generator import render_beam
    from kpforge.reranker import overgenerate_for_document

    lines = []
    for doc in documents:
        phrases, beams = overgenerate_for_document(model, doc, beam_size, max_len)
        lines.append(
            {
                "id": doc.id,
                "candidates": [p.surface for p in phrases],
                "beams": [
                    {"text": render_beam(b, model.vocab), "logprob": b.log_prob}
                    for b in beams
                ],
            }
        )
    return lines


def cmd_generate(args) -> int:
    from kpforge.extractor import load_stage1

    config = _resolve(args)
    checkpoint_path = _require(config.checkpoint, "--checkpoint")
    documents = _load_documents(config.corpus, args.allow_bad_records)
    output = _require(config.output, "--output")
    model = load_stage1(checkpoint_path)
    lines = _generate_lines(model, documents, config.beam_size, config.max_len)
    with open(output, "w", encoding="utf-8") as handle:
        handle.write(_meta_line(config, "generate") + "\n")
        for line in lines:
            handle.write(json.dumps(line, sort_keys=True) + "\n")
    return 0


def cmd_rerank_train(args) -> int:
    from kpforge.extractor import TrainConfig, load_stage1
    from kpforge.reranker import build_rerank_corpus, save_reranker, train_stage2

    config = _resolve(args)
    checkpoint_path = _require(config.checkpoint, "--checkpoint")
    documents = _load_documents(config.corpus, args.allow_bad_records)
    output = _require(config.output, "--output")
    stage1 = load_stage1(checkpoint_path)
    examples, excluded = build_rerank_corpus(
        stage1, documents, beam_size=config.beam_size, max_len=config.max_len
    )
    print(f"rerank corpus: {len(examples)} documents kept, {excluded} excluded")
    train_config = TrainConfig(
        temperature=config.rerank_temperature,
        contrastive_weight=0.0,
        learning_rate=config.rerank_learning_rate,
        warmup_fraction=config.rerank_warmup,
        batch_size=config.batch_size,
        epochs=config.rerank_epochs,
        patience=config.max_tolerance,
        seed=config.seed,
        max_grad_norm=config.max_grad_norm,
        weight_decay=config.weight_decay,
    )
    model, history = train_stage2(
        examples, stage1.vocab, stage1.encoder_config, train_config
    )
    save_reranker(output, model, config.fingerprint())
    if config.log:
        _write_history(config.log, history, config, "rerank-train")
    return 0


def _calibrate_present(config, documents):
    from kpforge.evaluation import calibrate_threshold
    from kpforge.extractor import load_stage1, score_candidates

    model = load_stage1(_require(config.checkpoint, "--checkpoint"))
    scored_docs = []
    for doc in documents:
        tokenized = tokenize(doc)
        present, _ = partition_keyphrases(tokenized, doc.keyphrases)
        gold = {stem_phrase(p) for p in present}
        scored = score_candidates(model, doc)
        if scored and gold:
            scored_docs.append((scored, gold))
    if not scored_docs:
        raise DataError("no documents usable for present-threshold calibration")
    return calibrate_threshold(scored_docs)


def _calibrate_absent(config, documents):
    from kpforge.evaluation import calibrate_threshold
    from kpforge.extractor import load_stage1
    from kpforge.reranker import load_reranker, overgenerate_for_document, score_generated

    stage1 = load_stage1(_require(config.checkpoint, "--checkpoint"))
    reranker = load_reranker(_require(config.rerank_checkpoint, "--rerank-checkpoint"))
    scored_docs = []
    for doc in documents:
        tokenized = tokenize(doc)
        _, absent = partition_keyphrases(tokenized, doc.keyphrases)
        gold = {stem_phrase(p) for p in absent}
        if not gold:
            continue
        phrases, _ = overgenerate_for_document(
            stage1, doc, config.beam_size, config.max_len
        )
        scored = score_generated(reranker, doc, [p.surface for p in phrases])
        if scored:
            scored_docs.append((scored, gold))
    if not scored_docs:
        raise DataError("no documents usable for absent-threshold calibration")
    return calibrate_threshold(scored_docs)


def cmd_calibrate(args) -> int:
    config = _resolve(args)
    documents = _load_documents(config.corpus, args.allow_bad_records)
    stage = args.stage

    results = {}
    if stage in ("present", "both"):
        results["threshold_present"] = _calibrate_present(config, documents)
    if stage in ("absent", "both"):
        results["threshold_absent"] = _calibrate_absent(config, documents)

    for key, value in results.items():
        print(f"{key} = {value!r}")
    if args.config:
        file_values = read_config_file(args.config)
        file_values.update(results)
        updated = RunConfig(**file_values)
        write_config_file(args.config, updated)
    if config.output:
        payload = {
            "meta": json.loads(_meta_line(config, "calibrate"))["meta"],
            **results,
        }
        with open(config.output, "w", encoding="utf-8") as handle:
            json.dump(payload, handle, sort_keys=True, indent=2)
            handle.write("\n")
    return 0


def cmd_predict(args) -> int:
    from kpforge.extractor import load_stage1, predict_present
    from kpforge.reranker import (
        load_reranker,
        overgenerate_for_document,
        predict_absent,
    )

    config = _resolve(args)
    documents = _load_documents(config.corpus, args.allow_bad_records)
    output = _require(config.output, "--output")
    stage1 = load_stage1(_require(config.checkpoint, "--checkpoint"))
    threshold_present = config.threshold_present
    if threshold_present is None:
        raise UsageError(
            "threshold_present is not set; run `kpforge calibrate` or pass "
            "--threshold-present"
        )
    reranker = None
    if config.rerank_checkpoint:
        reranker = load_reranker(config.rerank_checkpoint)
        if config.threshold_absent is None:
            raise UsageError(
                "threshold_absent is not set; run `kpforge calibrate --stage absent` "
                "or pass --threshold-absent"
            )

    lines = []
    for doc in documents:
        present = predict_present(
            stage1, doc, threshold_present, config.min_predictions
        )
        absent = []
        if reranker is not None:
            phrases, _ = overgenerate_for_document(
                stage1, doc, config.beam_size, config.max_len
            )
            absent = predict_absent(
                reranker,
                doc,
                [p.surface for p in phrases],
                config.threshold_absent,
                config.min_predictions,
            )
        lines.append(
            {
                "id": doc.id,
                "present": [
                    {"surface": p.surface, "stemmed": p.stemmed, "score": p.score}
                    for p in present
                ],
                "absent": [
                    {"surface": p.surface, "stemmed": p.stemmed, "score": p.score}
                    for p in absent
                ],
            }
        )
    with open(output, "w", encoding="utf-8") as handle:
        handle.write(_meta_line(config, "predict") + "\n")
        for line in lines:
            handle.write(json.dumps(line, sort_keys=True) + "\n")
    return 0


def _read_jsonl(path):
    try:
        with open(path, encoding="utf-8") as handle:
            lines = handle.readlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    records = []
    for line in lines:
        if not line.strip():
            continue
        record = json.loads(line)
        if isinstance(record, dict) and set(record) == {"meta"}:
            continue
        records.append(record)
    return records


def cmd_eval(args) -> int:
    from kpforge.evaluation import evaluate_documents, recall_at_n

    config = _resolve(args)
    predictions_path = _require(config.predictions, "--predictions")
    gold_path = _require(config.gold, "--gold")
    predictions = {r["id"]: r for r in _read_jsonl(predictions_path)}
    documents = _load_documents(gold_path, args.allow_bad_records)

    present_triples, absent_triples = [], []
    for doc in documents:
        record = predictions.get(doc.id)
        if record is None:
            raise DataError(f"predictions file has no record for document {doc.id!r}")
        tokenized = tokenize(doc)
        present, absent = partition_keyphrases(tokenized, doc.keyphrases)
        present_triples.append(
            (doc.id, [p["surface"] for p in record.get("present", [])], present)
        )
        absent_triples.append(
            (doc.id, [p["surface"] for p in record.get("absent", [])], absent)
        )

    present_report = evaluate_documents(present_triples)
    absent_report = evaluate_documents(absent_triples)

    recall_value = None
    if config.candidates:
        from kpforge.evaluation import dedup_stems

        candidate_records = {r["id"]: r for r in _read_jsonl(config.candidates)}
        values = []
        for doc in documents:
            record = candidate_records.get(doc.id)
            if record is None:
                continue
            tokenized = tokenize(doc)
            _, absent = partition_keyphrases(tokenized, doc.keyphrases)
            gold = set(dedup_stems(absent))
            value = recall_at_n(
                dedup_stems(record.get("candidates", [])), gold, config.beam_size
            )
            if value is not None:
                values.append(value)
        if values:
            recall_value = sum(values) / len(values)
            absent_report.recall = recall_value
            absent_report.recall_n = config.beam_size

    print(f"{'':>10} {'F1@5':>8} {'F1@M':>8} {'#docs':>7}")
    print(
        f"{'present':>10} {present_report.f1_at_5:>8.4f} "
        f"{present_report.f1_at_m:>8.4f} {present_report.n_scored:>7d}"
    )
    print(
        f"{'absent':>10} {absent_report.f1_at_5:>8.4f} "
        f"{absent_report.f1_at_m:>8.4f} {absent_report.n_scored:>7d}"
    )
    if recall_value is not None:
        print(f"{'R@%d' % config.beam_size:>10} {recall_value:>8.4f}")

    if config.output:
        payload = {
            "meta": json.loads(_meta_line(config, "eval"))["meta"],
            "present": present_report.as_dict(),
            "absent": absent_report.as_dict(),
        }
        with open(config.output, "w", encoding="utf-8") as handle:
            json.dump(payload, handle, sort_keys=True, indent=2)
            handle.write("\n")
    return 0


def cmd_dump_embeddings(args) -> int:
    from kpforge import autodiff as ad
    from kpforge.encoder import cosine_rows_t, pool_spans_t
    from kpforge.extractor import load_stage1
    from kpforge.mining import mine_candidates
    from kpforge.tagging import tag_tokens

    config = _resolve(args)
    documents = _load_documents(config.corpus, args.allow_bad_records)
    output = _require(config.output, "--output")
    model = load_stage1(_require(config.checkpoint, "--checkpoint"))
    encoder = model.encoder()

    with open(output, "w", encoding="utf-8") as handle:
        handle.write("# " + _meta_line(config, "dump-embeddings") + "\n")
        for doc in documents:
            tokenized = tokenize(doc)
            tagged = tag_tokens(tokenized.tokens, doc.pre_tags)
            candidates = mine_candidates(tagged, model.miner_config)
            present, _ = partition_keyphrases(tokenized, doc.keyphrases)
            gold_stems = {stem_phrase(p) for p in present}
            with ad.no_grad():
                encoded = encoder.encode_ids_t(model.vocab.encode(tokenized.tokens))
                z_doc = encoder.project_doc_t(encoder.doc_row_t(encoded)).data[0]
                rows = [("document", "doc", z_doc)]
                if candidates:
                    pooled = pool_spans_t(
                        encoded, [(c.start, c.end) for c in candidates]
                    )
                    z_phrases = encoder.project_phrases_t(pooled).data
                    for candidate, vector in zip(candidates, z_phrases):
                        if not gold_stems:
                            kind = "candidate"
                        elif candidate.stemmed in gold_stems:
                            kind = "positive"
                        else:
                            kind = "negative"
                        rows.append((kind, candidate.stemmed, vector))
            for kind, item_id, vector in rows:
                values = "\t".join(repr(float(v)) for v in vector)
                handle.write(f"{doc.id}\t{item_id}\t{kind}\t{values}\n")
    return 0


# --------------------------------------------------------------------
# parser
# --------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="kpforge", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(func=func)
        _add_common(p)
        p.add_argument("--allow-bad-records", action="store_true")
        return p

    p = add("stats", cmd_stats, help="corpus summary statistics")
    p.add_argument("--corpus")
    p.add_argument("--output")

    p = add("mine", cmd_mine, help="mine candidate phrases")
    p.add_argument("--corpus")
    p.add_argument("--output")
    p.add_argument("--max-ngram", type=int, dest="max_ngram")
    p.add_argument("--noun-only", action="store_const", const=True, dest="noun_only")

    p = add("train", cmd_train, help="train the extractor-generator")
    p.add_argument("--corpus")
    p.add_argument("--val-corpus", dest="val_corpus")
    p.add_argument("--output")
    p.add_argument("--log")
    p.add_argument("--tau", type=float, dest="tau")
    p.add_argument("--lambda", type=float, dest="lambda_weight")
    p.add_argument("--lr", type=float, dest="lr")
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--epochs", type=int)
    p.add_argument("--embed-dim", type=int, dest="embed_dim")
    p.add_argument("--hidden-dim", type=int, dest="hidden_dim")
    p.add_argument("--max-ngram", type=int, dest="max_ngram")

    p = add("generate", cmd_generate, help="overgenerate absent candidates")
    p.add_argument("--checkpoint")
    p.add_argument("--corpus")
    p.add_argument("--output")
    p.add_argument("--beam-size", type=int, dest="beam_size")
    p.add_argument("--max-len", type=int, dest="max_len")

    p = add("rerank-train", cmd_rerank_train, help="train the reranker")
    p.add_argument("--checkpoint")
    p.add_argument("--corpus")
    p.add_argument("--output")
    p.add_argument("--log")
    p.add_argument("--beam-size", type=int, dest="beam_size")
    p.add_argument("--max-len", type=int, dest="max_len")
    p.add_argument("--lr", type=float, dest="rerank_learning_rate")
    p.add_argument("--epochs", type=int, dest="rerank_epochs")

    p = add("calibrate", cmd_calibrate, help="calibrate selection thresholds")
    p.add_argument("--corpus")
    p.add_argument("--checkpoint")
    p.add_argument("--rerank-checkpoint", dest="rerank_checkpoint")
    p.add_argument("--output")
    p.add_argument("--stage", choices=("present", "absent", "both"), default="present")
    p.add_argument("--beam-size", type=int, dest="beam_size")

    p = add("predict", cmd_predict, help="predict present and absent keyphrases")
    p.add_argument("--checkpoint")
    p.add_argument("--rerank-checkpoint", dest="rerank_checkpoint")
    p.add_argument("--corpus")
    p.add_argument("--output")
    p.add_argument("--threshold-present", type=float, dest="threshold_present")
    p.add_argument("--threshold-absent", type=float, dest="threshold_absent")
    p.add_argument("--beam-size", type=int, dest="beam_size")

    p = add("eval", cmd_eval, help="score predictions against gold")
    p.add_argument("--predictions")
    p.add_argument("--gold")
    p.add_argument("--candidates")
    p.add_argument("--output")

    p = add("dump-embeddings", cmd_dump_embeddings, help="export projection-space vectors")
    p.add_argument("--checkpoint")
    p.add_argument("--corpus")
    p.add_argument("--output")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "lambda_weight", None) is not None:
            args.contrastive_weight = args.lambda_weight
            del args.lambda_weight
        return args.func(args)
    except KpforgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
