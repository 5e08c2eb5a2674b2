"""Command-line pipeline driver.

    premisegen prepare   --dataset {art,d1,d2,d3} --in RAW --format F --out JSONL
    premisegen augment   --in JSONL --backend {live,cache,stub} --out JSONL
    premisegen train     --pairs JSONL [--knowledge JSONL] [--config JSON] --out DIR
    premisegen generate  --enthymemes JSONL --setting S (--stub|--checkpoint DIR|--model NAME) --out JSONL
    premisegen evaluate  --generations JSONL --gold JSONL --embedder {static,model} --out JSON [--compare JSONL]
    premisegen batch     --generations JSONL [--generations ...] --enthymemes JSONL --sample-size N --out JSONL
    premisegen serve     --batch JSONL --journal JSONL [--port N] [--ui-dir DIR]
    premisegen report    --journal JSONL --out JSON [--partial]

Every flag can also be set through an ENTHYMEME_* environment variable
(ENTHYMEME_OUT, ENTHYMEME_SEED, ...). Each command writes one run manifest
beside its output recording the config snapshot, input hashes, and
timestamps. Exit codes: 0 success, 2 usage, 3 data, 4 backend.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

from . import annotation, corpus, generator, knowledge, metrics, service
from .errors import DataError, PremisegenError, UsageError
from .jsonl import dump_line, iter_jsonl, read_jsonl

DEFAULT_SEED = 13


def _env_name(flag: str) -> str:
    return "ENTHYMEME_" + flag.lstrip("-").replace("-", "_").upper()


def _add(parser: argparse.ArgumentParser, flag: str, *, required: bool = False, **kwargs):
    """add_argument with an ENTHYMEME_* environment fallback."""
    env_value = os.environ.get(_env_name(flag))
    if env_value is not None:
        if kwargs.get("action") == "store_true":
            kwargs["default"] = env_value.lower() in ("1", "true", "yes")
        else:
            caster = kwargs.get("type", str)
            kwargs["default"] = caster(env_value)
        required = False
    if kwargs.get("action") == "store_true":
        parser.add_argument(flag, **kwargs)
    else:
        parser.add_argument(flag, required=required, **kwargs)


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as handle:
        for block in iter(lambda: handle.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


def _write_manifest(
    command: str,
    args: argparse.Namespace,
    inputs: list[Path],
    outputs: list[Path],
    started_at: str,
    manifest_path: Path,
) -> None:
    snapshot = {
        key: (str(value) if isinstance(value, Path) else value)
        for key, value in sorted(vars(args).items())
        if key != "func" and value is not None
    }
    manifest = {
        "command": command,
        "config": snapshot,
        "inputs": {str(p): _sha256(p) for p in inputs if p.is_file()},
        "outputs": [str(p) for p in outputs],
        "seed": getattr(args, "seed", None),
        "started_at": started_at,
        "finished_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")


def _now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


def cmd_prepare(args) -> int:
    started = _now()
    dataset = args.dataset.lower()
    in_path, out_path = Path(getattr(args, "in")), Path(args.out)
    if dataset == "art":
        result = corpus.load_art(in_path, split=args.split, format=args.format)
    elif dataset in ("d1", "d2", "d3"):
        result = corpus.LOADERS[dataset](in_path, format=args.format)
    else:
        raise UsageError(f"unknown dataset {args.dataset!r}")
    rows = [record.to_json() for record in result.records]
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text("".join(dump_line(r) + "\n" for r in rows), encoding="utf-8")
    stats = result.stats
    print(
        f"dataset={dataset} kept={stats.loaded_count} filtered={stats.filtered_out_count} "
        f"prefilter={stats.prefilter_count} reasons={json.dumps(stats.filter_reasons, sort_keys=True)}"
    )
    _write_manifest("prepare", args, [in_path], [out_path], started, Path(str(out_path) + ".manifest.json"))
    return 0


def _knowledge_backend(args) -> knowledge.KnowledgeBackend:
    kind = args.backend
    if kind == "stub":
        return knowledge.StubKnowledgeBackend()
    if kind == "cache":
        if not args.cache:
            raise UsageError("--cache is required with the cache backend")
        return knowledge.CacheKnowledgeBackend(args.cache)
    if kind == "live":
        live = knowledge.HttpKnowledgeBackend(args.url)
        if args.cache:
            return knowledge.CacheKnowledgeBackend(args.cache, record_from=live)
        return live
    raise UsageError(f"unknown knowledge backend {kind!r}")


def cmd_augment(args) -> int:
    started = _now()
    in_path, out_path = Path(getattr(args, "in")), Path(args.out)
    backend = _knowledge_backend(args)
    augmented = 0
    failed = 0
    lines = []
    for lineno, record in iter_jsonl(in_path):
        if "obs1" in record:
            discourse = [record["obs1"], record["obs2"]]
        elif "stated_premise" in record:
            discourse = [record["stated_premise"], record["stated_claim"]]
        else:
            raise DataError(f"{in_path}:{lineno}: record is neither abductive nor enthymeme")
        try:
            bundle = knowledge.infer(discourse, backend)
            record["knowledge_phrase"] = knowledge.select_intent(bundle)
            augmented += 1
        except knowledge.MissingInferenceError as exc:
            record["knowledge_error"] = str(exc)
            failed += 1
        lines.append(dump_line(record) + "\n")
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text("".join(lines), encoding="utf-8")
    print(f"augmented={augmented} failed={failed} backend={backend.backend_id}")
    _write_manifest("augment", args, [in_path], [out_path], started, Path(str(out_path) + ".manifest.json"))
    return 0


def _load_knowledge_map(path: Path) -> dict[str, str]:
    phrases = {}
    for lineno, record in iter_jsonl(path):
        phrase = record.get("knowledge_phrase")
        if phrase:
            phrases[str(record["id"])] = phrase
    return phrases


def cmd_train(args) -> int:
    started = _now()
    pairs_path, out_dir = Path(args.pairs), Path(args.out)
    pairs = corpus.read_canonical_pairs(pairs_path)
    knowledge_map = _load_knowledge_map(Path(args.knowledge)) if args.knowledge else None
    overrides = {}
    if args.config:
        overrides = json.loads(Path(args.config).read_text(encoding="utf-8"))
    config = generator.TrainingConfig(
        checkpoint_dir=out_dir,
        epochs=int(overrides.get("epochs", 3)),
        learning_rate=float(overrides.get("learning_rate", 3e-5)),
        batch_size=int(overrides.get("batch_size", 8)),
        seed=int(overrides.get("seed", args.seed)),
    )
    if args.trainer == "retrieval":
        trainer = generator.retrieval_trainer
    elif args.trainer == "bart":
        from . import hf

        trainer = hf.bart_trainer(args.model or hf.DEFAULT_MODEL)
    else:
        raise UsageError(f"unknown trainer {args.trainer!r}")
    generator.fine_tune(pairs, knowledge_map, config, trainer=trainer)
    print(f"trained={len(pairs)} checkpoint={out_dir}")
    inputs = [pairs_path] + ([Path(args.knowledge)] if args.knowledge else [])
    _write_manifest("train", args, inputs, [out_dir], started, out_dir / "run_manifest.json")
    return 0


def _generation_backend(args) -> generator.GenerationBackend:
    chosen = [bool(args.stub), bool(args.checkpoint), bool(args.model)]
    if sum(chosen) != 1:
        raise UsageError("choose exactly one of --stub, --checkpoint, --model")
    if args.stub:
        return generator.StubBackend(phrase=args.stub_phrase)
    if args.checkpoint:
        return generator.load_checkpoint(args.checkpoint)
    from . import hf

    return hf.BartBackend(args.model)


def cmd_generate(args) -> int:
    started = _now()
    enthymemes_path, out_path = Path(args.enthymemes), Path(args.out)
    enthymemes = corpus.read_canonical_enthymemes(enthymemes_path)
    backend = _generation_backend(args)
    config = generator.GenerationConfig(
        setting=args.setting,
        beam_width=args.beam_width,
        max_output_tokens=args.max_output_tokens,
        mask_literal=args.mask,
        seed=args.seed,
    )
    knowledge_backend = None
    knowledge_phrases = None
    if args.setting == "fine_tuned_knowledge":
        stored = _load_knowledge_map(enthymemes_path)
        if args.knowledge_backend:
            knowledge_backend = _knowledge_backend(
                argparse.Namespace(backend=args.knowledge_backend, cache=args.cache, url=args.url)
            )
        elif len(stored) == len(enthymemes):
            knowledge_phrases = stored
        else:
            raise UsageError(
                "setting fine_tuned_knowledge needs --knowledge-backend or an augmented input file"
            )
    generations = generator.generate_for_corpus(
        enthymemes, backend, config, knowledge_backend, knowledge_phrases
    )
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(
        "".join(dump_line(g.to_json()) + "\n" for g in generations), encoding="utf-8"
    )
    errors = sum(1 for g in generations if g.error is not None)
    print(f"generated={len(generations) - errors} failed={errors} setting={args.setting}")
    _write_manifest(
        "generate", args, [enthymemes_path], [out_path], started, Path(str(out_path) + ".manifest.json")
    )
    return 0


def cmd_evaluate(args) -> int:
    started = _now()
    generations_path, gold_path, out_path = Path(args.generations), Path(args.gold), Path(args.out)
    generations = [generator.GeneratedPremise.from_json(o) for o in read_jsonl(generations_path)]
    enthymemes = corpus.read_canonical_enthymemes(gold_path)
    if args.embedder == "static":
        embedder = metrics.StaticHashEmbedder()
    else:
        from . import hf

        embedder = hf.ContextualEmbedder()
    compare = None
    inputs = [generations_path, gold_path]
    if args.compare:
        compare = [generator.GeneratedPremise.from_json(o) for o in read_jsonl(Path(args.compare))]
        inputs.append(Path(args.compare))
    report = metrics.evaluate_corpus(generations, enthymemes, embedder, compare_generations=compare)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(json.dumps(report.to_json(), indent=2, sort_keys=True), encoding="utf-8")
    table = metrics.render_report_table([report])
    out_path.with_suffix(".txt").write_text(table, encoding="utf-8")
    print(table, end="")
    _write_manifest("evaluate", args, inputs, [out_path], started, Path(str(out_path) + ".manifest.json"))
    return 0


def cmd_batch(args) -> int:
    started = _now()
    enthymemes_path, out_path = Path(args.enthymemes), Path(args.out)
    enthymemes = corpus.read_canonical_enthymemes(enthymemes_path)
    generations = []
    for path in args.generations:
        generations.extend(generator.GeneratedPremise.from_json(o) for o in read_jsonl(Path(path)))
    items = annotation.create_batch(
        generations, enthymemes, sample_size=args.sample_size, seed=args.seed,
        required_judges=args.required_judges,
    )
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text("".join(dump_line(i.to_json()) + "\n" for i in items), encoding="utf-8")
    print(f"batch_items={len(items)}")
    inputs = [Path(p) for p in args.generations] + [enthymemes_path]
    _write_manifest("batch", args, inputs, [out_path], started, Path(str(out_path) + ".manifest.json"))
    return 0


def cmd_serve(args) -> int:
    started = _now()
    batch_path, journal_path = Path(args.batch), Path(args.journal)
    items = [annotation.AnnotationItem.from_json(o) for o in read_jsonl(batch_path)]
    store = annotation.AnnotationStore(journal_path, items=items)
    ui_dir = Path(args.ui_dir) if args.ui_dir else None
    if ui_dir is None and Path("frontend/dist/index.html").exists():
        ui_dir = Path("frontend/dist")
    server = service.AnnotationServer(store, port=args.port, ui_dir=ui_dir)
    _write_manifest(
        "serve", args, [batch_path], [journal_path], started, Path(str(journal_path) + ".manifest.json")
    )
    print(
        f"serving {len(items)} items on http://127.0.0.1:{server.port} (journal: {journal_path})",
        flush=True,
    )
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


def cmd_report(args) -> int:
    started = _now()
    journal_path, out_path = Path(args.journal), Path(args.out)
    store = annotation.AnnotationStore(journal_path)
    report = store.aggregate(allow_partial=args.partial)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(json.dumps(report.to_json(), indent=2, sort_keys=True), encoding="utf-8")
    table = annotation.render_aggregate_table(report)
    out_path.with_suffix(".txt").write_text(table, encoding="utf-8")
    print(table, end="")
    _write_manifest("report", args, [journal_path], [out_path], started, Path(str(out_path) + ".manifest.json"))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="premisegen", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="normalize a raw corpus release to canonical JSONL")
    _add(p, "--dataset", required=True, choices=["art", "d1", "d2", "d3"])
    _add(p, "--in", required=True)
    _add(p, "--format", default="canonical")
    _add(p, "--out", required=True)
    _add(p, "--split", default=None, choices=list(corpus.SPLITS))
    _add(p, "--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("augment", help="attach knowledge phrases to canonical records")
    _add(p, "--in", required=True)
    _add(p, "--backend", required=True, choices=["live", "cache", "stub"])
    _add(p, "--cache", default=None)
    _add(p, "--url", default=None)
    _add(p, "--out", required=True)
    _add(p, "--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("train", help="fine-tune a generation backend on abductive pairs")
    _add(p, "--pairs", required=True)
    _add(p, "--knowledge", default=None)
    _add(p, "--config", default=None)
    _add(p, "--out", required=True)
    _add(p, "--trainer", default="retrieval", choices=["retrieval", "bart"])
    _add(p, "--model", default=None)
    _add(p, "--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="generate implicit premises for enthymemes")
    _add(p, "--enthymemes", required=True)
    _add(p, "--setting", required=True, choices=list(generator.SETTINGS))
    _add(p, "--stub", action="store_true")
    _add(p, "--stub-phrase", default="stub")
    _add(p, "--checkpoint", default=None)
    _add(p, "--model", default=None)
    _add(p, "--knowledge-backend", default=None, choices=["live", "cache", "stub"])
    _add(p, "--cache", default=None)
    _add(p, "--url", default=None)
    _add(p, "--out", required=True)
    _add(p, "--beam-width", type=int, default=5)
    _add(p, "--max-output-tokens", type=int, default=128)
    _add(p, "--mask", default="[MASK]")
    _add(p, "--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="score generations against gold premises")
    _add(p, "--generations", required=True)
    _add(p, "--gold", required=True)
    _add(p, "--embedder", default="static", choices=["static", "model"])
    _add(p, "--out", required=True)
    _add(p, "--compare", default=None)
    _add(p, "--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("batch", help="sample generations into an annotation batch")
    p.add_argument("--generations", action="append", required=True)
    _add(p, "--enthymemes", required=True)
    _add(p, "--sample-size", type=int, required=True)
    _add(p, "--required-judges", type=int, default=3)
    _add(p, "--out", required=True)
    _add(p, "--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("serve", help="run the annotation service")
    _add(p, "--batch", required=True)
    _add(p, "--journal", required=True)
    _add(p, "--port", type=int, default=None)
    _add(p, "--ui-dir", default=None)
    _add(p, "--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("report", help="aggregate a judgment journal")
    _add(p, "--journal", required=True)
    _add(p, "--out", required=True)
    _add(p, "--partial", action="store_true")
    _add(p, "--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PremisegenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
