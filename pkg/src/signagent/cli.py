"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from .basetools.handedness import HandednessConfig
from .basetools.segmentation import SegmenterConfig
from .datamodel import (
    DatasetManifest,
    SampleRecord,
    load_embedding_file,
    load_features,
    load_manifest,
    read_annotation_record,
    write_annotation_record,
)
from .enhanced.clustering import DEFAULT_TAU
from .enhanced.evidence import collect_gloss_evidence, ranker_rows
from .enhanced.phonoanalysis import DEFAULT_TAU_OVERLAP
from .enhanced.ranker import GBDTRanker, RankerConfig, train_ranker
from .errors import ConfigError, DataError, SignAgentError, UnknownPolicy
from .knowledge import glosses_by_phonology, query_linguistic_graph
from .metrics import evaluate_clusters, evaluate_pseudogloss_corpus, format_cluster_table, format_sequence_table
from .orchestrator import http_backend, scripted_backend
from .resources import Lexicon
from .workflows import (
    DEFAULT_WEIGHTS,
    GlossSample,
    IDGlossConfig,
    PseudoGlossConfig,
    run_idgloss_task,
    run_pseudogloss_task,
)

log = logging.getLogger("signagent")

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3

RESOURCE_FILES = {
    "dictionary": "dictionary.json",
    "prototypes": "prototypes.json",
    "lemmas": "lemmas.tsv",
    "stopwords": "stopwords.txt",
    "linguistic_graph": "linguistic_graph.json",
}


class UsageError(ConfigError):
    """Bad flag value; reported with exit code 2."""


# --- argument helpers ------------------------------------------------------------


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _nonneg_float(text: str) -> float:
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return v


def _unit_float(text: str) -> float:
    v = float(text)
    if not 0 <= v <= 1:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {text}")
    return v


def _weights(text: str) -> tuple[float, ...]:
    parts = [float(x) for x in text.split(",")]
    if len(parts) != 5 or any(w < 0 for w in parts):
        raise argparse.ArgumentTypeError("need five comma-separated non-negative weights")
    return tuple(parts)


def _add_resource_flags(p: argparse.ArgumentParser, need_bank: bool = True) -> None:
    g = p.add_argument_group("resources")
    g.add_argument("--resources", type=Path, help="directory holding the standard resource file names")
    g.add_argument("--dictionary", type=Path, help="dictionary JSON (default: manifest dictionary_ref)")
    if need_bank:
        g.add_argument("--prototypes", type=Path, help="classifier prototype bank JSON")
    g.add_argument("--lemmas", type=Path, help="word<TAB>lemma table")
    g.add_argument("--stopwords", type=Path, help="stopword list, one per line")
    g.add_argument("--linguistic-graph", type=Path, help="linguistic knowledge graph JSON")


def _add_backend_flags(p: argparse.ArgumentParser, default_cap: int) -> None:
    g = p.add_argument_group("decision backend")
    g.add_argument("--backend", choices=("scripted", "http"), default="scripted")
    g.add_argument("--policy", help="scripted policy name (default: the task's policy)")
    g.add_argument("--endpoint", help="chat-completions base URL (or SIGNAGENT_LLM_ENDPOINT)")
    g.add_argument("--model", default="gpt-4o")
    g.add_argument("--max-calls", type=_positive_int, default=default_cap, help=f"tool-call cap N (default {default_cap})")
    g.add_argument("--retries", type=int, default=2, help="consecutive malformed steps tolerated (default 2)")
    g.add_argument("--workers", type=_positive_int, default=1, help="parallel episodes (default 1)")
    g.add_argument("--seed", type=int, default=0, help="recorded in outputs; scripted runs are deterministic")


def _resolve_resources(args, manifest: DatasetManifest | None = None, need_bank: bool = True) -> Lexicon:
    paths: dict[str, Path | None] = {}
    for key in RESOURCE_FILES:
        if key == "prototypes" and not need_bank:
            continue
        given = getattr(args, key, None)
        flag = "--" + key.replace("_", "-")
        if given is not None:
            if not Path(given).exists():
                raise UsageError(f"{flag}: no such file: {given}")
            paths[key] = Path(given)
        elif args.resources is not None and (args.resources / RESOURCE_FILES[key]).exists():
            paths[key] = args.resources / RESOURCE_FILES[key]
        else:
            paths[key] = None
    if paths["dictionary"] is None and manifest is not None and manifest.dictionary_ref:
        ref = manifest.resolve(manifest.dictionary_ref)
        if ref.exists():
            paths["dictionary"] = ref
    if paths["dictionary"] is None:
        raise UsageError("--dictionary is required (or --resources / a manifest dictionary_ref)")
    if need_bank and paths.get("prototypes") is None:
        raise UsageError("--prototypes is required for the phonological classifiers")
    return Lexicon.load(
        paths["dictionary"],
        paths.get("prototypes"),
        paths["lemmas"],
        paths["stopwords"],
        paths["linguistic_graph"],
    )


def _manifest(path: Path | None, flag: str = "--manifest") -> DatasetManifest:
    if path is None:
        raise UsageError(f"{flag} is required")
    if not path.exists():
        raise UsageError(f"{flag}: no such file: {path}")
    return load_manifest(path)


def _backend_factory(args, default_policy: str, params: dict[str, Any]) -> Callable[[], Any]:
    if args.retries < 0:
        raise UsageError("--retries must be >= 0")
    if args.backend == "http":
        backend = http_backend(args.endpoint, args.model, parallelism=args.workers)
        return lambda: backend
    name = args.policy or default_policy
    try:
        scripted_backend(name, **params)  # fail fast on unknown policies
    except UnknownPolicy as exc:
        raise UsageError(f"--policy: {exc}") from None
    return lambda: scripted_backend(name, **params)


def _run_parallel(fn: Callable[[Any], Any], items: Sequence[Any], workers: int) -> list[Any]:
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _write_json(path: Path, doc: Any) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")


# --- commands --------------------------------------------------------------------


def cmd_ingest(args) -> int:
    manifest = _manifest(args.manifest)
    frames = []
    for rec in manifest.samples:
        frames.append(load_features(manifest, rec).frame_count)
    report: dict[str, Any] = {
        "samples": len(manifest),
        "with_sentence": sum(1 for s in manifest.samples if s.sentence),
        "with_gloss_label": sum(1 for s in manifest.samples if s.gloss_label),
        "frames": int(sum(frames)),
        "dictionary_ref": manifest.dictionary_ref,
        "metadata": manifest.metadata,
    }
    if args.dictionary is not None or args.resources is not None or manifest.dictionary_ref:
        lex = _resolve_resources(args, manifest, need_bank=False)
        report["dictionary_entries"] = len(lex.entries)
        unknown = sorted({s.gloss_label for s in manifest.samples if s.gloss_label and s.gloss_label not in lex.by_id})
        report["unknown_gloss_labels"] = unknown
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    if args.out:
        args.out.write_text(text + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_synth(args) -> int:
    from .synth import SynthConfig, build_fixture, write_fixture

    try:
        cfg = SynthConfig(
            seed=args.seed,
            n_glosses=args.glosses,
            dim=args.dim,
            sigma=args.sigma,
            n_sentences=args.sentences,
            min_tokens=args.min_tokens,
            max_tokens=args.max_tokens,
            n_idgloss=args.idgloss_glosses,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    paths = write_fixture(build_fixture(cfg), args.out)
    print(f"fixture written to {args.out}: {cfg.n_sentences} sentences, {cfg.n_idgloss} ID-gloss groups, sigma={cfg.sigma}")
    for name, rel in paths.items():
        log.info("%s: %s", name, rel)
    return EXIT_OK


def cmd_pseudogloss(args) -> int:
    manifest = _manifest(args.manifest)
    lexicon = _resolve_resources(args, manifest)
    ranker = None
    if args.ranker is not None:
        if not args.ranker.exists():
            raise UsageError(f"--ranker: no such file: {args.ranker}")
        ranker = GBDTRanker.load(args.ranker)
    try:
        segmenter = SegmenterConfig(args.window, args.enter_factor, args.exit_factor, args.min_len)
        cfg = PseudoGlossConfig(
            cap=args.max_calls,
            retries=args.retries,
            k_visual=args.k_visual,
            k_phono=args.k_phono,
            M=args.M,
            weights=args.weights,
            allow_multiple_per_segment=args.allow_multiple,
            ranker=ranker,
            segmenter=segmenter,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    params = {"k": args.k_visual, "weights": list(args.weights), "allow_multiple": args.allow_multiple, "phono_k": args.k_phono}
    make_backend = _backend_factory(args, "pseudogloss-greedy", params)
    samples = [s for s in manifest.samples if s.sentence]
    if not samples:
        raise DataError("manifest has no samples with a sentence")
    out = args.out / "records"
    out.mkdir(parents=True, exist_ok=True)

    def one(rec: SampleRecord):
        try:
            return run_pseudogloss_task(rec, load_features(manifest, rec), lexicon, make_backend(), cfg).to_dict()
        except SignAgentError as exc:
            log.error("%s: %s", rec.sample_id, exc)
            return exc

    results = _run_parallel(one, samples, args.workers)
    tally: Counter = Counter()
    failed = []
    for rec, doc in zip(samples, results):
        if isinstance(doc, Exception):
            failed.append({"sample_id": rec.sample_id, "error": f"{type(doc).__name__}: {doc}"})
            tally["failed"] += 1
            continue
        write_annotation_record(doc, out / f"{rec.sample_id}.json")
        tally[doc["validation"]["status"]] += 1
    summary = {"task": "pseudogloss", "seed": args.seed, "samples": len(samples), "status": dict(sorted(tally.items())),
               "failed": failed}
    _write_json(args.out / "summary.json", summary)
    print(f"pseudogloss: {len(samples)} samples, valid={tally['valid']} invalid={tally['invalid']} "
          f"rejected={tally['rejected']} failed={tally['failed']}")
    return EXIT_OK


def cmd_idgloss(args) -> int:
    manifest = _manifest(args.manifest)
    lexicon = _resolve_resources(args, manifest)
    try:
        cfg = IDGlossConfig(
            cap=args.max_calls,
            retries=args.retries,
            tau=args.tau,
            tau_overlap=args.tau_overlap,
            min_agreeing_singleton=args.min_agreeing_singleton,
            min_agreeing_multi=args.min_agreeing_multi,
            merge_distance_factor=args.merge_distance_factor,
            top_k=args.top_k,
            handedness=HandednessConfig(args.present_fraction, args.mixed_fraction),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    make_backend = _backend_factory(args, "idgloss-gates", cfg.policy_params())
    groups: dict[str, list[SampleRecord]] = {}
    for s in manifest.samples:
        if s.gloss_label:
            groups.setdefault(s.gloss_label, []).append(s)
    if not groups:
        raise DataError("manifest has no samples with a gloss_label")
    out = args.out / "records"
    out.mkdir(parents=True, exist_ok=True)

    def one(item):
        gloss, recs = item
        try:
            samples = []
            for r in recs:
                seg = r.segments[0] if r.segments else None
                samples.append(GlossSample(r.sample_id, load_features(manifest, r), seg))
            return run_idgloss_task(gloss, samples, lexicon, make_backend(), cfg).to_dict()
        except SignAgentError as exc:
            log.error("%s: %s", gloss, exc)
            return exc

    items = sorted(groups.items())
    results = _run_parallel(one, items, args.workers)
    tally: Counter = Counter()
    ids, failed = [], []
    for (gloss, _), doc in zip(items, results):
        if isinstance(doc, Exception):
            failed.append({"gloss_id": gloss, "error": f"{type(doc).__name__}: {doc}"})
            tally["failed"] += 1
            continue
        write_annotation_record(doc, out / f"{gloss}.json")
        tally[doc["validation"]["status"]] += 1
        if doc["validation"]["status"] == "valid":
            ids.append(len(doc["clusters"]))
    mean_ids = float(np.mean(ids)) if ids else None
    summary = {"task": "idgloss", "seed": args.seed, "glosses": len(items), "status": dict(sorted(tally.items())),
               "mean_ids_per_gloss": mean_ids, "failed": failed}
    _write_json(args.out / "summary.json", summary)
    shown = "n/a" if mean_ids is None else f"{mean_ids:.2f}"
    print(f"idgloss: {len(items)} glosses, IDs/gloss={shown}, valid={tally['valid']} "
          f"uncorrectable={tally['uncorrectable']} rejected={tally['rejected']} failed={tally['failed']}")
    return EXIT_OK


def _read_records(directory: Path, flag: str) -> list[dict[str, Any]]:
    if not directory.exists():
        raise UsageError(f"{flag}: no such directory: {directory}")
    files = sorted(directory.glob("*.json")) if directory.is_dir() else [directory]
    docs = [read_annotation_record(f) for f in files]
    if not docs:
        raise DataError(f"{flag}: no records in {directory}")
    return docs


def _sequence_references(path: Path) -> dict[str, dict[str, Any]]:
    if not path.exists():
        raise UsageError(f"--references: no such file or directory: {path}")
    if path.is_dir():
        # a records directory serves as its own reference
        return {d["sample_id"]: {"tokens": d["sequence"], "subset": d.get("subset")}
                for d in _read_records(path, "--references")}
    doc = json.loads(path.read_text(encoding="utf-8"))
    return {k: {"tokens": v["tokens"], "subset": v.get("subset")} for k, v in doc.items()}


def _eval_embeddings(args, keys: set[str]) -> dict[str, np.ndarray]:
    if args.embeddings is not None:
        if not args.embeddings.exists():
            raise UsageError(f"--embeddings: no such file: {args.embeddings}")
        index = json.loads(args.embeddings.read_text(encoding="utf-8"))
        out = {}
        for entry in index.values():
            vectors = load_embedding_file(args.embeddings.parent / entry["file"])
            if len(vectors) != len(entry["keys"]):
                raise DataError(f"{entry['file']}: {len(vectors)} vectors for {len(entry['keys'])} keys")
            out.update({k: v.astype(np.float64) for k, v in zip(entry["keys"], vectors)})
        return out
    if args.manifest is not None:
        manifest = _manifest(args.manifest)
        out = {}
        for rec in manifest.samples:
            if rec.sample_id in keys:
                f = load_features(manifest, rec)
                if f.frame_embeddings is None:
                    raise DataError(f"{rec.sample_id}: no frame embeddings")
                out[rec.sample_id] = f.frame_embeddings.mean(axis=0)
        return out
    raise UsageError("cluster evaluation needs --embeddings or --manifest")


def cmd_eval(args) -> int:
    methods: dict[str, list[dict[str, Any]]] = {}
    for d in args.records:
        name = d.parent.name if d.name == "records" and d.parent.name else d.name
        methods[name or str(d)] = _read_records(d, "--records")
    tasks = {doc["task"] for docs in methods.values() for doc in docs}
    if len(tasks) != 1:
        raise DataError(f"records mix tasks: {sorted(tasks)}")
    task = tasks.pop()
    if task == "pseudogloss":
        if args.references is None:
            raise UsageError("--references is required for pseudo-gloss evaluation")
        refs = _sequence_references(args.references)
        reports = {}
        for name, docs in methods.items():
            reports[name] = evaluate_pseudogloss_corpus({d["sample_id"]: d for d in docs}, refs)
        table = format_sequence_table(reports)
        report = {"task": task, "methods": {k: v.to_dict() for k, v in reports.items()}}
    else:
        keys = {k for docs in methods.values() for d in docs for k in d["sample_keys"]}
        emb = _eval_embeddings(args, keys)
        results = {}
        first = next(iter(methods.values()))
        baseline = {d["gloss_id"]: {c["cluster_id"]: c["members"] for c in d["baseline"]["clusters"]} for d in first}
        results["visual baseline"] = evaluate_clusters(baseline, emb)
        for name, docs in methods.items():
            valid = [d for d in docs if d["validation"]["status"] == "valid"]
            if len(valid) < len(docs):
                log.warning("%s: %d non-valid records left out", name, len(docs) - len(valid))
            results[name] = evaluate_clusters({d["gloss_id"]: {c["cluster_id"]: c["members"] for c in d["clusters"]}
                                               for d in valid}, emb)
        table = format_cluster_table(results)
        report = {"task": task, "methods": {k: v.to_dict() for k, v in results.items()}}
    print(table, end="")
    if args.out:
        _write_json(args.out, report)
        args.out.with_suffix(".txt").write_text(table, encoding="utf-8")
    return EXIT_OK


def cmd_train_ranker(args) -> int:
    manifest = _manifest(args.manifest)
    lexicon = _resolve_resources(args, manifest)
    if not args.references.exists():
        raise UsageError(f"--references: no such file: {args.references}")
    refs = json.loads(args.references.read_text(encoding="utf-8"))
    try:
        rcfg = RankerConfig(args.n_trees, args.max_depth, args.learning_rate, args.min_samples_leaf, args.subsample, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rows = []
    for rec in manifest.samples:
        truth = refs.get(rec.sample_id, {}).get("glosses")
        if not truth or not rec.segments:
            continue
        if len(truth) != len(rec.segments):
            raise DataError(f"{rec.sample_id}: {len(truth)} reference glosses for {len(rec.segments)} segments")
        evidence = collect_gloss_evidence(load_features(manifest, rec), lexicon, rec.segments, k_visual=args.k_visual,
                                          k_phono=args.k_phono, M=args.M, bypass_ranker=True)
        rows.extend(ranker_rows(evidence, truth))
    model = train_ranker(rows, rcfg)
    model.save(args.out)
    X = np.array([r[0] for r in rows])
    y = np.array([r[1] for r in rows])
    pred = model.predict(X)
    pos = y == 1
    auc = None
    if pos.any() and (~pos).any():
        auc = float(np.mean(pred[pos][:, None] > pred[~pos][None, :]) + 0.5 * np.mean(pred[pos][:, None] == pred[~pos][None, :]))
    shown = "n/a" if auc is None else f"{auc:.4f}"
    print(f"ranker: {len(rows)} rows, {len(model.trees)} trees, train AUC={shown} -> {args.out}")
    return EXIT_OK


def cmd_graph_query(args) -> int:
    if args.phonology:
        lex = _resolve_resources(args, need_bank=False)
        constraints: dict[str, list[str]] = {}
        for item in args.phonology:
            if "=" not in item:
                raise UsageError(f"--phonology expects kind=label, got {item!r}")
            kind, label = item.split("=", 1)
            constraints.setdefault(kind, []).append(label)
        doc: Any = [{"gloss_id": g, "matches": n} for g, n in glosses_by_phonology(lex.graph, constraints)]
    else:
        if not args.terms:
            raise UsageError("give query terms or --phonology constraints")
        if args.radius < 0:
            raise UsageError("--radius must be >= 0")
        graph_path = args.linguistic_graph
        if graph_path is None and args.resources is not None:
            graph_path = args.resources / RESOURCE_FILES["linguistic_graph"]
        if graph_path is not None and args.lexical is False:
            if not Path(graph_path).exists():
                raise UsageError(f"--linguistic-graph: no such file: {graph_path}")
            from .knowledge import load_graph

            graph = load_graph(graph_path)
        else:
            graph = _resolve_resources(args, need_bank=False).graph
        doc = query_linguistic_graph(graph, args.terms, args.radius).to_dict()
    print(json.dumps(doc, indent=2, sort_keys=True))
    return EXIT_OK


# --- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="signagent", description="Agentic sign-language annotation tools.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="validate a manifest and its feature files")
    s.add_argument("--manifest", type=Path, required=True)
    _add_resource_flags(s, need_bank=False)
    s.add_argument("--out", type=Path)
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("synth-fixtures", help="write a seeded synthetic corpus with ground truth")
    s.add_argument("--out", type=Path, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--sigma", type=_nonneg_float, default=0.0, help="segment embedding noise (default 0)")
    s.add_argument("--glosses", type=_positive_int, default=50)
    s.add_argument("--dim", type=_positive_int, default=64)
    s.add_argument("--sentences", type=_positive_int, default=30)
    s.add_argument("--min-tokens", type=_positive_int, default=3)
    s.add_argument("--max-tokens", type=_positive_int, default=6)
    s.add_argument("--idgloss-glosses", type=int, default=6)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("pseudogloss", help="order sentence tokens into a pseudo-gloss sequence per sample")
    s.add_argument("--manifest", type=Path)
    s.add_argument("--out", type=Path, required=True)
    _add_resource_flags(s)
    _add_backend_flags(s, PseudoGlossConfig.cap)
    s.add_argument("--ranker", type=Path, help="trained ranker JSON (default: visual/phonology average)")
    s.add_argument("--k-visual", type=_positive_int, default=10)
    s.add_argument("--k-phono", type=_positive_int, default=3)
    s.add_argument("--M", type=_positive_int, default=10, help="candidates kept per segment")
    s.add_argument("--weights", type=_weights, default=DEFAULT_WEIGHTS,
                   help="visual,phono,activity,temporal,semantic cue weights (default %(default)s)")
    s.add_argument("--allow-multiple", action="store_true", help="allow several tokens per segment")
    s.add_argument("--window", type=_positive_int, default=5, help="segmenter smoothing window")
    s.add_argument("--enter-factor", type=_nonneg_float, default=1.5)
    s.add_argument("--exit-factor", type=_nonneg_float, default=0.75)
    s.add_argument("--min-len", type=_positive_int, default=6)
    s.set_defaults(func=cmd_pseudogloss)

    s = sub.add_parser("idgloss", help="split each gloss's samples into lexical-variant ID glosses")
    s.add_argument("--manifest", type=Path)
    s.add_argument("--out", type=Path, required=True)
    _add_resource_flags(s)
    _add_backend_flags(s, IDGlossConfig.cap)
    s.add_argument("--tau", type=float, default=DEFAULT_TAU, help="cosine clustering threshold (default %(default)s)")
    s.add_argument("--tau-overlap", type=_unit_float, default=DEFAULT_TAU_OVERLAP,
                   help="Jaccard threshold per feature type (default %(default)s)")
    s.add_argument("--min-agreeing-singleton", type=int, default=3)
    s.add_argument("--min-agreeing-multi", type=int, default=4)
    s.add_argument("--merge-distance-factor", type=float, default=2.0,
                   help="merge needs centroid distance below factor * tau (default %(default)s)")
    s.add_argument("--top-k", type=_positive_int, default=1, help="predicted labels per component in overlap sets")
    s.add_argument("--present-fraction", type=_unit_float, default=0.5)
    s.add_argument("--mixed-fraction", type=_unit_float, default=0.2)
    s.set_defaults(func=cmd_idgloss)

    s = sub.add_parser("eval", help="score records against references (sequences) or embeddings (clusters)")
    s.add_argument("--records", type=Path, nargs="+", required=True, help="one records directory per method")
    s.add_argument("--references", type=Path, help="references JSON or a records directory")
    s.add_argument("--embeddings", type=Path, help="evaluation embedding index JSON")
    s.add_argument("--manifest", type=Path, help="fallback: mean frame embeddings from this manifest")
    s.add_argument("--out", type=Path, help="JSON report path; a .txt table is written alongside")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("train-ranker", help="fit the boosted-tree candidate ranker on reference alignments")
    s.add_argument("--manifest", type=Path)
    s.add_argument("--references", type=Path, required=True, help="JSON with per-sample segment glosses")
    s.add_argument("--out", type=Path, required=True)
    _add_resource_flags(s)
    s.add_argument("--n-trees", type=int, default=50)
    s.add_argument("--max-depth", type=int, default=3)
    s.add_argument("--learning-rate", type=float, default=0.1)
    s.add_argument("--min-samples-leaf", type=int, default=1)
    s.add_argument("--subsample", type=float, default=1.0)
    s.add_argument("--k-visual", type=_positive_int, default=10)
    s.add_argument("--k-phono", type=_positive_int, default=3)
    s.add_argument("--M", type=_positive_int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_train_ranker)

    s = sub.add_parser("graph-query", help="retrieve from the linguistic or lexical graph")
    s.add_argument("terms", nargs="*")
    s.add_argument("--radius", type=int, default=1)
    s.add_argument("--lexical", action="store_true", help="query the dictionary graph instead")
    s.add_argument("--phonology", action="append", metavar="KIND=LABEL", help="glosses matching component labels")
    _add_resource_flags(s, need_bank=False)
    s.set_defaults(func=cmd_graph_query)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with status 2
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, SignAgentError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"data error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
